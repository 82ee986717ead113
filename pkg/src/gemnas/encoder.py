"""Kernel-guided graph encoder and its decoder.

The encoder maps a DAG's flattened upper triangle (optionally followed by
per-node op one-hots) to a ``d``-dimensional graph vector. Training pulls the
cosine similarity of two embeddings toward the WL similarity of the graphs,
while a sigmoid decoder reconstructs the adjacency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._parallel import parallel_map
from .graph import DEFAULT_PALETTE, Dag, GraphError, OpKind, _draw_dag, flatten_upper_triangle, parse_palette
from .nn import Mlp, TrainConfig, TrainingDivergedError, load_mlp, make_optimizer, save_mlp
from .wl_kernel import WlConfig, wl_similarity

ZERO_NORM = 1e-12
TRAIN_NORM_FLOOR = 1e-6


class ZeroVectorError(ValueError):
    pass


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < ZERO_NORM or nb < ZERO_NORM:
        raise ZeroVectorError("cosine similarity of a (near-)zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def structure_features(dags: Sequence[Dag]) -> np.ndarray:
    """Stacked flattened upper triangles."""
    return np.array([flatten_upper_triangle(g) for g in dags]).reshape(len(dags), -1)


def op_one_hots(dags: Sequence[Dag], palette: Sequence[OpKind]) -> np.ndarray:
    index = {op: k for k, op in enumerate(palette)}
    out = np.zeros((len(dags), dags[0].n * len(palette)) if dags else (0, 0))
    for r, g in enumerate(dags):
        for v, op in enumerate(g.ops):
            if op not in index:
                raise GraphError(f"op {op} is not in the encoder palette")
            out[r, v * len(palette) + index[op]] = 1.0
    return out


@dataclass
class EncoderBundle:
    encoder: Mlp
    decoder: Mlp
    n: int
    d: int
    wl_cfg: WlConfig
    include_ops: bool = False
    palette: tuple[OpKind, ...] = DEFAULT_PALETTE
    meta: dict = field(default_factory=dict)
    unit_norm: bool = True

    def __post_init__(self):
        m = self.n * (self.n - 1) // 2
        expected_in = m + (self.n * len(self.palette) if self.include_ops else 0)
        if self.encoder.input_dim != expected_in or self.encoder.output_dim != self.d:
            raise ValueError("encoder dimensions do not match (n, d, include_ops)")
        if self.decoder.input_dim != self.d or self.decoder.output_dim != m:
            raise ValueError("decoder dimensions do not match (n, d)")

    def _check(self, dags: Sequence[Dag]) -> None:
        for g in dags:
            if g.n != self.n:
                raise GraphError(f"bundle is built for n={self.n}, got a {g.n}-node graph")

    def featurize(self, dags: Sequence[Dag]) -> np.ndarray:
        self._check(dags)
        x = structure_features(dags)
        if self.include_ops:
            x = np.hstack([x, op_one_hots(dags, self.palette)])
        return x

    def raw_embed_many(self, dags: Sequence[Dag]) -> np.ndarray:
        return self.encoder.forward(self.featurize(dags))

    def embed_many(self, dags: Sequence[Dag]) -> np.ndarray:
        """Graph vectors; unit length when ``unit_norm`` is set.

        The similarity objective only constrains directions, so by default the
        norm is divided out before vectors reach the predictor.
        """
        z = self.raw_embed_many(dags)
        if self.unit_norm:
            z = z / np.sqrt(np.sum(z * z, axis=1, keepdims=True) + TRAIN_NORM_FLOOR**2)
        return z

    def reconstruct(self, dags: Sequence[Dag]) -> np.ndarray:
        return self.decoder.forward(self.raw_embed_many(dags))


@dataclass(frozen=True)
class AdjacencyEmbedder:
    """No-embedding baseline: the flattened upper triangle (plus op one-hots) as the vector."""

    n: int
    include_ops: bool = False
    palette: tuple[OpKind, ...] = DEFAULT_PALETTE

    @property
    def d(self) -> int:
        m = self.n * (self.n - 1) // 2
        return m + (self.n * len(self.palette) if self.include_ops else 0)

    def embed_many(self, dags: Sequence[Dag]) -> np.ndarray:
        for g in dags:
            if g.n != self.n:
                raise GraphError(f"embedder is built for n={self.n}, got a {g.n}-node graph")
        x = structure_features(dags)
        if self.include_ops:
            x = np.hstack([x, op_one_hots(dags, self.palette)])
        return x


def embed(dag: Dag, bundle: EncoderBundle) -> np.ndarray:
    return bundle.embed_many([dag])[0]


def similarity_loss(ga: Dag, gb: Dag, bundle: EncoderBundle) -> float:
    za, zb = bundle.embed_many([ga, gb])
    s_e = cosine_similarity(za, zb)
    s_g = wl_similarity(ga, gb, bundle.wl_cfg)
    return (s_e - s_g) ** 2


def reconstruction_loss(dag: Dag, bundle: EncoderBundle) -> float:
    target = flatten_upper_triangle(dag)
    out = bundle.reconstruct([dag])[0]
    return float(np.mean((out - target) ** 2))


@dataclass(frozen=True)
class PairGraphSampler:
    """Independent DAGs whose edge probability is itself drawn per graph."""

    n: int
    palette: tuple[OpKind, ...] = DEFAULT_PALETTE
    edge_prob_range: tuple[float, float] = (0.1, 0.9)

    def sample(self, rng: np.random.Generator) -> Dag:
        lo, hi = self.edge_prob_range
        return _draw_dag(rng, self.n, rng.uniform(lo, hi), self.palette)


def _wl_pair(args):
    a, b, cfg = args
    return wl_similarity(a, b, cfg)


def _pair_batch_loss(enc, dec, xa, xb, ta, tb, s_g, sim_weight):
    """Losses and gradients for a batch of pairs.

    Returns (mean similarity loss, mean reconstruction loss per graph,
    encoder grads, decoder grads).
    """
    b = xa.shape[0]
    z, enc_cache = enc.forward_cached(np.vstack([xa, xb]))
    za, zb = z[:b], z[b:]
    na = np.sqrt(np.sum(za * za, axis=1) + TRAIN_NORM_FLOOR**2)
    nb = np.sqrt(np.sum(zb * zb, axis=1) + TRAIN_NORM_FLOOR**2)
    cos = np.sum(za * zb, axis=1) / (na * nb)
    diff = cos - s_g
    sim_loss = diff**2

    r, dec_cache = dec.forward_cached(z)
    target = np.vstack([ta, tb])
    m = target.shape[1]
    rec_loss = np.mean((r - target) ** 2, axis=1)

    dec_grads, gz = dec.backward(dec_cache, 2.0 * (r - target) / (m * b))
    dcos = (sim_weight * 2.0 * diff / b)[:, None]
    gza = dcos * (zb / (na * nb)[:, None] - cos[:, None] * za / (na**2)[:, None])
    gzb = dcos * (za / (na * nb)[:, None] - cos[:, None] * zb / (nb**2)[:, None])
    gz = gz + np.vstack([gza, gzb])
    enc_grads, _ = enc.backward(enc_cache, gz)
    return float(np.mean(sim_loss)), float(np.mean(rec_loss)), enc_grads, dec_grads


def pair_objective(enc, dec, xa, xb, ta, tb, s_g, sim_weight=1.0) -> float:
    """Mean over pairs of L_s + L_r(a) + L_r(b), with the training norm floor."""
    sim, rec, _, _ = _pair_batch_loss(enc, dec, xa, xb, ta, tb, s_g, sim_weight)
    return sim_weight * sim + 2.0 * rec


def train_encoder(
    pair_count: int,
    n: int,
    d: int,
    cfg: TrainConfig,
    wl_cfg: WlConfig = WlConfig(),
    graph_sampler=None,
    *,
    hidden: Sequence[int] = (256, 256),
    include_ops: bool = False,
    palette: Sequence[OpKind] = DEFAULT_PALETTE,
    similarity_weight: float = 1.0,
    checkpoints: int = 20,
    workers: int = 1,
) -> tuple[EncoderBundle, list[dict]]:
    """Train encoder and decoder on ``pair_count`` random graph pairs.

    ``similarity_weight=0`` gives a reconstruction-only autoencoder with the
    same architecture and budget. The history holds one record per
    checkpoint window with the window-mean losses.
    """
    if pair_count < 1:
        raise ValueError("pair_count must be >= 1")
    palette = tuple(palette)
    if graph_sampler is None:
        graph_sampler = PairGraphSampler(n, palette)
    seq = np.random.SeedSequence(cfg.rng_seed)
    data_rng, init_rng, batch_rng = (np.random.default_rng(s) for s in seq.spawn(3))

    graphs = [graph_sampler.sample(data_rng) for _ in range(2 * pair_count)]
    pairs = list(zip(graphs[:pair_count], graphs[pair_count:]))
    if similarity_weight > 0:
        s_g = np.array(parallel_map(_wl_pair, [(a, b, wl_cfg) for a, b in pairs], workers))
    else:
        s_g = np.zeros(pair_count)

    m = n * (n - 1) // 2
    in_dim = m + (n * len(palette) if include_ops else 0)
    enc = Mlp.build([in_dim, *hidden, d], init_rng, "relu", "identity")
    dec = Mlp.build([d, *reversed(hidden), m], init_rng, "relu", "sigmoid")
    bundle = EncoderBundle(enc, dec, n, d, wl_cfg, include_ops, palette)
    x = bundle.featurize(graphs)
    t = structure_features(graphs)
    xa, xb, ta, tb = x[:pair_count], x[pair_count:], t[:pair_count], t[pair_count:]

    optimizer = make_optimizer(cfg)
    params = enc.parameters() + dec.parameters()
    window = max(cfg.iterations // max(checkpoints, 1), 1)
    history = []
    sim_acc = rec_acc = 0.0
    count = 0
    batch = min(cfg.batch_size, pair_count)
    for it in range(1, cfg.iterations + 1):
        idx = batch_rng.integers(pair_count, size=batch)
        sim, rec, eg, dg = _pair_batch_loss(
            enc, dec, xa[idx], xb[idx], ta[idx], tb[idx], s_g[idx], similarity_weight
        )
        flat = [g for pair in eg + dg for g in pair]
        if not (np.isfinite(sim) and np.isfinite(rec)) or not all(np.all(np.isfinite(g)) for g in flat):
            raise TrainingDivergedError(f"non-finite loss or gradient at iteration {it}")
        optimizer.step(params, flat)
        sim_acc += sim
        rec_acc += rec
        count += 1
        if it % window == 0 or it == cfg.iterations:
            history.append({
                "iteration": it,
                "similarity_loss": sim_acc / count,
                "reconstruction_loss": rec_acc / count,
            })
            sim_acc = rec_acc = 0.0
            count = 0
    if not (enc.all_finite() and dec.all_finite()):
        raise TrainingDivergedError("non-finite parameters after training")
    bundle.meta = {"seed": int(cfg.rng_seed), "pair_count": int(pair_count), "similarity_weight": similarity_weight}
    return bundle, history


def save_bundle(directory, bundle: EncoderBundle) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_mlp(directory / "encoder.ckpt", bundle.encoder)
    save_mlp(directory / "decoder.ckpt", bundle.decoder)
    manifest = {
        "n": bundle.n,
        "d": bundle.d,
        "wl": {"h": bundle.wl_cfg.h, "use_ops_as_initial_labels": bundle.wl_cfg.use_ops_as_initial_labels},
        "include_ops": bundle.include_ops,
        "palette": [str(op) for op in bundle.palette],
        "unit_norm": bundle.unit_norm,
        **bundle.meta,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_bundle(directory) -> EncoderBundle:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    enc, _ = load_mlp(directory / "encoder.ckpt")
    dec, _ = load_mlp(directory / "decoder.ckpt")
    reserved = ("n", "d", "wl", "include_ops", "palette", "unit_norm")
    meta = {k: v for k, v in manifest.items() if k not in reserved}
    return EncoderBundle(
        enc,
        dec,
        manifest["n"],
        manifest["d"],
        WlConfig(**manifest["wl"]),
        manifest["include_ops"],
        parse_palette(manifest["palette"]),
        meta,
        manifest.get("unit_norm", True),
    )
