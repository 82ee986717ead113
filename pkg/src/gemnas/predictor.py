"""Efficiency-score predictor over graph vectors and the estimator-building loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .nn import Mlp, TrainConfig, load_mlp, make_optimizer, save_mlp, train_step
from .oracle import MissingArchitectureError, efficiency_score
from .wl_kernel import wl_canonical_hash

log = logging.getLogger(__name__)


@dataclass
class ScoredSample:
    g: np.ndarray
    y: float
    provenance: str = ""


@dataclass
class Predictor:
    net: Mlp
    training_set: list[ScoredSample] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.net.output_dim != 1:
            raise ValueError("predictor network must have a single output")

    @property
    def d(self) -> int:
        return self.net.input_dim

    @classmethod
    def create(cls, d: int, hidden: Sequence[int] = (128, 128), rng_seed: int = 0) -> "Predictor":
        return cls(Mlp.build([d, *hidden, 1], rng_seed, "relu", "identity"))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.array([s.g for s in self.training_set]).reshape(len(self.training_set), self.d)
        y = np.array([s.y for s in self.training_set])
        return x, y

    def training_mse(self) -> float:
        x, y = self.arrays()
        return float(np.mean((predict_many(self, x) - y) ** 2))


def predict(p: Predictor, g) -> float:
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (p.d,):
        raise ValueError(f"expected a vector of length {p.d}, got shape {g.shape}")
    return float(p.net.forward(g[None, :])[0, 0])


def predict_many(p: Predictor, vectors) -> np.ndarray:
    return p.net.forward(np.atleast_2d(np.asarray(vectors, dtype=np.float64)))[:, 0]


def _mse_steps(net: Mlp, x, y, optimizer, rng, steps: int, batch_size: int) -> None:
    """Minibatch squared-error steps; each epoch walks a fresh permutation."""
    order = np.empty(0, dtype=np.int64)
    for _ in range(steps):
        if order.size == 0:
            order = rng.permutation(len(y))
        idx, order = order[:batch_size], order[batch_size:]
        pred = net.forward(x[idx])
        train_step(net, x[idx], 2.0 * (pred - y[idx, None]), optimizer)


def fit_predictor(
    vectors, scores, cfg: TrainConfig, hidden: Sequence[int] = (128, 128)
) -> Predictor:
    """One-shot regression on a fixed training split for ``cfg.iterations`` steps."""
    x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    y = np.asarray(scores, dtype=np.float64)
    seq = np.random.SeedSequence(cfg.rng_seed)
    init_rng, batch_rng = (np.random.default_rng(s) for s in seq.spawn(2))
    p = Predictor(Mlp.build([x.shape[1], *hidden, 1], init_rng, "relu", "identity"))
    p.training_set = [ScoredSample(g, float(t)) for g, t in zip(x, y)]
    _mse_steps(p.net, x, y, make_optimizer(cfg), batch_rng, cfg.iterations, cfg.batch_size)
    return p


def build_estimator(
    oracle,
    bundle,
    sample_budget: int,
    cfg: TrainConfig,
    lam: float,
    sampler,
    *,
    hidden: Sequence[int] = (128, 128),
    epochs_per_sample: int = 5,
    min_steps_per_sample: int = 50,
    final_steps: int = 200,
    final_checkpoints: int = 10,
    on_missing: str = "fail",
    sample_log: list | None = None,
) -> Predictor:
    """Grow the scored set one sampled architecture at a time, fine-tuning after each.

    Every iteration samples a DAG, evaluates it with ``oracle``, scores it,
    embeds it with ``bundle`` and fine-tunes the predictor for
    ``max(epochs_per_sample epochs, min_steps_per_sample)`` minibatch steps on
    the enlarged set. A closing full-batch phase of ``final_steps`` steps
    records the training loss at ``final_checkpoints`` evenly spaced points.

    With ``on_missing="skip"`` architectures absent from a tabular oracle are
    dropped with a warning, so fewer than ``sample_budget`` samples may remain.
    """
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    if on_missing not in ("fail", "skip"):
        raise ValueError("on_missing must be 'fail' or 'skip'")
    seq = np.random.SeedSequence(cfg.rng_seed)
    sample_rng, init_rng, batch_rng = (np.random.default_rng(s) for s in seq.spawn(3))
    p = Predictor(Mlp.build([bundle.d, *hidden, 1], init_rng, "relu", "identity"))
    optimizer = make_optimizer(cfg)
    xs: list[np.ndarray] = []
    ys: list[float] = []
    skipped = 0
    for _ in range(sample_budget):
        dag = sampler.sample(sample_rng)
        try:
            evaluation = oracle.evaluate(dag)
        except MissingArchitectureError:
            if on_missing == "fail":
                raise
            skipped += 1
            continue
        score = efficiency_score(evaluation, lam)
        g = bundle.embed_many([dag])[0]
        key = wl_canonical_hash(dag)
        p.training_set.append(ScoredSample(g, score, key))
        xs.append(g)
        ys.append(score)
        if sample_log is not None:
            sample_log.append({
                "dag": dag.to_json(),
                "hash": key,
                "accuracy": evaluation.accuracy,
                "mac_millions": evaluation.mac_millions,
                "score": score,
            })
        x, y = np.array(xs), np.array(ys)
        steps = max(epochs_per_sample * math.ceil(len(y) / cfg.batch_size), min_steps_per_sample)
        _mse_steps(p.net, x, y, optimizer, batch_rng, steps, cfg.batch_size)
    if skipped:
        log.warning("skipped %d of %d sampled architectures missing from the oracle", skipped, sample_budget)
    if not p.training_set:
        raise MissingArchitectureError("no sampled architecture could be evaluated")

    x, y = p.arrays()
    every = max(final_steps // max(final_checkpoints, 1), 1)
    for step in range(1, final_steps + 1):
        pred = p.net.forward(x)
        train_step(p.net, x, 2.0 * (pred - y[:, None]), optimizer)
        if step % every == 0:
            p.loss_history.append(p.training_mse())
    p.meta = {"sample_budget": sample_budget, "lambda": lam, "seed": int(cfg.rng_seed), "skipped": skipped}
    return p


@dataclass
class VarianceBoundReport:
    lhs: float
    input_variance: float
    k_spectral: float
    k_empirical: float
    rhs: float
    rhs_empirical: float
    satisfied: bool


def empirical_variance_bound_check(
    p: Predictor, vector_sets: Sequence, pair_samples: int = 256, rng_seed: int = 0
) -> list[VarianceBoundReport]:
    """Compare Var[P(X)] with K^2 E||X - E X||^2 on each vector set.

    ``k_spectral`` is the layer-wise spectral-norm product (a true Lipschitz
    upper bound for the network) and decides ``satisfied``. ``k_empirical``
    is the largest difference quotient over sampled pairs, a lower estimate
    reported alongside.
    """
    rng = np.random.default_rng(rng_seed)
    k_spec = p.net.lipschitz_upper_bound()
    reports = []
    for vectors in vector_sets:
        x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if x.shape[0] < 2:
            raise ValueError("each vector set needs at least two vectors")
        out = predict_many(p, x)
        lhs = float(np.var(out))
        input_var = float(np.mean(np.sum((x - x.mean(axis=0)) ** 2, axis=1)))
        i = rng.integers(len(x), size=pair_samples)
        j = rng.integers(len(x), size=pair_samples)
        dist = np.linalg.norm(x[i] - x[j], axis=1)
        keep = dist > 0
        k_emp = float(np.max(np.abs(out[i] - out[j])[keep] / dist[keep])) if keep.any() else 0.0
        if input_var == 0.0:
            lhs = 0.0
        rhs = k_spec**2 * input_var
        slack = 1e-12 * max(rhs, 1.0)
        reports.append(VarianceBoundReport(
            lhs, input_var, k_spec, k_emp, rhs, k_emp**2 * input_var, lhs <= rhs + slack,
        ))
    return reports


def save_predictor(directory, p: Predictor, extra: dict | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_mlp(directory / "predictor.ckpt", p.net)
    manifest = {"d": p.d, **p.meta, **(extra or {})}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_predictor(directory) -> Predictor:
    directory = Path(directory)
    net, _ = load_mlp(directory / "predictor.ckpt")
    meta = json.loads((directory / "manifest.json").read_text())
    return Predictor(net, meta=meta)
