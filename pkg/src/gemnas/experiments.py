"""Evaluation protocols: embedding-method correlation grid and tabular prediction bias."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoder import AdjacencyEmbedder, train_encoder
from .graph import Dag, OpKind
from .metrics import kendall_tau, pearson
from .nn import TrainConfig
from .oracle import BenchmarkTable, TableSampler, efficiency_score
from .predictor import fit_predictor, predict_many
from .search import bootstrap_optimize, global_prediction_bias
from .wl_kernel import WlConfig

METHODS = ("adjacency", "autoencoder", "kernel")


def stage_seed(seed: int, stage: str) -> int:
    """Independent 63-bit seed for a named pipeline stage."""
    state = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(stage.encode())])
    return int(state.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class EncoderRecipe:
    d: int = 16
    pair_count: int = 2000
    iterations: int = 3000
    hidden: tuple[int, ...] = (128, 128)
    wl_cfg: WlConfig = WlConfig()
    include_ops: bool = False
    batch_size: int = 32
    learning_rate: float = 1e-3


def make_embedder(method: str, n: int, palette: Sequence[OpKind], recipe: EncoderRecipe, seed: int, workers: int = 1):
    """Embedding front end for one of ``adjacency``, ``autoencoder`` or ``kernel``."""
    if method == "adjacency":
        return AdjacencyEmbedder(n, recipe.include_ops, tuple(palette))
    if method not in METHODS:
        raise ValueError(f"unknown embedding method {method!r}")
    cfg = TrainConfig(
        learning_rate=recipe.learning_rate,
        iterations=recipe.iterations,
        batch_size=recipe.batch_size,
        rng_seed=stage_seed(seed, "encoder"),
    )
    bundle, _ = train_encoder(
        recipe.pair_count, n, recipe.d, cfg, recipe.wl_cfg,
        hidden=recipe.hidden,
        include_ops=recipe.include_ops,
        palette=palette,
        similarity_weight=1.0 if method == "kernel" else 0.0,
        workers=workers,
    )
    return bundle


def score_corpus(dags: Sequence[Dag], oracle, lam: float) -> np.ndarray:
    return np.array([efficiency_score(oracle.evaluate(g), lam) for g in dags])


def correlation_grid(
    dags: Sequence[Dag],
    scores,
    embedders: dict,
    seed: int,
    train_fraction: float = 0.6,
    proportions: Sequence[int] = (10, 20, 30, 50, 70, 100),
    predictor_cfg: TrainConfig = TrainConfig(iterations=2000),
    hidden: Sequence[int] = (128, 128),
) -> list[dict]:
    """Test-set Kendall tau and Pearson r for each (method, training proportion).

    The corpus is split once into train/test by ``train_fraction``; each
    proportion takes a prefix of the shuffled training split.
    """
    scores = np.asarray(scores, dtype=np.float64)
    rng = np.random.default_rng(stage_seed(seed, "split"))
    order = rng.permutation(len(dags))
    n_train = int(round(train_fraction * len(dags)))
    train_idx, test_idx = order[:n_train], order[n_train:]
    rows = []
    for method, embedder in embedders.items():
        vectors = embedder.embed_many(list(dags))
        for prop in proportions:
            k = max(2, math.ceil(n_train * prop / 100))
            idx = train_idx[:k]
            cfg = predictor_cfg.replace(rng_seed=stage_seed(seed, f"predictor/{method}/{prop}"))
            p = fit_predictor(vectors[idx], scores[idx], cfg, hidden)
            pred = predict_many(p, vectors[test_idx])
            truth = scores[test_idx]
            rows.append({
                "method": method,
                "proportion": prop,
                "n_train": int(k),
                "n_test": int(len(test_idx)),
                "kendall_tau": kendall_tau(pred, truth),
                "pearson_r": pearson(pred, truth),
            })
    return rows


def tabular_bias(
    table: BenchmarkTable,
    embedder,
    budget: int,
    seed: int,
    pool_size: int = 50_000,
    predictor_cfg: TrainConfig = TrainConfig(iterations=2000),
    hidden: Sequence[int] = (128, 128),
) -> float:
    """Global prediction bias after training on ``budget`` table samples.

    The predictor regresses accuracy on a one-shot training set drawn from the
    table, then bootstrap optimisation over ``pool_size`` table samples picks
    the architecture whose table accuracy is compared with the table optimum.
    """
    sampler = TableSampler(table)
    rng = np.random.default_rng(stage_seed(seed, f"budget/{budget}"))
    train = sampler.sample_many(rng, budget)
    y = np.array([table.lookup(g).accuracy for g in train])
    cfg = predictor_cfg.replace(rng_seed=stage_seed(seed, f"tab-predictor/{budget}"))
    p = fit_predictor(embedder.embed_many(train), y, cfg, hidden)
    result = bootstrap_optimize(embedder, p, sampler, pool_size, stage_seed(seed, "pool"))
    return global_prediction_bias(table, result)
