"""Bootstrap optimisation over a sampled pool, plus search-quality reporting."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .graph import Dag
from .oracle import BenchmarkTable, efficiency_score
from .predictor import Predictor, predict, predict_many
from .wl_kernel import wl_canonical_hash

# Relative band inside which batch scores are re-checked one by one, so the
# reported score matches a single-vector prediction bit for bit.
_RESCORE_BAND = 1e-9


@dataclass
class SearchResult:
    best_dag: Dag
    predicted_score: float
    pool_size: int
    seed: int
    true_score: float | None = None
    best_hash: str = ""

    def to_json(self) -> dict:
        return {
            "best_dag": self.best_dag.to_json(),
            "best_hash": self.best_hash,
            "predicted_score": self.predicted_score,
            "true_score": self.true_score,
            "pool_size": self.pool_size,
            "seed": self.seed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, record: dict) -> "SearchResult":
        return cls(
            Dag.from_json(record["best_dag"]),
            record["predicted_score"],
            record["pool_size"],
            record["seed"],
            record.get("true_score"),
            record.get("best_hash", ""),
        )


def sample_pool(sampler, pool_size: int, seed: int) -> list[Dag]:
    rng = np.random.default_rng(seed)
    if hasattr(sampler, "sample_many"):
        return sampler.sample_many(rng, pool_size)
    return [sampler.sample(rng) for _ in range(pool_size)]


def score_pool(bundle, p: Predictor, pool: list[Dag], chunk: int = 8192) -> np.ndarray:
    scores = np.empty(len(pool))
    for start in range(0, len(pool), chunk):
        part = pool[start:start + chunk]
        scores[start:start + len(part)] = predict_many(p, bundle.embed_many(part))
    return scores


def select_best(bundle, p: Predictor, pool: list[Dag], scores: np.ndarray) -> tuple[int, float, str]:
    """Argmax of ``scores`` with ties broken by the lowest canonical hash.

    Candidates near the maximum are re-scored through :func:`predict` on a
    single vector; the winner's reported score comes from that path.
    """
    top = scores.max()
    band = _RESCORE_BAND * max(1.0, abs(top))
    candidates = np.flatnonzero(scores >= top - band)
    exact = {int(k): predict(p, bundle.embed_many([pool[k]])[0]) for k in candidates}
    best_value = max(exact.values())
    tied = [k for k, v in exact.items() if v == best_value]
    hashes = {k: wl_canonical_hash(pool[k]) for k in tied}
    winner = min(tied, key=lambda k: (hashes[k], k))
    return winner, best_value, hashes[winner]


def bootstrap_optimize(
    bundle, p: Predictor, sampler, pool_size: int, seed: int, oracle=None, lam: float = 0.0
) -> SearchResult:
    """Sample ``pool_size`` DAGs with replacement and keep the predicted best.

    When ``oracle`` is given the winner is re-evaluated and ``true_score``
    holds its efficiency score under ``lam``.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    pool = sample_pool(sampler, pool_size, seed)
    scores = score_pool(bundle, p, pool)
    k, value, key = select_best(bundle, p, pool, scores)
    result = SearchResult(pool[k], value, pool_size, int(seed), best_hash=key)
    if oracle is not None:
        result.true_score = efficiency_score(oracle.evaluate(pool[k]), lam)
    return result


def global_prediction_bias(table: BenchmarkTable, result: SearchResult) -> float:
    """Best accuracy in the table minus the table accuracy of the selected DAG."""
    return table.best_accuracy() - table.lookup(result.best_dag).accuracy


def exhaustive_oracle_search(space: Iterable[Dag], oracle, lam: float) -> tuple[Dag, float]:
    """True argmax of the efficiency score; ties go to the lowest canonical hash."""
    best = None
    for dag in space:
        score = efficiency_score(oracle.evaluate(dag), lam)
        key = (-score, wl_canonical_hash(dag))
        if best is None or key < best[0]:
            best = (key, dag, score)
    if best is None:
        raise ValueError("empty search space")
    return best[1], best[2]
