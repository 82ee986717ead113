"""Architecture evaluation backends and the efficiency score.

Two backends produce an :class:`Evaluation` for a DAG: a synthetic oracle
driven by topology features of the pruned cell, and a tabular benchmark keyed
by the WL canonical hash.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np
from scipy.special import expit

from .graph import (
    CONV1X1,
    CellSpec,
    Dag,
    DegenerateCellError,
    OpKind,
    labeled,
    longest_path_from_input,
    mac_estimate,
    prune_to_cell,
)
from .wl_kernel import wl_canonical_hash

DEFAULT_LAMBDA = 0.01


class MissingArchitectureError(KeyError):
    pass


@dataclass(frozen=True)
class Evaluation:
    accuracy: float
    mac_millions: float

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.mac_millions < 0:
            raise ValueError("mac_millions must be >= 0")


def efficiency_score(evaluation: Evaluation, lam: float = DEFAULT_LAMBDA) -> float:
    """``accuracy - lam * ln(MAC in millions)``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return evaluation.accuracy
    if evaluation.mac_millions <= 0:
        raise ValueError("log-MAC penalty needs mac_millions > 0")
    return evaluation.accuracy - lam * math.log(evaluation.mac_millions)


@dataclass(frozen=True)
class SyntheticOracleConfig:
    bias: float = -1.0
    w_longest_path: float = 0.35
    w_mean_in_degree: float = 0.25
    w_op_mix: float = 0.6
    noise_sigma: float = 0.005
    rng_seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def _is_heavy(op: OpKind) -> bool:
    return op != CONV1X1 and op != labeled(0)


def cell_features(cell: CellSpec) -> tuple[float, float, float]:
    """(longest path, mean in-degree, heavy-op share) of a pruned cell."""
    dag = cell.source
    op_nodes = cell.op_nodes
    mean_in = sum(cell.in_degree(v) for v in op_nodes) / len(op_nodes)
    mix = sum(_is_heavy(dag.ops[v]) for v in op_nodes) / len(op_nodes)
    return float(longest_path_from_input(cell)), mean_in, mix


def _noise_seed(dag: Dag, seed: int) -> list[int]:
    digest = wl_canonical_hash(dag)
    return [int(seed) & 0xFFFFFFFFFFFFFFFF, int(digest[:16], 16), int(digest[16:], 16)]


def synthetic_evaluate(
    dag: Dag, cfg: SyntheticOracleConfig, channels: int = 64, resolution=(32, 32)
) -> Evaluation:
    """Sigmoid of weighted cell features plus per-graph Gaussian noise.

    The noise is seeded from the canonical hash, so isomorphic graphs score
    identically. Degenerate cells evaluate to zero accuracy and zero MACs.
    """
    try:
        cell = prune_to_cell(dag, channels, resolution)
    except DegenerateCellError:
        return Evaluation(0.0, 0.0)
    lp, mean_in, mix = cell_features(cell)
    logit = cfg.bias + cfg.w_longest_path * lp + cfg.w_mean_in_degree * mean_in + cfg.w_op_mix * mix
    acc = float(expit(logit))
    if cfg.noise_sigma > 0:
        acc += cfg.noise_sigma * np.random.default_rng(_noise_seed(dag, cfg.rng_seed)).standard_normal()
    return Evaluation(min(max(acc, 0.0), 1.0), mac_estimate(cell))


@dataclass(frozen=True)
class SyntheticOracle:
    cfg: SyntheticOracleConfig = SyntheticOracleConfig()
    channels: int = 64
    resolution: tuple[int, int] = (32, 32)

    def evaluate(self, dag: Dag) -> Evaluation:
        return synthetic_evaluate(dag, self.cfg, self.channels, self.resolution)

    def describe(self) -> dict:
        return {"kind": "synthetic", **asdict(self.cfg), "channels": self.channels,
                "resolution": list(self.resolution)}


@dataclass
class BenchmarkTable:
    """Canonical hash -> Evaluation, plus optional stored DAGs for sampling."""

    entries: dict[str, Evaluation] = field(default_factory=dict)
    dags: dict[str, Dag] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def h(self) -> int:
        return int(self.metadata.get("h", 3))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, dag: Dag) -> bool:
        return wl_canonical_hash(dag, self.h) in self.entries

    def add(self, dag: Dag, evaluation: Evaluation) -> str:
        key = wl_canonical_hash(dag, self.h)
        self.entries.setdefault(key, evaluation)
        self.dags.setdefault(key, dag)
        return key

    def lookup(self, dag: Dag) -> Evaluation:
        key = wl_canonical_hash(dag, self.h)
        try:
            return self.entries[key]
        except KeyError:
            raise MissingArchitectureError(f"architecture {key} is not in the table") from None

    def best_accuracy(self) -> float:
        if not self.entries:
            raise ValueError("empty benchmark table")
        return max(e.accuracy for e in self.entries.values())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps({"header": True, **self.metadata}, sort_keys=True) + "\n")
            for key, ev in self.entries.items():
                rec = {"hash": key, "accuracy": ev.accuracy, "mac_millions": ev.mac_millions}
                if key in self.dags:
                    rec["dag"] = self.dags[key].to_json()
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "BenchmarkTable":
        table = cls()
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec.pop("header", False):
                    table.metadata = rec
                    continue
                table.entries[rec["hash"]] = Evaluation(rec["accuracy"], rec["mac_millions"])
                if "dag" in rec:
                    table.dags[rec["hash"]] = Dag.from_json(rec["dag"])
        return table


def tabular_evaluate(dag: Dag, table: BenchmarkTable) -> Evaluation:
    return table.lookup(dag)


@dataclass
class TabularOracle:
    table: BenchmarkTable

    def evaluate(self, dag: Dag) -> Evaluation:
        return tabular_evaluate(dag, self.table)

    def describe(self) -> dict:
        return {"kind": "tabular", "entries": len(self.table), **self.table.metadata}


@dataclass
class TableSampler:
    """Uniform sampling with replacement over the DAGs stored in a table."""

    table: BenchmarkTable

    def __post_init__(self):
        self._keys = sorted(self.table.dags)
        if not self._keys:
            raise ValueError("table stores no DAGs to sample from")

    def sample(self, rng: np.random.Generator) -> Dag:
        return self.table.dags[self._keys[rng.integers(len(self._keys))]]

    def sample_many(self, rng: np.random.Generator, count: int) -> list[Dag]:
        return [self.table.dags[self._keys[k]] for k in rng.integers(len(self._keys), size=count)]


def build_synthetic_table(
    sampler, size: int, oracle: SyntheticOracle, rng_seed: int, h: int = 3, max_draws: int | None = None
) -> BenchmarkTable:
    """Fill a table with ``size`` distinct (by canonical hash) sampled DAGs."""
    rng = np.random.default_rng(rng_seed)
    table = BenchmarkTable(metadata={
        "n": sampler.n, "palette": [str(o) for o in sampler.palette], "h": h, "source": "synthetic",
    })
    max_draws = max_draws or 50 * size
    draws = 0
    while len(table) < size and draws < max_draws:
        dag = sampler.sample(rng)
        draws += 1
        if dag not in table:
            table.add(dag, oracle.evaluate(dag))
    if len(table) < size:
        raise ValueError(f"only {len(table)} distinct architectures after {draws} draws")
    return table


_NASBENCH_OPS = {"conv3x3-bn-relu": 0, "conv1x1-bn-relu": 1, "maxpool3x3": 2}


def import_records(records: Iterable[dict], h: int = 3, op_ids: dict | None = None) -> BenchmarkTable:
    """Normalise external tabular-benchmark records into a :class:`BenchmarkTable`.

    Each record needs ``adjacency`` (square 0/1 matrix, upper-triangular),
    ``ops`` (one name per node) and ``accuracy``; ``mac_millions`` or
    ``flops`` (in millions) is optional. Names such as ``input``/``output``
    that are missing from ``op_ids`` become ``op`` ids past the known ones.
    """
    op_ids = dict(_NASBENCH_OPS if op_ids is None else op_ids)
    table = BenchmarkTable(metadata={"h": h, "source": "import", "op_ids": op_ids})
    for rec in records:
        ops = []
        for name in rec["ops"]:
            if name not in op_ids:
                op_ids[name] = max(op_ids.values(), default=-1) + 1
            ops.append(labeled(op_ids[name]))
        dag = Dag.from_adjacency(np.asarray(rec["adjacency"]), ops)
        mac = float(rec.get("mac_millions", rec.get("flops", 0.0)))
        table.add(dag, Evaluation(float(rec["accuracy"]), mac))
    table.metadata["op_ids"] = op_ids
    return table
