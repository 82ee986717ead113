"""DAG search space: representation, sampling, cell semantics and MAC cost model.

A :class:`Dag` only stores edges ``i -> j`` with ``i < j``, so acyclicity is
structural. Node 0 is the cell input.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np


class GraphError(ValueError):
    pass


class DegenerateCellError(GraphError):
    """No operation node survives pruning."""


@dataclass(frozen=True, order=True)
class OpKind:
    """Operation tag of a node: ``conv1x1``, ``dwsep3x3`` or ``labeled`` with an id."""

    kind: str
    label: int = -1

    def __post_init__(self):
        if self.kind not in ("conv1x1", "dwsep3x3", "labeled"):
            raise GraphError(f"unknown op kind {self.kind!r}")
        if self.kind == "labeled" and self.label < 0:
            raise GraphError("labeled op ids must be non-negative")
        if self.kind != "labeled" and self.label != -1:
            raise GraphError(f"{self.kind} takes no label id")

    def __str__(self):
        if self.kind == "labeled":
            return f"op{self.label}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "OpKind":
        if text in ("conv1x1", "dwsep3x3"):
            return cls(text)
        if text.startswith("op") and text[2:].isdigit():
            return cls("labeled", int(text[2:]))
        raise GraphError(f"cannot parse op {text!r}")


CONV1X1 = OpKind("conv1x1")
DWSEP3X3 = OpKind("dwsep3x3")
DEFAULT_PALETTE = (CONV1X1, DWSEP3X3)


def labeled(label: int) -> OpKind:
    return OpKind("labeled", label)


def parse_palette(names: Iterable[str]) -> tuple[OpKind, ...]:
    palette = tuple(OpKind.parse(s) for s in names)
    if not palette:
        raise GraphError("op palette must be non-empty")
    return palette


@dataclass(frozen=True)
class Dag:
    n: int
    edges: tuple[tuple[int, int], ...]
    ops: tuple[OpKind, ...]

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("a Dag needs at least one node")
        if len(self.ops) != self.n:
            raise GraphError(f"expected {self.n} ops, got {len(self.ops)}")
        edges = tuple(sorted(set((int(i), int(j)) for i, j in self.edges)))
        for i, j in edges:
            if not 0 <= i < j < self.n:
                raise GraphError(f"edge {i}->{j} is not strictly upper-triangular")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "ops", tuple(self.ops))

    @classmethod
    def from_adjacency(cls, adjacency, ops: Sequence[OpKind]) -> "Dag":
        a = np.asarray(adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError("adjacency must be square")
        if np.any(np.tril(a) != 0):
            raise GraphError("adjacency must be strictly upper-triangular")
        rows, cols = np.nonzero(a)
        return cls(a.shape[0], tuple(zip(rows.tolist(), cols.tolist())), tuple(ops))

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int8)
        for i, j in self.edges:
            a[i, j] = 1
        a.flags.writeable = False
        return a

    @cached_property
    def predecessors(self) -> tuple[tuple[int, ...], ...]:
        preds: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            preds[j].append(i)
        return tuple(tuple(p) for p in preds)

    @cached_property
    def successors(self) -> tuple[tuple[int, ...], ...]:
        succs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            succs[i].append(j)
        return tuple(tuple(s) for s in succs)

    def permuted(self, order: Sequence[int]) -> "Dag":
        """Relabel node ``order[k]`` as node ``k``; ``order`` must be a topological order."""
        if sorted(order) != list(range(self.n)):
            raise GraphError("order must be a permutation of node indices")
        new_index = {old: new for new, old in enumerate(order)}
        edges = tuple((new_index[i], new_index[j]) for i, j in self.edges)
        if any(i >= j for i, j in edges):
            raise GraphError("permutation is not consistent with a topological order")
        return Dag(self.n, edges, tuple(self.ops[old] for old in order))

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges], "ops": [str(o) for o in self.ops]}

    @classmethod
    def from_json(cls, record: dict) -> "Dag":
        return cls(
            int(record["n"]),
            tuple((int(i), int(j)) for i, j in record["edges"]),
            tuple(OpKind.parse(s) for s in record["ops"]),
        )


def dumps_dag(dag: Dag) -> str:
    return json.dumps(dag.to_json(), separators=(",", ":"))


def loads_dag(line: str) -> Dag:
    return Dag.from_json(json.loads(line))


def write_corpus(path, dags: Iterable[Dag]) -> None:
    with open(path, "w") as fh:
        for dag in dags:
            fh.write(dumps_dag(dag) + "\n")


def read_corpus(path) -> list[Dag]:
    with open(path) as fh:
        return [loads_dag(line) for line in fh if line.strip()]


def _draw_dag(rng: np.random.Generator, n: int, edge_prob: float, palette: Sequence[OpKind]) -> Dag:
    rows, cols = np.triu_indices(n, k=1)
    present = rng.random(rows.size) < edge_prob
    op_idx = rng.integers(len(palette), size=n)
    edges = tuple(zip(rows[present].tolist(), cols[present].tolist()))
    return Dag(n, edges, tuple(palette[k] for k in op_idx))


def _check_sampling_args(n: int, edge_prob: float, palette: Sequence[OpKind]) -> None:
    if n < 1:
        raise GraphError("n must be >= 1")
    if not 0.0 <= edge_prob <= 1.0:
        raise GraphError(f"edge_prob {edge_prob} outside [0, 1]")
    if not palette:
        raise GraphError("op palette must be non-empty")


def random_dag(n: int, edge_prob: float, op_palette: Sequence[OpKind], rng_seed: int) -> Dag:
    _check_sampling_args(n, edge_prob, op_palette)
    return _draw_dag(np.random.default_rng(rng_seed), n, edge_prob, op_palette)


def is_valid_cell(dag: Dag) -> bool:
    """True when pruning keeps at least one node besides the input."""
    return bool(dag.successors[0])


@dataclass(frozen=True)
class RandomDagSampler:
    """Draws DAGs of a fixed size from a caller-supplied generator.

    With ``valid_only`` the sampler redraws graphs whose input node has no
    outgoing edge, since those prune to an empty cell.
    """

    n: int
    edge_prob: float = 0.5
    palette: tuple[OpKind, ...] = DEFAULT_PALETTE
    valid_only: bool = True

    def __post_init__(self):
        _check_sampling_args(self.n, self.edge_prob, self.palette)
        if self.valid_only and (self.n < 2 or self.edge_prob == 0.0):
            raise GraphError("valid_only sampling needs n >= 2 and edge_prob > 0")

    def sample(self, rng: np.random.Generator) -> Dag:
        while True:
            dag = _draw_dag(rng, self.n, self.edge_prob, self.palette)
            if not self.valid_only or is_valid_cell(dag):
                return dag

    def sample_many(self, rng: np.random.Generator, count: int) -> list[Dag]:
        return [self.sample(rng) for _ in range(count)]


def enumerate_dags(n: int, palette: Sequence[OpKind], valid_only: bool = False) -> Iterator[Dag]:
    """Every upper-triangular DAG on ``n`` nodes with every op assignment."""
    rows, cols = np.triu_indices(n, k=1)
    pairs = list(zip(rows.tolist(), cols.tolist()))
    for mask in itertools.product((False, True), repeat=len(pairs)):
        edges = tuple(p for p, keep in zip(pairs, mask) if keep)
        for ops in itertools.product(palette, repeat=n):
            dag = Dag(n, edges, ops)
            if not valid_only or is_valid_cell(dag):
                yield dag


@dataclass(frozen=True)
class CellSpec:
    source: Dag
    active_nodes: tuple[int, ...]
    output_leaves: tuple[int, ...]
    channels: int
    resolution: tuple[int, int]
    concat_nodes: tuple[int, ...] = ()
    input_node: int = 0

    def in_degree(self, node: int) -> int:
        active = set(self.active_nodes)
        return sum(1 for p in self.source.predecessors[node] if p in active)

    @property
    def op_nodes(self) -> tuple[int, ...]:
        return tuple(v for v in self.active_nodes if v != self.input_node)


def prune_to_cell(dag: Dag, channels: int, resolution: tuple[int, int]) -> CellSpec:
    """Drop non-input nodes with zero in-degree until nothing changes.

    Raises :class:`DegenerateCellError` when only the input node is left.
    """
    if channels < 1:
        raise GraphError("channels must be positive")
    active = set(range(dag.n))
    changed = True
    while changed:
        changed = False
        for v in sorted(active):
            if v != 0 and not any(p in active for p in dag.predecessors[v]):
                active.discard(v)
                changed = True
    if active == {0}:
        raise DegenerateCellError("no operation node is reachable from the input node")
    nodes = tuple(sorted(active))
    leaves = tuple(v for v in nodes if not any(s in active for s in dag.successors[v]))
    concat = tuple(v for v in nodes if sum(p in active for p in dag.predecessors[v]) > 1)
    h, w = resolution
    return CellSpec(dag, nodes, leaves, int(channels), (int(h), int(w)), concat)


def mac_estimate(cell: CellSpec) -> float:
    """MACs of the cell in millions under the closed-form per-op cost model.

    The input node is a pass-through and costs nothing. A node with k inputs
    sees ``k * channels`` input channels after concatenation.
    """
    h, w = cell.resolution
    c_out = cell.channels
    total = 0
    for v in cell.op_nodes:
        c_in = c_out * max(cell.in_degree(v), 1)
        op = cell.source.ops[v]
        if op == DWSEP3X3:
            total += h * w * c_in * 9 + h * w * c_in * c_out
        else:
            total += h * w * c_in * c_out
    return total / 1e6


def flatten_upper_triangle(dag: Dag) -> np.ndarray:
    rows, cols = np.triu_indices(dag.n, k=1)
    return dag.adjacency[rows, cols].astype(np.float64)


def unflatten_upper_triangle(vector, ops: Sequence[OpKind]) -> Dag:
    n = len(ops)
    v = np.asarray(vector)
    rows, cols = np.triu_indices(n, k=1)
    if v.shape != rows.shape:
        raise GraphError(f"expected {rows.size} entries for n={n}, got {v.shape}")
    keep = v > 0.5
    return Dag(n, tuple(zip(rows[keep].tolist(), cols[keep].tolist())), tuple(ops))


def longest_path_from_input(cell: CellSpec) -> int:
    """Edge count of the longest path from the input node inside the cell."""
    depth = {cell.input_node: 0}
    for v in cell.active_nodes:
        if v == cell.input_node:
            continue
        preds = [depth[p] for p in cell.source.predecessors[v] if p in depth]
        depth[v] = 1 + max(preds)
    return max(depth.values())
