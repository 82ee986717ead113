"""Directed Weisfeiler-Lehman subtree kernel over labelled DAGs.

Relabelling uses the node's own label together with the sorted labels of its
in-neighbours and, separately, of its out-neighbours, so edge direction is
part of the refinement.
"""

from __future__ import annotations

import hashlib
import math
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .graph import Dag

UNIFORM_LABEL = "*"


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class WlConfig:
    h: int = 3
    use_ops_as_initial_labels: bool = False

    def __post_init__(self):
        if self.h < 0:
            raise KernelError("WL iteration count must be non-negative")


class LabelDictionary:
    """Compression map from refinement keys to integer label ids.

    One dictionary is shared by all graphs whose features are compared.
    """

    def __init__(self):
        self._ids: dict = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._ids)

    def compress(self, key) -> int:
        label = self._ids.get(key)
        if label is None:
            with self._lock:
                label = self._ids.setdefault(key, len(self._ids))
        return label


@dataclass(frozen=True)
class WlFeatureVector:
    counts: dict[int, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __len__(self):
        return len(self.counts)


def _initial_labels(dag: Dag, use_ops: bool) -> list[str]:
    if use_ops:
        return [str(op) for op in dag.ops]
    return [UNIFORM_LABEL] * dag.n


def wl_features(dag: Dag, cfg: WlConfig, label_dictionary: LabelDictionary) -> WlFeatureVector:
    compress = label_dictionary.compress
    preds, succs = dag.predecessors, dag.successors
    labels = [compress((0, s)) for s in _initial_labels(dag, cfg.use_ops_as_initial_labels)]
    counts = Counter(labels)
    for it in range(1, cfg.h + 1):
        labels = [
            compress((
                it,
                labels[v],
                tuple(sorted([labels[u] for u in preds[v]])),
                tuple(sorted([labels[w] for w in succs[v]])),
            ))
            for v in range(dag.n)
        ]
        counts.update(labels)
    return WlFeatureVector(dict(counts))


def wl_kernel_raw(fa: WlFeatureVector, fb: WlFeatureVector) -> int:
    a, b = fa.counts, fb.counts
    if len(a) > len(b):
        a, b = b, a
    return sum(c * b[k] for k, c in a.items() if k in b)


def _normalize(kab: int, kaa: int, kbb: int) -> float:
    if kaa <= 0 or kbb <= 0:
        raise KernelError("graph has a zero self-kernel")
    s = kab / math.sqrt(kaa * kbb)
    return min(max(s, 0.0), 1.0)


def wl_similarity(ga: Dag, gb: Dag, cfg: WlConfig = WlConfig()) -> float:
    """Cosine-normalised WL kernel, in [0, 1]."""
    dictionary = LabelDictionary()
    fa = wl_features(ga, cfg, dictionary)
    fb = wl_features(gb, cfg, dictionary)
    return _normalize(wl_kernel_raw(fa, fb), wl_kernel_raw(fa, fa), wl_kernel_raw(fb, fb))


def feature_matrix(features: Sequence[WlFeatureVector], n_labels: int | None = None) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for r, f in enumerate(features):
        for k, c in f.counts.items():
            rows.append(r)
            cols.append(k)
            vals.append(c)
    if n_labels is None:
        n_labels = max(cols, default=-1) + 1
    return sparse.csr_matrix(
        (np.asarray(vals, dtype=np.int64), (rows, cols)), shape=(len(features), n_labels)
    )


def wl_gram(dags: Sequence[Dag], cfg: WlConfig = WlConfig()) -> np.ndarray:
    """Raw kernel matrix for a set of graphs built against one dictionary."""
    dictionary = LabelDictionary()
    feats = [wl_features(g, cfg, dictionary) for g in dags]
    x = feature_matrix(feats, len(dictionary))
    return (x @ x.T).toarray()


def pairwise_similarity(pairs: Sequence[tuple[Dag, Dag]], cfg: WlConfig = WlConfig()) -> np.ndarray:
    return np.array([wl_similarity(a, b, cfg) for a, b in pairs])


def _digest(text: str) -> str:
    return hashlib.blake2b(text.encode(), digest_size=16).hexdigest()


def wl_canonical_hash(dag: Dag, h: int = 3) -> str:
    """Node-order independent 128-bit hex digest of a DAG.

    Labels are refined with op-typed initial labels and hashed instead of
    compressed, so the digest does not depend on any dictionary state.
    """
    preds, succs = dag.predecessors, dag.successors
    labels = [str(op) for op in dag.ops]
    for _ in range(h):
        labels = [
            _digest(
                labels[v]
                + "|" + ",".join(sorted(labels[u] for u in preds[v]))
                + "|" + ",".join(sorted(labels[w] for w in succs[v]))
            )
            for v in range(dag.n)
        ]
    op_multiset = ",".join(sorted(str(op) for op in dag.ops))
    return _digest(f"{dag.n};{op_multiset};{','.join(sorted(labels))}")
