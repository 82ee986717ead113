import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gemnas.graph import CONV1X1, DEFAULT_PALETTE, DWSEP3X3, Dag, RandomDagSampler, enumerate_dags
from gemnas.wl_kernel import (
    LabelDictionary,
    WlConfig,
    WlFeatureVector,
    KernelError,
    wl_canonical_hash,
    wl_features,
    wl_gram,
    wl_kernel_raw,
    wl_similarity,
)

from test_graph import dags
from wl_oracle import brute_kernel, string_labels

UNIFORM = WlConfig(h=0)


def test_single_node_h0():
    f = wl_features(Dag(1, (), (CONV1X1,)), UNIFORM, LabelDictionary())
    assert list(f.counts.values()) == [1]


def test_chain_h0():
    chain = Dag(3, ((0, 1), (1, 2)), (CONV1X1,) * 3)
    f = wl_features(chain, UNIFORM, LabelDictionary())
    assert list(f.counts.values()) == [3]


def test_chain_h1_three_distinct_labels():
    chain = Dag(3, ((0, 1), (1, 2)), (CONV1X1,) * 3)
    d = LabelDictionary()
    f = wl_features(chain, WlConfig(h=1), d)
    # one shared iteration-0 label (count 3) plus head / middle / tail
    assert sorted(f.counts.values()) == [1, 1, 1, 3]
    assert len(d) == 4


def test_total_count():
    g = Dag(5, ((0, 1), (0, 2), (2, 4)), DEFAULT_PALETTE[:1] * 5)
    for h in range(4):
        assert wl_features(g, WlConfig(h=h), LabelDictionary()).total == (h + 1) * 5


def test_raw_kernel_examples():
    assert wl_kernel_raw(WlFeatureVector({0: 2, 1: 1}), WlFeatureVector({0: 3})) == 6
    assert wl_kernel_raw(WlFeatureVector({0: 2}), WlFeatureVector({1: 5})) == 0
    g = Dag(1, (), (CONV1X1,))
    d = LabelDictionary()
    assert wl_kernel_raw(wl_features(g, UNIFORM, d), wl_features(g, UNIFORM, d)) == 1


def test_similarity_identical_and_single_nodes():
    assert wl_similarity(Dag(1, (), (CONV1X1,)), Dag(1, (), (CONV1X1,)), WlConfig(3, True)) == 1.0
    g = Dag(6, ((0, 1), (0, 3), (1, 5), (2, 4)), (CONV1X1, DWSEP3X3) * 3)
    assert wl_similarity(g, g) == 1.0


def test_path_vs_fan_against_brute_force():
    path = Dag(3, ((0, 1), (1, 2)), (CONV1X1,) * 3)
    fan = Dag(3, ((0, 1), (0, 2)), (CONV1X1,) * 3)
    kab, kaa, kbb = (brute_kernel(a, b, 1, False) for a, b in ((path, fan), (path, path), (fan, fan)))
    expected = kab / math.sqrt(kaa * kbb)
    # iteration 0: 3*3; iteration 1: path labels all distinct, fan has head + two identical tails,
    # path tail (in={*}, out={}) matches each fan tail -> 1*2
    assert (kab, kaa, kbb) == (11, 12, 14)
    assert wl_similarity(path, fan, WlConfig(h=1)) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(11 / math.sqrt(168))


def test_brute_force_small_exhaustive():
    graphs = [g for n in (1, 2, 3) for g in enumerate_dags(n, DEFAULT_PALETTE)]
    for h, use_ops in itertools.product((0, 1, 2), (False, True)):
        cfg = WlConfig(h, use_ops)
        d = LabelDictionary()
        feats = [wl_features(g, cfg, d) for g in graphs]
        for i in range(0, len(graphs), 7):
            for j in range(len(graphs)):
                assert wl_kernel_raw(feats[i], feats[j]) == brute_kernel(graphs[i], graphs[j], h, use_ops)


def test_gram_matches_pairwise():
    rng = np.random.default_rng(3)
    graphs = RandomDagSampler(6, 0.5, valid_only=False).sample_many(rng, 20)
    cfg = WlConfig(2, True)
    gram = wl_gram(graphs, cfg)
    d = LabelDictionary()
    feats = [wl_features(g, cfg, d) for g in graphs]
    for i in range(20):
        for j in range(20):
            assert gram[i, j] == wl_kernel_raw(feats[i], feats[j])


def test_shared_dictionary_is_required_for_comparison():
    g = Dag(2, ((0, 1),), (CONV1X1, CONV1X1))
    other = Dag(2, (), (DWSEP3X3, DWSEP3X3))
    fa = wl_features(g, WlConfig(1, True), LabelDictionary())
    fb = wl_features(other, WlConfig(1, True), LabelDictionary())
    # separate dictionaries reuse ids, which fakes overlap
    assert wl_kernel_raw(fa, fb) > 0
    assert wl_similarity(g, other, WlConfig(1, True)) == 0.0


@settings(max_examples=200, deadline=None)
@given(dags(), dags(), st.integers(0, 4), st.booleans())
def test_similarity_symmetric_and_bounded(a, b, h, use_ops):
    cfg = WlConfig(h, use_ops)
    s = wl_similarity(a, b, cfg)
    assert 0.0 <= s <= 1.0
    assert s == wl_similarity(b, a, cfg)


@settings(max_examples=100, deadline=None)
@given(dags(max_n=8))
def test_self_kernel_monotone_in_h(g):
    values = []
    for h in range(5):
        f = wl_features(g, WlConfig(h), LabelDictionary())
        values.append(wl_kernel_raw(f, f))
    assert values == sorted(values)


def test_negative_h_rejected():
    with pytest.raises(KernelError):
        WlConfig(h=-1)


class TestCanonicalHash:
    def test_format_and_determinism(self):
        g = Dag(4, ((0, 1), (1, 3), (0, 2)), (CONV1X1, DWSEP3X3, CONV1X1, DWSEP3X3))
        key = wl_canonical_hash(g)
        assert key == wl_canonical_hash(g)
        assert len(key) == 32 and int(key, 16) >= 0

    @settings(max_examples=200, deadline=None)
    @given(dags(max_n=7), st.randoms(use_true_random=False))
    def test_topological_relabelling_invariance(self, g, rnd):
        # random topological order via Kahn's algorithm with random tie-breaks
        indeg = [len(p) for p in g.predecessors]
        ready = [v for v in range(g.n) if indeg[v] == 0]
        order = []
        while ready:
            v = ready.pop(rnd.randrange(len(ready)))
            order.append(v)
            for w in g.successors[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        assert wl_canonical_hash(g.permuted(order)) == wl_canonical_hash(g)

    def test_op_change_changes_hash(self):
        rng = np.random.default_rng(0)
        graphs = RandomDagSampler(6, 0.5, valid_only=False).sample_many(rng, 300)
        for g in graphs:
            ops = list(g.ops)
            ops[3] = DWSEP3X3 if ops[3] == CONV1X1 else CONV1X1
            assert wl_canonical_hash(Dag(g.n, g.edges, tuple(ops))) != wl_canonical_hash(g)

    def test_distinct_structures_rarely_collide(self):
        graphs = list(enumerate_dags(4, DEFAULT_PALETTE))
        by_hash = {}
        for g in graphs:
            by_hash.setdefault(wl_canonical_hash(g), []).append(g)
        # every class must contain only graphs with identical string-label multisets
        for members in by_hash.values():
            ref = string_labels(members[0].n, members[0].edges, members[0].ops, 3, True)
            for m in members[1:]:
                assert string_labels(m.n, m.edges, m.ops, 3, True) == ref
