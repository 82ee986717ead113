import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gemnas.graph import CONV1X1, DWSEP3X3, Dag, RandomDagSampler, labeled, mac_estimate, prune_to_cell
from gemnas.oracle import (
    BenchmarkTable,
    Evaluation,
    MissingArchitectureError,
    SyntheticOracle,
    SyntheticOracleConfig,
    TableSampler,
    TabularOracle,
    build_synthetic_table,
    cell_features,
    efficiency_score,
    import_records,
    synthetic_evaluate,
    tabular_evaluate,
)

from test_graph import dags

QUIET = SyntheticOracleConfig(noise_sigma=0.0)


class TestEfficiencyScore:
    def test_zero_lambda(self):
        assert efficiency_score(Evaluation(0.90, 585.0), 0.0) == 0.90

    def test_unit_mac(self):
        assert efficiency_score(Evaluation(0.90, 1.0), 0.01) == 0.90

    def test_hundred_mac(self):
        got = efficiency_score(Evaluation(0.85, 100.0), 0.01)
        assert got == pytest.approx(0.85 - 0.01 * math.log(100))
        assert got == pytest.approx(0.803948, abs=1e-6)

    def test_zero_mac_with_penalty(self):
        with pytest.raises(ValueError):
            efficiency_score(Evaluation(0.5, 0.0), 0.01)

    def test_invalid_evaluation(self):
        with pytest.raises(ValueError):
            Evaluation(1.2, 10.0)

    @given(st.floats(0, 1), st.floats(1e-3, 1e4), st.floats(1.001, 10), st.floats(1e-4, 1))
    def test_monotone(self, acc, mac, factor, lam):
        base = efficiency_score(Evaluation(acc, mac), lam)
        assert efficiency_score(Evaluation(acc, mac * factor), lam) < base
        if acc < 0.99:
            assert efficiency_score(Evaluation(acc + 0.01, mac), lam) > base


class TestSynthetic:
    def test_all_zero_weights_gives_half(self):
        cfg = SyntheticOracleConfig(0.0, 0.0, 0.0, 0.0, 0.0)
        for g in RandomDagSampler(6).sample_many(np.random.default_rng(0), 20):
            assert synthetic_evaluate(g, cfg).accuracy == 0.5

    def test_deterministic(self):
        g = Dag(4, ((0, 1), (1, 2), (0, 3)), (CONV1X1, DWSEP3X3, CONV1X1, DWSEP3X3))
        cfg = SyntheticOracleConfig(rng_seed=3)
        assert synthetic_evaluate(g, cfg) == synthetic_evaluate(g, cfg)

    def test_seed_changes_noise(self):
        g = Dag(4, ((0, 1), (1, 2), (0, 3)), (CONV1X1,) * 4)
        a = synthetic_evaluate(g, SyntheticOracleConfig(rng_seed=0))
        b = synthetic_evaluate(g, SyntheticOracleConfig(rng_seed=1))
        assert a.accuracy != b.accuracy and a.mac_millions == b.mac_millions

    def test_degenerate_cell(self):
        g = Dag(3, ((1, 2),), (CONV1X1,) * 3)
        assert synthetic_evaluate(g, SyntheticOracleConfig()) == Evaluation(0.0, 0.0)

    def test_noise_free_formula(self):
        g = Dag(4, ((0, 1), (1, 2), (0, 2)), (CONV1X1, DWSEP3X3, CONV1X1, CONV1X1))
        cell = prune_to_cell(g, 64, (32, 32))
        # longest path 2; in-degrees 1 and 2; one heavy op of two
        assert cell_features(cell) == (2.0, 1.5, 0.5)
        logit = -1.0 + 0.35 * 2 + 0.25 * 1.5 + 0.6 * 0.5
        ev = synthetic_evaluate(g, QUIET)
        assert ev.accuracy == pytest.approx(1 / (1 + math.exp(-logit)))
        assert ev.mac_millions == mac_estimate(cell)

    def test_longer_chain_scores_higher(self):
        def chain(n):
            return Dag(n, tuple((i, i + 1) for i in range(n - 1)), (CONV1X1,) * n)

        assert synthetic_evaluate(chain(5), QUIET).accuracy > synthetic_evaluate(chain(2), QUIET).accuracy

    def test_isomorphic_graphs_score_identically(self):
        g = Dag(4, ((0, 1), (0, 2), (1, 3)), (CONV1X1, DWSEP3X3, CONV1X1, DWSEP3X3))
        assert synthetic_evaluate(g, SyntheticOracleConfig()) == synthetic_evaluate(
            g.permuted([0, 2, 1, 3]), SyntheticOracleConfig()
        )

    @settings(max_examples=200, deadline=None)
    @given(dags(), st.floats(0, 2))
    def test_accuracy_in_unit_interval(self, g, sigma):
        acc = synthetic_evaluate(g, SyntheticOracleConfig(bias=2.0, noise_sigma=sigma)).accuracy
        assert 0.0 <= acc <= 1.0

    def test_describe(self):
        d = SyntheticOracle().describe()
        assert d["kind"] == "synthetic" and d["channels"] == 64


@pytest.fixture
def small_table():
    sampler = RandomDagSampler(5, 0.5, (CONV1X1, DWSEP3X3))
    return build_synthetic_table(sampler, 100, SyntheticOracle(), rng_seed=1)


class TestTable:
    def test_lookup_verbatim(self, small_table):
        dag = next(iter(small_table.dags.values()))
        ev = small_table.lookup(dag)
        assert tabular_evaluate(dag, small_table) is ev
        assert TabularOracle(small_table).evaluate(dag) == ev

    def test_reindexed_lookup(self):
        g = Dag(4, ((0, 1), (0, 2), (1, 3)), (CONV1X1, DWSEP3X3, CONV1X1, DWSEP3X3))
        table = BenchmarkTable()
        table.add(g, Evaluation(0.7, 1.5))
        assert table.lookup(g.permuted([0, 2, 1, 3])) == Evaluation(0.7, 1.5)

    def test_missing(self, small_table):
        absent = Dag(5, ((0, 1), (1, 2), (2, 3), (3, 4)), (labeled(9),) * 5)
        assert absent not in small_table
        with pytest.raises(MissingArchitectureError):
            small_table.lookup(absent)

    def test_size_and_distinct(self, small_table):
        assert len(small_table) == 100 == len(small_table.dags)

    def test_round_trip(self, small_table, tmp_path):
        path = tmp_path / "table.ndjson"
        small_table.save(path)
        loaded = BenchmarkTable.load(path)
        assert loaded.entries == small_table.entries
        assert loaded.metadata == small_table.metadata
        assert loaded.h == small_table.h
        for dag in small_table.dags.values():
            assert loaded.lookup(dag) == small_table.lookup(dag)
        loaded.save(tmp_path / "again.ndjson")
        assert (tmp_path / "again.ndjson").read_bytes() == path.read_bytes()

    def test_best_accuracy(self):
        table = BenchmarkTable()
        table.add(Dag(2, ((0, 1),), (CONV1X1, CONV1X1)), Evaluation(0.946, 1.0))
        table.add(Dag(2, ((0, 1),), (CONV1X1, DWSEP3X3)), Evaluation(0.944, 1.0))
        assert table.best_accuracy() == 0.946

    def test_sampler_with_replacement(self, small_table):
        draws = TableSampler(small_table).sample_many(np.random.default_rng(0), 500)
        assert len({id(d) for d in draws}) < 500
        assert all(d in small_table for d in draws)

    def test_too_small_space(self):
        sampler = RandomDagSampler(2, 1.0, (CONV1X1,))
        with pytest.raises(ValueError):
            build_synthetic_table(sampler, 5, SyntheticOracle(), rng_seed=0, max_draws=50)


def test_import_records():
    records = [
        {
            "adjacency": [[0, 1, 1], [0, 0, 1], [0, 0, 0]],
            "ops": ["input", "conv3x3-bn-relu", "output"],
            "accuracy": 0.93,
            "flops": 12.5,
        },
        {"adjacency": [[0, 1], [0, 0]], "ops": ["input", "output"], "accuracy": 0.5},
    ]
    table = import_records(records)
    assert len(table) == 2
    ids = table.metadata["op_ids"]
    assert ids["input"] == 3 and ids["output"] == 4
    g = Dag(3, ((0, 1), (0, 2), (1, 2)), (labeled(3), labeled(0), labeled(4)))
    assert table.lookup(g) == Evaluation(0.93, 12.5)
