import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gemnas.metrics import (
    ConvergenceError,
    UndefinedStatisticError,
    correlation_report,
    kendall_tau,
    pca_project,
    pearson,
    write_surface_csv,
)


def brute_tau_b(x, y):
    """O(n^2) pair counting with the tau-b tie correction."""
    n = len(x)
    conc = disc = tie_x = tie_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tie_x += 1
            elif dy == 0:
                tie_y += 1
            elif dx * dy > 0:
                conc += 1
            else:
                disc += 1
    return (conc - disc) / math.sqrt((conc + disc + tie_x) * (conc + disc + tie_y))


def brute_pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


class TestKendall:
    def test_examples(self):
        assert kendall_tau([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(1.0)
        assert kendall_tau([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
        assert kendall_tau([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3, abs=1e-15)

    def test_all_tied(self):
        with pytest.raises(UndefinedStatisticError):
            kendall_tau([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kendall_tau([1, 2], [1, 2, 3])

    def test_brute_force(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            n = int(rng.integers(3, 40))
            # coarse values force ties in about half of the trials
            levels = 4 if trial % 2 else 1000
            x = rng.integers(levels, size=n).astype(float)
            y = rng.integers(levels, size=n).astype(float)
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            assert abs(kendall_tau(x, y) - brute_tau_b(x, y)) < 1e-10

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(-100, 100), st.integers(-100, 100)), min_size=3, max_size=30))
    def test_symmetric_and_monotone_invariant(self, pts):
        x = np.array([p[0] for p in pts], dtype=float)
        y = np.array([p[1] for p in pts], dtype=float)
        if np.all(x == x[0]) or np.all(y == y[0]):
            return
        t = kendall_tau(x, y)
        assert abs(t - kendall_tau(y, x)) < 1e-12
        assert abs(t - kendall_tau(x**3 + 5 * x, y)) < 1e-12


class TestPearson:
    def test_examples(self):
        x = np.array([0.3, 1.0, 2.5, 7.0])
        assert pearson(x, 2 * x + 1) == pytest.approx(1.0)
        assert pearson(x, -x) == pytest.approx(-1.0)

    def test_constant(self):
        with pytest.raises(UndefinedStatisticError):
            pearson([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])

    def test_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(3, 50))
            x = rng.normal(size=n)
            y = 0.5 * x + rng.normal(size=n)
            assert abs(pearson(x, y) - brute_pearson(list(x), list(y))) < 1e-10
            assert abs(pearson(x, y) - pearson(y, x)) < 1e-12

    def test_report(self):
        r = correlation_report([1, 2, 3], [1, 3, 2])
        assert r.n_pairs == 3 and r.kendall_tau == pytest.approx(1 / 3) and r.pearson_r == pytest.approx(0.5)


class TestPca:
    def test_points_on_x_axis(self):
        x = np.zeros((20, 3))
        x[:, 0] = np.linspace(-3, 5, 20)
        proj = pca_project(x, k=1)
        np.testing.assert_allclose(proj.components[0], [1, 0, 0], atol=1e-10)
        assert proj.explained_share[0] == pytest.approx(1.0)

    def test_full_rank_preserves_distances_and_reconstructs(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(50, 5)) @ rng.normal(size=(5, 5))
        proj = pca_project(x, k=5)

        def pdist(a):
            return np.linalg.norm(a[:, None] - a[None], axis=-1)

        np.testing.assert_allclose(pdist(proj.coords), pdist(x), atol=1e-8)
        np.testing.assert_allclose(proj.reconstruct(), x, atol=1e-8)
        np.testing.assert_allclose(proj.components @ proj.components.T, np.eye(5), atol=1e-10)

    def test_matches_eigh(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(200, 6)) * np.array([5, 3, 2, 1, 0.5, 0.1])
        proj = pca_project(x, k=3)
        xc = x - x.mean(axis=0)
        vals, vecs = np.linalg.eigh(xc.T @ xc / len(x))
        order = np.argsort(vals)[::-1][:3]
        np.testing.assert_allclose(proj.explained_variance, vals[order], rtol=1e-8)
        for comp, ref in zip(proj.components, vecs[:, order].T):
            assert abs(abs(comp @ ref) - 1) < 1e-8
            assert comp[np.argmax(np.abs(comp))] > 0

    def test_isotropic_shares(self):
        x = np.random.default_rng(3).normal(size=(10_000, 4))
        proj = pca_project(x, k=4)
        np.testing.assert_allclose(proj.explained_share, 0.25, atol=0.02)

    def test_degenerate_spectrum_spans_subspace(self):
        rng = np.random.default_rng(4)
        # exact equal variances on axes 0 and 1, small on axis 2
        base = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], dtype=float)
        x = np.vstack([base, 0.01 * rng.normal(size=(2, 3)) * [0, 0, 1]])
        proj = pca_project(x, k=2)
        span = proj.components.T @ proj.components
        np.testing.assert_allclose(span[:2, :2], np.eye(2), atol=1e-6)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            pca_project(np.ones((5, 2)), k=3)

    def test_convergence_error(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(30, 4)) * [3, 2.9, 1, 1]
        with pytest.raises(ConvergenceError) as err:
            pca_project(x, k=1, max_iter=2)
        assert err.value.iterations == 2


def test_surface_csv(tmp_path):
    path = tmp_path / "surface.csv"
    write_surface_csv(path, np.array([[0.5, -1.0], [2.0, 3.0]]), [0.1, 0.2])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "y", "predicted_score"]
    assert [float(v) for v in rows[2]] == [2.0, 3.0, 0.2]
