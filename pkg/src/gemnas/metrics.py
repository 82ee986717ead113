"""Correlation statistics and a power-iteration PCA for score-surface export."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats


class UndefinedStatisticError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} after {iterations} iterations")
        self.iterations = iterations


@dataclass(frozen=True)
class CorrelationReport:
    kendall_tau: float
    pearson_r: float
    n_pairs: int


def _paired(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise UndefinedStatisticError("need at least two observations")
    return x, y


def kendall_tau(x, y) -> float:
    """Tie-corrected Kendall tau-b."""
    x, y = _paired(x, y)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedStatisticError("kendall tau is undefined when a list is all tied")
    tau = stats.kendalltau(x, y, variant="b").statistic
    return float(np.clip(tau, -1.0, 1.0))


def pearson(x, y) -> float:
    x, y = _paired(x, y)
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = xc @ xc, yc @ yc
    if sxx == 0 or syy == 0:
        raise UndefinedStatisticError("pearson r is undefined for zero-variance input")
    return float(np.clip(xc @ yc / np.sqrt(sxx * syy), -1.0, 1.0))


def correlation_report(x, y) -> CorrelationReport:
    return CorrelationReport(kendall_tau(x, y), pearson(x, y), len(x))


@dataclass
class Projection:
    coords: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_share: np.ndarray
    mean: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.coords @ self.components + self.mean


def _fix_sign(v):
    k = np.argmax(np.abs(v))
    return v if v[k] >= 0 else -v


def pca_project(vectors, k: int = 2, tol: float = 1e-10, max_iter: int = 10_000) -> Projection:
    """Project mean-centred vectors onto the top-``k`` covariance eigenvectors.

    Eigenvectors come from power iteration with deflation; each iterate is
    kept orthogonal to the components already found. Iteration stops when the
    eigen-residual ``||C v - (v'Cv) v||`` drops below ``tol`` times the
    covariance trace.
    """
    x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n, d = x.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}]")
    if n < k + 1:
        raise ValueError(f"need at least {k + 1} vectors for k={k}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / n
    scale = max(np.trace(cov), np.finfo(float).tiny)
    deflated = cov.copy()
    rng = np.random.default_rng(0)
    components, values = [], []
    for _ in range(k):
        basis = np.array(components).reshape(-1, d)
        v = rng.standard_normal(d)
        v -= basis.T @ (basis @ v)
        v /= np.linalg.norm(v)
        for it in range(1, max_iter + 1):
            w = deflated @ v
            w -= basis.T @ (basis @ w)
            lam = v @ w
            if np.linalg.norm(w - lam * v) <= tol * scale:
                break
            norm = np.linalg.norm(w)
            if norm == 0:
                break
            v = w / norm
        else:
            raise ConvergenceError(f"power iteration for component {len(components) + 1} did not converge", max_iter)
        v = _fix_sign(v)
        lam = float(v @ cov @ v)
        components.append(v)
        values.append(lam)
        deflated -= lam * np.outer(v, v)
    comps = np.array(components)
    values = np.array(values)
    total = np.trace(cov)
    share = values / total if total > 0 else np.zeros_like(values)
    return Projection(xc @ comps.T, comps, values, share, mean)


def write_surface_csv(path, coords, scores) -> None:
    coords = np.asarray(coords)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "predicted_score"])
        for (a, b), s in zip(coords[:, :2], scores):
            writer.writerow([repr(float(a)), repr(float(b)), repr(float(s))])
