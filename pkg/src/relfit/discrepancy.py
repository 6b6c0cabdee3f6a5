"""U-statistic estimators of squared MMD and squared KSD.

MMD compares two equal-size samples through the pair kernel
``h(z, z') = k(x, x') + k(y, y') - k(x, y') - k(x', y)`` with ``z = (x, y)``.
KSD compares an unnormalized density, represented by its score function
``s(x) = grad_x log p(x)``, against a sample through the Stein kernel
``u(x, x') = s(x)'s(x')k + s(x)'grad_y k + grad_x k's(x') + tr(grad_xy k)``.

Complete estimators average the pair kernel over all ordered pairs i != j
(O(n^2)); linear estimators average over the floor(n/2) disjoint consecutive
pairs in row order (O(n)). If n is odd the final row is dropped. Linear
estimators therefore depend on row order; complete ones do not.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable

import numpy as np

from .kernels import (
    GAUSSIAN,
    KernelSpec,
    _from_sqdist,
    evaluate,
    grad_x,
    grad_y,
    gram,
    squared_distances,
    trace_grad_xy,
)

ScoreFunction = Callable[[np.ndarray], np.ndarray]


class DiscrepancyKind(Enum):
    """Which estimator drives a comparison."""

    MMD_COMPLETE = "mmd"
    MMD_LINEAR = "mmd-lin"
    KSD_COMPLETE = "ksd"
    KSD_LINEAR = "ksd-lin"

    @property
    def is_mmd(self) -> bool:
        return self in (DiscrepancyKind.MMD_COMPLETE, DiscrepancyKind.MMD_LINEAR)

    @property
    def is_linear(self) -> bool:
        return self in (DiscrepancyKind.MMD_LINEAR, DiscrepancyKind.KSD_LINEAR)

    @classmethod
    def parse(cls, name) -> "DiscrepancyKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name))
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown discrepancy kind {name!r}; choose from: {choices}") from None


def as_sample(data, name: str = "sample", min_rows: int = 1) -> np.ndarray:
    """Coerce to an (n, d) float matrix and validate it."""
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array of shape (n, d)")
    if X.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} rows, got {X.shape[0]}")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite entries")
    return X


def _paired(X, Y) -> tuple[np.ndarray, np.ndarray]:
    X = as_sample(X, "X", min_rows=2)
    Y = as_sample(Y, "Y", min_rows=2)
    if X.shape != Y.shape:
        raise ValueError(f"paired samples must have equal shape, got {X.shape} and {Y.shape}")
    return X, Y


def score_matrix(score: ScoreFunction, X: np.ndarray) -> np.ndarray:
    """Evaluate a score function once per point, accepting batched or per-row callables."""
    X = as_sample(X, "X")
    out = np.asarray(score(X), dtype=float)
    if out.shape != X.shape:
        # fall back to row-wise evaluation for single-point callables
        out = np.stack([np.asarray(score(x), dtype=float).reshape(-1) for x in X])
    if out.shape != X.shape:
        raise ValueError(f"score function returned shape {out.shape}, expected {X.shape}")
    bad = ~np.isfinite(out).all(axis=1)
    if bad.any():
        idx = int(np.nonzero(bad)[0][0])
        raise ValueError(f"score function returned non-finite values at point index {idx}")
    return out


# ---------------------------------------------------------------------------
# MMD
# ---------------------------------------------------------------------------

def h_kernel(spec: KernelSpec, z, z_prime) -> float:
    """Pair kernel h(z, z') = k(x,x') + k(y,y') - k(x,y') - k(x',y)."""
    x, y = z
    xp, yp = z_prime
    return float(
        evaluate(spec, x, xp) + evaluate(spec, y, yp)
        - evaluate(spec, x, yp) - evaluate(spec, xp, y)
    )


def h_gram(spec: KernelSpec, X, Y) -> np.ndarray:
    """Matrix H[i, j] = h(z_i, z_j) over the paired rows z_i = (X[i], Y[i])."""
    X, Y = _paired(X, Y)
    Kxy = gram(spec, X, Y)
    return gram(spec, X, X) + gram(spec, Y, Y) - Kxy - Kxy.T


def _offdiag_mean(M: np.ndarray) -> float:
    n = M.shape[0]
    return float((M.sum() - np.trace(M)) / (n * (n - 1)))


def mmd2_u_complete(spec: KernelSpec, X, Y) -> float:
    """Unbiased complete U-statistic of squared MMD on paired samples of size n >= 2."""
    return _offdiag_mean(h_gram(spec, X, Y))


def _rows_from_sqdist(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A - B
    return _from_sqdist(spec, (diff * diff).sum(axis=1))


def h_pair_values(spec: KernelSpec, X, Y) -> np.ndarray:
    """h over the floor(n/2) disjoint consecutive pairs (z_2, z_1), (z_4, z_3), ..."""
    X, Y = _paired(X, Y)
    m = X.shape[0] // 2
    xa, xb = X[1 : 2 * m : 2], X[0 : 2 * m : 2]
    ya, yb = Y[1 : 2 * m : 2], Y[0 : 2 * m : 2]
    return (
        _rows_from_sqdist(spec, xa, xb) + _rows_from_sqdist(spec, ya, yb)
        - _rows_from_sqdist(spec, xa, yb) - _rows_from_sqdist(spec, xb, ya)
    )


def mmd2_u_linear(spec: KernelSpec, X, Y) -> float:
    """Linear-time estimator: average of h over disjoint consecutive pairs."""
    return float(h_pair_values(spec, X, Y).mean())


# ---------------------------------------------------------------------------
# KSD
# ---------------------------------------------------------------------------

def stein_kernel(spec: KernelSpec, score: ScoreFunction, x, x_prime) -> float:
    """Stein kernel u(x, x') assembled from the kernel primitives."""
    x = np.asarray(x, dtype=float).reshape(-1)
    xp = np.asarray(x_prime, dtype=float).reshape(-1)
    sx = score_matrix(score, x[None, :])[0]
    sxp = score_matrix(score, xp[None, :])[0]
    return float(
        sx @ sxp * evaluate(spec, x, xp)
        + sx @ grad_y(spec, x, xp)
        + grad_x(spec, x, xp) @ sxp
        + trace_grad_xy(spec, x, xp)
    )


def stein_gram(spec: KernelSpec, score: ScoreFunction, X, scores: np.ndarray | None = None) -> np.ndarray:
    """Matrix U[i, j] = u(X[i], X[j]), with scores evaluated once per point."""
    X = as_sample(X, "X")
    S = score_matrix(score, X) if scores is None else np.asarray(scores, dtype=float)
    n, d = X.shape
    sq = squared_distances(X, X)
    SS = S @ S.T
    XS = X @ S.T  # XS[i, j] = x_i . s(x_j)
    SX = S @ X.T  # SX[i, j] = s(x_i) . x_j
    sx = (S * X).sum(axis=1)  # s(x_i) . x_i
    if spec.family == GAUSSIAN:
        bw2 = spec.bandwidth**2
        K = np.exp(-sq / (2.0 * bw2))
        term2 = (sx[:, None] - SX) * K / bw2  # s(x) . grad_y k
        term3 = (sx[None, :] - XS) * K / bw2  # grad_x k . s(x')
        trace = K * (d / bw2 - sq / bw2**2)
    else:
        beta = spec.imq_beta
        u = spec.imq_c**2 + sq
        K = u**beta
        G1 = u ** (beta - 1.0)
        term2 = -2.0 * beta * G1 * (sx[:, None] - SX)
        term3 = 2.0 * beta * G1 * (XS - sx[None, :])
        trace = -2.0 * beta * d * G1 - 4.0 * beta * (beta - 1.0) * sq * u ** (beta - 2.0)
    return SS * K + term2 + term3 + trace


def ksd2_u_complete(spec: KernelSpec, score: ScoreFunction, X) -> float:
    """Unbiased complete U-statistic of squared KSD on a sample of size n >= 2."""
    X = as_sample(X, "X", min_rows=2)
    return _offdiag_mean(stein_gram(spec, score, X))


def u_pair_values(spec: KernelSpec, score: ScoreFunction, X, scores: np.ndarray | None = None) -> np.ndarray:
    """Stein kernel over the floor(n/2) disjoint consecutive pairs."""
    X = as_sample(X, "X", min_rows=2)
    S = score_matrix(score, X) if scores is None else np.asarray(scores, dtype=float)
    m = X.shape[0] // 2
    A, B = X[1 : 2 * m : 2], X[0 : 2 * m : 2]
    SA, SB = S[1 : 2 * m : 2], S[0 : 2 * m : 2]
    diff = A - B
    sq = (diff * diff).sum(axis=1)
    ss = (SA * SB).sum(axis=1)
    sa_d = (SA * diff).sum(axis=1)
    sb_d = (SB * diff).sum(axis=1)
    d = X.shape[1]
    if spec.family == GAUSSIAN:
        bw2 = spec.bandwidth**2
        K = np.exp(-sq / (2.0 * bw2))
        return ss * K + sa_d * K / bw2 - sb_d * K / bw2 + K * (d / bw2 - sq / bw2**2)
    beta = spec.imq_beta
    u = spec.imq_c**2 + sq
    K = u**beta
    G1 = u ** (beta - 1.0)
    trace = -2.0 * beta * d * G1 - 4.0 * beta * (beta - 1.0) * sq * u ** (beta - 2.0)
    return ss * K - 2.0 * beta * G1 * sa_d + 2.0 * beta * G1 * sb_d + trace


def ksd2_u_linear(spec: KernelSpec, score: ScoreFunction, X) -> float:
    """Linear-time estimator: average of u over disjoint consecutive pairs."""
    return float(u_pair_values(spec, score, X).mean())
