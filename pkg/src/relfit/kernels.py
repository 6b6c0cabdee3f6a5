"""Positive definite kernels, their derivatives, and bandwidth selection.

Two characteristic families are supported:

* Gaussian: ``k(x, y) = exp(-||x - y||^2 / (2 * bandwidth^2))``
* inverse multiquadric (IMQ): ``k(x, y) = (imq_c^2 + ||x - y||^2) ** imq_beta``
  with ``imq_beta`` in (-1, 0).

Besides plain evaluation, the module provides the first-argument gradient
and the trace of the mixed second derivative, which are the ingredients of
the Stein kernel, plus the median-distance bandwidth rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

GAUSSIAN = "gaussian"
IMQ = "imq"
_FAMILIES = (GAUSSIAN, IMQ)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    ``bandwidth`` is the Gaussian length-scale, in the same units as the
    input coordinates. ``imq_c`` and ``imq_beta`` apply to the IMQ family
    only and are ignored for the Gaussian.
    """

    family: str = GAUSSIAN
    bandwidth: float = 1.0
    imq_c: float = 1.0
    imq_beta: float = -0.5

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}"
            )
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError("bandwidth must be positive and finite")
        if not (np.isfinite(self.imq_c) and self.imq_c > 0):
            raise ValueError("imq_c must be positive and finite")
        if not -1.0 < self.imq_beta < 0.0:
            raise ValueError("imq_beta must lie strictly inside (-1, 0)")


def _vector_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise ValueError(f"dimension mismatch: x has {x.shape[0]}, y has {y.shape[0]}")
    return x, y


def _from_sqdist(spec: KernelSpec, sq):
    """Kernel value as a function of the squared distance."""
    if spec.family == GAUSSIAN:
        return np.exp(-sq / (2.0 * spec.bandwidth**2))
    return (spec.imq_c**2 + sq) ** spec.imq_beta


def evaluate(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for two points of the same dimension."""
    x, y = _vector_pair(x, y)
    d = x - y
    return float(_from_sqdist(spec, d @ d))


def grad_x(spec: KernelSpec, x, y) -> np.ndarray:
    """Gradient of k in its first argument, in closed form.

    Gaussian: ``-(x - y) / bandwidth^2 * k(x, y)``.
    IMQ: ``2 * beta * (x - y) * (c^2 + ||x - y||^2) ** (beta - 1)``.
    """
    x, y = _vector_pair(x, y)
    d = x - y
    sq = d @ d
    if spec.family == GAUSSIAN:
        return -d / spec.bandwidth**2 * np.exp(-sq / (2.0 * spec.bandwidth**2))
    return 2.0 * spec.imq_beta * d * (spec.imq_c**2 + sq) ** (spec.imq_beta - 1.0)


def grad_y(spec: KernelSpec, x, y) -> np.ndarray:
    """Gradient of k in its second argument.

    Both families are radial, so this is the negative of :func:`grad_x`.
    """
    return -grad_x(spec, x, y)


def trace_grad_xy(spec: KernelSpec, x, y) -> float:
    """Sum over coordinates of d^2 k / dx_i dy_i."""
    x, y = _vector_pair(x, y)
    n_dim = x.shape[0]
    d = x - y
    sq = d @ d
    if spec.family == GAUSSIAN:
        bw2 = spec.bandwidth**2
        return float(np.exp(-sq / (2.0 * bw2)) * (n_dim / bw2 - sq / bw2**2))
    beta, u = spec.imq_beta, spec.imq_c**2 + sq
    return float(-2.0 * beta * n_dim * u ** (beta - 1.0) - 4.0 * beta * (beta - 1.0) * sq * u ** (beta - 2.0))


def squared_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of X and Y."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    sq = (X * X).sum(axis=1)[:, None] + (Y * Y).sum(axis=1)[None, :] - 2.0 * (X @ Y.T)
    np.maximum(sq, 0.0, out=sq)
    return sq


def gram(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Kernel matrix K[i, j] = k(X[i], Y[j]) for row samples X (n, d), Y (m, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return _from_sqdist(spec, squared_distances(X, Y))


def median_heuristic(pooled: np.ndarray) -> float:
    """Median of the pairwise Euclidean distances ||x_i - x_j|| over i < j.

    Used as the Gaussian bandwidth. Raises if fewer than two rows are given
    or if the median distance is zero (degenerate sample).
    """
    X = np.asarray(pooled, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("median heuristic needs a 2-d sample with at least two rows")
    if not np.isfinite(X).all():
        raise ValueError("median heuristic input contains non-finite entries")
    med = float(np.median(pdist(X)))
    if med <= 0.0:
        raise ValueError("median pairwise distance is zero; bandwidth would degenerate")
    return med
