"""Plug-in covariance of the scaled joint discrepancy vector.

The tested object is ``z = sqrt(n) * [D_1, ..., D_l]`` where ``D_j``
estimates the squared discrepancy of candidate j to the same reference
sample. For complete U-statistics the covariance of z converges to
``4 * Cov(g_i, g_j)`` where ``g_i`` is the per-point conditional mean of
the pair kernel of model i (the projection of the U-statistic); the
plug-in replaces the conditional means with their leave-one-out empirical
versions. For linear estimators the covariance is ``(n / m) * Cov`` of the
m disjoint-pair kernel streams.

Cross terms between models are correlated only through the shared
reference sample, which is exactly what the per-point construction
captures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discrepancy import (
    DiscrepancyKind,
    ScoreFunction,
    as_sample,
    h_gram,
    h_pair_values,
    stein_gram,
    u_pair_values,
)
from .kernels import KernelSpec


@dataclass
class DiscrepancyVector:
    """sqrt(n)-scaled discrepancies of l candidates plus their covariance estimate."""

    values: np.ndarray  # (l,)
    sigma_hat: np.ndarray  # (l, l), raw plug-in estimate (not regularized)
    n: int
    kind: DiscrepancyKind


def _projection_means(M: np.ndarray) -> np.ndarray:
    # leave-one-out row means of a symmetric pair-kernel matrix
    n = M.shape[0]
    return (M.sum(axis=1) - np.diag(M)) / (n - 1)


def mmd_projection_means(spec: KernelSpec, X, Y) -> np.ndarray:
    """g_i = mean over j != i of h(z_i, z_j) for the paired rows z = (X, Y).

    The mean of g equals the complete U-statistic exactly.
    """
    return _projection_means(h_gram(spec, X, Y))


def ksd_projection_means(spec: KernelSpec, score: ScoreFunction, X) -> np.ndarray:
    """g_i = mean over j != i of u(x_i, x_j); mean of g equals the complete U-statistic."""
    X = as_sample(X, "X", min_rows=2)
    return _projection_means(stein_gram(spec, score, X))


def _four_cov(G: np.ndarray) -> np.ndarray:
    # 4 * empirical covariance (1/n normalization) of the projection columns
    n = G.shape[0]
    C = G - G.mean(axis=0, keepdims=True)
    return 4.0 * (C.T @ C) / n


def mmd_joint_covariance(spec: KernelSpec, model_samples: Sequence[np.ndarray], Y) -> np.ndarray:
    """Plug-in covariance of z for complete MMD estimators of l models against Y."""
    Y = as_sample(Y, "reference", min_rows=2)
    G = np.column_stack([mmd_projection_means(spec, X, Y) for X in model_samples])
    return _four_cov(G)


def ksd_joint_covariance(spec: KernelSpec, scores: Sequence[ScoreFunction], X) -> np.ndarray:
    """Plug-in covariance of z for complete KSD estimators of l score functions on X."""
    X = as_sample(X, "X", min_rows=2)
    G = np.column_stack([ksd_projection_means(spec, s, X) for s in scores])
    return _four_cov(G)


def _stream_cov(V: np.ndarray, n: int) -> np.ndarray:
    m = V.shape[0]
    C = V - V.mean(axis=0, keepdims=True)
    return (n / m) * (C.T @ C) / m


def mmd_linear_covariance(spec: KernelSpec, model_samples: Sequence[np.ndarray], Y) -> np.ndarray:
    """Covariance of z for linear MMD estimators, from the disjoint-pair h streams."""
    Y = as_sample(Y, "reference", min_rows=2)
    V = np.column_stack([h_pair_values(spec, X, Y) for X in model_samples])
    return _stream_cov(V, Y.shape[0])


def ksd_linear_covariance(spec: KernelSpec, scores: Sequence[ScoreFunction], X) -> np.ndarray:
    """Covariance of z for linear KSD estimators, from the disjoint-pair u streams."""
    X = as_sample(X, "X", min_rows=2)
    V = np.column_stack([u_pair_values(spec, s, X) for s in scores])
    return _stream_cov(V, X.shape[0])


def regularize(sigma: np.ndarray, floor: float | None = None, return_shift: bool = False):
    """Symmetrize exactly, then add the smallest eps*I lifting the minimum eigenvalue to floor.

    The default floor is 1e-8 of the mean diagonal, with an absolute
    fallback of 1e-12 so that an all-zero matrix still becomes invertible.
    """
    S = np.asarray(sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("sigma must be a square matrix")
    if not np.isfinite(S).all():
        raise ValueError("sigma contains non-finite entries")
    S = (S + S.T) / 2.0
    n = S.shape[0]
    if floor is None:
        floor = max(1e-8 * float(np.trace(S)) / n, 1e-12)
    min_eig = float(np.linalg.eigvalsh(S)[0])
    shift = max(0.0, floor - min_eig)
    out = S + shift * np.eye(n) if shift > 0.0 else S
    if return_shift:
        return out, shift
    return out


def joint_vector(
    spec: KernelSpec,
    kind: DiscrepancyKind,
    models_data: Sequence,
    reference,
) -> DiscrepancyVector:
    """Estimate z and its raw covariance in one pass.

    ``models_data`` holds one sample per model for MMD kinds, or one score
    function per model for KSD kinds. The reference sample is shared.
    """
    kind = DiscrepancyKind.parse(kind)
    reference = as_sample(reference, "reference", min_rows=2)
    n = reference.shape[0]
    if kind.is_mmd:
        samples = [as_sample(X, "model sample", min_rows=2) for X in models_data]
        for X in samples:
            if X.shape != reference.shape:
                raise ValueError(
                    f"model sample shape {X.shape} does not match reference {reference.shape}"
                )
        if kind.is_linear:
            V = np.column_stack([h_pair_values(spec, X, reference) for X in samples])
            sigma = _stream_cov(V, n)
            values = np.sqrt(n) * V.mean(axis=0)
        else:
            G = np.column_stack([mmd_projection_means(spec, X, reference) for X in samples])
            sigma = _four_cov(G)
            values = np.sqrt(n) * G.mean(axis=0)
    else:
        if kind.is_linear:
            V = np.column_stack([u_pair_values(spec, s, reference) for s in models_data])
            sigma = _stream_cov(V, n)
            values = np.sqrt(n) * V.mean(axis=0)
        else:
            G = np.column_stack([ksd_projection_means(spec, s, reference) for s in models_data])
            sigma = _four_cov(G)
            values = np.sqrt(n) * G.mean(axis=0)
    return DiscrepancyVector(values=values, sigma_hat=sigma, n=n, kind=kind)
