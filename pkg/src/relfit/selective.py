"""Truncated-normal machinery and the polyhedral selection lemma.

Conditioning a Gaussian contrast ``eta'z`` on an affine selection event
``A z <= b`` yields a normal truncated to a computable interval
``(V-, V+)``. This module computes that interval, plus tail-safe CDF,
quantile, threshold and p-value routines for the truncated normal.

All probability work is done through the log of the standard normal CDF
(and its inverse), so one-sided and far-tail truncations keep full
relative accuracy instead of underflowing to 0/0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri, ndtri_exp


class DegenerateTruncationError(RuntimeError):
    """The truncation interval carries no representable probability mass.

    Signals a numerically impossible selection event; carries the interval.
    """

    def __init__(self, lower: float, upper: float):
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"truncated-normal mass underflows to zero on interval ({lower}, {upper})"
        )


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mu, sigma^2) truncated to [lower, upper]."""

    mu: float
    sigma: float
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self) -> None:
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive and finite")
        if not self.lower < self.upper:
            raise ValueError(f"empty truncation interval ({self.lower}, {self.upper})")


@dataclass(frozen=True)
class TruncationInterval:
    """Interval (lower, upper) produced by the polyhedral lemma."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.lower <= self.upper:
            raise ValueError(f"invalid interval ({self.lower}, {self.upper})")


@dataclass(frozen=True)
class SelectionEvent:
    """Affine constraints A z <= b encoding that index ``selected`` attained the arg-min."""

    A: np.ndarray  # (l-1, l) with +1 at the selected column, -1 at the competitor
    b: np.ndarray  # (l-1,), all zeros for arg-min selection
    selected: int


@dataclass(frozen=True)
class Contrast:
    """Contrast eta with -1 at the reference index and +1 at the tested index."""

    eta: np.ndarray
    target: int
    reference: int


def selection_event(selected: int, l: int) -> SelectionEvent:
    """Constraints stating that candidate ``selected`` has the smallest value."""
    if not 0 <= selected < l or l < 2:
        raise ValueError(f"selected index {selected} out of range for l={l}")
    rows = [s for s in range(l) if s != selected]
    A = np.zeros((l - 1, l))
    A[np.arange(l - 1), selected] = 1.0
    A[np.arange(l - 1), rows] = -1.0
    return SelectionEvent(A=A, b=np.zeros(l - 1), selected=selected)


def contrast(target: int, reference: int, l: int) -> Contrast:
    """eta with +1 at ``target`` and -1 at ``reference``; eta'z is the tested statistic."""
    if target == reference:
        raise ValueError("contrast target must differ from the reference index")
    if not (0 <= target < l and 0 <= reference < l):
        raise ValueError("contrast indices out of range")
    eta = np.zeros(l)
    eta[target] = 1.0
    eta[reference] = -1.0
    return Contrast(eta=eta, target=target, reference=reference)


def _log_phi(t: float, a: float, b: float) -> float:
    """log Phi(t); raises when the log itself is not representable."""
    out = float(log_ndtr(t))
    if not math.isfinite(out):
        raise DegenerateTruncationError(a, b)
    return out


def _interval_cdf(a: float, x: float, b: float) -> float:
    """(Phi(x) - Phi(a)) / (Phi(b) - Phi(a)) for standardized a <= x <= b, tail-safely."""
    if a == -math.inf and b == math.inf:
        return float(ndtr(x))
    if a == -math.inf:
        return math.exp(_log_phi(x, a, b) - _log_phi(b, a, b))
    if b == math.inf:
        return -math.expm1(_log_phi(-x, a, b) - _log_phi(-a, a, b))
    if a + b >= 0.0:  # work in the survival-function tail
        la, lx, lb = _log_phi(-a, a, b), _log_phi(-x, a, b), _log_phi(-b, a, b)
        num = -math.expm1(lx - la)
        den = -math.expm1(lb - la)
    else:
        la, lx, lb = _log_phi(a, a, b), _log_phi(x, a, b), _log_phi(b, a, b)
        num = math.expm1(lx - la)
        den = math.expm1(lb - la)
    if den <= 0.0 or not math.isfinite(den):
        raise DegenerateTruncationError(a, b)
    return min(max(num / den, 0.0), 1.0)


def truncnorm_cdf(tn: TruncatedNormal, x: float) -> float:
    """CDF of the truncated normal at x; x is clamped into [lower, upper]."""
    a = (tn.lower - tn.mu) / tn.sigma
    b = (tn.upper - tn.mu) / tn.sigma
    z = (x - tn.mu) / tn.sigma
    z = min(max(z, a), b)
    return _interval_cdf(a, z, b)


def _interval_quantile(a: float, b: float, q: float) -> float:
    """Standardized quantile: solve (Phi(x)-Phi(a))/(Phi(b)-Phi(a)) = q.

    Closed form through the inverse log-CDF; a short bisection polish on
    the tail-safe CDF guards the rare cases where the closed form loses
    accuracy.
    """
    if a == -math.inf and b == math.inf:
        x = float(ndtri(q))
    elif a == -math.inf:
        x = float(ndtri_exp(_log_phi(b, a, b) + math.log(q)))
    elif b == math.inf:
        lxbar = _log_phi(-a, a, b) + math.log1p(-q)
        x = float(-ndtri_exp(lxbar))
    elif a + b >= 0.0:
        la, lb = _log_phi(-a, a, b), _log_phi(-b, a, b)
        lxbar = la + math.log1p(q * math.expm1(lb - la))
        x = float(-ndtri_exp(lxbar))
    else:
        la, lb = _log_phi(a, a, b), _log_phi(b, a, b)
        lx = la + math.log1p(q * math.expm1(lb - la))
        x = float(ndtri_exp(lx))
    if not math.isfinite(x):
        raise DegenerateTruncationError(a, b)
    x = min(max(x, a), b)
    if abs(_interval_cdf(a, x, b) - q) > 1e-11:
        lo = a if math.isfinite(a) else min(-12.0, x - 1.0)
        hi = b if math.isfinite(b) else max(12.0, x + 1.0)
        for _ in range(64):
            if _interval_cdf(a, hi, b) >= q or hi >= b:
                break
            hi = min(b, hi + 8.0)
        for _ in range(64):
            if _interval_cdf(a, lo, b) <= q or lo <= a:
                break
            lo = max(a, lo - 8.0)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if _interval_cdf(a, mid, b) < q:
                lo = mid
            else:
                hi = mid
        x = 0.5 * (lo + hi)
    return x


def truncnorm_quantile(tn: TruncatedNormal, q: float) -> float:
    """Quantile of the truncated normal: the x with CDF(x) = q, 0 < q < 1."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    a = (tn.lower - tn.mu) / tn.sigma
    b = (tn.upper - tn.mu) / tn.sigma
    return tn.mu + tn.sigma * _interval_quantile(a, b, q)


def polyhedral_truncation(A, b, z, sigma, eta) -> TruncationInterval:
    """Truncation interval of eta'z conditional on the affine event A z <= b.

    With ``alpha = A Sigma eta / (eta' Sigma eta)``, the interval is
    ``V- = max over alpha_j < 0 of (b_j - (Az)_j) / alpha_j + eta'z`` and
    ``V+ = min over alpha_j > 0`` of the same expression; rows with
    ``alpha_j ~ 0`` are skipped and empty extrema give -inf / +inf.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    sigma = np.asarray(sigma, dtype=float)
    eta = np.asarray(eta, dtype=float).reshape(-1)
    resid = b - A @ z
    if np.any(resid < -1e-9 * max(1.0, float(np.abs(z).max()))):
        raise ValueError("selection constraints A z <= b are violated by the observed z")
    var_eta = float(eta @ sigma @ eta)
    if var_eta <= 0.0:
        raise ValueError("eta' Sigma eta must be positive; regularize the covariance first")
    alpha = (A @ sigma @ eta) / var_eta
    stat = float(eta @ z)
    tol = 1e-12 * float(np.abs(alpha).max()) if alpha.size else 0.0
    neg = alpha < -tol
    pos = alpha > tol
    lower = float(np.max(resid[neg] / alpha[neg]) + stat) if neg.any() else -math.inf
    upper = float(np.min(resid[pos] / alpha[pos]) + stat) if pos.any() else math.inf
    # floating point can land the statistic a hair outside on near-ties
    lower = min(lower, stat)
    upper = max(upper, stat)
    return TruncationInterval(lower=lower, upper=upper)


def selective_threshold(sigma_eta: float, interval: TruncationInterval, alpha: float) -> float:
    """Rejection threshold: the (1 - alpha)-quantile of TN(0, sigma_eta^2, V-, V+)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    tn = TruncatedNormal(mu=0.0, sigma=sigma_eta, lower=interval.lower, upper=interval.upper)
    return truncnorm_quantile(tn, 1.0 - alpha)


def selective_pvalue(stat: float, sigma_eta: float, interval: TruncationInterval) -> float:
    """One-sided selective p-value: 1 - CDF of TN(0, sigma_eta^2, V-, V+) at the statistic."""
    tn = TruncatedNormal(mu=0.0, sigma=sigma_eta, lower=interval.lower, upper=interval.upper)
    return 1.0 - truncnorm_cdf(tn, stat)
