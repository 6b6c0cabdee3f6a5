"""Top-level relative-fit tests over l candidate models.

Three procedures are provided, all sharing the same discrepancy plumbing:

* :func:`rel_psi` selects the candidate with the smallest estimated
  discrepancy on the full sample and tests every other candidate against
  it, correcting for the selection through the truncated-normal
  conditional law.
* :func:`rel_multi` splits the data, selects on one part, tests on the
  other with plain normal p-values, and controls the false discovery rate
  across the l - 1 tests with the Benjamini-Yekutieli step-up.
* :func:`rel_pair` is the fixed two-model test (no selection): it asks
  whether model 1 fits significantly worse than model 2.

Candidates are either samples (MMD kinds) or score functions of
unnormalized densities (KSD kinds); all candidates in one comparison must
share one representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from . import covariance as cov
from .discrepancy import DiscrepancyKind, ScoreFunction, as_sample
from .kernels import GAUSSIAN, KernelSpec, median_heuristic
from .selective import (
    contrast,
    polyhedral_truncation,
    selection_event,
    selective_pvalue,
    selective_threshold,
)


@dataclass
class SampleModel:
    """Candidate represented by a sample: fixed data or a seeded sampler."""

    data: np.ndarray | None = None
    sampler: Callable[[int, np.random.Generator], np.ndarray] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if (self.data is None) == (self.sampler is None):
            raise ValueError("SampleModel needs exactly one of data or sampler")


@dataclass
class DensityModel:
    """Candidate represented by the score function of its unnormalized density."""

    score: ScoreFunction = None  # type: ignore[assignment]
    name: str = ""

    def __post_init__(self) -> None:
        if not callable(self.score):
            raise ValueError("DensityModel.score must be callable")


CandidateModel = SampleModel | DensityModel


@dataclass
class ComparisonResult:
    """Outcome of a multi-model comparison.

    Arrays have length l; entries for the selected model (and, in fixed
    mode, any untested model) are NaN. ``decisions[i] = 1`` declares model
    i significantly worse than the selected reference.
    """

    selected: int
    decisions: np.ndarray
    statistics: np.ndarray
    thresholds: np.ndarray
    pvalues: np.ndarray
    diagnostics: dict = field(default_factory=dict)


@dataclass
class PairResult:
    """Outcome of the fixed two-model test."""

    statistic: float
    sigma: float
    threshold: float
    reject: bool
    pvalue: float
    diagnostics: dict = field(default_factory=dict)


def select_reference(values) -> int:
    """Arg-min index of the estimated discrepancies; ties break to the lowest index."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size < 2:
        raise ValueError("need at least two candidate values to select a reference")
    if not np.isfinite(v).all():
        raise ValueError("discrepancy values contain non-finite entries")
    return int(np.argmin(v))


def by_correction(pvalues, alpha: float) -> np.ndarray:
    """Benjamini-Yekutieli step-up over m p-values; returns rejection bits.

    Rejects the hypotheses with the i smallest p-values, where i is the
    largest rank with p_(i) <= i * alpha / (m * c(m)) and c(m) is the
    harmonic number; valid under arbitrary dependence.
    """
    p = np.asarray(pvalues, dtype=float).reshape(-1)
    if p.size == 0:
        raise ValueError("no p-values given")
    if not np.isfinite(p).all() or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    c_m = float(np.sum(1.0 / np.arange(1, m + 1)))
    order = np.argsort(p, kind="stable")
    levels = alpha * np.arange(1, m + 1) / (m * c_m)
    passed = np.nonzero(p[order] <= levels)[0]
    bits = np.zeros(m, dtype=int)
    if passed.size:
        bits[order[: passed[-1] + 1]] = 1
    return bits


def _check_kind(models: Sequence[CandidateModel], kind: DiscrepancyKind) -> None:
    if kind.is_mmd:
        bad = [m for m in models if not isinstance(m, SampleModel)]
        if bad:
            raise ValueError("MMD kinds require sample-based candidates")
    else:
        bad = [m for m in models if not isinstance(m, DensityModel)]
        if bad:
            raise ValueError("KSD kinds require density (score function) candidates")


def _materialize(models: Sequence[SampleModel], n: int, d: int, seed) -> list[np.ndarray]:
    children = np.random.SeedSequence(seed).spawn(len(models))
    out = []
    for model, child in zip(models, children):
        if model.data is not None:
            X = as_sample(model.data, f"model {model.name or '?'} sample", min_rows=2)
        else:
            X = as_sample(model.sampler(n, np.random.default_rng(child)), "sampled model data", min_rows=2)
        if X.shape != (n, d):
            raise ValueError(
                f"model sample shape {X.shape} does not match reference shape {(n, d)}"
            )
        out.append(X)
    return out


def median_kernel_spec(
    kind: DiscrepancyKind,
    reference: np.ndarray,
    model_samples: Sequence[np.ndarray] = (),
    cap: int = 2048,
) -> KernelSpec:
    """Gaussian spec with bandwidth from the median heuristic.

    MMD pools the reference with all model samples; KSD uses the reference
    alone. Pools larger than ``cap`` rows are thinned with a deterministic
    stride to keep the O(n^2) distance computation tractable.
    """
    if kind.is_mmd:
        pooled = np.vstack([as_sample(reference)] + [as_sample(X) for X in model_samples])
    else:
        pooled = as_sample(reference)
    if pooled.shape[0] > cap:
        stride = int(np.ceil(pooled.shape[0] / cap))
        pooled = pooled[::stride]
    return KernelSpec(family=GAUSSIAN, bandwidth=median_heuristic(pooled))


def _resolve_kernel(spec, kind: DiscrepancyKind, reference, model_samples) -> KernelSpec:
    if isinstance(spec, KernelSpec):
        return spec
    if spec == "median":
        return median_kernel_spec(kind, reference, model_samples)
    raise ValueError("spec must be a KernelSpec or the string 'median'")


def _prepare(models, reference, spec, kind, seed):
    kind = DiscrepancyKind.parse(kind)
    if len(models) < 2:
        raise ValueError("need at least two candidate models")
    _check_kind(models, kind)
    Y = as_sample(reference, "reference", min_rows=2)
    n, d = Y.shape
    if kind.is_mmd:
        data = _materialize(models, n, d, seed)
        spec = _resolve_kernel(spec, kind, Y, data)
    else:
        data = [m.score for m in models]
        spec = _resolve_kernel(spec, kind, Y, ())
    return kind, Y, data, spec


def rel_psi(
    models: Sequence[CandidateModel],
    reference,
    spec,
    kind,
    alpha: float = 0.05,
    *,
    fixed_eta=None,
    seed=0,
) -> ComparisonResult:
    """Select the best candidate on the full sample and test the rest against it.

    For each i != selected, the statistic eta'z = sqrt(n)(D_i - D_selected)
    is compared with the (1 - alpha)-quantile of the truncated normal given
    by the polyhedral lemma, with the conservative choice eta'mu = 0.

    ``fixed_eta`` switches to fixed-hypothesis mode: the given contrast is
    tested instead of the data-dependent ones (selection still defines the
    truncation interval, flipping it to (-inf, 0) when the tested model
    itself gets selected). Used for head-to-head comparison with the fixed
    pair test; unlike the adaptive mode, the tested index may coincide with
    the selected one.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    kind, Y, data, spec = _prepare(models, reference, spec, kind, seed)
    if Y.shape[0] < 4:
        raise ValueError("need a reference sample of at least 4 rows")
    l = len(models)
    dv = cov.joint_vector(spec, kind, data, Y)
    sigma, shift = cov.regularize(dv.sigma_hat, return_shift=True)
    j_hat = select_reference(dv.values)
    event = selection_event(j_hat, l)

    decisions = np.zeros(l, dtype=int)
    statistics = np.full(l, np.nan)
    thresholds = np.full(l, np.nan)
    pvalues = np.full(l, np.nan)
    intervals: dict[int, tuple[float, float]] = {}

    if fixed_eta is not None:
        eta = np.asarray(fixed_eta, dtype=float).reshape(-1)
        if eta.shape[0] != l:
            raise ValueError(f"fixed_eta must have length {l}")
        targets = [int(np.argmax(eta))]
        etas = [eta]
    else:
        targets = [i for i in range(l) if i != j_hat]
        etas = [contrast(i, j_hat, l).eta for i in targets]

    for i, eta in zip(targets, etas):
        sigma_eta = float(np.sqrt(eta @ sigma @ eta))
        interval = polyhedral_truncation(event.A, event.b, dv.values, sigma, eta)
        stat = float(eta @ dv.values)
        t_alpha = selective_threshold(sigma_eta, interval, alpha)
        statistics[i] = stat
        thresholds[i] = t_alpha
        pvalues[i] = selective_pvalue(stat, sigma_eta, interval)
        decisions[i] = int(stat > t_alpha)
        intervals[i] = (interval.lower, interval.upper)

    return ComparisonResult(
        selected=j_hat,
        decisions=decisions,
        statistics=statistics,
        thresholds=thresholds,
        pvalues=pvalues,
        diagnostics={
            "test": "relpsi",
            "kind": kind.value,
            "alpha": alpha,
            "n": dv.n,
            "regularized": shift > 0.0,
            "bandwidth": spec.bandwidth if spec.family == GAUSSIAN else None,
            "kernel": spec.family,
            "intervals": intervals,
            "fixed": fixed_eta is not None,
        },
    )


def rel_multi(
    models: Sequence[CandidateModel],
    reference,
    spec,
    kind,
    alpha: float = 0.05,
    rho: float = 0.5,
    *,
    seed=0,
) -> ComparisonResult:
    """Data-splitting comparison with false discovery rate control.

    The first (1 - rho) fraction of rows selects the reference candidate;
    the remaining rho fraction produces normal p-values for each other
    candidate, which are corrected with Benjamini-Yekutieli (no correction
    for l = 2). Callers who need a random split should shuffle rows first.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie strictly inside (0, 1)")
    kind, Y, data, spec = _prepare(models, reference, spec, kind, seed)
    n = Y.shape[0]
    n_test = int(round(rho * n))
    n_sel = n - n_test
    if n_sel < 2 or n_test < 2:
        raise ValueError(f"split sizes ({n_sel}, {n_test}) too small; need at least 2 rows each")
    l = len(models)

    if kind.is_mmd:
        sel_data = [X[:n_sel] for X in data]
        test_data = [X[n_sel:] for X in data]
    else:
        sel_data = data
        test_data = data
    sel_vector = cov.joint_vector(spec, kind, sel_data, Y[:n_sel])
    j_hat = select_reference(sel_vector.values)

    dv = cov.joint_vector(spec, kind, test_data, Y[n_sel:])
    sigma, shift = cov.regularize(dv.sigma_hat, return_shift=True)

    decisions = np.zeros(l, dtype=int)
    statistics = np.full(l, np.nan)
    thresholds = np.full(l, np.nan)
    pvalues = np.full(l, np.nan)
    targets = [i for i in range(l) if i != j_hat]
    for i in targets:
        eta = contrast(i, j_hat, l).eta
        sigma_eta = float(np.sqrt(eta @ sigma @ eta))
        stat = float(eta @ dv.values)
        statistics[i] = stat
        pvalues[i] = float(1.0 - ndtr(stat / sigma_eta))
        thresholds[i] = sigma_eta * float(ndtri(1.0 - alpha))

    if l == 2:
        rejected = (pvalues[targets] <= alpha).astype(int)
    else:
        rejected = by_correction(pvalues[targets], alpha)
    decisions[targets] = rejected

    return ComparisonResult(
        selected=j_hat,
        decisions=decisions,
        statistics=statistics,
        thresholds=thresholds,
        pvalues=pvalues,
        diagnostics={
            "test": "relmulti",
            "kind": kind.value,
            "alpha": alpha,
            "n": n,
            "rho": rho,
            "n_test": n_test,
            "regularized": shift > 0.0,
            "bandwidth": spec.bandwidth if spec.family == GAUSSIAN else None,
            "kernel": spec.family,
        },
    )


def rel_pair(
    model1: CandidateModel,
    model2: CandidateModel,
    reference,
    spec,
    kind,
    alpha: float = 0.05,
    *,
    seed=0,
) -> PairResult:
    """Fixed two-model test of H0: model 1 fits at least as well as model 2.

    The statistic is sqrt(n)(D_1 - D_2); the null is rejected (model 1
    declared worse) when it exceeds sigma_hat * Phi^{-1}(1 - alpha) with
    sigma_hat^2 = S11 - 2 S12 + S22 from the joint plug-in covariance.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    kind, Y, data, spec = _prepare([model1, model2], reference, spec, kind, seed)
    dv = cov.joint_vector(spec, kind, data, Y)
    sigma, shift = cov.regularize(dv.sigma_hat, return_shift=True)
    eta = np.array([1.0, -1.0])
    sigma_eta = float(np.sqrt(eta @ sigma @ eta))
    stat = float(eta @ dv.values)
    threshold = sigma_eta * float(ndtri(1.0 - alpha))
    return PairResult(
        statistic=stat,
        sigma=sigma_eta,
        threshold=threshold,
        reject=bool(stat > threshold),
        pvalue=float(1.0 - ndtr(stat / sigma_eta)),
        diagnostics={
            "test": "relpair",
            "kind": kind.value,
            "alpha": alpha,
            "n": dv.n,
            "regularized": shift > 0.0,
            "bandwidth": spec.bandwidth if spec.family == GAUSSIAN else None,
            "kernel": spec.family,
        },
    )
