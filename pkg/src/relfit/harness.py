"""Monte-Carlo benchmark harness: per-trial runs, error-rate metrics, file output.

A benchmark run draws fresh samples for every trial (trial seeds are the
root seed plus the trial index), executes one of the comparison tests, and
scores the decision bits against the problem's ground-truth labels:

* TPR - fraction of truly-worse models declared worse,
* FPR - fraction of as-good-as-best models declared worse,
* FDR - fraction of declared-worse models that were actually as good.

Aggregates are means over trials with their standard errors. Results are
written as CSV (one row per configuration) with a fixed, versioned column
order; single comparisons serialize to JSON.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .comparison import (
    ComparisonResult,
    PairResult,
    rel_multi,
    rel_pair,
    rel_psi,
)
from .discrepancy import DiscrepancyKind
from .kernels import GAUSSIAN, IMQ, KernelSpec
from .models import Problem, available_problems, make_problem

SCHEMA_VERSION = 1

TESTS = ("relpsi", "relmulti", "relpair", "relpsi-fixed")

METRIC_COLUMNS = [
    "schema_version",
    "problem",
    "test",
    "kind",
    "n",
    "param",
    "alpha",
    "rho",
    "trials",
    "seed",
    "tpr",
    "tpr_se",
    "fpr",
    "fpr_se",
    "fdr",
    "fdr_se",
    "reject_rate",
    "reject_rate_se",
]


@dataclass
class TrialMetrics:
    """Error-rate aggregates over a batch of trials."""

    trials: int
    tpr: float
    tpr_se: float
    fpr: float
    fpr_se: float
    fdr: float
    fdr_se: float
    reject_rate: float
    reject_rate_se: float


@dataclass
class RunConfig:
    """One benchmark configuration; validated against the problem registry."""

    problem: str
    params: dict = field(default_factory=dict)
    test: str = "relpsi"
    kind: str = "mmd"
    kernel: str = GAUSSIAN
    bandwidth: float | str = "median"
    imq_c: float = 1.0
    imq_beta: float = -0.5
    alpha: float = 0.05
    trials: int = 100
    n: int = 500
    rho: float = 0.5
    seed: int = 0
    jobs: int = 1
    out: str | None = None

    def validate(self) -> None:
        if self.problem not in available_problems():
            raise ValueError(
                f"unknown problem {self.problem!r}; available: {', '.join(available_problems())}"
            )
        if self.test not in TESTS:
            raise ValueError(f"unknown test {self.test!r}; choose from {TESTS}")
        DiscrepancyKind.parse(self.kind)
        if self.kernel not in (GAUSSIAN, IMQ):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.kernel == IMQ and self.bandwidth == "median":
            raise ValueError("the median bandwidth rule applies to the gaussian kernel only")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (0, 1)")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie strictly inside (0, 1)")
        if self.trials < 1 or self.n < 4:
            raise ValueError("need trials >= 1 and n >= 4")

    def kernel_request(self):
        if self.bandwidth == "median":
            return "median"
        if self.kernel == IMQ:
            return KernelSpec(family=IMQ, imq_c=self.imq_c, imq_beta=self.imq_beta)
        return KernelSpec(family=GAUSSIAN, bandwidth=float(self.bandwidth))


def decision_rates(decisions, good, worse) -> tuple[float, float, float]:
    """Per-trial (TPR, FPR, FDR) from decision bits and ground-truth index sets."""
    dec = np.asarray(decisions, dtype=int)
    positives = set(np.nonzero(dec == 1)[0].tolist())
    fp = len(positives & set(good))
    tp = len(positives & set(worse))
    fpr = fp / len(good) if good else math.nan
    tpr = tp / len(worse) if worse else math.nan
    fdr = fp / max(1, fp + tp)
    return tpr, fpr, fdr


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    vals = values[~np.isnan(values)]
    if vals.size == 0:
        return math.nan, math.nan
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    return mean, se


def aggregate_metrics(decisions: Sequence[np.ndarray], problem: Problem) -> TrialMetrics:
    rows = np.array([decision_rates(d, problem.good, problem.worse) for d in decisions])
    rejects = np.array([float(d[problem.pair_target]) for d in decisions])
    tpr, tpr_se = _mean_se(rows[:, 0])
    fpr, fpr_se = _mean_se(rows[:, 1])
    fdr, fdr_se = _mean_se(rows[:, 2])
    rej, rej_se = _mean_se(rejects)
    return TrialMetrics(
        trials=len(decisions),
        tpr=tpr,
        tpr_se=tpr_se,
        fpr=fpr,
        fpr_se=fpr_se,
        fdr=fdr,
        fdr_se=fdr_se,
        reject_rate=rej,
        reject_rate_se=rej_se,
    )


def run_trial(problem: Problem, cfg: RunConfig, trial: int):
    """One seeded trial; returns the comparison result object."""
    trial_seed = cfg.seed + trial
    ref_rng = np.random.default_rng(np.random.SeedSequence([trial_seed, 0]))
    reference = problem.sample_reference(cfg.n, ref_rng)
    model_seed = [trial_seed, 1]
    spec = cfg.kernel_request()
    models = problem.models_for(cfg.kind)
    if cfg.test == "relpsi":
        return rel_psi(models, reference, spec, cfg.kind, cfg.alpha, seed=model_seed)
    if cfg.test == "relpsi-fixed":
        eta = np.zeros(len(models))
        eta[problem.pair_target] = 1.0
        other = 1 - problem.pair_target if len(models) == 2 else next(
            i for i in range(len(models)) if i != problem.pair_target
        )
        eta[other] = -1.0
        return rel_psi(models, reference, spec, cfg.kind, cfg.alpha, fixed_eta=eta, seed=model_seed)
    if cfg.test == "relmulti":
        return rel_multi(models, reference, spec, cfg.kind, cfg.alpha, cfg.rho, seed=model_seed)
    if cfg.test == "relpair":
        target = problem.pair_target
        other = next(i for i in range(len(models)) if i != target)
        pair = rel_pair(models[target], models[other], reference, spec, cfg.kind, cfg.alpha, seed=model_seed)
        return pair
    raise ValueError(f"unknown test {cfg.test!r}")


def _decisions_of(result, problem: Problem) -> np.ndarray:
    if isinstance(result, PairResult):
        dec = np.zeros(problem.n_models, dtype=int)
        dec[problem.pair_target] = int(result.reject)
        return dec
    return np.asarray(result.decisions, dtype=int)


def _check_finite(result) -> None:
    if isinstance(result, PairResult):
        vals = [result.statistic, result.sigma, result.threshold, result.pvalue]
        if not np.isfinite(vals).all():
            raise FloatingPointError(f"non-finite test output: {vals}")
        return
    for arr in (result.statistics, result.thresholds, result.pvalues):
        tested = ~np.isnan(arr)
        if not np.isfinite(arr[tested]).all():
            raise FloatingPointError(f"non-finite test output: {arr}")


def run_trials(cfg: RunConfig, problem: Problem | None = None) -> list[np.ndarray]:
    """Decision bit-vectors for all trials of one configuration, in trial order."""
    cfg.validate()
    if problem is None:
        problem = make_problem(cfg.problem, **cfg.params)

    def one(trial: int) -> np.ndarray:
        result = run_trial(problem, cfg, trial)
        _check_finite(result)
        return _decisions_of(result, problem)

    if cfg.jobs > 1:
        return Parallel(n_jobs=cfg.jobs)(delayed(one)(t) for t in range(cfg.trials))
    return [one(t) for t in range(cfg.trials)]


def bench_row(cfg: RunConfig) -> dict:
    """Run one configuration and emit a metrics row with the fixed CSV schema."""
    problem = make_problem(cfg.problem, **cfg.params)
    metrics = aggregate_metrics(run_trials(cfg, problem), problem)
    param = "" if problem.sweep is None else repr(problem.sweep[1])
    return {
        "schema_version": SCHEMA_VERSION,
        "problem": cfg.problem,
        "test": cfg.test,
        "kind": cfg.kind,
        "n": cfg.n,
        "param": param,
        "alpha": cfg.alpha,
        "rho": cfg.rho if cfg.test == "relmulti" else "",
        "trials": cfg.trials,
        "seed": cfg.seed,
        "tpr": metrics.tpr,
        "tpr_se": metrics.tpr_se,
        "fpr": metrics.fpr,
        "fpr_se": metrics.fpr_se,
        "fdr": metrics.fdr,
        "fdr_se": metrics.fdr_se,
        "reject_rate": metrics.reject_rate,
        "reject_rate_se": metrics.reject_rate_se,
    }


def run_bench(cfg: RunConfig, ns: Sequence[int] | None = None) -> list[dict]:
    """Metrics rows for one configuration, optionally swept over sample sizes."""
    sizes = [cfg.n] if ns is None else list(ns)
    return [bench_row(replace(cfg, n=int(n))) for n in sizes]


def kolmogorov_uniform(pvalues: np.ndarray) -> float:
    """Kolmogorov distance between the empirical CDF of the p-values and Uniform[0, 1]."""
    p = np.sort(np.asarray(pvalues, dtype=float))
    t = p.size
    upper = np.abs(np.arange(1, t + 1) / t - p)
    lower = np.abs(p - np.arange(0, t) / t)
    return float(np.maximum(upper, lower).max())


def run_calibrate(cfg: RunConfig) -> tuple[np.ndarray, float]:
    """Null p-values over trials plus their Kolmogorov distance to uniform.

    For ``relpsi`` the selective p-value of the tested (non-selected)
    contrast is collected; for ``relpair`` the plain normal p-value.
    """
    cfg.validate()
    problem = make_problem(cfg.problem, **cfg.params)
    if problem.n_models != 2:
        raise ValueError("calibration requires a two-model problem")

    def one(trial: int) -> float:
        result = run_trial(problem, cfg, trial)
        _check_finite(result)
        if isinstance(result, PairResult):
            return result.pvalue
        tested = [i for i in range(2) if not math.isnan(result.pvalues[i])]
        return float(result.pvalues[tested[0]])

    if cfg.jobs > 1:
        pvals = Parallel(n_jobs=cfg.jobs)(delayed(one)(t) for t in range(cfg.trials))
    else:
        pvals = [one(t) for t in range(cfg.trials)]
    pvals = np.asarray(pvals)
    return pvals, kolmogorov_uniform(pvals)


# ---------------------------------------------------------------------------
# File output
# ---------------------------------------------------------------------------

def write_metrics_csv(path: str, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_calibration_csv(path: str, pvalues: np.ndarray) -> None:
    p = np.sort(np.asarray(pvalues, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "ecdf"])
        for i, val in enumerate(p):
            writer.writerow([repr(float(val)), repr((i + 1) / p.size)])


def _clean(value):
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):  # keep the JSON strictly standard
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (np.floating, np.integer)):
        return _clean(value.item())
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def comparison_to_dict(result: ComparisonResult | PairResult) -> dict:
    """JSON-ready dictionary for a single comparison result."""
    if isinstance(result, PairResult):
        body = {
            "schema_version": SCHEMA_VERSION,
            "statistic": result.statistic,
            "sigma": result.sigma,
            "threshold": result.threshold,
            "pvalue": result.pvalue,
            "reject": result.reject,
            "diagnostics": result.diagnostics,
        }
    else:
        body = {
            "schema_version": SCHEMA_VERSION,
            "selected": result.selected,
            "decisions": result.decisions,
            "statistics": result.statistics,
            "thresholds": result.thresholds,
            "pvalues": result.pvalues,
            "diagnostics": result.diagnostics,
        }
    return _clean(body)


def write_result_json(path: str, result: ComparisonResult | PairResult) -> None:
    with open(path, "w") as fh:
        json.dump(comparison_to_dict(result), fh, indent=2)
        fh.write("\n")
