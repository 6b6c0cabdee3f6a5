"""Synthetic distributions for benchmarks: samplers, score functions, problems.

Each distribution offers a seeded sampler ``(n, rng) -> (n, d)`` and, where
the density is known, a batched score function ``(n, d) -> (n, d)`` for the
KSD-based tests. The problem registry at the bottom wires reference
distributions together with candidate model lists and ground-truth labels
(which candidates are as good as the best, which are worse).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .comparison import CandidateModel, DensityModel, SampleModel
from .discrepancy import DiscrepancyKind


def _as_points(x, d: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {X.shape}")
    return X, single


# ---------------------------------------------------------------------------
# Gaussian
# ---------------------------------------------------------------------------

@dataclass
class GaussianSpec:
    """Multivariate normal; covariance may be a scalar, a diagonal, or a full matrix."""

    mean: np.ndarray
    cov: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        d = self.mean.shape[0]
        c = np.asarray(1.0 if self.cov is None else self.cov, dtype=float)
        if c.ndim == 0:
            c = np.full(d, float(c))
        if c.ndim == 1:
            if c.shape[0] != d or np.any(c <= 0):
                raise ValueError("diagonal covariance must be positive with length d")
        elif c.ndim == 2:
            if c.shape != (d, d):
                raise ValueError("covariance matrix must be d x d")
        else:
            raise ValueError("covariance must be scalar, diagonal, or matrix")
        self.cov = c

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return self.cov.ndim == 1


def gaussian_score(spec: GaussianSpec, x) -> np.ndarray:
    """Score of the Gaussian density: -Sigma^{-1}(x - mu)."""
    X, single = _as_points(x, spec.dim)
    centered = X - spec.mean
    if spec.is_diagonal:
        out = -centered / spec.cov
    else:
        out = -np.linalg.solve(spec.cov, centered.T).T
    return out[0] if single else out


def gaussian_sample(spec: GaussianSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal((n, spec.dim))
    if spec.is_diagonal:
        return spec.mean + noise * np.sqrt(spec.cov)
    return spec.mean + noise @ np.linalg.cholesky(spec.cov).T


def _gaussian_logpdf(spec: GaussianSpec, X: np.ndarray) -> np.ndarray:
    centered = X - spec.mean
    if spec.is_diagonal:
        maha = (centered * centered / spec.cov).sum(axis=1)
        logdet = float(np.log(spec.cov).sum())
    else:
        sol = np.linalg.solve(spec.cov, centered.T).T
        maha = (centered * sol).sum(axis=1)
        logdet = float(np.linalg.slogdet(spec.cov)[1])
    return -0.5 * (spec.dim * math.log(2.0 * math.pi) + logdet + maha)


# ---------------------------------------------------------------------------
# Gaussian mixture
# ---------------------------------------------------------------------------

@dataclass
class MixtureSpec:
    """Finite Gaussian mixture with positive weights summing to one."""

    weights: np.ndarray
    components: Sequence[GaussianSpec]

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.components) != self.weights.shape[0]:
            raise ValueError("one weight per component required")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to one")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError("all components must share one dimension")

    @property
    def dim(self) -> int:
        return self.components[0].dim


def mixture_score(spec: MixtureSpec, x) -> np.ndarray:
    """Score of the mixture density via responsibility-weighted component scores."""
    X, single = _as_points(x, spec.dim)
    log_terms = np.column_stack(
        [np.log(w) + _gaussian_logpdf(c, X) for w, c in zip(spec.weights, spec.components)]
    )
    # softmax responsibilities, stabilized through log-sum-exp
    resp = np.exp(log_terms - logsumexp(log_terms, axis=1, keepdims=True))
    out = np.zeros_like(X)
    for k, comp in enumerate(spec.components):
        out += resp[:, k : k + 1] * gaussian_score(comp, X)
    return out[0] if single else out


def mixture_sample(spec: MixtureSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    labels = rng.choice(len(spec.components), size=n, p=spec.weights)
    out = np.empty((n, spec.dim))
    for k, comp in enumerate(spec.components):
        rows = np.nonzero(labels == k)[0]
        if rows.size:
            out[rows] = gaussian_sample(comp, rows.size, rng)
    return out


# ---------------------------------------------------------------------------
# Gaussian-Bernoulli restricted Boltzmann machine
# ---------------------------------------------------------------------------

@dataclass
class GaussianRbmSpec:
    """RBM with Gaussian visibles y and {-1, +1} latents x.

    Unnormalized joint density exp(y'Bx + b'y + c'x - ||y||^2 / 2); the
    visible marginal has the closed-form score b - y + B tanh(B'y + c).
    """

    B: np.ndarray  # (d_y, d_x)
    b: np.ndarray  # (d_y,)
    c: np.ndarray  # (d_x,)

    def __post_init__(self) -> None:
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.B.shape != (self.b.shape[0], self.c.shape[0]):
            raise ValueError(
                f"B must be (d_y, d_x) = ({self.b.shape[0]}, {self.c.shape[0]}), got {self.B.shape}"
            )
        if not (np.isfinite(self.B).all() and np.isfinite(self.b).all() and np.isfinite(self.c).all()):
            raise ValueError("RBM parameters must be finite")

    @property
    def dim(self) -> int:
        return self.b.shape[0]


def rbm_score(spec: GaussianRbmSpec, y) -> np.ndarray:
    """Exact marginal score over the +-1 latents: b - y + B tanh(B'y + c)."""
    Y, single = _as_points(y, spec.dim)
    out = spec.b - Y + np.tanh(Y @ spec.B + spec.c) @ spec.B.T
    return out[0] if single else out


def rbm_sample(
    spec: GaussianRbmSpec,
    n: int,
    rng: np.random.Generator,
    gibbs_steps: int = 2000,
) -> np.ndarray:
    """Blocked Gibbs: x | y independent +-1 with P(+1) = sigmoid(2(B'y + c)), y | x ~ N(Bx + b, I).

    Runs n independent chains for ``gibbs_steps`` burn-in sweeps and returns
    the final visible state of each chain.
    """
    if gibbs_steps < 1:
        raise ValueError("gibbs_steps must be at least 1")
    Y = spec.b + rng.standard_normal((n, spec.dim))
    for _ in range(gibbs_steps):
        prob_plus = expit(2.0 * (Y @ spec.B + spec.c))
        x = np.where(rng.random(prob_plus.shape) < prob_plus, 1.0, -1.0)
        Y = x @ spec.B.T + spec.b + rng.standard_normal((n, spec.dim))
    return Y


# ---------------------------------------------------------------------------
# Problem registry
# ---------------------------------------------------------------------------

@dataclass
class Problem:
    """Reference distribution, candidate models, and ground-truth labels."""

    name: str
    dim: int
    sample_reference: Callable[[int, np.random.Generator], np.ndarray]
    samplers: Sequence[Callable[[int, np.random.Generator], np.ndarray]] | None
    scores: Sequence[Callable[[np.ndarray], np.ndarray]] | None
    good: frozenset[int]   # candidates as close to the reference as the best one
    worse: frozenset[int]  # candidates strictly farther than the best one
    pair_target: int       # model whose "worse than the other" hypothesis pair tests track
    params: dict = field(default_factory=dict)
    sweep: tuple[str, float] | None = None

    @property
    def n_models(self) -> int:
        return len(self.samplers) if self.samplers is not None else len(self.scores)

    def models_for(self, kind) -> list[CandidateModel]:
        kind = DiscrepancyKind.parse(kind)
        if kind.is_mmd:
            if self.samplers is None:
                raise ValueError(f"problem {self.name!r} has no sample-based candidates")
            return [SampleModel(sampler=s, name=f"model{i}") for i, s in enumerate(self.samplers)]
        if self.scores is None:
            raise ValueError(f"problem {self.name!r} has no density-based candidates")
        return [DensityModel(score=s, name=f"model{i}") for i, s in enumerate(self.scores)]


def _gauss_problem_parts(specs: Sequence[GaussianSpec]):
    samplers = [lambda n, rng, s=s: gaussian_sample(s, n, rng) for s in specs]
    scores = [lambda x, s=s: gaussian_score(s, x) for s in specs]
    return samplers, scores


def _labels_from_distances(dists: Sequence[float], atol: float = 1e-12):
    best = min(dists)
    good = frozenset(i for i, v in enumerate(dists) if v <= best + atol)
    worse = frozenset(i for i, v in enumerate(dists) if v > best + atol)
    return good, worse


def _mean_shift(mu1: float = 0.5, mu2: float = -0.5, d: int = 10) -> Problem:
    """Two isotropic Gaussians with shifted first coordinate vs a standard normal."""
    d = int(d)
    means = []
    for mu in (mu1, mu2):
        m = np.zeros(d)
        m[0] = mu
        means.append(m)
    specs = [GaussianSpec(m, 1.0) for m in means]
    ref = GaussianSpec(np.zeros(d), 1.0)
    samplers, scores = _gauss_problem_parts(specs)
    good, worse = _labels_from_distances([abs(mu1), abs(mu2)])
    return Problem(
        name="mean_shift",
        dim=d,
        sample_reference=lambda n, rng: gaussian_sample(ref, n, rng),
        samplers=samplers,
        scores=scores,
        good=good,
        worse=worse,
        pair_target=max(worse) if worse else 0,
        params={"mu1": mu1, "mu2": mu2, "d": d},
        sweep=("mu1", float(mu1)),
    )


def _mean_shift_l10(d: int = 10, shift: float = 0.5, worst: float = 1.0) -> Problem:
    """Nine equally good axis-shifted Gaussians plus one clearly worse model."""
    d = int(d)
    if d < 5:
        raise ValueError("mean_shift_l10 places shifts on five axes; need d >= 5")
    means = []
    for k in range(9):
        m = np.zeros(d)
        m[k // 2] = shift if k % 2 == 0 else -shift
        means.append(m)
    bad = np.zeros(d)
    bad[0] = worst
    means.append(bad)
    specs = [GaussianSpec(m, 1.0) for m in means]
    ref = GaussianSpec(np.zeros(d), 1.0)
    samplers, scores = _gauss_problem_parts(specs)
    return Problem(
        name="mean_shift_l10",
        dim=d,
        sample_reference=lambda n, rng: gaussian_sample(ref, n, rng),
        samplers=samplers,
        scores=scores,
        good=frozenset(range(9)),
        worse=frozenset({9}),
        pair_target=9,
        params={"d": d, "shift": shift, "worst": worst},
    )


def _rotated_cov(angle: float, var_major: float, var_minor: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return R @ np.diag([var_major, var_minor]) @ R.T


def _blobs_mixture(grid: int, spacing: float, angle: float, var_major: float, var_minor: float) -> MixtureSpec:
    centers = [
        np.array([i * spacing, j * spacing]) for i in range(grid) for j in range(grid)
    ]
    cov = _rotated_cov(angle, var_major, var_minor)
    comps = [GaussianSpec(c, cov) for c in centers]
    w = np.full(len(comps), 1.0 / len(comps))
    return MixtureSpec(w, comps)


def _blobs(
    grid: int = 3,
    spacing: float = 1.0,
    angle_ref: float = math.pi / 4.0,
    angle1: float = -math.pi / 4.0,
    angle2: float = math.pi / 4.0 + math.pi / 20.0,
    var_major: float = 0.25,
    var_minor: float = 0.25 / 64.0,
) -> Problem:
    """Grid of eccentric Gaussians; candidates differ from the reference only by local rotation.

    The grid structure is shared by all models and dominates the median
    pairwise distance, so MMD at that bandwidth is nearly blind to the
    component orientations, while the score functions expose them directly.
    """
    ref = _blobs_mixture(grid, spacing, angle_ref, var_major, var_minor)
    m1 = _blobs_mixture(grid, spacing, angle1, var_major, var_minor)
    m2 = _blobs_mixture(grid, spacing, angle2, var_major, var_minor)
    samplers = [lambda n, rng, s=s: mixture_sample(s, n, rng) for s in (m1, m2)]
    scores = [lambda x, s=s: mixture_score(s, x) for s in (m1, m2)]

    def angle_dist(a: float) -> float:
        # orientation difference of the component ellipses, modulo pi
        delta = abs((a - angle_ref) % math.pi)
        return min(delta, math.pi - delta)

    good, worse = _labels_from_distances([angle_dist(angle1), angle_dist(angle2)])
    return Problem(
        name="blobs",
        dim=2,
        sample_reference=lambda n, rng: mixture_sample(ref, n, rng),
        samplers=samplers,
        scores=scores,
        good=good,
        worse=worse,
        pair_target=max(worse) if worse else 0,
        params={
            "grid": grid,
            "spacing": spacing,
            "angle_ref": angle_ref,
            "angle1": angle1,
            "angle2": angle2,
            "var_major": var_major,
            "var_minor": var_minor,
        },
    )


def _rbm_family(
    epsilons: Sequence[float],
    dx: int,
    dy: int,
    param_seed: int,
    entry: tuple[int, int],
):
    rng = np.random.default_rng(param_seed)
    B = rng.choice([-1.0, 1.0], size=(dy, dx))
    b = rng.standard_normal(dy)
    c = rng.standard_normal(dx)
    ref = GaussianRbmSpec(B, b, c)
    delta = np.zeros((dy, dx))
    delta[entry] = 1.0
    perturbed = [GaussianRbmSpec(B + e * delta, b, c) for e in epsilons]
    return ref, perturbed


def _rbm(
    epsilon: float = 0.5,
    fixed: float = 0.3,
    dx: int = 5,
    dy: int = 20,
    gibbs_steps: int = 2000,
    param_seed: int = 0,
    entry: int = 0,
) -> Problem:
    """Two RBMs perturbing one weight entry by epsilon and by a fixed amount.

    The reference data come from the unperturbed RBM; sensitivity is scanned
    by sweeping epsilon through the fixed perturbation.
    """
    dx, dy, gibbs_steps = int(dx), int(dy), int(gibbs_steps)
    entry_idx = (int(entry) // dx, int(entry) % dx)
    ref, (p1, p2) = _rbm_family([epsilon, fixed], dx, dy, int(param_seed), entry_idx)
    samplers = [lambda n, rng, s=s: rbm_sample(s, n, rng, gibbs_steps) for s in (p1, p2)]
    scores = [lambda y, s=s: rbm_score(s, y) for s in (p1, p2)]
    good, worse = _labels_from_distances([abs(epsilon), abs(fixed)])
    return Problem(
        name="rbm",
        dim=dy,
        sample_reference=lambda n, rng: rbm_sample(ref, n, rng, gibbs_steps),
        samplers=samplers,
        scores=scores,
        good=good,
        worse=worse,
        pair_target=0,
        params={
            "epsilon": epsilon,
            "fixed": fixed,
            "dx": dx,
            "dy": dy,
            "gibbs_steps": gibbs_steps,
            "param_seed": param_seed,
            "entry": entry,
        },
        sweep=("epsilon", float(epsilon)),
    )


def _rbm_l7(
    epsilon: float = 0.18,
    dx: int = 5,
    dy: int = 20,
    gibbs_steps: int = 2000,
    param_seed: int = 0,
    entry: int = 0,
) -> Problem:
    """One epsilon-perturbed RBM against six fixed perturbations of the same RBM."""
    dx, dy, gibbs_steps = int(dx), int(dy), int(gibbs_steps)
    entry_idx = (int(entry) // dx, int(entry) % dx)
    fixed = [0.2, 0.3, 0.35, 0.4, 0.45, 0.5]
    eps_all = [epsilon] + fixed
    ref, perturbed = _rbm_family(eps_all, dx, dy, int(param_seed), entry_idx)
    samplers = [lambda n, rng, s=s: rbm_sample(s, n, rng, gibbs_steps) for s in perturbed]
    scores = [lambda y, s=s: rbm_score(s, y) for s in perturbed]
    good, worse = _labels_from_distances([abs(e) for e in eps_all])
    return Problem(
        name="rbm_l7",
        dim=dy,
        sample_reference=lambda n, rng: rbm_sample(ref, n, rng, gibbs_steps),
        samplers=samplers,
        scores=scores,
        good=good,
        worse=worse,
        pair_target=0,
        params={
            "epsilon": epsilon,
            "fixed": fixed,
            "dx": dx,
            "dy": dy,
            "gibbs_steps": gibbs_steps,
            "param_seed": param_seed,
            "entry": entry,
        },
        sweep=("epsilon", float(epsilon)),
    )


def _two_gaussian_mixture(rho: float) -> MixtureSpec:
    return MixtureSpec(
        [rho, 1.0 - rho],
        [GaussianSpec([1.0], 1.0), GaussianSpec([-1.0], 1.0)],
    )


def _mixture_tpr(rho1: float = 0.7, rho2: float = 0.75, rho_ref: float = 0.5) -> Problem:
    """1-d two-component mixtures differing only in mixing proportion."""
    ref = _two_gaussian_mixture(rho_ref)
    m1 = _two_gaussian_mixture(rho1)
    m2 = _two_gaussian_mixture(rho2)
    samplers = [lambda n, rng, s=s: mixture_sample(s, n, rng) for s in (m1, m2)]
    scores = [lambda x, s=s: mixture_score(s, x) for s in (m1, m2)]
    good, worse = _labels_from_distances([abs(rho1 - rho_ref), abs(rho2 - rho_ref)])
    return Problem(
        name="mixture_tpr",
        dim=1,
        sample_reference=lambda n, rng: mixture_sample(ref, n, rng),
        samplers=samplers,
        scores=scores,
        good=good,
        worse=worse,
        pair_target=max(worse) if worse else 0,
        params={"rho1": rho1, "rho2": rho2, "rho_ref": rho_ref},
        sweep=("rho1", float(rho1)),
    )


def _rotating_gaussian(
    angle: float = math.pi / 8.0,
    angle2: float = math.pi / 4.0,
    var_major: float = 4.0,
    var_minor: float = 0.25,
) -> Problem:
    """2-d zero-mean Gaussians differing from the reference by covariance rotation.

    The reference sits at angle 0; model 1 sweeps from model 2's angle down
    toward the reference, becoming a progressively better relative fit.
    """
    ref = GaussianSpec(np.zeros(2), _rotated_cov(0.0, var_major, var_minor))
    m1 = GaussianSpec(np.zeros(2), _rotated_cov(angle, var_major, var_minor))
    m2 = GaussianSpec(np.zeros(2), _rotated_cov(angle2, var_major, var_minor))
    samplers, scores = _gauss_problem_parts([m1, m2])

    def angle_dist(a: float) -> float:
        delta = abs(a % math.pi)
        return min(delta, math.pi - delta)

    good, worse = _labels_from_distances([angle_dist(angle), angle_dist(angle2)])
    return Problem(
        name="rotating_gaussian",
        dim=2,
        sample_reference=lambda n, rng: gaussian_sample(ref, n, rng),
        samplers=samplers,
        scores=scores,
        good=good,
        worse=worse,
        pair_target=max(worse) if worse else 0,
        params={"angle": angle, "angle2": angle2, "var_major": var_major, "var_minor": var_minor},
        sweep=("angle", float(angle)),
    )


PROBLEMS: dict[str, Callable[..., Problem]] = {
    "mean_shift": _mean_shift,
    "mean_shift_l10": _mean_shift_l10,
    "blobs": _blobs,
    "rbm": _rbm,
    "rbm_l7": _rbm_l7,
    "mixture_tpr": _mixture_tpr,
    "rotating_gaussian": _rotating_gaussian,
}


def available_problems() -> list[str]:
    return sorted(PROBLEMS)


def make_problem(name: str, **params) -> Problem:
    """Build a registered benchmark problem; unknown names list the registry."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(
            f"unknown problem {name!r}; available: {', '.join(available_problems())}"
        ) from None
    return factory(**params)
