import math

import numpy as np
import pytest

from relfit.kernels import (
    KernelSpec,
    evaluate,
    grad_x,
    grad_y,
    gram,
    median_heuristic,
    trace_grad_xy,
)

GAUSS = KernelSpec(family="gaussian", bandwidth=1.0)
IMQ = KernelSpec(family="imq", imq_c=1.0, imq_beta=-0.5)


def fd_grad_x(spec, x, y, h=1e-6):
    """Central finite differences of k in its first argument."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (evaluate(spec, x + e, y) - evaluate(spec, x - e, y)) / (2 * h)
    return out


def fd_trace_grad_xy(spec, x, y, h=1e-4):
    """Finite-difference mixed second derivatives, summed over coordinates."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        total += (
            evaluate(spec, x + e, y + e)
            - evaluate(spec, x + e, y - e)
            - evaluate(spec, x - e, y + e)
            + evaluate(spec, x - e, y - e)
        ) / (4 * h * h)
    return total


class TestSpecValidation:
    def test_rejects_bad_family(self):
        with pytest.raises(ValueError, match="family"):
            KernelSpec(family="laplace")

    @pytest.mark.parametrize("bw", [0.0, -1.0, math.nan])
    def test_rejects_bad_bandwidth(self, bw):
        with pytest.raises(ValueError):
            KernelSpec(bandwidth=bw)

    @pytest.mark.parametrize("beta", [-1.0, 0.0, 0.5, -2.0])
    def test_rejects_bad_imq_beta(self, beta):
        with pytest.raises(ValueError):
            KernelSpec(family="imq", imq_beta=beta)

    def test_rejects_bad_imq_c(self):
        with pytest.raises(ValueError):
            KernelSpec(family="imq", imq_c=0.0)


class TestEvaluate:
    def test_gaussian_at_coincident_points(self):
        assert evaluate(GAUSS, [1.0, 2.0], [1.0, 2.0]) == 1.0

    def test_imq_at_coincident_points(self):
        # k(x, x) = c^(2 beta) = 1 for c = 1
        assert evaluate(IMQ, [0.0], [0.0]) == 1.0

    def test_gaussian_unit_separation(self):
        # exp(-||0 - 2||^2 / 2) = exp(-2), frozen from scalar arithmetic
        assert evaluate(GAUSS, [0.0], [2.0]) == pytest.approx(0.1353352832366127, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            evaluate(GAUSS, [0.0, 1.0], [0.0])

    def test_symmetry_exact(self):
        rng = np.random.default_rng(7)
        for spec in (GAUSS, IMQ, KernelSpec(bandwidth=0.3), KernelSpec(family="imq", imq_c=2.0, imq_beta=-0.8)):
            for _ in range(20):
                x, y = rng.normal(size=(2, 4))
                assert evaluate(spec, x, y) == evaluate(spec, y, x)


class TestGradients:
    def test_zero_at_coincident_points(self):
        for spec in (GAUSS, IMQ):
            np.testing.assert_array_equal(grad_x(spec, [1.0, -2.0], [1.0, -2.0]), 0.0)

    def test_gaussian_closed_form_value(self):
        # -exp(-0.5), checked against the finite-difference oracle
        g = grad_x(GAUSS, [1.0], [0.0])
        assert g[0] == pytest.approx(-0.6065306597126334, abs=1e-12)
        assert g[0] == pytest.approx(fd_grad_x(GAUSS, [1.0], [0.0])[0], abs=1e-6)

    def test_imq_closed_form_value(self):
        # 2 * (-1/2) * 1 * 2^(-3/2) = -2^(-3/2)
        g = grad_x(IMQ, [1.0], [0.0])
        assert g[0] == pytest.approx(-0.35355339059327373, abs=1e-12)
        assert g[0] == pytest.approx(fd_grad_x(IMQ, [1.0], [0.0])[0], abs=1e-6)

    def test_grad_y_is_negated_grad_x(self):
        rng = np.random.default_rng(3)
        x, y = rng.normal(size=(2, 5))
        for spec in (GAUSS, IMQ):
            np.testing.assert_allclose(grad_y(spec, x, y), -grad_x(spec, x, y), rtol=0, atol=0)

    def test_matches_finite_differences_on_random_inputs(self):
        rng = np.random.default_rng(11)
        specs = [
            KernelSpec(bandwidth=b) for b in (0.5, 1.0, 2.5)
        ] + [
            KernelSpec(family="imq", imq_c=c, imq_beta=b)
            for c, b in ((1.0, -0.5), (2.0, -0.25), (0.7, -0.9))
        ]
        checked = 0
        while checked < 100:
            spec = specs[checked % len(specs)]
            d = rng.integers(1, 6)
            x, y = rng.normal(size=(2, d))
            got = grad_x(spec, x, y)
            want = fd_grad_x(spec, x, y)
            np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-7)
            checked += 1


class TestTraceGradXY:
    def test_gaussian_coincident_1d(self):
        assert trace_grad_xy(GAUSS, [0.5], [0.5]) == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_coincident_3d(self):
        assert trace_grad_xy(GAUSS, [0.0] * 3, [0.0] * 3) == pytest.approx(3.0, abs=1e-12)

    def test_imq_coincident_1d(self):
        # -2 beta c^(2 beta - 2) = 1 for c = 1, beta = -1/2
        assert trace_grad_xy(IMQ, [2.0], [2.0]) == pytest.approx(1.0, abs=1e-12)

    def test_matches_finite_difference_hessian(self):
        rng = np.random.default_rng(5)
        for spec in (GAUSS, IMQ, KernelSpec(bandwidth=1.7), KernelSpec(family="imq", imq_c=1.5, imq_beta=-0.3)):
            for _ in range(10):
                d = rng.integers(1, 5)
                x, y = rng.normal(size=(2, d))
                got = trace_grad_xy(spec, x, y)
                want = fd_trace_grad_xy(spec, x, y)
                assert got == pytest.approx(want, rel=1e-4, abs=1e-6)


class TestGram:
    @pytest.mark.parametrize("spec", [GAUSS, IMQ])
    def test_gram_symmetric_psd(self, spec):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(40, 3))
        K = gram(spec, X, X)
        np.testing.assert_allclose(K, K.T, atol=1e-12)
        assert np.linalg.eigvalsh(K).min() >= -1e-8

    def test_gram_matches_pointwise(self):
        rng = np.random.default_rng(19)
        X = rng.normal(size=(6, 2))
        Y = rng.normal(size=(5, 2))
        for spec in (GAUSS, IMQ):
            K = gram(spec, X, Y)
            for i in range(6):
                for j in range(5):
                    assert K[i, j] == pytest.approx(evaluate(spec, X[i], Y[j]), abs=1e-12)


class TestMedianHeuristic:
    def test_two_points_1d(self):
        assert median_heuristic(np.array([[0.0], [1.0]])) == 1.0

    def test_three_points_1d(self):
        # distances {1, 1, 2} -> median 1
        assert median_heuristic(np.array([[0.0], [1.0], [2.0]])) == 1.0

    def test_pythagorean_pair(self):
        assert median_heuristic(np.array([[0.0, 0.0], [3.0, 4.0]])) == 5.0

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(23)
        X = rng.normal(size=(30, 4))
        perm = rng.permutation(30)
        assert median_heuristic(X) == median_heuristic(X[perm])

    def test_rejects_single_row(self):
        with pytest.raises(ValueError):
            median_heuristic(np.array([[1.0, 2.0]]))

    def test_rejects_identical_points(self):
        with pytest.raises(ValueError, match="zero"):
            median_heuristic(np.zeros((5, 2)))
