import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsid.independence import (
    FeaturePair,
    HsicMode,
    hsic_batch_grad,
    hsic_batch_loss,
    hsic_per_sample,
    permutation_independence_test,
)
from dsid.kernels import KernelConfig, KernelKind, l2_normalize

RBF = KernelConfig(kind=KernelKind.RBF, sigma=1.0)
LINEAR = KernelConfig(kind=KernelKind.LINEAR)

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def random_pairs(rng, n, d):
    pairs = []
    for _ in range(n):
        x, _ = l2_normalize(rng.standard_normal(d))
        y, _ = l2_normalize(rng.standard_normal(d))
        pairs.append(FeaturePair(x, y))
    return pairs


class TestPerSample:
    def test_orthonormal_rbf_value(self):
        # ||x - y||^2 = 2, so k_xy = e^-1 and the statistic is (e^-1 - 1)^2
        v = hsic_per_sample(FeaturePair(E1, E2), RBF)
        assert abs(v - (math.exp(-1.0) - 1.0) ** 2) < 1e-15

    def test_orthonormal_linear_value(self):
        assert hsic_per_sample(FeaturePair(E1, E2), LINEAR) == 1.0

    def test_identical_features_rbf_zero(self):
        # k_xy = 1 and k_xx * k_yy = 1: the statistic cannot see x == y
        rng = np.random.default_rng(0)
        for _ in range(20):
            x, _ = l2_normalize(rng.standard_normal(5))
            assert hsic_per_sample(FeaturePair(x, x.copy()), RBF) == 0.0

    def test_mismatched_pair_rejected(self):
        with pytest.raises(ValueError, match="feature pair dimension mismatch"):
            FeaturePair(np.zeros(2), np.zeros(3))

    def test_from_raw_normalizes_and_flags(self):
        p = FeaturePair.from_raw(np.array([3.0, 4.0]), np.array([0.0, 0.0]))
        np.testing.assert_allclose(p.x_hat, [0.6, 0.8], rtol=0, atol=1e-15)
        assert not p.x_degenerate
        assert p.y_degenerate
        np.testing.assert_array_equal(p.y_hat, [0.0, 0.0])

    @given(st.integers(min_value=0, max_value=2**32 - 1), st.floats(min_value=0.3, max_value=3.0))
    @settings(max_examples=50, deadline=None)
    def test_rbf_upper_bound_on_unit_vectors(self, seed, sigma):
        # ||x - y||^2 <= 4 on the unit sphere bounds the statistic by
        # (1 - exp(-2 / sigma^2))^2; self-kernels are exactly 1.
        rng = np.random.default_rng(seed)
        x, _ = l2_normalize(rng.standard_normal(6))
        y, _ = l2_normalize(rng.standard_normal(6))
        cfg = KernelConfig(kind=KernelKind.RBF, sigma=sigma)
        bound = (1.0 - math.exp(-2.0 / sigma**2)) ** 2
        v = hsic_per_sample(FeaturePair(x, y), cfg)
        assert 0.0 <= v <= bound + 1e-15


class TestBatchLoss:
    def test_paper_mode_is_mean_of_per_sample(self):
        pairs = random_pairs(np.random.default_rng(1), 7, 4)
        expected = np.mean([hsic_per_sample(p, RBF) for p in pairs])
        assert hsic_batch_loss(pairs, RBF, HsicMode.PAPER_PER_SAMPLE) == pytest.approx(
            expected, rel=0, abs=1e-15
        )

    def test_classical_identity_gram_case(self):
        # x and y sets both {e1, e2}: K = L = I, H idempotent, trace(H) = 1
        pairs = [FeaturePair(E1, E1), FeaturePair(E2, E2)]
        assert hsic_batch_loss(pairs, LINEAR, HsicMode.CLASSICAL_BIASED) == 1.0

    def test_classical_constant_y_is_zero(self):
        rng = np.random.default_rng(2)
        c, _ = l2_normalize(np.array([1.0, 2.0, 2.0]))
        pairs = [
            FeaturePair(l2_normalize(rng.standard_normal(3))[0], c.copy())
            for _ in range(6)
        ]
        for cfg in (RBF, LINEAR):
            v = hsic_batch_loss(pairs, cfg, HsicMode.CLASSICAL_BIASED)
            assert abs(v) < 1e-14

    def test_empty_batch_rejected(self):
        for mode in HsicMode:
            with pytest.raises(ValueError, match="empty batch"):
                hsic_batch_loss([], RBF, mode)

    def test_classical_needs_two(self):
        with pytest.raises(ValueError, match="centering requires N >= 2"):
            hsic_batch_loss([FeaturePair(E1, E2)], RBF, HsicMode.CLASSICAL_BIASED)

    def test_paper_mode_allows_single_pair(self):
        v = hsic_batch_loss([FeaturePair(E1, E2)], LINEAR, HsicMode.PAPER_PER_SAMPLE)
        assert v == 1.0

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_classical_swap_symmetry(self, seed):
        pairs = random_pairs(np.random.default_rng(seed), 5, 3)
        swapped = [FeaturePair(p.y_hat, p.x_hat) for p in pairs]
        for cfg in (RBF, LINEAR):
            a = hsic_batch_loss(pairs, cfg, HsicMode.CLASSICAL_BIASED)
            b = hsic_batch_loss(swapped, cfg, HsicMode.CLASSICAL_BIASED)
            assert a == pytest.approx(b, rel=0, abs=1e-12)
            assert a >= -1e-12

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_classical_rbf_translation_invariance(self, seed):
        # the RBF Gram matrix depends only on row differences
        rng = np.random.default_rng(seed)
        pairs = random_pairs(rng, 5, 3)
        tx = rng.standard_normal(3)
        ty = rng.standard_normal(3)
        shifted = [FeaturePair(p.x_hat + tx, p.y_hat + ty) for p in pairs]
        a = hsic_batch_loss(pairs, RBF, HsicMode.CLASSICAL_BIASED)
        b = hsic_batch_loss(shifted, RBF, HsicMode.CLASSICAL_BIASED)
        assert a == pytest.approx(b, rel=0, abs=1e-12)

    def test_median_heuristic_matches_resolved_sigma(self):
        from dsid.kernels import median_heuristic_sigma, resolve_kernel

        pairs = random_pairs(np.random.default_rng(9), 6, 4)
        x = np.stack([p.x_hat for p in pairs])
        y = np.stack([p.y_hat for p in pairs])
        auto = KernelConfig(kind=KernelKind.RBF, sigma=1.0, median_heuristic=True)
        fixed = KernelConfig(
            kind=KernelKind.RBF, sigma=median_heuristic_sigma(np.vstack([x, y]))
        )
        for mode in HsicMode:
            assert hsic_batch_loss(pairs, auto, mode) == hsic_batch_loss(
                pairs, fixed, mode
            )


class TestBatchGrad:
    def test_classical_linear_two_point_antisymmetry(self):
        # K = L = I case: gx rows are exactly +/- (x1 - x2)
        pairs = [FeaturePair(E1, E1), FeaturePair(E2, E2)]
        gx, gy = hsic_batch_grad(pairs, LINEAR, HsicMode.CLASSICAL_BIASED)
        np.testing.assert_array_equal(gx[0], E1 - E2)
        np.testing.assert_array_equal(gx[1], E2 - E1)
        np.testing.assert_array_equal(gy[0], E1 - E2)
        np.testing.assert_array_equal(gy[1], E2 - E1)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty batch"):
            hsic_batch_grad([], RBF, HsicMode.PAPER_PER_SAMPLE)

    def test_classical_needs_two(self):
        with pytest.raises(ValueError, match="centering requires N >= 2"):
            hsic_batch_grad([FeaturePair(E1, E2)], RBF, HsicMode.CLASSICAL_BIASED)

    @pytest.mark.parametrize("mode", list(HsicMode))
    @pytest.mark.parametrize(
        "cfg", [RBF, LINEAR, KernelConfig(kind=KernelKind.RBF, sigma=0.7)]
    )
    @pytest.mark.parametrize("n", [2, 4, 9])
    def test_matches_finite_differences(self, mode, cfg, n):
        # central differences over every coordinate, h = 1e-5
        rng = np.random.default_rng(100 * n + 7)
        d = 8
        pairs = random_pairs(rng, n, d)
        gx, gy = hsic_batch_grad(pairs, cfg, mode)
        h = 1e-5

        def loss():
            return hsic_batch_loss(pairs, cfg, mode)

        for which, grad in (("x_hat", gx), ("y_hat", gy)):
            for i in range(n):
                vec = getattr(pairs[i], which)
                for j in range(d):
                    orig = vec[j]
                    vec[j] = orig + h
                    lp = loss()
                    vec[j] = orig - h
                    lm = loss()
                    vec[j] = orig
                    fd = (lp - lm) / (2 * h)
                    denom = max(abs(fd), abs(grad[i, j]), 1e-6)
                    assert abs(fd - grad[i, j]) / denom < 1e-5

    def test_stop_gradient_through_median_sigma(self):
        # auto-sigma gradients equal fixed-sigma gradients at the resolved value
        from dsid.kernels import median_heuristic_sigma

        pairs = random_pairs(np.random.default_rng(3), 4, 5)
        stacked = np.vstack(
            [np.stack([p.x_hat for p in pairs]), np.stack([p.y_hat for p in pairs])]
        )
        auto = KernelConfig(kind=KernelKind.RBF, sigma=9.9, median_heuristic=True)
        fixed = KernelConfig(kind=KernelKind.RBF, sigma=median_heuristic_sigma(stacked))
        for mode in HsicMode:
            ga = hsic_batch_grad(pairs, auto, mode)
            gf = hsic_batch_grad(pairs, fixed, mode)
            np.testing.assert_array_equal(ga[0], gf[0])
            np.testing.assert_array_equal(ga[1], gf[1])


class TestPermutationTest:
    def test_rejects_dependence_y_equals_x(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((50, 3))
        stat, p = permutation_independence_test(x, x.copy(), RBF, n_perm=200, seed=7)
        assert stat > 0.0
        assert p <= 0.01

    def test_p_value_bounds(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((20, 2))
        y = rng.standard_normal((20, 2))
        _, p = permutation_independence_test(x, y, RBF, n_perm=100, seed=0)
        assert 1.0 / 101.0 <= p <= 1.0

    def test_null_rarely_rejects(self):
        rejections = 0
        for seed in range(10):
            rng = np.random.default_rng(1000 + seed)
            x = rng.standard_normal((30, 2))
            y = rng.standard_normal((30, 2))
            _, p = permutation_independence_test(x, y, RBF, n_perm=100, seed=seed)
            if p <= 0.05:
                rejections += 1
        assert rejections <= 2

    def test_determinism(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((10, 2))
        y = rng.standard_normal((10, 2))
        a = permutation_independence_test(x, y, RBF, n_perm=100, seed=5)
        b = permutation_independence_test(x, y, RBF, n_perm=100, seed=5)
        assert a == b

    def test_input_validation(self):
        x = np.zeros((10, 2))
        with pytest.raises(ValueError, match="paired row matrices"):
            permutation_independence_test(x, np.zeros((9, 2)), RBF, n_perm=100, seed=0)
        with pytest.raises(ValueError, match="requires N >= 5"):
            permutation_independence_test(
                np.zeros((4, 2)), np.zeros((4, 2)), RBF, n_perm=100, seed=0
            )
        with pytest.raises(ValueError, match="requires n_perm >= 100"):
            permutation_independence_test(x, x, RBF, n_perm=99, seed=0)
