import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_scores
from twowayfb import (
    bartlett_weight,
    bias_factor,
    fit_pols,
    omega_arellano,
    omega_bcchs,
    omega_chs,
    omega_chs_partial_sum,
    omega_cluster_periods,
    omega_cluster_units,
    omega_dka,
    omega_driscoll_kraay,
    omega_ehw,
    omega_newey_west,
    partial_sums,
    sandwich,
    scaled_variance,
)
from conftest import random_panel


def brute_force_kernel_sum(v, m, per_unit):
    """O(N T^2) double/triple sum oracle for the kernel estimators."""
    n, t, k = v.shape
    out = np.zeros((k, k))
    if per_unit:
        for i in range(n):
            for a in range(t):
                for b in range(t):
                    out += max(0.0, 1.0 - abs(a - b) / m) * np.outer(v[i, a], v[i, b])
    else:
        sbar = v.sum(axis=0)
        for a in range(t):
            for b in range(t):
                out += max(0.0, 1.0 - abs(a - b) / m) * np.outer(sbar[a], sbar[b])
    return out / float(n * t) ** 2


class TestKernels:
    def test_bartlett_values(self):
        assert bartlett_weight(0, 5) == 1.0
        assert bartlett_weight(5, 5) == 0.0
        assert bartlett_weight(2, 5) == pytest.approx(0.6)
        assert bartlett_weight(9, 5) == 0.0
        with pytest.raises(ValueError):
            bartlett_weight(1, 0)

    def test_bias_factor_values(self):
        assert bias_factor(1.0) == pytest.approx(1.0 / 3.0)
        assert bias_factor(0.08) == pytest.approx(0.9221333333, rel=1e-9)
        with pytest.raises(ValueError):
            bias_factor(0.0)
        with pytest.raises(ValueError):
            bias_factor(1.5)
        # strictly decreasing on (0, 1]: minimum at b = 1
        grid = np.linspace(0.01, 1.0, 50)
        vals = [bias_factor(b) for b in grid]
        assert np.all(np.diff(vals) < 0)


class TestPartialSums:
    def test_cumulative_and_terminal_zero(self, rng):
        v = random_scores(rng, n=4, t=6, k=2)
        ps = partial_sums(v)
        np.testing.assert_allclose(ps.s_it[:, 0], v[:, 0], rtol=1e-12)
        np.testing.assert_allclose(np.diff(ps.s_it, axis=1), v[:, 1:], rtol=1e-12)
        scale = np.abs(v).sum()
        np.testing.assert_allclose(ps.s_bar_t[-1], 0.0, atol=1e-12 * scale)


class TestOmegaArellano:
    def test_single_unit_centered_scores_vanish(self, rng):
        v = random_scores(rng, n=1, t=5, k=2)
        np.testing.assert_allclose(omega_arellano(v).omega, 0.0, atol=1e-14)

    def test_direct_sum_oracle(self, rng):
        v = rng.standard_normal((4, 3, 2))
        rows = v.sum(axis=1)
        oracle = sum(np.outer(r, r) for r in rows) / (4 * 3) ** 2
        np.testing.assert_allclose(omega_arellano(v).omega, oracle, rtol=1e-12)

    def test_known_row_sums(self):
        # k=1, N=2, T=2, unit row sums (+1, -1): omega = 2 / (4*4)
        v = np.array([[[0.5], [0.5]], [[-0.5], [-0.5]]])
        assert omega_arellano(v).omega[0, 0] == pytest.approx(0.125)


class TestOmegaDriscollKraay:
    def test_bandwidth_one_is_contemporaneous(self, rng):
        v = random_scores(rng, n=3, t=5, k=2)
        sbar = v.sum(axis=0)
        oracle = sbar.T @ sbar / (3 * 5) ** 2
        np.testing.assert_allclose(omega_driscoll_kraay(v, 1).omega, oracle, rtol=1e-12)

    def test_brute_force_oracle(self, rng):
        v = rng.standard_normal((2, 5, 2))
        np.testing.assert_allclose(
            omega_driscoll_kraay(v, 3).omega, brute_force_kernel_sum(v, 3, per_unit=False),
            rtol=1e-10, atol=1e-14,
        )

    def test_vanishing_period_sums(self):
        v = np.array([[[1.0], [2.0]], [[-1.0], [-2.0]]])
        np.testing.assert_allclose(omega_driscoll_kraay(v, 2).omega, 0.0, atol=1e-14)


class TestOmegaNeweyWest:
    def test_bandwidth_one_is_diagonal(self, rng):
        v = random_scores(rng, n=3, t=4, k=2)
        oracle = np.einsum("itj,itl->jl", v, v) / (3 * 4) ** 2
        np.testing.assert_allclose(omega_newey_west(v, 1).omega, oracle, rtol=1e-12)

    def test_brute_force_oracle(self, rng):
        v = rng.standard_normal((3, 6, 2))
        np.testing.assert_allclose(
            omega_newey_west(v, 2).omega, brute_force_kernel_sum(v, 2, per_unit=True),
            rtol=1e-10, atol=1e-14,
        )

    def test_single_period_equals_arellano(self, rng):
        v = rng.standard_normal((4, 1, 2))
        np.testing.assert_allclose(
            omega_newey_west(v, 1).omega, omega_arellano(v).omega, rtol=1e-12
        )


class TestChsIdentities:
    def test_exact_decomposition(self, rng):
        for _ in range(25):
            v = random_scores(rng)
            t = v.shape[1]
            for m in (1, max(1, t // 2), t):
                combo = (
                    omega_arellano(v).omega
                    + omega_driscoll_kraay(v, m).omega
                    - omega_newey_west(v, m).omega
                )
                np.testing.assert_array_equal(omega_chs(v, m).omega, combo)

    def test_partial_sum_form_matches(self, rng):
        for _ in range(50):
            v = random_scores(rng)
            t = v.shape[1]
            for m in range(1, t + 1):
                direct = omega_chs(v, m).omega
                ps = omega_chs_partial_sum(v, m).omega
                scale = max(np.abs(direct).max(), 1e-12)
                assert np.abs(direct - ps).max() <= 1e-10 * scale

    def test_single_period_equals_dk(self, rng):
        v = rng.standard_normal((4, 1, 2))
        np.testing.assert_allclose(
            omega_chs(v, 1).omega, omega_driscoll_kraay(v, 1).omega, atol=1e-14
        )

    def test_bandwidth_above_t_rejected_for_partial_sum(self, rng):
        v = random_scores(rng, n=3, t=4, k=1)
        with pytest.raises(ValueError):
            omega_chs_partial_sum(v, 5)

    def test_negative_instance_detected(self):
        # frozen search hit: scalar CHS goes negative at the full bandwidth
        rng = np.random.default_rng(11)
        n, t = int(rng.integers(2, 8)), int(rng.integers(3, 10))
        v = rng.standard_normal((n, t, 1))
        v -= v.mean(axis=(0, 1), keepdims=True)
        est = omega_chs(v, t)
        assert est.omega[0, 0] < 0
        assert not est.is_psd

    def test_single_unit_blocks_cancel(self, rng):
        v = random_scores(rng, n=1, t=6, k=2)
        direct = omega_chs(v, 3).omega
        ps = omega_chs_partial_sum(v, 3).omega
        np.testing.assert_allclose(ps, direct, atol=1e-14)


class TestBiasCorrections:
    def test_bcchs_scaling_exact(self, rng):
        v = random_scores(rng, n=3, t=6, k=2)
        base = omega_chs(v, 6).omega
        corrected = omega_bcchs(v, 6).omega
        np.testing.assert_array_equal(corrected, base / bias_factor(1.0))
        np.testing.assert_allclose(corrected, 3.0 * base, rtol=1e-12)

    def test_bcchs_small_b_ratio(self, rng):
        v = random_scores(rng, n=2, t=100, k=1)
        ratio = omega_bcchs(v, 1).omega / omega_chs(v, 1).omega
        np.testing.assert_allclose(ratio, 1.0 / bias_factor(0.01), rtol=1e-12)

    def test_dka_assembly(self, rng):
        v = random_scores(rng, n=4, t=5, k=2)
        m = 3
        h = bias_factor(m / 5)
        oracle = omega_arellano(v).omega + omega_driscoll_kraay(v, m).omega / h
        np.testing.assert_array_equal(omega_dka(v, m).omega, oracle)

    def test_dka_reduces_to_arellano_when_dk_vanishes(self):
        v = np.array([[[1.0], [2.0]], [[-1.0], [-2.0]]])
        np.testing.assert_allclose(
            omega_dka(v, 2).omega, omega_arellano(v).omega, atol=1e-14
        )

    def test_scalar_monotone_bias_relation(self, rng):
        for _ in range(20):
            v = random_scores(rng, k=1)
            t = v.shape[1]
            m = int(rng.integers(1, t + 1))
            chs = omega_chs(v, m).omega[0, 0]
            bc = omega_bcchs(v, m).omega[0, 0]
            if chs >= 0:
                assert bc >= chs


class TestDofAdjustedEstimators:
    def test_hc1_factor(self, rng):
        v = random_scores(rng, n=25, t=25, k=2)
        est = omega_ehw(v)
        assert est.dof_factor == pytest.approx(625 / 623)
        oracle = (625 / 623) * np.einsum("itj,itl->jl", v, v) / 625**2
        np.testing.assert_allclose(est.omega, oracle, rtol=1e-12)

    def test_cluster_units_is_scaled_arellano(self, rng):
        v = random_scores(rng, n=5, t=4, k=2)
        c = (5 / 4) * ((20 - 1) / (20 - 2))
        np.testing.assert_allclose(
            omega_cluster_units(v).omega, c * omega_arellano(v).omega, rtol=1e-12
        )

    def test_cluster_periods_is_scaled_dk1(self, rng):
        v = random_scores(rng, n=5, t=4, k=2)
        c = (4 / 3) * ((20 - 1) / (20 - 2))
        np.testing.assert_allclose(
            omega_cluster_periods(v).omega, c * omega_driscoll_kraay(v, 1).omega, rtol=1e-12
        )

    def test_cluster_preconditions(self, rng):
        with pytest.raises(ValueError):
            omega_cluster_units(random_scores(rng, n=1, t=5, k=1))


class TestSandwich:
    def test_omega_equals_qhat(self, rng):
        q = np.array([[2.0, 0.3], [0.3, 1.5]])
        np.testing.assert_allclose(sandwich(q, q), np.linalg.inv(q), rtol=1e-12)

    def test_zero_omega(self):
        q = np.eye(3) * 2.0
        np.testing.assert_allclose(sandwich(q, np.zeros((3, 3))), 0.0, atol=1e-15)

    def test_two_by_two_closed_form(self, rng):
        q = np.array([[3.0, 1.0], [1.0, 2.0]])
        omega = np.array([[1.0, 0.2], [0.2, 0.5]])
        det = 3.0 * 2.0 - 1.0
        qinv = np.array([[2.0, -1.0], [-1.0, 3.0]]) / det
        np.testing.assert_allclose(sandwich(q, omega), qinv @ omega @ qinv, rtol=1e-12)

    def test_scaled_variance(self):
        v = np.array([[4.0, 1.0], [1.0, 9.0]])
        assert scaled_variance(v, [0.0, 1.0]) == pytest.approx(9.0)
        assert scaled_variance(v, [1.0, 1.0]) == pytest.approx(15.0)


class TestMatrixProperties:
    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_psd_estimators_stay_psd(self, seed):
        rng = np.random.default_rng(seed)
        v = random_scores(rng)
        t = v.shape[1]
        m = int(rng.integers(1, t + 1))
        for est in (
            omega_arellano(v),
            omega_driscoll_kraay(v, m),
            omega_newey_west(v, m),
            omega_dka(v, m),
            omega_ehw(v),
            omega_cluster_units(v),
            omega_cluster_periods(v),
        ):
            assert est.is_psd, est.kind
            w = np.linalg.eigvalsh(est.omega)
            assert w[0] >= -1e-10 * abs(np.trace(est.omega))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_unit_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        v = random_scores(rng)
        t = v.shape[1]
        m = int(rng.integers(1, t + 1))
        perm = rng.permutation(v.shape[0])
        for fn in (
            omega_arellano,
            lambda s: omega_driscoll_kraay(s, m),
            lambda s: omega_newey_west(s, m),
            lambda s: omega_chs(s, m),
            omega_ehw,
            omega_cluster_units,
            omega_cluster_periods,
        ):
            a, b = fn(v).omega, fn(v[perm]).omega
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-13)

    def test_time_permutation_invariance_for_orderfree_kinds(self, rng):
        v = random_scores(rng, n=4, t=6, k=2)
        perm = rng.permutation(6)
        vp = v[:, perm]
        for fn in (omega_arellano, omega_ehw, omega_cluster_units):
            np.testing.assert_allclose(fn(v).omega, fn(vp).omega, rtol=1e-9, atol=1e-13)
        # kernel estimators are order dependent by design
        a = omega_driscoll_kraay(v, 3).omega
        b = omega_driscoll_kraay(vp, 3).omega
        assert not np.allclose(a, b)

    def test_symmetry_enforced(self, rng):
        v = random_scores(rng, n=5, t=7, k=3)
        for est in (omega_chs(v, 4), omega_dka(v, 4), omega_ehw(v)):
            np.testing.assert_array_equal(est.omega, est.omega.T)


class TestAgainstFittedPanel:
    def test_fitted_scores_have_exact_properties(self, rng):
        data = random_panel(rng, n=5, t=6, k=2)
        fit = fit_pols(data)
        t = fit.n_periods
        # CHS at M=T equals DK + A - NW with all pieces well defined
        est = omega_chs(fit.scores, t)
        assert est.bandwidth_m == t
        assert est.b == pytest.approx(1.0)
