import numpy as np
import pytest

from conftest import random_panel
from twowayfb import (
    DegenerateScoresError,
    PanelDataset,
    andrews_bandwidth,
    bandwidth_from_rho,
    fit_pols,
)


class TestScalarRule:
    def test_zero_rho_gives_one(self):
        choice = bandwidth_from_rho(0.0, 25)
        assert choice.m_hat == 1
        assert choice.b_hat == pytest.approx(1 / 25)
        assert not choice.truncated_at_t

    def test_half_rho_t25(self):
        # 1.8171 * (0.25/0.5625)^(1/3) * 25^(1/3) + 1 = 5.05 -> 5
        raw = 1.8171 * (0.25 / 0.5625) ** (1 / 3) * 25 ** (1 / 3) + 1.0
        assert raw == pytest.approx(5.0547, abs=2e-4)
        assert bandwidth_from_rho(0.5, 25).m_hat == 5

    def test_near_unit_rho_truncates(self):
        choice = bandwidth_from_rho(0.999999, 25)
        assert choice.m_hat == 25
        assert choice.truncated_at_t
        choice = bandwidth_from_rho(1.0, 25)
        assert choice.m_hat == 25
        assert choice.truncated_at_t

    def test_nondecreasing_in_abs_rho(self):
        grid = np.linspace(0.0, 0.999, 200)
        ms = [bandwidth_from_rho(r, 50).m_hat for r in grid]
        assert np.all(np.diff(ms) >= 0)
        # symmetric in the sign of rho
        assert bandwidth_from_rho(-0.4, 50).m_hat == bandwidth_from_rho(0.4, 50).m_hat


class TestAndrewsBandwidth:
    def test_scale_invariance(self, rng):
        data = random_panel(rng, n=5, t=12, k=2)
        fit1 = fit_pols(data)
        scaled = PanelDataset(
            y=4.2 * data.y, X=data.X,
            regressor_names=data.regressor_names, intercept_col=data.intercept_col,
        )
        fit2 = fit_pols(scaled)
        a, b = andrews_bandwidth(fit1), andrews_bandwidth(fit2)
        assert a.m_hat == b.m_hat
        np.testing.assert_allclose(a.rho_hat[1], b.rho_hat[1], rtol=1e-9)

    def test_bounds(self, rng):
        for _ in range(20):
            data = random_panel(rng, t=int(rng.integers(3, 15)), k=int(rng.integers(2, 4)))
            fit = fit_pols(data)
            choice = andrews_bandwidth(fit)
            assert 1 <= choice.m_hat <= fit.n_periods
            assert choice.b_hat == choice.m_hat / fit.n_periods

    def test_intercept_gets_no_weight(self, rng):
        """Same bandwidth no matter how the intercept's score series looks."""
        data = random_panel(rng, n=5, t=10, k=2)
        fit = fit_pols(data)
        choice = andrews_bandwidth(fit)
        assert np.isnan(choice.rho_hat[0])  # constant column skipped
        assert np.isfinite(choice.rho_hat[1])

    def test_degenerate_scores(self):
        # perfect fit: residuals and scores all zero
        x = np.arange(12.0).reshape(3, 4)
        y = 2.0 * x
        data = PanelDataset(y=y, X=x[:, :, None])
        with pytest.raises(DegenerateScoresError):
            andrews_bandwidth(fit_pols(data))

    def test_needs_three_periods(self, rng):
        data = random_panel(rng, n=4, t=2, k=2)
        with pytest.raises(ValueError):
            andrews_bandwidth(fit_pols(data))

    def test_matches_scalar_rule_for_single_regressor(self, rng):
        data = random_panel(rng, n=6, t=9, k=2)
        fit = fit_pols(data)
        choice = andrews_bandwidth(fit)
        scalar = bandwidth_from_rho(choice.rho_hat[1], 9)
        assert choice.m_hat == scalar.m_hat
