import numpy as np
import pytest

from twowayfb import PanelDataset, fit_pols


def random_panel(rng, n=None, t=None, k=None, intercept=True):
    """A random balanced panel with mild dependence, for oracle tests."""
    n = int(rng.integers(2, 8)) if n is None else n
    t = int(rng.integers(2, 9)) if t is None else t
    k = int(rng.integers(1, 4)) if k is None else k
    n_x = k - 1 if intercept else k
    alpha = rng.standard_normal((n, 1, max(n_x, 1)))
    gamma = rng.standard_normal((1, t, max(n_x, 1)))
    x = rng.standard_normal((n, t, n_x)) + 0.5 * alpha[:, :, :n_x] + 0.5 * gamma[:, :, :n_x]
    beta = rng.standard_normal(n_x + 1)
    u = rng.standard_normal((n, t)) + 0.5 * rng.standard_normal((n, 1)) + 0.5 * rng.standard_normal((1, t))
    y = beta[0] + x @ beta[1:] + u
    if intercept:
        X = np.concatenate([np.ones((n, t, 1)), x], axis=2)
        return PanelDataset(y=y, X=X, intercept_col=0)
    if n_x == 0:
        raise ValueError("need at least one regressor without intercept")
    return PanelDataset(y=y, X=x)


def random_scores(rng, n=None, t=None, k=None):
    """Centered random score arrays (total sum zero, like fitted scores)."""
    n = int(rng.integers(2, 8)) if n is None else n
    t = int(rng.integers(2, 9)) if t is None else t
    k = int(rng.integers(1, 4)) if k is None else k
    v = rng.standard_normal((n, t, k))
    return v - v.mean(axis=(0, 1), keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_fit(rng):
    return fit_pols(random_panel(rng, n=4, t=6, k=2))
