"""Pooled OLS and two-way fixed effects estimation on balanced panels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .paneldata import PanelDataset, demean_two_way

__all__ = [
    "RegressionFit",
    "SingularDesignError",
    "fit_pols",
    "fit_twfe",
    "scores_cross_section_average",
]

# Reciprocal condition numbers of X'X/(NT) below this are treated as singular.
RCOND_MIN = 1e-12


class SingularDesignError(Exception):
    """The regressor cross-product matrix is (numerically) singular."""


@dataclass(frozen=True)
class RegressionFit:
    """Point estimates plus the ingredients every variance estimator needs.

    Attributes
    ----------
    beta : np.ndarray
        Coefficients, shape (k,).
    residuals : np.ndarray
        Shape (N, T).
    scores : np.ndarray
        Per-cell moment contributions x_it * u_it, shape (N, T, k).
    qhat : np.ndarray
        (1/NT) sum of x_it x_it', shape (k, k), symmetric positive definite.
    kind : {"POLS", "TWFE"}
    regressor_names : tuple of str
    intercept_col : int or None
        Which column of the design is the constant (None after demeaning).
    """

    beta: np.ndarray
    residuals: np.ndarray
    scores: np.ndarray
    qhat: np.ndarray
    kind: Literal["POLS", "TWFE"]
    regressor_names: tuple = ()
    intercept_col: int | None = None

    @property
    def n_units(self) -> int:
        return self.residuals.shape[0]

    @property
    def n_periods(self) -> int:
        return self.residuals.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.scores.shape[2]


def _solve_normal_equations(X: np.ndarray, y: np.ndarray):
    """Solve stacked least squares via an eigendecomposition of X'X.

    Returns (beta, qhat). Raises SingularDesignError when the reciprocal
    condition number of qhat falls below RCOND_MIN.
    """
    nt = X.shape[0]
    qhat = (X.T @ X) / nt
    qhat = (qhat + qhat.T) / 2.0
    w, U = np.linalg.eigh(qhat)
    if w[0] <= 0.0 or w[0] / w[-1] < RCOND_MIN:
        raise SingularDesignError(
            f"design matrix is numerically singular (rcond={w[0] / w[-1]:.2e})"
        )
    rhs = X.T @ y / nt
    beta = U @ ((U.T @ rhs) / w)
    return beta, qhat


def fit_pols(data: PanelDataset) -> RegressionFit:
    """Pooled OLS of y on X over the stacked (N*T) observations."""
    n, t, k = data.X.shape
    Xs = data.X.reshape(n * t, k)
    ys = data.y.reshape(n * t)
    beta, qhat = _solve_normal_equations(Xs, ys)
    resid = (ys - Xs @ beta).reshape(n, t)
    scores = data.X * resid[:, :, None]
    return RegressionFit(
        beta=beta,
        residuals=resid,
        scores=scores,
        qhat=qhat,
        kind="POLS",
        regressor_names=data.regressor_names,
        intercept_col=data.intercept_col,
    )


def fit_twfe(data: PanelDataset) -> RegressionFit:
    """Two-way fixed effects: pooled OLS on the two-way demeaned panel.

    Equivalent to including a full set of unit and period dummies; scores are
    built from the demeaned regressors and TWFE residuals. A regressor with
    no variation left after demeaning raises SingularDesignError.
    """
    demeaned = demean_two_way(data)
    for name in demeaned.regressor_names:
        j_orig = data.regressor_names.index(name)
        j_new = demeaned.regressor_names.index(name)
        before = np.linalg.norm(data.X[:, :, j_orig])
        after = np.linalg.norm(demeaned.X[:, :, j_new])
        if after <= RCOND_MIN * before:
            raise SingularDesignError(
                f"regressor '{name}' has no within variation after two-way demeaning"
            )
    fit = fit_pols(demeaned)
    return RegressionFit(
        beta=fit.beta,
        residuals=fit.residuals,
        scores=fit.scores,
        qhat=fit.qhat,
        kind="TWFE",
        regressor_names=fit.regressor_names,
        intercept_col=None,
    )


def scores_cross_section_average(fit: RegressionFit) -> np.ndarray:
    """Per-period cross-section average of the scores, shape (T, k)."""
    return fit.scores.mean(axis=0)
