"""Middle-matrix (omega) estimators for two-way dependent panel scores.

All estimators share the scaling

    omega = (1 / (N*T)^2) * <weighted double/triple sum of score outer products>

so that the sandwich qhat^{-1} omega qhat^{-1} estimates Var(beta_hat)
directly. The CHS estimator is the exact linear combination

    omega_chs = omega_arellano + omega_driscoll_kraay - omega_newey_west

and also has an algebraically identical representation in terms of score
partial sums (omega_chs_partial_sum), kept as an independent code path so
the two can be cross-checked.

Accumulation order is fixed: time-kernel estimators sum lag contributions
m = 0, 1, ..., min(M, T) - 1 with Bartlett weight (1 - m/M), symmetrizing
each lag term, and omega_chs combines the three already-symmetrized
component matrices elementwise. This makes the decomposition identity exact
in floating point, not just to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

__all__ = [
    "VarianceKind",
    "VarianceEstimate",
    "ScorePartialSums",
    "bartlett_weight",
    "bias_factor",
    "partial_sums",
    "omega_arellano",
    "omega_driscoll_kraay",
    "omega_newey_west",
    "omega_chs",
    "omega_chs_partial_sum",
    "omega_bcchs",
    "omega_dka",
    "omega_ehw",
    "omega_cluster_units",
    "omega_cluster_periods",
    "sandwich",
    "scaled_variance",
    "estimate_variance",
]

VarianceKind = Literal[
    "EHW", "CLUSTER_I", "CLUSTER_T", "DK", "NW", "ARELLANO", "CHS", "BCCHS", "DKA"
]

# Kinds that need a bandwidth.
KERNEL_KINDS = frozenset({"DK", "NW", "CHS", "BCCHS", "DKA"})

# Relative eigenvalue slack below which a matrix still counts as PSD.
PSD_TOL = 1e-10


@dataclass(frozen=True)
class VarianceEstimate:
    """A symmetric k x k middle matrix, optionally with its sandwich.

    Attributes
    ----------
    omega : np.ndarray
        Symmetric middle matrix, shape (k, k).
    kind : VarianceKind
    vhat : np.ndarray or None
        qhat^{-1} omega qhat^{-1}, filled by :func:`sandwich` /
        :func:`estimate_variance`.
    bandwidth_m : int or None
        Bartlett truncation lag, for kernel-based kinds.
    b : float or None
        bandwidth_m / T.
    is_psd : bool
        Smallest eigenvalue >= -1e-10 * |trace|. Always true for the
        PSD-by-construction kinds; may be false for CHS/BCCHS.
    dof_factor : float or None
        Finite-sample degrees-of-freedom factor applied (EHW and the one-way
        cluster estimators only).
    """

    omega: np.ndarray
    kind: VarianceKind
    vhat: np.ndarray | None = None
    bandwidth_m: int | None = None
    b: float | None = None
    is_psd: bool = True
    dof_factor: float | None = None


@dataclass(frozen=True)
class ScorePartialSums:
    """Cumulative score sums over time.

    ``s_it[i, t-1]`` holds sum_{j<=t} v_ij (shape (N, T, k)) and
    ``s_bar_t[t-1]`` the cross-section total of s_it (shape (T, k)).
    With a fitted score array the final cross-section total is zero by the
    normal equations.
    """

    s_it: np.ndarray
    s_bar_t: np.ndarray


def bartlett_weight(lag: int, bandwidth: int) -> float:
    """Triangular kernel weight max(0, 1 - lag/bandwidth)."""
    if bandwidth < 1:
        raise ValueError(f"bandwidth must be >= 1, got {bandwidth}")
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    return max(0.0, 1.0 - lag / bandwidth)


def bias_factor(b: float) -> float:
    """Multiplicative small-b bias 1 - b + b^2/3 of the Bartlett estimator.

    For bandwidth fraction b = M/T in (0, 1], the Bartlett kernel variance
    estimator is centered on bias_factor(b) times its target, so dividing by
    this factor removes the bias. Strictly decreasing, with value 1/3 at b=1.
    """
    if not 0.0 < b <= 1.0:
        raise ValueError(f"b must be in (0, 1], got {b}")
    return 1.0 - b + b * b / 3.0


def partial_sums(scores: np.ndarray) -> ScorePartialSums:
    """Cumulative sums of scores over time, per unit and cross-section."""
    s_it = np.cumsum(scores, axis=1)
    return ScorePartialSums(s_it=s_it, s_bar_t=s_it.sum(axis=0))


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def _psd_flag(omega: np.ndarray) -> bool:
    if omega.shape == (1, 1):
        return bool(omega[0, 0] >= -PSD_TOL * abs(omega[0, 0]))
    w = np.linalg.eigvalsh(omega)
    return bool(w[0] >= -PSD_TOL * abs(np.trace(omega)))


def _check_scores(scores: np.ndarray) -> tuple[int, int, int]:
    scores = np.asarray(scores)
    if scores.ndim != 3:
        raise ValueError(f"scores must have shape (N, T, k), got {scores.shape}")
    return scores.shape


def omega_arellano(scores: np.ndarray) -> VarianceEstimate:
    """Cluster-by-unit estimator: outer products of unit score totals.

    omega = (1/(NT)^2) sum_i (sum_t v_it)(sum_s v_is)'. PSD by construction.
    """
    n, t, k = _check_scores(scores)
    rows = scores.sum(axis=1)  # (N, k)
    omega = _symmetrize(rows.T @ rows / float(n * t) ** 2)
    return VarianceEstimate(omega=omega, kind="ARELLANO", is_psd=_psd_flag(omega))


def _kernel_weighted(lag_cross, t_len: int, bandwidth: int, k: int) -> np.ndarray:
    """Sum Bartlett-weighted lag terms m = 0 .. min(M, T)-1 in fixed order.

    ``lag_cross(m)`` must return the (k, k) lag-m cross-product; lag terms
    for m >= 1 are symmetrized before weighting.
    """
    acc = np.zeros((k, k))
    for m in range(min(bandwidth, t_len)):
        w = 1.0 - m / bandwidth
        c = lag_cross(m)
        acc += c if m == 0 else w * (c + c.T)
    return acc


def omega_driscoll_kraay(scores: np.ndarray, bandwidth: int) -> VarianceEstimate:
    """Bartlett HAC of the cross-section score totals.

    omega = (1/(NT)^2) sum_{t,s} k(|t-s|/M) (sum_i v_it)(sum_j v_js)'.
    PSD because the Bartlett kernel matrix is PSD.
    """
    n, t, k = _check_scores(scores)
    if bandwidth < 1:
        raise ValueError(f"bandwidth must be >= 1, got {bandwidth}")
    sbar = scores.sum(axis=0)  # (T, k)

    def lag_cross(m: int) -> np.ndarray:
        if m == 0:
            return sbar.T @ sbar
        return sbar[:-m].T @ sbar[m:]

    omega = _symmetrize(_kernel_weighted(lag_cross, t, bandwidth, k) / float(n * t) ** 2)
    return VarianceEstimate(
        omega=omega, kind="DK", bandwidth_m=bandwidth, b=bandwidth / t, is_psd=_psd_flag(omega)
    )


def omega_newey_west(scores: np.ndarray, bandwidth: int) -> VarianceEstimate:
    """Average over units of per-unit Bartlett HAC estimators.

    omega = (1/(NT)^2) sum_i sum_{t,s} k(|t-s|/M) v_it v_is'.
    """
    n, t, k = _check_scores(scores)
    if bandwidth < 1:
        raise ValueError(f"bandwidth must be >= 1, got {bandwidth}")

    def lag_cross(m: int) -> np.ndarray:
        if m == 0:
            return np.einsum("itj,itl->jl", scores, scores)
        return np.einsum("itj,itl->jl", scores[:, :-m], scores[:, m:])

    omega = _symmetrize(_kernel_weighted(lag_cross, t, bandwidth, k) / float(n * t) ** 2)
    return VarianceEstimate(
        omega=omega, kind="NW", bandwidth_m=bandwidth, b=bandwidth / t, is_psd=_psd_flag(omega)
    )


def omega_chs(scores: np.ndarray, bandwidth: int) -> VarianceEstimate:
    """Two-way cluster robust estimator with serially correlated time effects.

    Computed as the exact elementwise combination
    omega_arellano + omega_driscoll_kraay - omega_newey_west of the three
    component matrices (each already symmetrized), so the decomposition
    identity holds bit-for-bit. Not guaranteed PSD; negativity is recorded
    in ``is_psd``, never raised.
    """
    _, t, _ = _check_scores(scores)
    a = omega_arellano(scores).omega
    dk = omega_driscoll_kraay(scores, bandwidth).omega
    nw = omega_newey_west(scores, bandwidth).omega
    omega = a + dk - nw
    return VarianceEstimate(
        omega=omega, kind="CHS", bandwidth_m=bandwidth, b=bandwidth / t, is_psd=_psd_flag(omega)
    )


def omega_chs_partial_sum(scores: np.ndarray, bandwidth: int) -> VarianceEstimate:
    """CHS middle matrix assembled from score partial sums.

    Algebraically identical to :func:`omega_chs` (an exact Bartlett
    partial-sum identity); kept as an independent implementation for
    cross-checking. Three blocks, all scaled by (NT)^{-2}:

    1. sum_i S_iT S_iT'                                (unit totals)
    2. (2/M) sum_{t<T} Sbar_t Sbar_t'
       - (1/M) sum_{t<=T-M-1} (Sbar_t Sbar_{t+M}' + sym)
    3. minus, per unit: the analogous two sums of S_it plus the boundary
       terms -(1/M) sum_{t=T-M}^{T-1}(S_it S_iT' + sym) + S_iT S_iT'
       (these vanish from block 2 because the full cross-section partial
       sum is zero at t = T).

    Empty summation ranges contribute zero, which makes M = T valid.
    """
    n, t, k = _check_scores(scores)
    if not 1 <= bandwidth <= t:
        raise ValueError(f"bandwidth must be in [1, T={t}], got {bandwidth}")
    m = bandwidth
    ps = partial_sums(scores)
    s = ps.s_it  # (N, T, k); s[:, t-1] = S_it
    sbar = ps.s_bar_t  # (T, k)
    s_total = s[:, -1, :]  # (N, k) unit totals

    block1 = s_total.T @ s_total

    inner = sbar[:-1]  # Sbar_t for t = 1..T-1
    block2 = (2.0 / m) * (inner.T @ inner)
    top = t - m - 1  # number of cross terms
    if top >= 1:
        cross = sbar[:top].T @ sbar[m : m + top]
        block2 -= (1.0 / m) * (cross + cross.T)

    s_inner = s[:, :-1]  # (N, T-1, k)
    block3 = (2.0 / m) * np.einsum("itj,itl->jl", s_inner, s_inner)
    if top >= 1:
        cross_i = np.einsum("itj,itl->jl", s[:, :top], s[:, m : m + top])
        block3 -= (1.0 / m) * (cross_i + cross_i.T)
    lo = max(t - m, 1)  # S_i0 = 0, so the t = 0 term of an M = T range is dropped
    tail = np.einsum("itj,il->jl", s[:, lo - 1 : t - 1], s_total)
    block3 -= (1.0 / m) * (tail + tail.T)
    block3 += s_total.T @ s_total

    omega = _symmetrize((block1 + block2 - block3) / float(n * t) ** 2)
    return VarianceEstimate(
        omega=omega, kind="CHS", bandwidth_m=m, b=m / t, is_psd=_psd_flag(omega)
    )


def omega_bcchs(scores: np.ndarray, bandwidth: int) -> VarianceEstimate:
    """Bias-corrected CHS: omega_chs divided by bias_factor(M/T)."""
    _, t, _ = _check_scores(scores)
    base = omega_chs(scores, bandwidth)
    omega = base.omega / bias_factor(bandwidth / t)
    return VarianceEstimate(
        omega=omega, kind="BCCHS", bandwidth_m=bandwidth, b=bandwidth / t, is_psd=base.is_psd
    )


def omega_dka(scores: np.ndarray, bandwidth: int) -> VarianceEstimate:
    """Cluster-by-unit plus bias-corrected Driscoll-Kraay.

    omega = omega_arellano + omega_driscoll_kraay / bias_factor(M/T).
    Sum of two PSD matrices, hence always PSD.
    """
    _, t, _ = _check_scores(scores)
    a = omega_arellano(scores).omega
    dk = omega_driscoll_kraay(scores, bandwidth).omega
    omega = a + dk / bias_factor(bandwidth / t)
    return VarianceEstimate(
        omega=omega, kind="DKA", bandwidth_m=bandwidth, b=bandwidth / t, is_psd=_psd_flag(omega)
    )


def omega_ehw(scores: np.ndarray) -> VarianceEstimate:
    """Heteroskedasticity-robust estimator with the HC1 factor NT/(NT-k)."""
    n, t, k = _check_scores(scores)
    nt = n * t
    if nt <= k:
        raise ValueError("need NT > k for the HC1 factor")
    dof = nt / (nt - k)
    omega = _symmetrize(dof * np.einsum("itj,itl->jl", scores, scores) / float(nt) ** 2)
    return VarianceEstimate(omega=omega, kind="EHW", is_psd=_psd_flag(omega), dof_factor=dof)


def omega_cluster_units(scores: np.ndarray) -> VarianceEstimate:
    """One-way cluster-by-unit estimator with the usual dof factor.

    Equals [N/(N-1)] * [(NT-1)/(NT-k)] times :func:`omega_arellano`.
    """
    n, t, k = _check_scores(scores)
    if n < 2:
        raise ValueError("cluster-by-unit needs N >= 2")
    dof = (n / (n - 1)) * ((n * t - 1) / (n * t - k))
    omega = dof * omega_arellano(scores).omega
    return VarianceEstimate(omega=omega, kind="CLUSTER_I", is_psd=_psd_flag(omega), dof_factor=dof)


def omega_cluster_periods(scores: np.ndarray) -> VarianceEstimate:
    """One-way cluster-by-period estimator with the usual dof factor.

    Equals [T/(T-1)] * [(NT-1)/(NT-k)] times the Driscoll-Kraay estimator
    at bandwidth 1 (only contemporaneous cross products).
    """
    n, t, k = _check_scores(scores)
    if t < 2:
        raise ValueError("cluster-by-period needs T >= 2")
    dof = (t / (t - 1)) * ((n * t - 1) / (n * t - k))
    omega = dof * omega_driscoll_kraay(scores, 1).omega
    return VarianceEstimate(omega=omega, kind="CLUSTER_T", is_psd=_psd_flag(omega), dof_factor=dof)


def sandwich(qhat: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """qhat^{-1} omega qhat^{-1}, symmetrized."""
    qinv_omega = np.linalg.solve(qhat, omega)
    return _symmetrize(np.linalg.solve(qhat, qinv_omega.T).T)


def scaled_variance(vhat: np.ndarray, restriction: np.ndarray) -> float:
    """Scalar restriction variance R vhat R' for a single restriction row."""
    r = np.asarray(restriction, dtype=float).reshape(-1)
    return float(r @ vhat @ r)


_OMEGA_DISPATCH = {
    "ARELLANO": omega_arellano,
    "EHW": omega_ehw,
    "CLUSTER_I": omega_cluster_units,
    "CLUSTER_T": omega_cluster_periods,
    "DK": omega_driscoll_kraay,
    "NW": omega_newey_west,
    "CHS": omega_chs,
    "BCCHS": omega_bcchs,
    "DKA": omega_dka,
}


def estimate_variance(fit, kind: VarianceKind, bandwidth: int | None = None) -> VarianceEstimate:
    """Middle matrix plus sandwich for a fitted regression.

    ``bandwidth`` is required for the kernel-based kinds (DK, NW, CHS,
    BCCHS, DKA) and ignored otherwise.
    """
    if kind not in _OMEGA_DISPATCH:
        raise ValueError(f"unknown variance kind '{kind}'")
    if kind in KERNEL_KINDS:
        if bandwidth is None:
            raise ValueError(f"variance kind '{kind}' needs a bandwidth")
        est = _OMEGA_DISPATCH[kind](fit.scores, bandwidth)
    else:
        est = _OMEGA_DISPATCH[kind](fit.scores)
    return replace(est, vhat=sandwich(fit.qhat, est.omega))
