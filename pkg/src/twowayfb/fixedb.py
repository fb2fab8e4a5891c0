"""Simulation of fixed-b limiting laws and critical values.

Wiener processes are approximated by scaled partial sums of i.i.d. standard
normal increments. The bandwidth enters through the Bartlett bridge
functional: with the bridge correction Wtilde(r) = W(r) - r W(1) on a grid
of G increments and a discrete window M_G = floor(b*G), the functional is

    (1/M_G) * [ 2 * sum_{t<G} Wtilde_t Wtilde_t'
                - sum_{t <= G-M_G-1} (Wtilde_t Wtilde_{t+M_G}' + sym) ]

which is the Riemann analogue of (2/b) int Wtilde Wtilde' dr
- (1/b) int_0^{1-b} (Wtilde(r) Wtilde(r+b)' + sym) dr and mirrors the
finite-sample partial-sum form of the Bartlett variance estimators, so the
b -> 0 and b = 1 edges behave like the estimators themselves. Its mean is
bias_factor(b) times the identity.

Critical values are order statistics of |t| draws: a two-sided cv at level
0.975 is the ceil((2*0.975-1)*reps)-th smallest absolute draw, matching the
one-sided 97.5% quantile of a symmetric law (1.96 for a standard normal).

Determinism: a root seed expands into fixed-size draw chunks through
numpy SeedSequence spawning, so results are bit-identical for a given seed
regardless of how the chunks are scheduled.
"""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.stats import norm

from .bandwidth import andrews_bandwidth
from .regression import RegressionFit
from .variance import bias_factor, omega_arellano, omega_driscoll_kraay

__all__ = [
    "WienerPath",
    "CriticalValueSet",
    "PluginInputs",
    "sample_wiener_path",
    "bartlett_bridge_functional",
    "psd_sqrt",
    "unit_component_variance",
    "time_component_variance",
    "plugin_inputs",
    "simulate_plugin_cv",
    "iid_limit_cv",
    "asymptotic_table",
    "AsymptoticTable",
    "AsymptoticRow",
    "write_critical_values",
    "DEFAULT_B_GRID",
]

# Paper-scale defaults: one-off asymptotic tables vs per-dataset plug-ins.
TABLE_REPS = 50_000
TABLE_INCREMENTS = 1_000
PLUGIN_REPS = 1_000
PLUGIN_INCREMENTS = 500

DEFAULT_B_GRID = (0.0, 0.08, 0.12, 0.16, 0.20, 0.40, 0.80, 1.00)

_CHUNK = 4096

StatisticKind = Literal["CHS", "BCCHS_DKA", "IID_CHS", "IID_BCCHS", "IID_DKA", "IID_PLUGIN"]


@dataclass(frozen=True)
class WienerPath:
    """A discretized Wiener path W(t/G), t = 1..G, shape (G, k).

    Built as cumulative sums of i.i.d. N(0, I_k) increments divided by
    sqrt(G); the path starts at the first scaled increment and W(1) is the
    last row.
    """

    values: np.ndarray

    @property
    def increments(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CriticalValueSet:
    """A simulated (or analytic, at b = 0) two-sided critical value.

    ``level`` is the one-sided quantile level (0.975 corresponds to a
    two-sided 5% test / 95% confidence interval). ``dropped`` counts
    replications discarded for a nonpositive simulated denominator; it
    should be zero and acts as a tripwire.
    """

    statistic_kind: StatisticKind
    b: float
    level: float
    value: float
    reps: int
    increments: int
    seed: int | None
    c: float | None = None
    dropped: int = 0

    def csv_row(self) -> list:
        return [
            self.statistic_kind,
            self.b,
            "" if self.c is None else self.c,
            self.level,
            self.value,
            self.reps,
            self.increments,
            "" if self.seed is None else self.seed,
        ]


CV_CSV_HEADER = ["kind", "b", "c", "level", "value", "reps", "increments", "seed"]


def write_critical_values(sets: Sequence[CriticalValueSet], path) -> None:
    """Serialize critical value sets as CSV rows."""
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(CV_CSV_HEADER)
        for s in sets:
            writer.writerow(s.csv_row())


def sample_wiener_path(dims: int, increments: int, rng: np.random.Generator) -> WienerPath:
    """Draw one Wiener path as scaled partial sums of normal increments."""
    xi = rng.standard_normal((increments, dims))
    return WienerPath(values=np.cumsum(xi, axis=0) / np.sqrt(increments))


def _window(b: float, increments: int) -> int:
    if not 0.0 < b <= 1.0:
        raise ValueError(f"b must be in (0, 1], got {b}")
    if b * increments < 1.0:
        raise ValueError(f"need b * increments >= 1, got b={b}, increments={increments}")
    return max(1, int(np.floor(b * increments)))


def bartlett_bridge_functional(path: WienerPath, b: float) -> np.ndarray:
    """Bartlett fixed-b functional of the path's bridge, a k x k matrix.

    Forms Wtilde_t = W(t/G) - (t/G) W(1) and evaluates the discrete window
    sum described in the module docstring. Across paths the mean equals
    bias_factor(b) * I_k; a zero path maps to the zero matrix.
    """
    g = path.increments
    m_g = _window(b, g)
    w = path.values
    r = np.arange(1, g + 1)[:, None] / g
    wt = w - r * w[-1]
    inner = wt[: g - 1]
    acc = 2.0 * (inner.T @ inner)
    top = g - m_g - 1
    if top >= 1:
        cross = wt[:top].T @ wt[m_g : m_g + top]
        acc -= cross + cross.T
    return acc / m_g


def _bridge_quadratic_batch(w: np.ndarray, m_g: int) -> np.ndarray:
    """Scalar bridge functional for a batch of 1-D paths, shape (R, G) -> (R,)."""
    g = w.shape[1]
    r = np.arange(1, g + 1) / g
    wt = w - r[None, :] * w[:, -1:]
    acc = 2.0 * np.einsum("rg,rg->r", wt[:, : g - 1], wt[:, : g - 1])
    top = g - m_g - 1
    if top >= 1:
        acc -= 2.0 * np.einsum("rg,rg->r", wt[:, :top], wt[:, m_g : m_g + top])
    return acc / m_g


def _scalar_limit_draws(b: float, reps: int, increments: int, seed) -> tuple:
    """Batched draws of (W(1), P(b, bridge), z) for the scalar limit laws.

    The draw stream is partitioned into fixed chunks seeded by SeedSequence
    spawning, so the result depends only on (seed, reps, increments, b's
    window), never on scheduling.
    """
    m_g = _window(b, increments)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_chunks = (reps + _CHUNK - 1) // _CHUNK
    children = ss.spawn(n_chunks)
    w1 = np.empty(reps)
    p = np.empty(reps)
    z = np.empty(reps)
    for c in range(n_chunks):
        lo = c * _CHUNK
        hi = min(lo + _CHUNK, reps)
        rng = np.random.default_rng(children[c])
        xi = rng.standard_normal((hi - lo, increments))
        z[lo:hi] = rng.standard_normal(hi - lo)
        w = np.cumsum(xi, axis=1) / np.sqrt(increments)
        w1[lo:hi] = w[:, -1]
        p[lo:hi] = _bridge_quadratic_batch(w, m_g)
    return w1, p, z


def _abs_order_statistic(draws: np.ndarray, level: float) -> float:
    """Two-sided cv: order statistic of |draws| at ceil((2*level-1)*n)."""
    if not 0.5 < level < 1.0:
        raise ValueError(f"level must be in (0.5, 1), got {level}")
    a = np.abs(draws)
    idx = int(np.ceil((2.0 * level - 1.0) * a.size)) - 1
    idx = min(max(idx, 0), a.size - 1)
    return float(np.partition(a, idx)[idx])


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root after clipping negative eigenvalues to zero.

    Raises ValueError when the input is asymmetric beyond 1e-8 relative.
    """
    s = np.asarray(matrix, dtype=float)
    scale = max(np.abs(s).max(), 1e-300)
    if np.abs(s - s.T).max() > 1e-8 * scale:
        raise ValueError("matrix is not symmetric")
    w, u = np.linalg.eigh((s + s.T) / 2.0)
    return (u * np.sqrt(np.clip(w, 0.0, None))) @ u.T


def unit_component_variance(scores: np.ndarray) -> np.ndarray:
    """Plug-in long-run variance of the unit component of the scores.

    (1/(N T^2)) sum_i (sum_t v_it)(sum_s v_is)', i.e. N times the
    cluster-by-unit middle matrix. PSD by construction.
    """
    n = scores.shape[0]
    return n * omega_arellano(scores).omega


def time_component_variance(scores: np.ndarray, bandwidth: int) -> np.ndarray:
    """Bias-corrected plug-in long-run variance of the time component.

    T / bias_factor(M/T) times the Driscoll-Kraay middle matrix at the
    given bandwidth. Symmetric, but only PSD up to the bias correction;
    consumers repair it before taking a square root.
    """
    t = scores.shape[1]
    return (t / bias_factor(bandwidth / t)) * omega_driscoll_kraay(scores, bandwidth).omega


@dataclass(frozen=True)
class PluginInputs:
    """Estimated ingredients of the non-pivotal fixed-b limit.

    Attributes
    ----------
    unit_var, time_var : np.ndarray
        Plug-in component variance matrices (time_var symmetrized, possibly
        indefinite before repair).
    unit_scale, time_scale : np.ndarray
        Symmetric PSD square roots (after eigenvalue clipping); each
        reconstructs its PSD-repaired variance matrix.
    qhat : np.ndarray
    b : float
        Bandwidth fraction of the statistic under test.
    c : float
        N / T.
    restriction : np.ndarray
        The q x k restriction matrix (q = 1 for t statistics).
    m_dk, b_dk : bandwidth used inside time_var.
    n_clipped : int
        Negative eigenvalues clipped during the PSD repair of time_var.
    """

    unit_var: np.ndarray
    time_var: np.ndarray
    unit_scale: np.ndarray
    time_scale: np.ndarray
    qhat: np.ndarray
    b: float
    c: float
    restriction: np.ndarray
    m_dk: int
    b_dk: float
    n_clipped: int = 0


def plugin_inputs(
    fit: RegressionFit,
    bandwidth: int,
    restriction: np.ndarray,
    m_dk: int | None = None,
) -> PluginInputs:
    """Assemble plug-in inputs from a fitted regression.

    ``m_dk`` (the bandwidth of the time-component plug-in) defaults to the
    Andrews data-dependent choice on the same fit.
    """
    t = fit.n_periods
    if m_dk is None:
        m_dk = andrews_bandwidth(fit).m_hat
    r = np.atleast_2d(np.asarray(restriction, dtype=float))
    unit_var = unit_component_variance(fit.scores)
    time_var = time_component_variance(fit.scores, m_dk)
    time_var = (time_var + time_var.T) / 2.0
    n_clipped = int((np.linalg.eigvalsh(time_var) < 0).sum())
    return PluginInputs(
        unit_var=unit_var,
        time_var=time_var,
        unit_scale=psd_sqrt(unit_var),
        time_scale=psd_sqrt(time_var),
        qhat=fit.qhat,
        b=bandwidth / t,
        c=fit.n_units / t,
        restriction=r,
        m_dk=m_dk,
        b_dk=m_dk / t,
        n_clipped=n_clipped,
    )


def simulate_plugin_cv(
    inputs: PluginInputs,
    level: float = 0.975,
    reps: int = PLUGIN_REPS,
    increments: int = PLUGIN_INCREMENTS,
    seed=0,
) -> tuple[CriticalValueSet, CriticalValueSet]:
    """Plug-in fixed-b critical values for the CHS and BCCHS/DKA t statistics.

    Each replication draws z ~ N(0, I_k) independent of a fresh Wiener path
    and forms

        t = a'(unit_scale z + sqrt(c) time_scale W(1))
            / sqrt(h(b) a'unit_var a + c a'time_scale P time_scale' a)

    with a = qhat^{-1} R'. Because every appearance of the path is through
    the projections a'unit_scale z and a'time_scale W(r), the k-dimensional
    law collapses exactly to scalars sigma_a = ||unit_scale a||,
    sigma_g = ||time_scale a|| and a one-dimensional path, which is what is
    simulated. The BCCHS/DKA value is sqrt(h(b)) times the CHS value by
    construction (shared draws).

    Replications with a nonpositive denominator are dropped and counted in
    ``dropped`` (the count should be zero since both denominator pieces are
    PSD).
    """
    r = np.atleast_2d(inputs.restriction)
    if r.shape[0] != 1:
        raise ValueError("plug-in cv simulation covers single restrictions (q = 1)")
    a = np.linalg.solve(inputs.qhat, r[0])
    sigma_a = float(np.linalg.norm(inputs.unit_scale @ a))
    sigma_g = float(np.linalg.norm(inputs.time_scale @ a))
    if sigma_a == 0.0 and sigma_g == 0.0:
        raise ValueError("both plug-in component scales are zero under this restriction")
    h = bias_factor(inputs.b)
    w1, p, z = _scalar_limit_draws(inputs.b, reps, increments, seed)
    num = sigma_a * z + np.sqrt(inputs.c) * sigma_g * w1
    den2 = h * sigma_a**2 + inputs.c * sigma_g**2 * p
    keep = den2 > 0.0
    dropped = int(reps - keep.sum())
    draws = num[keep] / np.sqrt(den2[keep])
    value = _abs_order_statistic(draws, level)
    seed_out = seed if isinstance(seed, int) else None
    common = dict(
        b=inputs.b, level=level, reps=reps, increments=increments,
        seed=seed_out, c=inputs.c, dropped=dropped,
    )
    cv_chs = CriticalValueSet(statistic_kind="CHS", value=value, **common)
    cv_bc = CriticalValueSet(statistic_kind="BCCHS_DKA", value=np.sqrt(h) * value, **common)
    return cv_chs, cv_bc


def _iid_draws(kind: str, b: float, w1, p, z) -> np.ndarray:
    h = bias_factor(b)
    if kind == "IID_CHS":
        return w1 / np.sqrt(p)
    if kind == "IID_BCCHS":
        return np.sqrt(h) * w1 / np.sqrt(p)
    if kind == "IID_DKA":
        return w1 / np.sqrt(1.0 + p / h)
    if kind == "IID_PLUGIN":
        return np.sqrt(h) * (z + w1) / np.sqrt(h + p)
    raise ValueError(f"unknown i.i.d. limit kind '{kind}'")


def _iid_analytic_cv(kind: str, level: float) -> float:
    z = float(norm.ppf(level))
    return z / np.sqrt(2.0) if kind == "IID_DKA" else z


def iid_limit_cv(
    kind: Literal["IID_CHS", "IID_BCCHS", "IID_DKA", "IID_PLUGIN"],
    b: float,
    level: float = 0.975,
    reps: int = TABLE_REPS,
    increments: int = TABLE_INCREMENTS,
    seed=0,
) -> CriticalValueSet:
    """Critical value of a random-sampling fixed-b limit law.

    The scalar laws are W(1)/sqrt(P) for CHS (scaled by sqrt(h(b)) for
    BCCHS), W(1)/sqrt(1 + P/h(b)) for DKA, and
    sqrt(h(b)) (z + W(1))/sqrt(h(b) + P) for the plug-in simulator under
    random sampling. At b = 0 the laws are normal and the value is analytic:
    norm.ppf(level), except DKA where the limit has variance 1/2.
    """
    if b == 0.0:
        value = _iid_analytic_cv(kind, level)
        return CriticalValueSet(
            statistic_kind=kind, b=0.0, level=level, value=value,
            reps=reps, increments=increments,
            seed=seed if isinstance(seed, int) else None,
        )
    w1, p, z = _scalar_limit_draws(b, reps, increments, seed)
    value = _abs_order_statistic(_iid_draws(kind, b, w1, p, z), level)
    return CriticalValueSet(
        statistic_kind=kind, b=b, level=level, value=value,
        reps=reps, increments=increments,
        seed=seed if isinstance(seed, int) else None,
    )


@dataclass(frozen=True)
class AsymptoticRow:
    """One bandwidth-fraction row of the asymptotic reference table.

    Critical values for the three random-sampling limit laws and the
    plug-in law, plus coverage probabilities (fractions) of the laws under
    the normal cv and under the plug-in cv.
    """

    b: float
    cv_chs: float
    cv_bcchs: float
    cv_dka: float
    cv_plugin: float
    cov_chs_normal: float
    cov_bcchs_normal: float
    cov_bcchs_plugin: float
    cov_dka_normal: float
    cov_dka_plugin: float


@dataclass(frozen=True)
class AsymptoticTable:
    rows: tuple
    level: float
    reps: int
    increments: int
    seed: int | None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(
                ["b", "cv_chs", "cv_bcchs", "cv_dka", "cv_plugin",
                 "cov_chs_normal", "cov_bcchs_normal", "cov_bcchs_plugin",
                 "cov_dka_normal", "cov_dka_plugin"]
            )
            for r in self.rows:
                writer.writerow(
                    [r.b, f"{r.cv_chs:.6f}", f"{r.cv_bcchs:.6f}", f"{r.cv_dka:.6f}",
                     f"{r.cv_plugin:.6f}", f"{r.cov_chs_normal:.6f}",
                     f"{r.cov_bcchs_normal:.6f}", f"{r.cov_bcchs_plugin:.6f}",
                     f"{r.cov_dka_normal:.6f}", f"{r.cov_dka_plugin:.6f}"]
                )

    def to_text(self) -> str:
        lines = [
            f"{100 * self.level:.1f}% critical values and coverage (%) of the "
            "random-sampling fixed-b limits",
            f"reps={self.reps} increments={self.increments} seed={self.seed}",
            f"{'b':>5} {'CHS':>7} {'BCCHS':>7} {'DKA':>7} {'plug-in':>8} "
            f"{'CHS|N':>7} {'BC|N':>7} {'BC|pi':>7} {'DKA|N':>7} {'DKA|pi':>7}",
        ]
        for r in self.rows:
            lines.append(
                f"{r.b:5.2f} {r.cv_chs:7.3f} {r.cv_bcchs:7.3f} {r.cv_dka:7.3f} "
                f"{r.cv_plugin:8.3f} {100 * r.cov_chs_normal:7.1f} "
                f"{100 * r.cov_bcchs_normal:7.1f} {100 * r.cov_bcchs_plugin:7.1f} "
                f"{100 * r.cov_dka_normal:7.1f} {100 * r.cov_dka_plugin:7.1f}"
            )
        return "\n".join(lines) + "\n"


def asymptotic_table(
    b_grid: Sequence[float] = DEFAULT_B_GRID,
    level: float = 0.975,
    reps: int = TABLE_REPS,
    increments: int = TABLE_INCREMENTS,
    seed: int = 0,
) -> AsymptoticTable:
    """Critical values and coverage of the random-sampling limits on a b grid.

    Rows with b = 0 are analytic (normal limits); each simulated row uses an
    independent child stream of the root seed, and all statistics within a
    row share draws, so cv_bcchs = sqrt(h(b)) * cv_chs holds exactly.
    Coverage columns evaluate each law against the normal cv
    norm.ppf(level) and against the row's plug-in cv.
    """
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(b_grid))
    z_norm = float(norm.ppf(level))
    rows = []
    for i, b in enumerate(b_grid):
        if b == 0.0:
            nominal = 2.0 * level - 1.0
            cov_dka = float(2.0 * norm.cdf(z_norm * np.sqrt(2.0)) - 1.0)
            rows.append(
                AsymptoticRow(
                    b=0.0, cv_chs=z_norm, cv_bcchs=z_norm,
                    cv_dka=z_norm / np.sqrt(2.0), cv_plugin=z_norm,
                    cov_chs_normal=nominal, cov_bcchs_normal=nominal,
                    cov_bcchs_plugin=nominal, cov_dka_normal=cov_dka,
                    cov_dka_plugin=cov_dka,
                )
            )
            continue
        w1, p, z = _scalar_limit_draws(b, reps, increments, children[i])
        h = bias_factor(b)
        t_chs = w1 / np.sqrt(p)
        t_bcchs = np.sqrt(h) * t_chs
        t_dka = w1 / np.sqrt(1.0 + p / h)
        t_plugin = np.sqrt(h) * (z + w1) / np.sqrt(h + p)
        cv_chs = _abs_order_statistic(t_chs, level)
        cv_plugin = _abs_order_statistic(t_plugin, level)
        rows.append(
            AsymptoticRow(
                b=b,
                cv_chs=cv_chs,
                cv_bcchs=float(np.sqrt(h) * cv_chs),
                cv_dka=_abs_order_statistic(t_dka, level),
                cv_plugin=cv_plugin,
                cov_chs_normal=float(np.mean(np.abs(t_chs) <= z_norm)),
                cov_bcchs_normal=float(np.mean(np.abs(t_bcchs) <= z_norm)),
                cov_bcchs_plugin=float(np.mean(np.abs(t_bcchs) <= cv_plugin)),
                cov_dka_normal=float(np.mean(np.abs(t_dka) <= z_norm)),
                cov_dka_plugin=float(np.mean(np.abs(t_dka) <= cv_plugin)),
            )
        )
    return AsymptoticTable(
        rows=tuple(rows), level=level, reps=reps, increments=increments, seed=seed
    )
