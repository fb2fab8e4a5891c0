"""Data generating processes and coverage-probability experiments.

Replications are reproducible and scheduling-independent: replication r of
a run with root seed s draws its data from the child stream
SeedSequence(s, spawn_key=(r, 0)) and its nested plug-in critical value
simulation (when requested) from SeedSequence(s, spawn_key=(r, 1 + j)) for
bandwidth slot j, so worker counts never change results and integer count
aggregation is order-free.
"""

from __future__ import annotations

import csv as _csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

from .bandwidth import andrews_bandwidth
from .fixedb import (
    PLUGIN_INCREMENTS,
    PLUGIN_REPS,
    TABLE_INCREMENTS,
    TABLE_REPS,
    iid_limit_cv,
    plugin_inputs,
    simulate_plugin_cv,
)
from .inference import normal_critical_value
from .paneldata import PanelDataset
from .regression import fit_pols, fit_twfe
from .variance import (
    bias_factor,
    omega_arellano,
    omega_cluster_periods,
    omega_cluster_units,
    omega_driscoll_kraay,
    omega_ehw,
    omega_newey_west,
)

__all__ = [
    "DgpSpec",
    "CvPolicy",
    "ExperimentConfig",
    "CellResult",
    "CoverageReport",
    "generate_panel",
    "run_experiment",
    "load_experiment_config",
]

DgpKind = Literal["DGP1", "DGP2", "DGP3", "IID"]

ESTIMATOR_ALIASES = {
    "EHW": "EHW",
    "CI": "CLUSTER_I",
    "CLUSTER_I": "CLUSTER_I",
    "CT": "CLUSTER_T",
    "CLUSTER_T": "CLUSTER_T",
    "DK": "DK",
    "CHS": "CHS",
    "BCCHS": "BCCHS",
    "DKA": "DKA",
}

# Estimators that take a bandwidth; the rest get a single "-" bandwidth slot.
BANDWIDTH_ESTIMATORS = frozenset({"DK", "CHS", "BCCHS", "DKA"})
# Estimators with a simulated fixed-b law.
FIXED_B_ESTIMATORS = frozenset({"CHS", "BCCHS", "DKA"})


@dataclass(frozen=True)
class DgpSpec:
    """A component-structure data generating process for (x, u) pairs.

    DGP1 is linear in an i.i.d. unit component, an AR(1) time component
    (stationary initialization, unit marginal variance), and an i.i.d.
    idiosyncratic component, with weights (omega_alpha, omega_gamma,
    omega_eps). DGP2 passes the same index through the normal cdf and a
    logit. DGP3 has products of unit and time factors and ignores the
    weights. IID is DGP1 with weights (0, 0, 1). The outcome is always
    y = beta0 + beta1 * x + u with regressors (1, x).
    """

    kind: DgpKind = "DGP1"
    omega_alpha: float = 0.25
    omega_gamma: float = 0.5
    omega_eps: float = 0.25
    rho_gamma: float = 0.0
    beta0: float = 1.0
    beta1: float = 1.0

    def __post_init__(self):
        if self.kind not in ("DGP1", "DGP2", "DGP3", "IID"):
            raise ValueError(f"unknown DGP kind '{self.kind}'")
        if not -1.0 < self.rho_gamma < 1.0:
            raise ValueError("rho_gamma must be in (-1, 1)")
        if min(self.omega_alpha, self.omega_gamma, self.omega_eps) < 0:
            raise ValueError("component weights must be nonnegative")


def _ar1(t_len: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) with unit marginal variance: g_0 ~ N(0,1) exactly."""
    g0 = rng.standard_normal()
    innov = np.sqrt(1.0 - rho * rho) * rng.standard_normal(t_len)
    out, _ = lfilter([1.0], [1.0, -rho], innov, zi=np.array([rho * g0]))
    return out


def generate_panel(spec: DgpSpec, n_units: int, n_periods: int, rng: np.random.Generator) -> PanelDataset:
    """Draw one balanced panel from the process."""
    n, t = n_units, n_periods
    if spec.kind in ("DGP1", "DGP2", "IID"):
        wa, wg, we = spec.omega_alpha, spec.omega_gamma, spec.omega_eps
        rho = spec.rho_gamma
        if spec.kind == "IID":
            wa, wg, we, rho = 0.0, 0.0, 1.0, 0.0
        alpha_x = rng.standard_normal(n)
        alpha_u = rng.standard_normal(n)
        gamma_x = _ar1(t, rho, rng)
        gamma_u = _ar1(t, rho, rng)
        eps_x = rng.standard_normal((n, t))
        eps_u = rng.standard_normal((n, t))
        x = wa * alpha_x[:, None] + wg * gamma_x[None, :] + we * eps_x
        u = wa * alpha_u[:, None] + wg * gamma_u[None, :] + we * eps_u
        if spec.kind == "DGP2":
            x = _logit_normal(x)
            u = _logit_normal(u)
    else:  # DGP3
        a1 = rng.standard_normal(n)
        a2 = rng.standard_normal(n)
        a3 = rng.standard_normal(n)
        g1 = rng.standard_normal(t)
        g2 = rng.standard_normal(t)
        g3 = rng.standard_normal(t)
        eps_x = rng.standard_normal((n, t))
        eps_u = rng.standard_normal((n, t))
        x = a1[:, None] * g2[None, :] + a2[:, None] * g1[None, :] + eps_x
        u = a1[:, None] * g3[None, :] + a3[:, None] * g1[None, :] + eps_u
    y = spec.beta0 + spec.beta1 * x + u
    X = np.stack([np.ones((n, t)), x], axis=2)
    return PanelDataset(y=y, X=X, regressor_names=("const", "x"), intercept_col=0)


def _logit_normal(z: np.ndarray) -> np.ndarray:
    p = ndtr(z)
    return np.log(p / (1.0 - p))


@dataclass(frozen=True)
class CvPolicy:
    """How confidence intervals obtain their critical values.

    "normal" uses the standard normal cv. "fixed_b" simulates plug-in
    critical values per replication (reps x increments nested simulation).
    "iid_fixed_b" uses the random-sampling limit laws, simulated once per
    (statistic, bandwidth) and cached.
    """

    kind: Literal["normal", "fixed_b", "iid_fixed_b"]
    reps: int = PLUGIN_REPS
    increments: int = PLUGIN_INCREMENTS

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one coverage experiment."""

    dgp: DgpSpec = DgpSpec()
    n_units: int = 25
    n_periods: int = 25
    replications: int = 1000
    bandwidths: tuple = ("andrews",)
    estimators: tuple = ("EHW", "CLUSTER_I", "CLUSTER_T", "DK", "CHS", "BCCHS", "DKA")
    estimator_of_beta: Literal["POLS", "TWFE"] = "POLS"
    cv_policies: tuple = (CvPolicy("normal"),)
    level: float = 0.95
    seed: int = 0
    negative_variance: Literal["exclude", "noncover"] = "exclude"
    threads: int = 1
    iid_cv_reps: int = TABLE_REPS
    iid_cv_increments: int = TABLE_INCREMENTS

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n_units < 2 or self.n_periods < 2:
            raise ValueError("need N >= 2 and T >= 2")
        bws = []
        for bw in self.bandwidths:
            bw = bw if bw == "andrews" else min(max(int(bw), 1), self.n_periods)
            if bw not in bws:  # clamping can create duplicates
                bws.append(bw)
        object.__setattr__(self, "bandwidths", tuple(bws))
        ests = []
        for e in self.estimators:
            name = ESTIMATOR_ALIASES.get(str(e).upper().replace("-", "_"))
            if name is None:
                raise ValueError(f"unknown estimator '{e}'")
            ests.append(name)
        object.__setattr__(self, "estimators", tuple(ests))
        if not self.cv_policies:
            raise ValueError("at least one cv policy is required")


@dataclass
class CellResult:
    """Coverage tally for one (estimator, bandwidth, cv policy) cell."""

    covered: int = 0
    denominator: int = 0

    @property
    def coverage(self) -> float:
        return self.covered / self.denominator if self.denominator else float("nan")


@dataclass
class _BlockTally:
    cells: dict = field(default_factory=dict)
    negative: dict = field(default_factory=dict)
    mhats: list = field(default_factory=list)

    def add_cell(self, key, covered: bool, counted: bool = True):
        cell = self.cells.setdefault(key, CellResult())
        if counted:
            cell.denominator += 1
            cell.covered += int(covered)

    def merge(self, other: "_BlockTally"):
        for key, cell in other.cells.items():
            mine = self.cells.setdefault(key, CellResult())
            mine.covered += cell.covered
            mine.denominator += cell.denominator
        for key, cnt in other.negative.items():
            self.negative[key] = self.negative.get(key, 0) + cnt
        self.mhats.extend(other.mhats)


@dataclass(frozen=True)
class CoverageReport:
    """Aggregated coverage rates, negative-variance counts, and metadata."""

    config: ExperimentConfig
    cells: dict
    negative_counts: dict
    mhat_summary: dict | None

    def coverage(self, estimator: str, bandwidth, policy: str = "normal") -> float:
        return self.cells[(estimator, _bw_label(bandwidth), policy)].coverage

    def cell(self, estimator: str, bandwidth, policy: str = "normal") -> CellResult:
        return self.cells[(estimator, _bw_label(bandwidth), policy)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(
                ["estimator", "bandwidth", "cv_policy", "coverage",
                 "covered", "denominator", "negative_count", "replications", "seed"]
            )
            for (est, bw, policy), cell in sorted(self.cells.items()):
                writer.writerow(
                    [est, bw, policy, f"{cell.coverage:.6f}", cell.covered,
                     cell.denominator, self.negative_counts.get(bw, 0),
                     self.config.replications, self.config.seed]
                )

    def to_text(self) -> str:
        cfg = self.config
        head = (
            f"coverage of beta1={cfg.dgp.beta1} at nominal {100 * cfg.level:.0f}%  "
            f"[{cfg.dgp.kind}, N={cfg.n_units}, T={cfg.n_periods}, "
            f"{cfg.replications} replications, {cfg.estimator_of_beta}, seed={cfg.seed}]"
        )
        lines = [head, ""]
        policies = [p.label for p in cfg.cv_policies]
        bw_labels = []
        for bw in cfg.bandwidths:
            lbl = _bw_label(bw)
            if lbl not in bw_labels:
                bw_labels.append(lbl)
        flat = [e for e in cfg.estimators if e not in BANDWIDTH_ESTIMATORS]
        banded = [e for e in cfg.estimators if e in BANDWIDTH_ESTIMATORS]
        for e in flat:
            cell = self.cells.get((e, "-", "normal"))
            if cell:
                lines.append(f"{e:<10} {100 * cell.coverage:5.1f}")
        if flat:
            lines.append("")
        if banded:
            header = f"{'bandwidth':<10}"
            for policy in policies:
                for e in banded:
                    if policy == "normal" or e in FIXED_B_ESTIMATORS:
                        header += f"{e + '|' + policy[:7]:>15}"
            header += f"{'CHS<0':>8}"
            lines.append(header)
            for lbl in bw_labels:
                row = f"{lbl:<10}"
                for policy in policies:
                    for e in banded:
                        if policy == "normal" or e in FIXED_B_ESTIMATORS:
                            cell = self.cells.get((e, lbl, policy))
                            row += f"{100 * cell.coverage:15.1f}" if cell else f"{'-':>15}"
                row += f"{self.negative_counts.get(lbl, 0):>8}"
                lines.append(row)
        if self.mhat_summary:
            s = self.mhat_summary
            lines.append("")
            lines.append(
                f"data-dependent bandwidth: min={s['min']:.0f} max={s['max']:.0f} "
                f"mean={s['mean']:.2f} median={s['median']:.1f}"
            )
        return "\n".join(lines) + "\n"


def _bw_label(bw) -> str:
    if isinstance(bw, str):  # already a label: "andrews", "-", "M=2"
        return bw
    return f"M={int(bw)}"


_IID_KIND = {"CHS": ("IID_CHS", 0), "BCCHS": ("IID_BCCHS", 1), "DKA": ("IID_DKA", 2)}


def _iid_cv_for(config: ExperimentConfig, estimator: str, m: int, memo: dict) -> float:
    """Random-sampling limit cv for one (statistic, bandwidth), memoized.

    The seed is a pure function of (config.seed, statistic, m), so lazily
    computed values agree across worker processes and runs.
    """
    key = (estimator, int(m))
    if key not in memo:
        kind, idx = _IID_KIND[estimator]
        ss = np.random.SeedSequence(config.seed, spawn_key=(0xC5, int(m), idx))
        memo[key] = iid_limit_cv(
            kind, b=m / config.n_periods, level=(1 + config.level) / 2,
            reps=config.iid_cv_reps, increments=config.iid_cv_increments, seed=ss,
        ).value
    return memo[key]


def _iid_cv_cache(config: ExperimentConfig) -> dict:
    """Pre-simulate the cvs for the fixed bandwidths (andrews slots fill lazily)."""
    if not any(p.kind == "iid_fixed_b" for p in config.cv_policies):
        return {}
    cache: dict = {}
    for bw in config.bandwidths:
        if bw == "andrews":
            continue
        for est in config.estimators:
            if est in FIXED_B_ESTIMATORS:
                _iid_cv_for(config, est, int(bw), cache)
    return cache


def _run_block(config: ExperimentConfig, lo: int, hi: int, iid_cvs: dict) -> _BlockTally:
    """Replications lo..hi-1 of the experiment; pure function of (config, range)."""
    tally = _BlockTally()
    t_len = config.n_periods
    z_norm = normal_critical_value(config.level)
    cv_level = (1.0 + config.level) / 2.0
    slope_name = "x"
    want_andrews = "andrews" in config.bandwidths
    fit_fn = fit_twfe if config.estimator_of_beta == "TWFE" else fit_pols
    flat = [e for e in config.estimators if e not in BANDWIDTH_ESTIMATORS]
    banded = [e for e in config.estimators if e in BANDWIDTH_ESTIMATORS]
    flat_fns = {"EHW": omega_ehw, "CLUSTER_I": omega_cluster_units, "CLUSTER_T": omega_cluster_periods}
    exclude_negative = config.negative_variance == "exclude"

    for rep in range(lo, hi):
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(rep, 0)))
        data = generate_panel(config.dgp, config.n_units, t_len, rng)
        fit = fit_fn(data)
        slope = fit.regressor_names.index(slope_name)
        err = float(fit.beta[slope]) - config.dgp.beta1
        r = np.zeros(fit.n_regressors)
        r[slope] = 1.0
        a = np.linalg.solve(fit.qhat, r)

        def rvar(omega: np.ndarray) -> float:
            return float(a @ omega @ a)

        for e in flat:
            s2 = rvar(flat_fns[e](fit.scores).omega)
            tally.add_cell((e, "-", "normal"), abs(err) <= z_norm * np.sqrt(s2))

        if not banded:
            continue
        mhat = andrews_bandwidth(fit).m_hat if (want_andrews or any(
            p.kind == "fixed_b" for p in config.cv_policies)) else None
        if want_andrews and mhat is not None:
            tally.mhats.append(mhat)
        omega_a = omega_arellano(fit.scores).omega

        for j, bw in enumerate(config.bandwidths):
            m = mhat if bw == "andrews" else int(bw)
            lbl = _bw_label(bw)
            h = bias_factor(m / t_len)
            omega_dk = omega_driscoll_kraay(fit.scores, m).omega
            s2 = {}
            if "DK" in banded:
                s2["DK"] = rvar(omega_dk)
            if {"CHS", "BCCHS"} & set(banded):
                omega_nw = omega_newey_west(fit.scores, m).omega
                s2["CHS"] = rvar(omega_a + omega_dk - omega_nw)
                s2["BCCHS"] = s2["CHS"] / h
            if "DKA" in banded:
                s2["DKA"] = rvar(omega_a + omega_dk / h)
            chs_negative = s2.get("CHS", 1.0) <= 0.0
            if chs_negative:
                tally.negative[lbl] = tally.negative.get(lbl, 0) + 1

            plugin_cv = None
            for policy in config.cv_policies:
                if policy.kind == "fixed_b" and plugin_cv is None and (
                    set(banded) & FIXED_B_ESTIMATORS
                ):
                    inputs = plugin_inputs(fit, m, restriction=r, m_dk=mhat)
                    ss = np.random.SeedSequence(config.seed, spawn_key=(rep, 1 + j))
                    cv_chs, cv_bc = simulate_plugin_cv(
                        inputs, level=cv_level, reps=policy.reps,
                        increments=policy.increments, seed=ss,
                    )
                    plugin_cv = {"CHS": cv_chs.value, "BCCHS": cv_bc.value, "DKA": cv_bc.value}
                for e in banded:
                    if policy.kind == "normal":
                        cv = z_norm
                    elif e not in FIXED_B_ESTIMATORS:
                        continue
                    elif policy.kind == "fixed_b":
                        cv = plugin_cv[e]
                    else:
                        cv = _iid_cv_for(config, e, m, iid_cvs)
                    key = (e, lbl, policy.label)
                    if e in ("CHS", "BCCHS") and chs_negative:
                        if exclude_negative:
                            tally.add_cell(key, False, counted=False)
                        else:
                            tally.add_cell(key, False)
                        continue
                    tally.add_cell(key, abs(err) <= cv * np.sqrt(s2[e]))
    return tally


def run_experiment(config: ExperimentConfig) -> CoverageReport:
    """Run the coverage experiment described by the config.

    Returns a CoverageReport whose cells are keyed by
    (estimator, bandwidth label, cv policy label). Negative CHS/BCCHS
    restriction variances are counted per bandwidth and either excluded
    from the affected cells' denominators (default) or counted as
    non-coverage, per ``config.negative_variance``.
    """
    iid_cvs = _iid_cv_cache(config)
    reps = config.replications
    tally = _BlockTally()
    if config.threads > 1 and reps > 1:
        blocks = max(config.threads * 4, 1)
        size = (reps + blocks - 1) // blocks
        ranges = [(lo, min(lo + size, reps)) for lo in range(0, reps, size)]
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            futures = [pool.submit(_run_block, config, lo, hi, iid_cvs) for lo, hi in ranges]
            for fut in futures:
                tally.merge(fut.result())
    else:
        tally = _run_block(config, 0, reps, iid_cvs)

    mhat_summary = None
    if tally.mhats:
        arr = np.asarray(tally.mhats)
        mhat_summary = {
            "min": float(arr.min()),
            "max": float(arr.max()),
            "mean": float(arr.mean()),
            "median": float(np.median(arr)),
        }
    return CoverageReport(
        config=config,
        cells=tally.cells,
        negative_counts=tally.negative,
        mhat_summary=mhat_summary,
    )


_CONFIG_KEYS = {
    "dgp", "omega_alpha", "omega_gamma", "omega_eps", "rho_gamma", "beta0", "beta1",
    "n_units", "n_periods", "replications", "bandwidths", "estimators", "estimator",
    "cv", "cv_reps", "cv_increments", "iid_cv_reps", "iid_cv_increments",
    "level", "seed", "threads", "negative_variance",
}


def load_experiment_config(path, seed: int | None = None, threads: int | None = None) -> ExperimentConfig:
    """Parse a flat key = value experiment config file.

    Lists are comma separated; '#' starts a comment. ``seed``/``threads``
    arguments override file values when given.
    """
    raw: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key '{key}'")
            raw[key] = value

    def split(value: str) -> list[str]:
        return [v.strip() for v in value.split(",") if v.strip()]

    dgp = DgpSpec(
        kind=raw.get("dgp", "DGP1").upper(),
        omega_alpha=float(raw.get("omega_alpha", 0.25)),
        omega_gamma=float(raw.get("omega_gamma", 0.5)),
        omega_eps=float(raw.get("omega_eps", 0.25)),
        rho_gamma=float(raw.get("rho_gamma", 0.0)),
        beta0=float(raw.get("beta0", 1.0)),
        beta1=float(raw.get("beta1", 1.0)),
    )
    bandwidths = []
    for tok in split(raw.get("bandwidths", "andrews")):
        bandwidths.append("andrews" if tok.lower() == "andrews" else int(tok))
    policies = []
    cv_reps = int(raw.get("cv_reps", PLUGIN_REPS))
    cv_increments = int(raw.get("cv_increments", PLUGIN_INCREMENTS))
    for tok in split(raw.get("cv", "normal")):
        kind = tok.lower().replace("-", "_")
        if kind == "fixedb":
            kind = "fixed_b"
        if kind == "iid_fixedb":
            kind = "iid_fixed_b"
        policies.append(CvPolicy(kind, reps=cv_reps, increments=cv_increments))
    if seed is None:
        if "seed" not in raw:
            raise ValueError("config must set a seed (or pass one explicitly)")
        seed = int(raw["seed"])
    if threads is None:
        threads = int(raw.get("threads", 1))
    return ExperimentConfig(
        dgp=dgp,
        n_units=int(raw.get("n_units", 25)),
        n_periods=int(raw.get("n_periods", 25)),
        replications=int(raw.get("replications", 1000)),
        bandwidths=tuple(bandwidths),
        estimators=tuple(split(raw.get("estimators", "EHW,CLUSTER_I,CLUSTER_T,DK,CHS,BCCHS,DKA"))),
        estimator_of_beta=raw.get("estimator", "POLS").upper(),
        cv_policies=tuple(policies),
        level=float(raw.get("level", 0.95)),
        seed=seed,
        negative_variance=raw.get("negative_variance", "exclude"),
        threads=threads,
        iid_cv_reps=int(raw.get("iid_cv_reps", TABLE_REPS)),
        iid_cv_increments=int(raw.get("iid_cv_increments", TABLE_INCREMENTS)),
    )
