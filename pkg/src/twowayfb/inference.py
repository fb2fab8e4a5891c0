"""t and Wald statistics, confidence intervals, and multi-estimator reports.

Confidence levels here are coverage probabilities (0.95 for a 95% interval);
they map to the one-sided quantile level (1 + level)/2 used by the critical
value machinery.
"""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np
from scipy.stats import norm

from .bandwidth import andrews_bandwidth
from .fixedb import PLUGIN_INCREMENTS, PLUGIN_REPS, plugin_inputs, simulate_plugin_cv
from .paneldata import PanelDataset
from .regression import RegressionFit, fit_pols, fit_twfe
from .variance import KERNEL_KINDS, VarianceEstimate, estimate_variance, scaled_variance

__all__ = [
    "TestResult",
    "InferenceOptions",
    "InferenceReport",
    "normal_critical_value",
    "t_stat",
    "wald_stat",
    "confidence_interval",
    "run_inference",
    "DEFAULT_ESTIMATORS",
]

DEFAULT_ESTIMATORS = ("EHW", "CLUSTER_I", "CLUSTER_T", "DK", "CHS", "BCCHS", "DKA")

# Estimators whose fixed-b limit the plug-in simulation covers.
FIXED_B_KINDS = frozenset({"CHS", "BCCHS", "DKA"})

CvSource = Literal["NORMAL", "CHISQ", "FIXED_B"]


def normal_critical_value(level: float) -> float:
    """Two-sided standard normal cv for a confidence level (0.95 -> 1.959964)."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    return float(norm.ppf((1.0 + level) / 2.0))


@dataclass(frozen=True)
class TestResult:
    """Outcome of a linear restriction test.

    For q = 1 the statistic is a t ratio and ``se``, ``ci_low``, ``ci_high``
    are populated once a critical value source is applied; for q > 1 it is a
    Wald quadratic form. A nonpositive restriction variance (possible for
    CHS/BCCHS only) sets ``negative_variance`` and leaves se/statistic/ci
    absent rather than raising.
    """

    restriction: np.ndarray
    null_value: np.ndarray
    estimate: float
    statistic_kind: Literal["t", "wald"]
    statistic: float | None
    se: float | None
    estimator_kind: str
    bandwidth_m: int | None = None
    b: float | None = None
    negative_variance: bool = False
    cv_source: CvSource | None = None
    critical_value: float | None = None
    level: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    p_value: float | None = None


def _restriction_row(restriction, n_regressors: int) -> np.ndarray:
    r = np.asarray(restriction, dtype=float)
    r = r.reshape(1, -1) if r.ndim == 1 else r
    if r.shape != (1, n_regressors):
        raise ValueError(f"restriction must be a single row of length {n_regressors}")
    return r


def t_stat(fit: RegressionFit, variance: VarianceEstimate, restriction, null_value=0.0) -> TestResult:
    """t statistic for a single linear restriction R beta = r.

    Requires the variance estimate to carry its sandwich. When
    R vhat R' <= 0 the result is flagged instead of raising.
    """
    if variance.vhat is None:
        raise ValueError("variance estimate has no sandwich; use estimate_variance")
    r = _restriction_row(restriction, fit.n_regressors)
    estimate = float(r[0] @ fit.beta)
    rv = scaled_variance(variance.vhat, r[0])
    common = dict(
        restriction=r,
        null_value=np.atleast_1d(np.asarray(null_value, dtype=float)),
        estimate=estimate,
        statistic_kind="t",
        estimator_kind=variance.kind,
        bandwidth_m=variance.bandwidth_m,
        b=variance.b,
    )
    if rv <= 0.0:
        return TestResult(statistic=None, se=None, negative_variance=True, **common)
    se = float(np.sqrt(rv))
    return TestResult(statistic=(estimate - float(null_value)) / se, se=se, **common)


def wald_stat(fit: RegressionFit, variance: VarianceEstimate, restriction, null_value) -> TestResult:
    """Wald statistic (Rb - r)'(R vhat R')^{-1}(Rb - r) for a q x k restriction."""
    if variance.vhat is None:
        raise ValueError("variance estimate has no sandwich; use estimate_variance")
    r = np.atleast_2d(np.asarray(restriction, dtype=float))
    rv = r @ variance.vhat @ r.T
    diff = r @ fit.beta - np.atleast_1d(np.asarray(null_value, dtype=float))
    try:
        stat = float(diff @ np.linalg.solve(rv, diff))
    except np.linalg.LinAlgError:
        raise ValueError("restriction variance matrix is singular") from None
    return TestResult(
        restriction=r,
        null_value=np.atleast_1d(np.asarray(null_value, dtype=float)),
        estimate=float(diff[0] + null_value) if r.shape[0] == 1 else float("nan"),
        statistic_kind="wald",
        statistic=stat,
        se=None,
        estimator_kind=variance.kind,
        bandwidth_m=variance.bandwidth_m,
        b=variance.b,
    )


def confidence_interval(
    result: TestResult,
    level: float = 0.95,
    cv_source: CvSource = "NORMAL",
    critical_value: float | None = None,
) -> TestResult:
    """Fill the interval estimate - cv * se .. estimate + cv * se.

    ``cv_source="NORMAL"`` derives the cv from the level; ``"FIXED_B"``
    requires an explicit critical value (from a CriticalValueSet). p-values
    are attached only for the normal source.
    """
    if result.statistic_kind != "t":
        raise ValueError("confidence intervals are defined for single restrictions")
    if result.negative_variance:
        raise ValueError("no confidence interval: restriction variance is nonpositive")
    if cv_source == "NORMAL":
        cv = normal_critical_value(level) if critical_value is None else critical_value
        p_value = float(2.0 * (1.0 - norm.cdf(abs(result.statistic))))
    elif cv_source == "FIXED_B":
        if critical_value is None:
            raise ValueError("FIXED_B intervals need an explicit critical value")
        cv = critical_value
        p_value = None
    else:
        raise ValueError(f"unsupported cv source '{cv_source}' for a t interval")
    half = cv * result.se
    return replace(
        result,
        cv_source=cv_source,
        critical_value=float(cv),
        level=level,
        ci_low=result.estimate - half,
        ci_high=result.estimate + half,
        p_value=p_value,
    )


@dataclass(frozen=True)
class InferenceOptions:
    """Settings for a multi-estimator inference report.

    ``bandwidth`` is an integer lag or "andrews"; it applies to every
    kernel-based estimator. ``cv_policies`` may include "normal" and
    "fixed_b" (the latter simulates plug-in critical values per coefficient
    for CHS/BCCHS/DKA and requires a seed).
    """

    estimators: tuple = DEFAULT_ESTIMATORS
    bandwidth: int | str = "andrews"
    level: float = 0.95
    cv_policies: tuple = ("normal",)
    twfe: bool = False
    seed: int | None = None
    cv_reps: int = PLUGIN_REPS
    cv_increments: int = PLUGIN_INCREMENTS


@dataclass(frozen=True)
class InferenceReport:
    """One row per coefficient, one column set per variance estimator."""

    fit_kind: str
    coefficient_names: tuple
    estimates: np.ndarray
    results: dict  # (coef_name, estimator, policy) -> TestResult
    estimators: tuple
    cv_policies: tuple
    bandwidth_m: int
    b: float
    bandwidth_rule: str
    level: float
    negative_variance_kinds: tuple

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(
                ["coefficient", "estimate", "estimator", "cv_policy", "se",
                 "t_stat", "critical_value", "ci_low", "ci_high",
                 "negative_variance", "bandwidth_m", "b"]
            )
            for name, est in zip(self.coefficient_names, self.estimates):
                for kind in self.estimators:
                    for policy in self.cv_policies:
                        res = self.results.get((name, kind, policy))
                        if res is None:
                            continue
                        writer.writerow(
                            [name, f"{est:.10g}", kind, policy,
                             _fmt(res.se), _fmt(res.statistic), _fmt(res.critical_value),
                             _fmt(res.ci_low), _fmt(res.ci_high),
                             int(res.negative_variance),
                             res.bandwidth_m if res.bandwidth_m is not None else "",
                             f"{res.b:.6g}" if res.b is not None else ""]
                        )

    def to_text(self) -> str:
        width = max(12, *(len(n) for n in self.coefficient_names)) + 2
        head = f"{self.fit_kind} estimates and t-statistics "
        head += f"(bandwidth {self.bandwidth_rule}: M={self.bandwidth_m}, b={self.b:.3f})"
        lines = [head, ""]
        cols = "".join(f"{k:>10}" for k in self.estimators)
        lines.append(f"{'coefficient':<{width}}{'estimate':>12}{cols}")
        for name, est in zip(self.coefficient_names, self.estimates):
            cells = []
            for kind in self.estimators:
                res = self.results.get((name, kind, "normal"))
                cells.append(f"{'neg.var':>10}" if res.negative_variance else f"{res.statistic:>10.3f}")
            lines.append(f"{name:<{width}}{est:>12.4f}" + "".join(cells))
        for policy in self.cv_policies:
            lines.append("")
            lines.append(f"{100 * self.level:.0f}% confidence intervals ({policy} critical values)")
            for name in self.coefficient_names:
                cells = []
                for kind in self.estimators:
                    res = self.results.get((name, kind, policy))
                    if res is None or res.ci_low is None:
                        cells.append(f"{'-':>23}")
                    else:
                        cells.append(f" ({res.ci_low:9.4f},{res.ci_high:9.4f})")
                lines.append(f"{name:<{width}}" + "".join(cells))
        return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    return "" if x is None else f"{x:.10g}"


def run_inference(data: PanelDataset, options: InferenceOptions = InferenceOptions()) -> InferenceReport:
    """Fit the panel and test every coefficient under every estimator.

    Uses POLS or TWFE per ``options.twfe``, resolves the bandwidth (fixed or
    Andrews), computes every requested variance estimator, and builds
    t statistics plus confidence intervals per cv policy. Plug-in fixed-b
    intervals are produced for CHS/BCCHS/DKA only; their per-coefficient
    simulations use independent child streams of ``options.seed``.
    """
    fit = fit_twfe(data) if options.twfe else fit_pols(data)
    t_len = fit.n_periods
    if options.bandwidth == "andrews":
        m = andrews_bandwidth(fit).m_hat
        rule = "andrews"
    else:
        m = min(max(int(options.bandwidth), 1), t_len)
        rule = "fixed"
    if "fixed_b" in options.cv_policies and options.seed is None:
        raise ValueError("fixed_b confidence intervals need a seed")

    variances = {
        kind: estimate_variance(fit, kind, m if kind in KERNEL_KINDS else None)
        for kind in options.estimators
    }
    names = fit.regressor_names
    results: dict = {}
    neg_kinds = set()
    ss = np.random.SeedSequence(options.seed if options.seed is not None else 0)
    coef_streams = ss.spawn(len(names))
    cv_level = (1.0 + options.level) / 2.0

    for j, name in enumerate(names):
        r = np.zeros(fit.n_regressors)
        r[j] = 1.0
        plugin_cvs = None
        if "fixed_b" in options.cv_policies:
            inputs = plugin_inputs(fit, m, restriction=r)
            cv_chs, cv_bc = simulate_plugin_cv(
                inputs, level=cv_level, reps=options.cv_reps,
                increments=options.cv_increments, seed=coef_streams[j],
            )
            plugin_cvs = {"CHS": cv_chs.value, "BCCHS": cv_bc.value, "DKA": cv_bc.value}
        for kind in options.estimators:
            base = t_stat(fit, variances[kind], r)
            if base.negative_variance:
                neg_kinds.add(kind)
            for policy in options.cv_policies:
                if base.negative_variance:
                    results[(name, kind, policy)] = base
                    continue
                if policy == "normal":
                    results[(name, kind, policy)] = confidence_interval(
                        base, level=options.level, cv_source="NORMAL"
                    )
                elif policy == "fixed_b":
                    if kind in FIXED_B_KINDS:
                        results[(name, kind, policy)] = confidence_interval(
                            base, level=options.level, cv_source="FIXED_B",
                            critical_value=plugin_cvs[kind],
                        )
                else:
                    raise ValueError(f"unknown cv policy '{policy}'")

    return InferenceReport(
        fit_kind=fit.kind,
        coefficient_names=names,
        estimates=fit.beta.copy(),
        results=results,
        estimators=tuple(options.estimators),
        cv_policies=tuple(options.cv_policies),
        bandwidth_m=m,
        b=m / t_len,
        bandwidth_rule=rule,
        level=options.level,
        negative_variance_kinds=tuple(sorted(neg_kinds)),
    )
