"""Two-way cluster-robust inference for balanced panels with fixed-b critical values.

The package estimates the variance of pooled OLS / two-way fixed effects
coefficients under simultaneous unit and (serially correlated) time
clustering, provides the bias-corrected variants of the two-way robust
estimator, and simulates the non-pivotal fixed-b reference distributions
needed for critical values.
"""

from .bandwidth import (
    BandwidthChoice,
    DegenerateScoresError,
    andrews_bandwidth,
    bandwidth_from_rho,
)
from .fixedb import (
    AsymptoticTable,
    CriticalValueSet,
    PluginInputs,
    WienerPath,
    asymptotic_table,
    bartlett_bridge_functional,
    iid_limit_cv,
    plugin_inputs,
    psd_sqrt,
    sample_wiener_path,
    simulate_plugin_cv,
    time_component_variance,
    unit_component_variance,
    write_critical_values,
)
from .inference import (
    InferenceOptions,
    InferenceReport,
    TestResult,
    confidence_interval,
    normal_critical_value,
    run_inference,
    t_stat,
    wald_stat,
)
from .montecarlo import (
    CoverageReport,
    CvPolicy,
    DgpSpec,
    ExperimentConfig,
    generate_panel,
    load_experiment_config,
    run_experiment,
)
from .paneldata import (
    CsvParseError,
    DuplicateCellError,
    MissingValueError,
    PanelDataError,
    PanelDataset,
    UnbalancedPanelError,
    demean_two_way,
    load_csv,
)
from .regression import (
    RegressionFit,
    SingularDesignError,
    fit_pols,
    fit_twfe,
    scores_cross_section_average,
)
from .variance import (
    ScorePartialSums,
    VarianceEstimate,
    bartlett_weight,
    bias_factor,
    estimate_variance,
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

__version__ = "0.1.0"

__all__ = [
    "PanelDataset",
    "load_csv",
    "demean_two_way",
    "PanelDataError",
    "UnbalancedPanelError",
    "DuplicateCellError",
    "MissingValueError",
    "CsvParseError",
    "RegressionFit",
    "fit_pols",
    "fit_twfe",
    "scores_cross_section_average",
    "SingularDesignError",
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
    "BandwidthChoice",
    "andrews_bandwidth",
    "bandwidth_from_rho",
    "DegenerateScoresError",
    "WienerPath",
    "sample_wiener_path",
    "bartlett_bridge_functional",
    "psd_sqrt",
    "unit_component_variance",
    "time_component_variance",
    "PluginInputs",
    "plugin_inputs",
    "CriticalValueSet",
    "simulate_plugin_cv",
    "iid_limit_cv",
    "asymptotic_table",
    "AsymptoticTable",
    "write_critical_values",
    "TestResult",
    "t_stat",
    "wald_stat",
    "confidence_interval",
    "normal_critical_value",
    "InferenceOptions",
    "InferenceReport",
    "run_inference",
    "DgpSpec",
    "CvPolicy",
    "ExperimentConfig",
    "generate_panel",
    "run_experiment",
    "CoverageReport",
    "load_experiment_config",
]
