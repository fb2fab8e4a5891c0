"""A reduced-scale coverage experiment in the style of the simulation tables.

Compares empirical 95% CI coverage for beta1 across estimators and
bandwidths under a two-way dependent DGP, with normal and plug-in fixed-b
critical values. 1,000 replications keep the runtime to roughly a minute;
the table-grade runs use 10,000. Run with:
python demos/03_coverage_experiment.py
"""

from twowayfb import CvPolicy, DgpSpec, ExperimentConfig, run_experiment

config = ExperimentConfig(
    dgp=DgpSpec("DGP1", omega_alpha=0.25, omega_gamma=0.5, omega_eps=0.25, rho_gamma=0.425),
    n_units=25,
    n_periods=25,
    replications=1_000,
    bandwidths=(2, 25, "andrews"),
    estimators=("EHW", "CI", "CT", "DK", "CHS", "BCCHS", "DKA"),
    cv_policies=(
        CvPolicy("normal"),
        CvPolicy("fixed_b", reps=500, increments=250),  # table-grade: 1000 x 500
    ),
    seed=2024,
    threads=2,
)

report = run_experiment(config)
print(report.to_text())
print("Reading the table: kernel variance estimators under-cover badly at")
print("large bandwidths with normal cvs; bias correction (BCCHS, DKA) and")
print("plug-in fixed-b critical values pull coverage back toward 95%.")
