"""Walk through the variance estimators on one simulated panel.

Generates a 25x25 panel with unit effects and a persistent common time
shock, fits pooled OLS, and compares the middle matrices and t statistics
across the estimator family. Run with: python demos/01_estimators_on_a_panel.py
"""

import numpy as np

from twowayfb import (
    DgpSpec,
    andrews_bandwidth,
    bias_factor,
    estimate_variance,
    fit_pols,
    generate_panel,
    t_stat,
)

rng = np.random.default_rng(42)
spec = DgpSpec("DGP1", omega_alpha=0.25, omega_gamma=0.5, omega_eps=0.25, rho_gamma=0.425)
data = generate_panel(spec, 25, 25, rng)
fit = fit_pols(data)

print(f"beta_hat = {fit.beta.round(4)}   (true beta = [1, 1])")

choice = andrews_bandwidth(fit)
m = choice.m_hat
print(f"Andrews plug-in bandwidth: M = {m} (b = {choice.b_hat:.2f}, "
      f"slope score AR(1) rho = {choice.rho_hat[1]:.3f})\n")

slope = np.array([0.0, 1.0])
print(f"{'estimator':<10} {'se(beta1)':>10} {'t':>8}  notes")
for kind in ("EHW", "CLUSTER_I", "CLUSTER_T", "DK", "CHS", "BCCHS", "DKA"):
    est = estimate_variance(fit, kind, bandwidth=m)
    res = t_stat(fit, est, slope, null_value=1.0)
    note = ""
    if kind == "BCCHS":
        note = f"= CHS / h(b), h = {bias_factor(m / 25):.4f}"
    if kind == "DKA":
        note = "always PSD"
    if res.negative_variance:
        print(f"{kind:<10} {'n/a':>10} {'n/a':>8}  negative restriction variance")
    else:
        print(f"{kind:<10} {res.se:>10.4f} {res.statistic:>8.3f}  {note}")

# The CHS middle matrix decomposes exactly into three classical pieces.
from twowayfb import omega_arellano, omega_chs, omega_driscoll_kraay, omega_newey_west

chs = omega_chs(fit.scores, m).omega
parts = (
    omega_arellano(fit.scores).omega
    + omega_driscoll_kraay(fit.scores, m).omega
    - omega_newey_west(fit.scores, m).omega
)
print(f"\nCHS == cluster-by-unit + HAC-of-averages - average-of-HACs: "
      f"{np.array_equal(chs, parts)}")
