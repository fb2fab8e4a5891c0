"""Fixed-b critical values: why the normal cv is too small at large bandwidths.

Simulates the random-sampling limit laws on a bandwidth grid (a reduced-scale
version of the asymptotic reference table), then produces plug-in critical
values for one simulated dataset. Run with:
python demos/02_fixed_b_critical_values.py
"""

import numpy as np

from twowayfb import (
    DgpSpec,
    fit_pols,
    generate_panel,
    iid_limit_cv,
    plugin_inputs,
    simulate_plugin_cv,
)
from twowayfb.fixedb import asymptotic_table

# Reduced scale keeps this demo fast; bump reps/increments for table-grade
# numbers (50,000 x 1,000).
table = asymptotic_table(b_grid=(0.0, 0.08, 0.20, 0.40, 1.00),
                         reps=10_000, increments=400, seed=3)
print(table.to_text())

print("A 97.5% one-sided (5% two-sided) cv under random sampling grows with b:")
for b in (0.08, 0.4, 1.0):
    cv = iid_limit_cv("IID_CHS", b, reps=10_000, increments=400, seed=5)
    print(f"  b={b:4.2f}: CHS cv = {cv.value:.3f}   (normal cv would be 1.960)")

# Plug-in critical values for an actual dataset: the limit law is not
# pivotal, so the estimated component scales enter the simulation.
rng = np.random.default_rng(9)
data = generate_panel(DgpSpec("DGP1", rho_gamma=0.6), 25, 25, rng)
fit = fit_pols(data)
inputs = plugin_inputs(fit, bandwidth=10, restriction=np.array([0.0, 1.0]))
cv_chs, cv_bc = simulate_plugin_cv(inputs, reps=5_000, increments=500, seed=11)
print(f"\nplug-in cvs for the slope at M=10 (b={inputs.b:.2f}, c={inputs.c:.2f}):")
print(f"  CHS:       {cv_chs.value:.3f}")
print(f"  BCCHS/DKA: {cv_bc.value:.3f}  (= sqrt(h(b)) times the CHS value)")
