"""Mohr-Coulomb version of the two-stage pipeline: friction makes the
yield envelope stress-dependent, so the plastic net has to hold
sigma_r - alpha sigma_theta = sigma_Y everywhere inside the plastic zone.

Run from the repository root:  python3 demos/04_mohr_coulomb.py
"""

import numpy as np

from cavex import (OptimOptions, default_config, forward, physics,
                   recovered_pressure, train_elastoplastic, yield_residual)
from cavex.physics import spec_yield

spec = physics.CASES["iv"]
yp = spec_yield(spec)
print(f"case iv: friction angle {spec.phi_deg} deg, cohesion {spec.cohesion}")
print(f"yield envelope: sigma_r - {yp.alpha:.5f} sigma_theta = {yp.sigma_y:.5f}")

config = default_config("iv", seeds=(0,), n_col=30,
                        optim=OptimOptions(max_iters=400))
result = train_elastoplastic(config)

print(f"\nelastic MSE ({result.elastic.metrics.mse_r:.2e}, "
      f"{result.elastic.metrics.mse_theta:.2e})")
print(f"plastic MSE ({result.plastic.metrics.mse_r:.2e}, "
      f"{result.plastic.metrics.mse_theta:.2e})")

# how well does the trained plastic net sit on the envelope?
rs = np.linspace(spec.a, spec.c, 7)
out = forward(result.plastic.params, rs)
res = [yield_residual(out[i, 0], out[i, 1], yp) for i in range(rs.size)]
print("\n  r      yield residual of the net")
for r, v in zip(rs, res):
    print(f"  {r:5.3f}  {v:+.2e}")

exact_p = recovered_pressure(spec)
print(f"\nrecovered cavity pressure {result.recovered_pressure:.4f} "
      f"(reference {exact_p:.4f})")
