"""Radially anisotropic shell: the net trains against the combined
constitutive relation, the reference comes from an RK4 shooting solve.

Run from the repository root:  python3 demos/02_anisotropic_shell.py
"""

import numpy as np

from cavex import (OptimOptions, aniso_solution, default_config, lame_solution,
                   physics, train_case)

spec = physics.CASES["ii"]
print(f"case ii: E {spec.E:.0f} / E_rad {spec.E_rad:.0f}, "
      f"nu {spec.nu} / nu_rad {spec.nu_rad}")

config = default_config("ii", seeds=(0,), n_col=30,
                        optim=OptimOptions(max_iters=400))
report = train_case(config)

m = report.metrics
print(f"final loss {report.trace.best_loss:.3e} "
      f"after {len(report.trace) - 1} iterations")
print(f"MSE radial {m.mse_r:.3e}  tangential {m.mse_theta:.3e}")

# anisotropy pushes the tangential stress away from the isotropic answer;
# compare both against the integrated reference at the inner wall
rs = np.array([spec.a, 0.6, 1.0, 2.0])
ref = aniso_solution(spec, rs)
iso_ref = lame_solution(physics.CASES["i"], rs)  # same geometry and loads
print("\n  r     sigma_theta aniso   sigma_theta isotropic")
for i, r in enumerate(rs):
    print(f"  {r:4.2f}   {ref.sigma_theta[i]:12.6f}   {iso_ref.sigma_theta[i]:12.6f}")
