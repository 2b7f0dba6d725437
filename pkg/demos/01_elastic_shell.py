"""Train a stress net for the isotropic pressurized shell and score it
against the closed-form solution.

Run from the repository root:  python3 demos/01_elastic_shell.py
"""

import numpy as np

from cavex import (OptimOptions, default_config, forward, lame_solution,
                   physics, train_case)

# keep the budget small for a quick demo; the shipped defaults reach
# MSE ~ 1e-9 in a few seconds
config = default_config("i", seeds=(0,), n_col=30,
                        optim=OptimOptions(max_iters=400))
report = train_case(config)

spec = physics.CASES["i"]
print(f"case i: shell {spec.a}..{spec.b}, inner pressure {spec.p}, "
      f"outer {spec.p0}")
print(f"trained for {len(report.trace) - 1} iterations "
      f"({report.seconds:.1f}s), stop reason: {report.trace.reason}")
print(f"final loss {report.trace.best_loss:.3e}")

m = report.metrics
print(f"MSE radial {m.mse_r:.3e}  tangential {m.mse_theta:.3e}")
print(f"R^2 radial {m.r2_r:.6f}  tangential {m.r2_theta:.6f}")

# spot-check a few radii against the closed form
rs = np.linspace(spec.a, spec.b, 5)
exact = lame_solution(spec, rs)
net = forward(report.params, rs)
print("\n  r      sigma_r (net / exact)    sigma_theta (net / exact)")
for i, r in enumerate(rs):
    print(f"  {r:4.2f}   {net[i, 0]:9.5f} / {exact.sigma_r[i]:9.5f}"
          f"    {net[i, 1]:9.5f} / {exact.sigma_theta[i]:9.5f}")
