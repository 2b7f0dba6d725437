"""Elasto-plastic cavity with a Tresca material: train the elastic annulus
first, freeze the interface stresses, then train the plastic region and
recover the cavity pressure.

Run from the repository root:  python3 demos/03_tresca_two_stage.py
"""

from cavex import (OptimOptions, default_config, ep_interface, physics,
                   recovered_pressure, train_elastoplastic)

spec = physics.CASES["iii"]
print(f"case iii: cavity {spec.a}, shell {spec.b}, plastic out to c={spec.c}, "
      f"undrained strength {spec.s_u}")

config = default_config("iii", seeds=(0,), n_col=30,
                        optim=OptimOptions(max_iters=400))
result = train_elastoplastic(config)

_, _, sr_c, st_c = ep_interface(spec)
print("\nstage 1 (elastic, r in [c, b]):")
print(f"  loss {result.elastic.trace.best_loss:.3e}, "
      f"MSE ({result.elastic.metrics.mse_r:.2e}, "
      f"{result.elastic.metrics.mse_theta:.2e})")
print(f"  frozen interface stresses {result.frozen[0]:+.5f}, "
      f"{result.frozen[1]:+.5f}")
print(f"  reference                 {sr_c:+.5f}, {st_c:+.5f}")

print("\nstage 2 (plastic, r in [a, c], continuity targets from stage 1):")
print(f"  loss {result.plastic.trace.best_loss:.3e}, "
      f"MSE ({result.plastic.metrics.mse_r:.2e}, "
      f"{result.plastic.metrics.mse_theta:.2e})")

exact_p = recovered_pressure(spec)
err_pct = 100.0 * abs(result.recovered_pressure - exact_p) / exact_p
print(f"\nrecovered cavity pressure {result.recovered_pressure:.4f} "
      f"(reference {exact_p:.4f}, off by {err_pct:.3f}%)")
