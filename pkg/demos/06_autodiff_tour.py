"""A tour of the differentiation machinery underneath the trainer: the
reverse-mode tape, forward-mode duals riding on it, and the compiled
replay used inside the optimizer loop.

Run from the repository root:  python3 demos/06_autodiff_tour.py
"""

import time

import numpy as np

from cavex import (check_gradient, compile_loss, default_architecture,
                   dual_eval, forward_with_derivative, grad, init_params,
                   physics)
from cavex import autodiff

# 1. reverse mode: gradient of a scalar function of a parameter vector
f = lambda th: th[0] * th[1] + autodiff.tanh(th[2])
theta = np.array([2.0, -1.0, 0.3])
print("grad of x*y + tanh(z) at (2, -1, 0.3):", grad(f, theta))
print("expected:                              ",
      np.array([-1.0, 2.0, 1.0 / np.cosh(0.3) ** 2]))

# 2. forward mode: derivative w.r.t. the input radius via dual numbers
val, der = dual_eval(lambda r: r * r * r, 2.0)
print(f"\nd/dr r^3 at r=2: {der} (value {val})")

params = init_params(default_architecture(2), seed=0)
out, dout = forward_with_derivative(params, 1.0)
print(f"net at r=1: sigma_r={out[0]:+.5f}, dsigma_r/dr={dout[0]:+.5f}")

# 3. the two modes nest: training differentiates losses that already
# contain input derivatives; certify against finite differences
spec = physics.CASES["i"]
col = np.linspace(spec.a, spec.b, 5)
loss = lambda p: physics.loss_case_i(p, col, spec)
err = check_gradient(loss, params, step=1e-6)
print(f"\nparameter gradient vs central differences: worst rel err {err:.2e}")

# 4. recording once and replaying beats re-taping every iteration
compiled = compile_loss(loss, params)
x = params.to_vector()
t0 = time.perf_counter()
for _ in range(50):
    value, g, terms = compiled.value_and_grad(x)
dt_replay = (time.perf_counter() - t0) / 50

t0 = time.perf_counter()
for _ in range(5):
    grad(loss, params)
dt_tape = (time.perf_counter() - t0) / 5

print(f"loss {value:.6f}, |grad| {np.max(np.abs(g)):.4f}, "
      f"terms: {list(terms)}")
print(f"replay {dt_replay * 1e3:.2f} ms/eval vs fresh tape "
      f"{dt_tape * 1e3:.2f} ms/eval ({dt_tape / dt_replay:.0f}x)")
