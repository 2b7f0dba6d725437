"""Why the stress-only formulation wins: train the same problem three ways
on one fixed budget and compare errors and late-stage gradient activity.

Formulation A predicts stresses, strains, and displacement (5 outputs),
B drops the displacement (4 outputs), C keeps only the two stresses.

Run from the repository root:  python3 demos/05_formulation_comparison.py
"""

from cavex import OptimOptions, TrainConfig, tail_mean_abs_grads, train_case

# identical budgets: fixed iterations, no tolerance stops
opts = OptimOptions(max_iters=200, grad_tol=0.0, loss_tol=0.0,
                    plateau_patience=0, capture_grads=50)

print("formulation   outputs   mse_r        mse_theta    "
      "mean |grad| per hidden layer")
for form, n_out in (("A", 5), ("B", 4), ("C", 2)):
    cfg = TrainConfig(case="i", formulation=form, seeds=(0,), optim=opts)
    rep = train_case(cfg)
    tails = tail_mean_abs_grads(rep.trace, rep.params)
    tail_txt = "  ".join(f"{t:.2e}" for t in tails)
    print(f"     {form}           {n_out}      {rep.metrics.mse_r:.2e}"
          f"     {rep.metrics.mse_theta:.2e}    {tail_txt}")

print("\nThe wider formulations stall: their extra outputs couple every")
print("equation to strain/displacement scales ~1e-5 of the stresses, the")
print("loss surface flattens, and hidden-layer gradients shrink. The")
print("stress-only net keeps training and lands orders of magnitude lower.")
