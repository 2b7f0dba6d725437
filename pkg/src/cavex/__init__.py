"""Physics-trained neural solver for spherical cavity expansion.

Small tanh networks map the radius to radial and tangential stress; they
are trained by minimizing squared residuals of the governing equations
and boundary conditions at collocation points, with no labelled field
data. Reference solutions for every supported case ship in
:mod:`cavex.oracle`, so each run can be scored independently of the
training loss.

Layered design, each importable on its own:

- :mod:`cavex.autodiff`: scalar reverse-mode tape with forward-mode duals
  riding on it, plus recording of a loss into a replayable kernel.
- :mod:`cavex.mlp`: network parameters, initialization, evaluation, and
  the text weight-file format.
- :mod:`cavex.physics`: case definitions, governing-equation residuals,
  and the per-case loss builders.
- :mod:`cavex.optim`: deterministic L-BFGS (strong Wolfe) and Adam.
- :mod:`cavex.train`: multi-seed training drivers and reports.
- :mod:`cavex.oracle`: closed-form and integrated reference solutions.
- :mod:`cavex.cli`: the ``cavex`` command.
"""

from . import autodiff, cli, mlp, optim, oracle, physics, train
from .autodiff import (
    CompiledFunction,
    Dual,
    NonFiniteLossError,
    Tape,
    TapeError,
    Var,
    check_gradient,
    compile_loss,
    dual_eval,
    grad,
)
from .mlp import (
    Architecture,
    Params,
    WeightFormatError,
    default_architecture,
    fold_input_map,
    forward,
    forward_with_derivative,
    init_params,
    load_weights,
    save_weights,
)
from .optim import OptimOptions, OptimTrace, adam_minimize, lbfgs_minimize
from .oracle import (
    Metrics,
    StressField,
    aniso_solution,
    ep_interface,
    ep_solution,
    lame_solution,
    metrics,
    recovered_pressure,
)
from .physics import (
    CASES,
    FORMULATION_WIDTHS,
    CaseSpec,
    LossBreakdown,
    LossWeights,
    YieldParams,
    aniso_residual,
    equilibrium_residual,
    formc_stress_residual,
    loss_case_i,
    loss_case_ii,
    loss_data,
    loss_ep_elastic,
    loss_ep_plastic,
    loss_formulation,
    yield_params,
    yield_residual,
)
from .train import (
    ElastoPlasticResult,
    GradHistogram,
    TrainConfig,
    TrainingReport,
    capture_grad_histograms,
    default_config,
    sample_collocation,
    tail_mean_abs_grads,
    train_case,
    train_elastoplastic,
)

__version__ = "0.1.0"
