"""Training drivers: multi-seed restarts over the case losses, metrics
against the built-in reference solutions, and end-of-training gradient
histograms.

A loss is recorded once per configuration and replayed for every seed,
since the tape layout depends only on the architecture and collocation,
never on parameter values. Everything downstream of the seed list is
deterministic, so one config trains to bit-identical results on reruns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff, mlp, oracle, physics
from .optim import OptimOptions, OptimTrace, lbfgs_minimize

__all__ = [
    "TrainConfig",
    "TrainingReport",
    "ElastoPlasticResult",
    "GradHistogram",
    "default_config",
    "sample_collocation",
    "capture_grad_histograms",
    "tail_mean_abs_grads",
    "train_case",
    "train_elastoplastic",
]

ELASTIC_CASES = ("i", "ii")
EP_CASES = ("iii", "iv")


def sample_collocation(lo, hi, n):
    """Evenly spaced collocation points spanning [lo, hi] inclusive."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    if n < 2:
        raise ValueError("need at least two collocation points")
    return np.linspace(lo, hi, n)


@dataclass
class TrainConfig:
    """One training run's knobs; defaults reproduce the reference setup
    (50 collocation points, 3 seed restarts, L-BFGS)."""

    case: str = "i"
    formulation: str = "C"
    n_col: int = 50
    seeds: tuple = (0, 1, 2)
    optim: OptimOptions = field(default_factory=OptimOptions)
    normalize: bool = False
    eval_grid: int = 100
    hist_bins: int = 30
    weights: physics.LossWeights | None = None
    data: tuple | None = None

    def __post_init__(self):
        if self.case not in physics.CASES:
            raise ValueError(f"unknown case {self.case!r}")
        if self.formulation not in physics.FORMULATION_WIDTHS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.formulation != "C" and self.case != "i":
            raise ValueError("formulations A and B are defined for case i only")
        if self.n_col < 2:
            raise ValueError("need at least two collocation points")
        if self.eval_grid < 2:
            raise ValueError("need at least two evaluation points")
        if self.hist_bins < 1:
            raise ValueError("need at least one histogram bin")
        if not self.seeds:
            raise ValueError("need at least one seed")


def default_config(case, **overrides):
    """TrainConfig for a named case; keyword overrides replace fields."""
    return TrainConfig(case=case, **overrides)


@dataclass
class GradHistogram:
    """Distribution of the loss gradient over one hidden layer's weights."""

    layer: int
    bin_edges: np.ndarray
    counts: np.ndarray
    mean_abs: float


@dataclass
class TrainingReport:
    """Everything a finished run produced, ready for files or assertions."""

    case: str
    formulation: str
    region: str
    seed: int
    params: mlp.Params
    breakdown: physics.LossBreakdown
    trace: OptimTrace
    pred: oracle.StressField
    exact: oracle.StressField
    metrics: oracle.Metrics
    histograms: list
    seconds: float
    seed_losses: dict


@dataclass
class ElastoPlasticResult:
    """Two-stage pipeline output: the elastic report, the plastic report,
    the interface stresses frozen between the stages, and the cavity
    pressure read off the trained plastic net at r = a."""

    elastic: TrainingReport
    plastic: TrainingReport
    frozen: tuple
    recovered_pressure: float


def _hidden_weight_slices(params):
    """(start, end) into the flat vector for each hidden layer's weight
    block; the output layer is excluded."""
    out, off = [], 0
    n_layers = len(params.weights)
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        if l < n_layers - 1:
            out.append((off, off + w.size))
        off += w.size + b.size
    return out


def capture_grad_histograms(grad_vec, params, bins=30):
    """Histogram the gradient per hidden layer, equal-width bins spanning
    that layer's own min..max."""
    grad_vec = np.asarray(grad_vec, dtype=np.float64)
    if grad_vec.shape != (params.n_params,):
        raise ValueError("gradient length does not match the parameter count")
    hists = []
    for layer, (s, e) in enumerate(_hidden_weight_slices(params), start=1):
        g = grad_vec[s:e]
        counts, edges = np.histogram(g, bins=bins)
        hists.append(GradHistogram(layer, edges, counts, float(np.mean(np.abs(g)))))
    return hists


def tail_mean_abs_grads(trace, params):
    """Per-hidden-layer mean |gradient| averaged over the optimizer's
    captured gradient tail.

    A single end-of-training gradient snapshot swings by orders of
    magnitude between adjacent L-BFGS iterates, so formulation comparisons
    use this windowed average instead (requires OptimOptions.capture_grads
    > 0 during the run)."""
    if not trace.grad_tail:
        raise ValueError("no captured gradients; run with capture_grads > 0")
    stacked = np.abs(np.array(trace.grad_tail))
    return [float(stacked[:, s:e].mean()) for s, e in _hidden_weight_slices(params)]


def _run_restarts(compiled, arch, seeds, opts, input_map):
    best = None
    seed_losses = {}
    for seed in seeds:
        x0 = mlp.init_params(arch, seed=seed, input_map=input_map).to_vector()
        x, trace = lbfgs_minimize(compiled.value_and_grad, x0, opts)
        seed_losses[seed] = trace.best_loss
        if best is None or trace.best_loss < best[2].best_loss:
            best = (seed, x, trace)
    return best, seed_losses


def _final_report(case, formulation, region, spec, loss_fn, compiled, arch,
                  seeds, config, exact_fn, grid_lo, grid_hi, t0):
    (seed, x, trace), seed_losses = _run_restarts(
        compiled, arch, seeds, config.optim, (grid_lo, grid_hi) if config.normalize else None)
    base = mlp.init_params(arch, seed=seed,
                           input_map=(grid_lo, grid_hi) if config.normalize else None)
    trained = base.with_vector(x)
    _, g, _ = compiled.value_and_grad(x)
    hists = capture_grad_histograms(g, trained, config.hist_bins)
    breakdown = loss_fn(trained)
    if config.normalize:
        trained = mlp.fold_input_map(trained)
    grid = np.linspace(grid_lo, grid_hi, config.eval_grid)
    out = mlp.forward(trained, grid)
    pred = oracle.StressField(grid, out[:, 0], out[:, 1], region)
    exact = exact_fn(grid)
    mets = oracle.metrics(pred, exact)
    return TrainingReport(
        case=case, formulation=formulation, region=region, seed=seed,
        params=trained, breakdown=breakdown, trace=trace, pred=pred,
        exact=exact, metrics=mets, histograms=hists,
        seconds=time.perf_counter() - t0, seed_losses=seed_losses)


def train_case(config):
    """Train one elastic case (i or ii) and evaluate it against the
    matching reference solution. Returns a TrainingReport for the best of
    the seed restarts, judged by best training loss."""
    if config.case not in ELASTIC_CASES:
        raise ValueError("train_case handles the elastic cases; use train_elastoplastic")
    spec = physics.CASES[config.case]
    t0 = time.perf_counter()
    col = sample_collocation(spec.a, spec.b, config.n_col)
    n_out = physics.FORMULATION_WIDTHS[config.formulation]
    arch = mlp.default_architecture(n_out)

    if config.case == "i":
        def loss_fn(m):
            return physics.loss_formulation(config.formulation, m, col, spec,
                                            weights=config.weights, data=config.data)
        def exact_fn(grid):
            return oracle.lame_solution(spec, grid)
    else:
        def loss_fn(m):
            return physics.loss_case_ii(m, col, spec,
                                        weights=config.weights, data=config.data)
        def exact_fn(grid):
            return oracle.aniso_solution(spec, grid)

    rec = mlp.init_params(arch, seed=config.seeds[0],
                          input_map=(spec.a, spec.b) if config.normalize else None)
    compiled = autodiff.compile_loss(loss_fn, rec)
    return _final_report(config.case, config.formulation, "whole", spec,
                         loss_fn, compiled, arch, config.seeds, config,
                         exact_fn, spec.a, spec.b, t0)


def train_elastoplastic(config):
    """Two-stage run for cases iii and iv.

    Stage 1 trains the elastic-region net on [c, b] against the at-yield
    interface condition. Its stresses at c are then frozen to plain floats
    and handed to stage 2 as the continuity targets for the plastic-region
    net on [a, c]; the elastic net is never updated again.
    """
    if config.case not in EP_CASES:
        raise ValueError("train_elastoplastic handles cases iii and iv only")
    if config.formulation != "C":
        raise ValueError("the two-stage pipeline uses formulation C nets")
    spec = physics.CASES[config.case]
    arch = mlp.default_architecture(2)

    t0 = time.perf_counter()
    col_e = sample_collocation(spec.c, spec.b, config.n_col)

    def loss_e(m):
        return physics.loss_ep_elastic(m, col_e, spec,
                                       weights=config.weights, data=config.data)

    rec_e = mlp.init_params(arch, seed=config.seeds[0],
                            input_map=(spec.c, spec.b) if config.normalize else None)
    compiled_e = autodiff.compile_loss(loss_e, rec_e)
    rep_e = _final_report(config.case, config.formulation, "elastic", spec,
                          loss_e, compiled_e, arch, config.seeds, config,
                          lambda grid: oracle.ep_solution(spec, (grid, 2))[0],
                          spec.c, spec.b, t0)

    sr_c, st_c = (float(v) for v in mlp.forward(rep_e.params, spec.c))

    t1 = time.perf_counter()
    col_p = sample_collocation(spec.a, spec.c, config.n_col)

    def loss_p(m):
        return physics.loss_ep_plastic(m, col_p, spec, (sr_c, st_c),
                                       weights=config.weights, data=config.data)

    rec_p = mlp.init_params(arch, seed=config.seeds[0],
                            input_map=(spec.a, spec.c) if config.normalize else None)
    compiled_p = autodiff.compile_loss(loss_p, rec_p)
    rep_p = _final_report(config.case, config.formulation, "plastic", spec,
                          loss_p, compiled_p, arch, config.seeds, config,
                          lambda grid: oracle.ep_solution(spec, (2, grid))[1],
                          spec.a, spec.c, t1)

    recovered = float(mlp.forward(rep_p.params, spec.a)[0])
    return ElastoPlasticResult(elastic=rep_e, plastic=rep_p,
                               frozen=(sr_c, st_c), recovered_pressure=recovered)
