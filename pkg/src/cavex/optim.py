"""Deterministic full-batch optimisers: L-BFGS (default) and Adam.

The L-BFGS uses the standard two-loop recursion with a strong-Wolfe line
search (bracket then zoom, quadratic interpolation with bisection
safeguards). Degenerate curvature pairs (y.s <= 1e-12) are not stored;
the following iteration falls back to one plain steepest-descent step of
fixed length ``init_step``. Line-search failure first retries from a
steepest-descent direction with cleared history, then terminates and
returns the best parameters seen, flagged on the trace rather than raised.

Objectives are callables ``x -> (loss, gradient)`` or
``x -> (loss, gradient, named_terms)`` over a flat float64 vector. A
Params object may be passed instead of a vector; it is flattened on entry
and rebuilt on exit, and the objective then receives Params.

Nothing here draws random numbers, so a run is a pure function of the
initial point; traces are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteLossError

__all__ = ["OptimOptions", "OptimTrace", "lbfgs_minimize", "adam_minimize"]


@dataclass
class OptimOptions:
    """Knobs shared by the training runs.

    ``plateau_patience`` iterations without the best loss improving by more
    than ``plateau_tol`` stop the run early; set patience to 0 to disable.
    ``restarts`` is consumed by the training layer (seeds per restart), not
    by a single minimise call.
    """

    max_iters: int = 2000
    history: int = 20
    c1: float = 1e-4
    c2: float = 0.9
    grad_tol: float = 1e-10
    loss_tol: float = 1e-12
    init_step: float = 1e-3
    restarts: int = 3
    plateau_patience: int = 50
    plateau_tol: float = 1e-14
    max_line_search: int = 25
    capture_grads: int = 0


@dataclass
class OptimTrace:
    """Per-iteration record: row 0 is the initial point, then one row per
    accepted iterate. ``terms`` holds the named loss pieces when the
    objective reports them."""

    losses: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    terms: list = field(default_factory=list)
    reason: str = ""
    n_evals: int = 0
    line_search_failed: bool = False
    best_loss: float = math.inf
    best_iter: int = 0
    grad_tail: list = field(default_factory=list)

    def record(self, loss, grad_norm, step, terms, grad=None, tail=0):
        self.losses.append(float(loss))
        self.grad_norms.append(float(grad_norm))
        self.steps.append(float(step))
        self.terms.append(dict(terms) if terms else {})
        if tail > 0 and grad is not None:
            self.grad_tail.append(grad.copy())
            if len(self.grad_tail) > tail:
                self.grad_tail.pop(0)

    def __len__(self):
        return len(self.losses)


def _normalize(out):
    if len(out) == 3:
        f, g, terms = out
    else:
        f, g = out
        terms = {}
    return float(f), np.asarray(g, dtype=np.float64), terms


def _unwrap_params(fun, params0):
    """Adapt a Params-taking objective to the internal flat-vector form."""
    if hasattr(params0, "to_vector") and hasattr(params0, "with_vector"):
        x0 = np.asarray(params0.to_vector(), dtype=np.float64)

        def vec_fun(x):
            return fun(params0.with_vector(x))

        def rebuild(x):
            return params0.with_vector(x)

        return vec_fun, x0, rebuild
    x0 = np.asarray(params0, dtype=np.float64).copy()
    return fun, x0, lambda x: x


def _gnorm(g):
    return float(np.max(np.abs(g))) if g.size else 0.0


class _Objective:
    def __init__(self, fun, trace):
        self.fun = fun
        self.trace = trace

    def __call__(self, x):
        self.trace.n_evals += 1
        return _normalize(self.fun(x))


def _zoom(obj, x, d, lo, f_lo, d_lo, hi, f_hi, f0, derphi0, opts):
    """Shrink [lo, hi] (f_lo is the better end) to a strong-Wolfe point."""
    for _ in range(opts.max_line_search):
        width = hi - lo
        denom = f_hi - f_lo - d_lo * width
        if math.isfinite(denom) and denom > 0.0:
            trial = lo - 0.5 * d_lo * width * width / denom  # quadratic fit minimiser
        else:
            trial = lo + 0.5 * width
        # keep the trial safely inside the bracket
        near, far = (lo, hi) if lo < hi else (hi, lo)
        margin = 0.1 * abs(width)
        if not (near + margin <= trial <= far - margin):
            trial = lo + 0.5 * width
        f_t, g_t, terms_t = obj(x + trial * d)
        d_t = float(g_t @ d)
        if not math.isfinite(f_t) or f_t > f0 + opts.c1 * trial * derphi0 or f_t >= f_lo:
            hi, f_hi = trial, f_t
        else:
            if abs(d_t) <= -opts.c2 * derphi0:
                return True, trial, f_t, g_t, terms_t
            if d_t * (hi - lo) >= 0.0:
                hi, f_hi = lo, f_lo
            lo, f_lo, d_lo = trial, f_t, d_t
        if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
            break
    return False, lo, f_lo, None, None


def _wolfe_search(obj, x, f0, g0, d, opts):
    """Bracketing strong-Wolfe search starting from a unit trial step."""
    derphi0 = float(g0 @ d)
    a_prev, f_prev, d_prev = 0.0, f0, derphi0
    a = 1.0
    for i in range(opts.max_line_search):
        f_a, g_a, terms_a = obj(x + a * d)
        d_a = float(g_a @ d)
        if not math.isfinite(f_a) or f_a > f0 + opts.c1 * a * derphi0 or (i > 0 and f_a >= f_prev):
            return _zoom(obj, x, d, a_prev, f_prev, d_prev, a, f_a, f0, derphi0, opts)
        if abs(d_a) <= -opts.c2 * derphi0:
            return True, a, f_a, g_a, terms_a
        if d_a >= 0.0:
            return _zoom(obj, x, d, a, f_a, d_a, a_prev, f_prev, f0, derphi0, opts)
        a_prev, f_prev, d_prev = a, f_a, d_a
        a = 2.0 * a
    return False, 0.0, f0, None, None


def _two_loop(g, s_list, y_list, rho_list):
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def lbfgs_minimize(fun, params0, opts=None):
    """Minimise ``fun`` from ``params0``; returns (best_params, trace).

    Stops on gradient tolerance (max-abs), loss tolerance, iteration
    budget, loss plateau, or line-search failure. The returned parameters
    are the best evaluated at an accepted iterate, never worse than the
    start.
    """
    opts = opts or OptimOptions()
    fun, x0, rebuild = _unwrap_params(fun, params0)
    trace = OptimTrace()
    obj = _Objective(fun, trace)

    x = x0.copy()
    f, g, terms = obj(x)
    if not math.isfinite(f):
        raise NonFiniteLossError(f"initial loss is {f!r}")
    trace.record(f, _gnorm(g), 0.0, terms, g, opts.capture_grads)
    best_f, best_x, best_it = f, x.copy(), 0
    s_list, y_list, rho_list = [], [], []
    pending_plain_step = False
    since_improve = 0
    reason = "max_iters"

    for it in range(1, opts.max_iters + 1):
        if _gnorm(g) <= opts.grad_tol:
            reason = "grad_tol"
            break
        if f <= opts.loss_tol:
            reason = "loss_tol"
            break
        if opts.plateau_patience > 0 and since_improve >= opts.plateau_patience:
            reason = "plateau"
            break

        if pending_plain_step:
            # recovery after a degenerate curvature pair: one fixed-length
            # steepest-descent step, no line search
            pending_plain_step = False
            d = -g
            alpha = opts.init_step
            f_new, g_new, terms_new = obj(x + alpha * d)
            if not math.isfinite(f_new):
                reason = "diverged"
                break
        else:
            d = _two_loop(g, s_list, y_list, rho_list)
            if float(d @ g) >= 0.0:
                s_list.clear(); y_list.clear(); rho_list.clear()
                d = -g
            assert float(d @ g) < 0.0, "search direction must be a descent direction"
            ok, alpha, f_new, g_new, terms_new = _wolfe_search(obj, x, f, g, d, opts)
            if not ok and s_list:
                # retry once along the raw gradient with history dropped
                s_list.clear(); y_list.clear(); rho_list.clear()
                d = -g
                ok, alpha, f_new, g_new, terms_new = _wolfe_search(obj, x, f, g, d, opts)
            if not ok:
                trace.line_search_failed = True
                reason = "line_search"
                break

        x_new = x + alpha * d
        s = x_new - x
        y = g_new - g
        ys = float(y @ s)
        if ys <= 1e-12:
            pending_plain_step = True
        else:
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / ys)
            if len(s_list) > opts.history:
                s_list.pop(0); y_list.pop(0); rho_list.pop(0)

        x, f, g = x_new, f_new, g_new
        trace.record(f, _gnorm(g), alpha, terms_new, g, opts.capture_grads)
        if f < best_f - opts.plateau_tol:
            since_improve = 0
        else:
            since_improve += 1
        if f < best_f:
            best_f, best_x, best_it = f, x.copy(), it

    trace.reason = reason
    trace.best_loss = best_f
    trace.best_iter = best_it
    return rebuild(best_x), trace


def adam_minimize(fun, params0, lr=1e-3, max_iters=2000, beta1=0.9, beta2=0.999,
                  eps=1e-8, grad_tol=None, loss_tol=None):
    """First-order fallback optimiser; same objective protocol as L-BFGS.

    Kept for robustness comparisons: on these losses it is far slower to
    tighten than L-BFGS, which is why L-BFGS is the default everywhere.
    """
    fun, x0, rebuild = _unwrap_params(fun, params0)
    trace = OptimTrace()
    obj = _Objective(fun, trace)

    x = x0.copy()
    f, g, terms = obj(x)
    if not math.isfinite(f):
        raise NonFiniteLossError(f"initial loss is {f!r}")
    trace.record(f, _gnorm(g), 0.0, terms)
    best_f, best_x, best_it = f, x.copy(), 0
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    reason = "max_iters"

    for it in range(1, max_iters + 1):
        if grad_tol is not None and _gnorm(g) <= grad_tol:
            reason = "grad_tol"
            break
        if loss_tol is not None and f <= loss_tol:
            reason = "loss_tol"
            break
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**it)
        v_hat = v / (1.0 - beta2**it)
        x = x - lr * m_hat / (np.sqrt(v_hat) + eps)
        f, g, terms = obj(x)
        if not math.isfinite(f):
            reason = "diverged"
            break
        trace.record(f, _gnorm(g), lr, terms)
        if f < best_f:
            best_f, best_x, best_it = f, x.copy(), it

    trace.reason = reason
    trace.best_loss = best_f
    trace.best_iter = best_it
    return rebuild(best_x), trace
