"""Scalar automatic differentiation on an append-only tape.

Two pieces cooperate here:

* ``Tape``/``Var`` give reverse-mode differentiation. Every arithmetic
  operation on a ``Var`` appends one node (opcode, parent indices, value)
  to its tape, so nodes are stored in topological order and one reverse
  sweep yields d(root)/d(leaf) for every leaf.

* ``Dual`` gives forward-mode differentiation with respect to a single
  scalar input. Its two components may be plain floats or tape ``Var``s.
  When they are tape variables, the tangent arithmetic is itself recorded,
  so the derivative of a network output with respect to its input stays
  differentiable with respect to the network parameters. That nesting is
  what lets a residual containing d(sigma)/dr be minimised over weights
  with a single reverse sweep.

Repeated evaluation does not re-record: ``CompiledFunction`` freezes the
node list into flat arrays and replays it with two tight loops (jitted by
numba when available; the same code runs as plain Python otherwise, just
slower). Replay recomputes every node value from the current leaf values,
so one recording serves an entire optimisation run. This requires the
recorded control flow to be independent of leaf values, which holds for
every loss in this package.

Supported primitives: add, sub, mul, div, neg, tanh, ln, power by a real
constant, abs. Anything else fails while the expression is being built
(e.g. ``math.exp(var)`` raises ``TypeError``), never during replay.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Tape",
    "Var",
    "Dual",
    "CompiledFunction",
    "grad",
    "dual_eval",
    "check_gradient",
    "tanh",
    "log",
    "TapeError",
    "NonFiniteLossError",
]

# Node opcodes. LEAF values are inputs/constants written before replay.
OP_LEAF = 0
OP_ADD = 1
OP_SUB = 2
OP_MUL = 3
OP_DIV = 4
OP_NEG = 5
OP_TANH = 6
OP_LOG = 7
OP_POW = 8
OP_ABS = 9


class TapeError(RuntimeError):
    """Raised for structural misuse of a tape (empty, cross-tape mixes...)."""


class NonFiniteLossError(RuntimeError):
    """Raised when a loss value requested for differentiation is inf/nan."""


def _ieee_div(x, y):
    # Match IEEE semantics instead of raising: downstream training code
    # detects non-finite losses and aborts cleanly.
    if y != 0.0:
        return x / y
    if x == 0.0 or x != x:
        return math.nan
    return math.inf if (x > 0.0) == (math.copysign(1.0, y) > 0.0) else -math.inf


def _ieee_pow(x, p):
    try:
        return x**p
    except ZeroDivisionError:  # 0.0 ** negative
        return math.inf
    except OverflowError:
        return math.inf if x > 0.0 else math.nan


class Tape:
    """Append-only record of scalar operations in topological order."""

    __slots__ = ("ops", "pa", "pb", "aux", "vals", "_consts")

    def __init__(self):
        self.ops: list[int] = []
        self.pa: list[int] = []
        self.pb: list[int] = []
        self.aux: list[float] = []
        self.vals: list[float] = []
        self._consts: dict[float, int] = {}

    def __len__(self):
        return len(self.ops)

    def _push(self, op, a, b, aux, value):
        i = len(self.ops)
        self.ops.append(op)
        self.pa.append(a)
        self.pb.append(b)
        self.aux.append(aux)
        self.vals.append(value)
        return Var(self, i)

    def leaf(self, value):
        """New independent variable (parameter or input)."""
        return self._push(OP_LEAF, -1, -1, 0.0, float(value))

    def const(self, value):
        """Constant leaf; repeated values share one node."""
        v = float(value)
        i = self._consts.get(v)
        if i is None:
            i = self.leaf(v).i
            self._consts[v] = i
        return Var(self, i)


class Var:
    """Handle to one tape node. Supports +, -, *, /, **const, tanh, log, abs."""

    __slots__ = ("tape", "i")

    def __init__(self, tape, i):
        self.tape = tape
        self.i = i

    @property
    def value(self):
        return self.tape.vals[self.i]

    def __repr__(self):
        return f"Var({self.value!r})"

    def _operand(self, other):
        if isinstance(other, Var):
            if other.tape is not self.tape:
                raise TapeError("cannot mix variables from different tapes")
            return other.i
        if isinstance(other, (int, float)):
            return self.tape.const(other).i
        return None

    def __add__(self, other):
        j = self._operand(other)
        if j is None:
            return NotImplemented
        t = self.tape
        return t._push(OP_ADD, self.i, j, 0.0, t.vals[self.i] + t.vals[j])

    __radd__ = __add__

    def __sub__(self, other):
        j = self._operand(other)
        if j is None:
            return NotImplemented
        t = self.tape
        return t._push(OP_SUB, self.i, j, 0.0, t.vals[self.i] - t.vals[j])

    def __rsub__(self, other):
        j = self._operand(other)
        if j is None:
            return NotImplemented
        t = self.tape
        return t._push(OP_SUB, j, self.i, 0.0, t.vals[j] - t.vals[self.i])

    def __mul__(self, other):
        j = self._operand(other)
        if j is None:
            return NotImplemented
        t = self.tape
        return t._push(OP_MUL, self.i, j, 0.0, t.vals[self.i] * t.vals[j])

    __rmul__ = __mul__

    def __truediv__(self, other):
        j = self._operand(other)
        if j is None:
            return NotImplemented
        t = self.tape
        return t._push(OP_DIV, self.i, j, 0.0, _ieee_div(t.vals[self.i], t.vals[j]))

    def __rtruediv__(self, other):
        j = self._operand(other)
        if j is None:
            return NotImplemented
        t = self.tape
        return t._push(OP_DIV, j, self.i, 0.0, _ieee_div(t.vals[j], t.vals[self.i]))

    def __neg__(self):
        t = self.tape
        return t._push(OP_NEG, self.i, -1, 0.0, -t.vals[self.i])

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("tape variables support powers by real constants only")
        t = self.tape
        return t._push(OP_POW, self.i, -1, float(p), _ieee_pow(t.vals[self.i], float(p)))

    def tanh(self):
        t = self.tape
        return t._push(OP_TANH, self.i, -1, 0.0, math.tanh(t.vals[self.i]))

    def log(self):
        t = self.tape
        v = t.vals[self.i]
        val = math.log(v) if v > 0.0 else (-math.inf if v == 0.0 else math.nan)
        return t._push(OP_LOG, self.i, -1, 0.0, val)

    def __abs__(self):
        t = self.tape
        return t._push(OP_ABS, self.i, -1, 0.0, abs(t.vals[self.i]))


def _is_zero(x):
    return isinstance(x, float) and x == 0.0


def _t_add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def _t_sub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return -b
    return a - b


def _num_div(a, b):
    # plain numbers follow IEEE like the tape ops do; Vars and nested
    # Duals carry their own division semantics
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return _ieee_div(float(a), float(b))
    return a / b


def _num_pow(a, p):
    if isinstance(a, (int, float)):
        return _ieee_pow(float(a), p)
    return a ** p


def _t_mul(a, b):
    # Literal-zero tangents stay the float 0.0 so dead tangent arithmetic
    # (every parameter is seeded with tangent 0) records nothing.
    if _is_zero(a) or _is_zero(b):
        return 0.0
    return a * b


class Dual:
    """Forward-mode dual number: value ``v`` and input-tangent ``t``.

    Components may be floats or ``Var``s; the arithmetic is identical. The
    value component always goes through the same operations in the same
    order as a plain evaluation would, so dual evaluation reproduces plain
    values bit for bit.
    """

    __slots__ = ("v", "t")

    def __init__(self, v, t=0.0):
        self.v = v
        self.t = t

    def __repr__(self):
        return f"Dual({self.v!r}, {self.t!r})"

    @staticmethod
    def _coerce(x):
        if isinstance(x, Dual):
            return x
        if isinstance(x, (int, float, Var)):
            return Dual(x, 0.0)
        return None

    def __add__(self, other):
        o = Dual._coerce(other)
        if o is None:
            return NotImplemented
        return Dual(self.v + o.v, _t_add(self.t, o.t))

    __radd__ = __add__

    def __sub__(self, other):
        o = Dual._coerce(other)
        if o is None:
            return NotImplemented
        return Dual(self.v - o.v, _t_sub(self.t, o.t))

    def __rsub__(self, other):
        o = Dual._coerce(other)
        if o is None:
            return NotImplemented
        return o.__sub__(self)

    def __mul__(self, other):
        o = Dual._coerce(other)
        if o is None:
            return NotImplemented
        return Dual(self.v * o.v, _t_add(_t_mul(self.t, o.v), _t_mul(o.t, self.v)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Dual._coerce(other)
        if o is None:
            return NotImplemented
        v = _num_div(self.v, o.v)
        if _is_zero(self.t) and _is_zero(o.t):
            return Dual(v, 0.0)
        # (a/b)' = (a' - (a/b) b') / b
        return Dual(v, _num_div(_t_sub(self.t, _t_mul(o.t, v)), o.v))

    def __rtruediv__(self, other):
        o = Dual._coerce(other)
        if o is None:
            return NotImplemented
        return o.__truediv__(self)

    def __neg__(self):
        return Dual(-self.v, 0.0 if _is_zero(self.t) else -self.t)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("dual numbers support powers by real constants only")
        v = _num_pow(self.v, float(p))
        if _is_zero(self.t):
            return Dual(v, 0.0)
        return Dual(v, (float(p) * _num_pow(self.v, float(p) - 1.0)) * self.t)

    def tanh(self):
        v = tanh(self.v)
        # derivative reuses the forward value: 1 - tanh(x)^2
        return Dual(v, 0.0 if _is_zero(self.t) else (1.0 - v * v) * self.t)

    def log(self):
        v = log(self.v)
        return Dual(v, 0.0 if _is_zero(self.t) else _num_div(self.t, self.v))

    def __abs__(self):
        v = abs(self.v)
        if _is_zero(self.t):
            return Dual(v, 0.0)
        # |x|' = |x|/x; not defined at 0, propagates nan there
        return Dual(v, self.t * _num_div(v, self.v))


def tanh(x):
    """tanh for floats, Vars and Duals alike."""
    if isinstance(x, (Var, Dual)):
        return x.tanh()
    return math.tanh(x)


def log(x):
    """Natural log for floats, Vars and Duals alike; non-positive floats
    yield -inf/nan instead of raising, matching the tape semantics."""
    if isinstance(x, (Var, Dual)):
        return x.log()
    if x > 0.0:
        return math.log(x)
    return -math.inf if x == 0.0 else math.nan


# --- frozen-tape replay kernels ------------------------------------------
#
# Plain functions first; jitted twins are attached below when numba
# imports. Both operate on the flat arrays produced by CompiledFunction.


def _forward_pass(ops, pa, pb, aux, val):
    # np.tanh/np.log instead of the math module: on the pure-Python path the
    # operands are np.float64 scalars and numpy follows IEEE (nan/inf) where
    # math would raise, matching the jitted behavior.
    for i in range(ops.shape[0]):
        o = ops[i]
        if o == 0:  # leaf: value already written
            continue
        a = pa[i]
        if o == 1:
            val[i] = val[a] + val[pb[i]]
        elif o == 2:
            val[i] = val[a] - val[pb[i]]
        elif o == 3:
            val[i] = val[a] * val[pb[i]]
        elif o == 4:
            val[i] = val[a] / val[pb[i]]
        elif o == 5:
            val[i] = -val[a]
        elif o == 6:
            val[i] = np.tanh(val[a])
        elif o == 7:
            val[i] = np.log(val[a])
        elif o == 8:
            val[i] = val[a] ** aux[i]
        else:
            val[i] = abs(val[a])


def _backward_pass(ops, pa, pb, aux, val, adj):
    for i in range(ops.shape[0] - 1, -1, -1):
        g = adj[i]
        if g == 0.0:
            continue
        o = ops[i]
        if o == 0:
            continue
        a = pa[i]
        if o == 1:
            adj[a] += g
            adj[pb[i]] += g
        elif o == 2:
            adj[a] += g
            adj[pb[i]] -= g
        elif o == 3:
            adj[a] += g * val[pb[i]]
            adj[pb[i]] += g * val[a]
        elif o == 4:
            b = pb[i]
            adj[a] += g / val[b]
            adj[b] -= g * val[i] / val[b]
        elif o == 5:
            adj[a] -= g
        elif o == 6:
            adj[a] += g * (1.0 - val[i] * val[i])
        elif o == 7:
            adj[a] += g / val[a]
        elif o == 8:
            p = aux[i]
            adj[a] += g * p * val[a] ** (p - 1.0)
        else:
            adj[a] += g if val[a] >= 0.0 else -g


try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit as _njit

    _forward_kernel = _njit(cache=True)(_forward_pass)
    _backward_kernel = _njit(cache=True)(_backward_pass)
except ImportError:  # pragma: no cover
    _forward_kernel = _forward_pass
    _backward_kernel = _backward_pass


class CompiledFunction:
    """A frozen tape with designated input leaves and one scalar output.

    ``value_and_grad`` writes new input values into the leaf slots, replays
    the whole recording forward, then runs one reverse sweep. Named
    auxiliary nodes (loss terms) are read off the same forward pass for
    free. Replay is sequential and allocation-free, hence bit-reproducible.
    Not thread safe: the value/adjoint buffers are reused across calls.
    """

    def __init__(self, tape, inputs, output, terms=None):
        if len(tape) == 0:
            raise TapeError("empty tape")
        if not isinstance(output, Var):
            raise TapeError("output must be a tape variable")
        self._ops = np.asarray(tape.ops, dtype=np.int8)
        self._pa = np.asarray(tape.pa, dtype=np.int64)
        self._pb = np.asarray(tape.pb, dtype=np.int64)
        self._aux = np.asarray(tape.aux, dtype=np.float64)
        self._val = np.asarray(tape.vals, dtype=np.float64)
        self._adj = np.zeros_like(self._val)
        self._in_idx = np.asarray([v.i for v in inputs], dtype=np.int64)
        self._out = output.i
        self._terms = {name: v.i for name, v in (terms or {}).items()}

    @property
    def n_inputs(self):
        return self._in_idx.size

    @property
    def n_nodes(self):
        return self._ops.size

    def _replay(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self._in_idx.size,):
            raise ValueError(f"expected {self._in_idx.size} inputs, got shape {x.shape}")
        self._val[self._in_idx] = x
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            _forward_kernel(self._ops, self._pa, self._pb, self._aux, self._val)

    def value(self, x):
        self._replay(x)
        return float(self._val[self._out])

    def terms_at(self, x):
        """Named auxiliary values (e.g. loss terms) at the given inputs."""
        self._replay(x)
        return {k: float(self._val[i]) for k, i in self._terms.items()}

    def value_and_grad(self, x):
        """Returns (value, gradient w.r.t. inputs, named term values)."""
        self._replay(x)
        f = float(self._val[self._out])
        self._adj[:] = 0.0
        self._adj[self._out] = 1.0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            _backward_kernel(self._ops, self._pa, self._pb, self._aux, self._val, self._adj)
        g = self._adj[self._in_idx].copy()
        terms = {k: float(self._val[i]) for k, i in self._terms.items()}
        return f, g, terms


def _lift(params, tape):
    """Turn params into tape leaves.

    Accepts either a flat sequence/array of numbers (the loss function then
    receives a list of Vars) or any object with ``to_vector()`` and
    ``with_values(seq)`` (the loss function receives the rebuilt object).
    Returns (leaves, lifted, flat_values).
    """
    if hasattr(params, "to_vector") and hasattr(params, "with_values"):
        theta = np.asarray(params.to_vector(), dtype=np.float64)
        leaves = [tape.leaf(v) for v in theta]
        return leaves, params.with_values(leaves), theta
    theta = np.asarray(params, dtype=np.float64).ravel()
    leaves = [tape.leaf(v) for v in theta]
    return leaves, leaves, theta


def _scalar_output(out):
    # Loss builders may return a breakdown object carrying .total
    return getattr(out, "total", out)


def compile_loss(loss_fn, params):
    """Record ``loss_fn`` once over tape-lifted ``params`` and freeze it.

    The returned CompiledFunction maps a flat parameter vector to the loss,
    its gradient, and any named terms the loss breakdown carried.
    """
    tape = Tape()
    leaves, lifted, _ = _lift(params, tape)
    if not leaves:
        raise TapeError("empty tape: no parameters to differentiate")
    out = loss_fn(lifted)
    root = _scalar_output(out)
    if not isinstance(root, Var):
        raise TapeError("loss did not touch the tape; nothing to differentiate")
    terms = getattr(out, "terms", None)
    terms = {k: v for k, v in terms.items() if isinstance(v, Var)} if terms else None
    return CompiledFunction(tape, leaves, root, terms)


def grad(loss_fn, params):
    """Gradient of a scalar-valued ``loss_fn`` with respect to ``params``.

    Records one tape over lifted parameters (including any forward-mode
    tangents the loss builds internally) and runs one reverse sweep. A loss
    that never touches the parameters yields the zero vector. Non-finite
    loss values raise ``NonFiniteLossError``.
    """
    tape = Tape()
    leaves, lifted, theta = _lift(params, tape)
    if not leaves:
        raise TapeError("empty tape: no parameters to differentiate")
    out = _scalar_output(loss_fn(lifted))
    if isinstance(out, Var):
        if not math.isfinite(out.value):
            raise NonFiniteLossError(f"loss is {out.value!r}")
        cf = CompiledFunction(tape, leaves, out)
        _, g, _ = cf.value_and_grad(theta)
        return g
    out = float(out)
    if not math.isfinite(out):
        raise NonFiniteLossError(f"loss is {out!r}")
    return np.zeros(len(leaves))


def dual_eval(f, x):
    """Evaluate ``f`` at ``x`` with forward-mode duals: returns (f(x), f'(x))."""
    out = f(Dual(float(x), 1.0))
    if isinstance(out, Dual):
        return float(out.v), float(out.t)
    return float(out), 0.0


def _float_call(loss_fn, params, theta):
    if hasattr(params, "with_values"):
        return float(_scalar_output(loss_fn(params.with_values([float(v) for v in theta]))))
    return float(_scalar_output(loss_fn([float(v) for v in theta])))


def check_gradient(loss_fn, params, step=1e-6):
    """Max relative disagreement between the tape gradient and central
    finite differences, |ad - fd| / max(|ad|, |fd|, 1e-12) over parameters."""
    g = grad(loss_fn, params)
    if hasattr(params, "to_vector"):
        theta = np.asarray(params.to_vector(), dtype=np.float64)
    else:
        theta = np.asarray(params, dtype=np.float64).ravel()
    worst = 0.0
    for k in range(theta.size):
        t = theta.copy()
        t[k] = theta[k] + step
        f_plus = _float_call(loss_fn, params, t)
        t[k] = theta[k] - step
        f_minus = _float_call(loss_fn, params, t)
        fd = (f_plus - f_minus) / (2.0 * step)
        err = abs(g[k] - fd) / max(abs(g[k]), abs(fd), 1e-12)
        if err > worst:
            worst = err
    return worst
