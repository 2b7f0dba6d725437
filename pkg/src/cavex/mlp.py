"""Small fully connected network mapping a radius to stress-like outputs.

Hidden layers use tanh; the output layer is affine. The forward pass is
written as explicit scalar loops so the same code runs on plain floats,
tape variables, and dual numbers. That is deliberate: the training loss
needs d(output)/dr as a differentiable quantity, which it gets by feeding
a ``Dual`` whose components are tape variables through the exact same
arithmetic. As a consequence ``forward_with_derivative`` reproduces
``forward`` values bit for bit.

Parameter vector layout (used by the optimisers and the weight files):
layer by layer, weight matrix in row-major order, then that layer's biases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Dual, tanh

__all__ = [
    "Architecture",
    "Params",
    "default_architecture",
    "init_params",
    "forward",
    "forward_with_derivative",
    "fold_input_map",
    "save_weights",
    "load_weights",
    "WeightFormatError",
]

WEIGHTS_HEADER = "cavex-weights v1"


class WeightFormatError(ValueError):
    """Weight file rejected; carries the 1-based line number of the fault."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _check_widths(widths):
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise ValueError("need at least an input and an output layer")
    if widths[0] != 1:
        raise ValueError("input width must be 1 (the radius)")
    if any(w < 1 for w in widths):
        raise ValueError(f"layer widths must be positive, got {widths}")
    return widths


@dataclass(frozen=True)
class Architecture:
    """Layer widths, input first. Hidden activation is fixed to tanh."""

    widths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "widths", _check_widths(self.widths))

    @property
    def n_params(self):
        return sum((i + 1) * o for i, o in zip(self.widths[:-1], self.widths[1:]))


def default_architecture(n_out=2):
    """The 1-16-16-16-out shape used throughout."""
    return Architecture((1, 16, 16, 16, n_out))


@dataclass
class Params:
    """Network parameters: per-layer weight matrices (n_out, n_in) and biases.

    ``input_map``, when set to (lo, hi), rescales the input affinely to
    [-1, 1] before the first layer; the derivative chain rule is picked up
    automatically by the dual arithmetic. The map is not stored in weight
    files, so persisted networks should use the default raw input.
    """

    weights: list
    biases: list
    input_map: tuple | None = field(default=None)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up layer by layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {l}: weight shape {w.shape} does not match bias shape {b.shape}")
            if l > 0 and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(f"layer {l}: input width {w.shape[1]} does not chain")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {l}: non-finite parameter")
        _check_widths(self.widths)

    @property
    def widths(self):
        return tuple([self.weights[0].shape[1]] + [w.shape[0] for w in self.weights])

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def to_vector(self):
        """Flat float64 vector: per layer, row-major weights then biases."""
        chunks = []
        for w, b in zip(self.weights, self.biases):
            chunks.append(w.ravel())
            chunks.append(b)
        return np.concatenate(chunks)

    def with_vector(self, vec):
        """New Params with the same shapes, values taken from a flat vector."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise ValueError(f"expected vector of length {self.n_params}, got {vec.shape}")
        ws, bs, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(vec[k : k + w.size].reshape(w.shape))
            k += w.size
            bs.append(vec[k : k + b.size])
            k += b.size
        return Params(ws, bs, self.input_map)

    def with_values(self, values):
        """Rebuild the layer structure around arbitrary scalar-like values.

        Used to lift parameters onto an autodiff tape: ``values`` is a flat
        sequence in ``to_vector`` order (tape variables, floats, ...).
        """
        if len(values) != self.n_params:
            raise ValueError(f"expected {self.n_params} values, got {len(values)}")
        ws, bs, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            n_out, n_in = w.shape
            ws.append([[values[k + r * n_in + c] for c in range(n_in)] for r in range(n_out)])
            k += w.size
            bs.append(list(values[k : k + b.size]))
            k += b.size
        return _Lifted(self.widths, ws, bs, self.input_map)


class _Lifted:
    """Params-shaped container for non-float entries (tape variables)."""

    __slots__ = ("widths", "weights", "biases", "input_map")

    def __init__(self, widths, weights, biases, input_map):
        self.widths = widths
        self.weights = weights
        self.biases = biases
        self.input_map = input_map

    @property
    def tape(self):
        first = self.weights[0][0][0]
        return getattr(first, "tape", None)


def init_params(arch, seed=0, input_map=None):
    """Glorot-uniform weights, zero biases, reproducible from the seed.

    Layers are drawn in order from one generator, so equal seeds give
    bit-identical parameters and different seeds differ.
    """
    widths = arch.widths if isinstance(arch, Architecture) else _check_widths(arch)
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        limit = math.sqrt(6.0 / (n_in + n_out))
        ws.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
        bs.append(np.zeros(n_out))
    return Params(ws, bs, input_map)


def _rows(w):
    return w.tolist() if isinstance(w, np.ndarray) else w


def _bias_list(b):
    return b.tolist() if isinstance(b, np.ndarray) else b


def _apply_input_map(z0, input_map):
    if input_map is None:
        return z0
    lo, hi = input_map
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return (z0 - mid) / half


def fold_input_map(params):
    """Absorb the affine input map into the first layer's weights.

    The map z = (r - mid)/half is affine, so W1 z + b1 equals V r + d
    with V = W1/half and d = b1 - W1 mid/half. The returned Params has
    no input map and computes the same function (to rounding), which lets
    a net trained with normalization round-trip through the weight file
    format.
    """
    if params.input_map is None:
        return params
    lo, hi = params.input_map
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    w0 = params.weights[0] / half
    b0 = params.biases[0] - params.weights[0][:, 0] * (mid / half)
    return Params([w0] + [w.copy() for w in params.weights[1:]],
                  [b0] + [b.copy() for b in params.biases[1:]])


def eval_chain(params_like, z0):
    """Run the network on one scalar-like input; returns the output list.

    ``params_like`` is a Params or a lifted twin; ``z0`` may be a float,
    a tape variable, or a Dual. Accumulation order is fixed (bias first,
    then weighted inputs left to right) so every evaluation mode produces
    identical floating-point values.
    """
    z = [_apply_input_map(z0, params_like.input_map)]
    n_layers = len(params_like.weights)
    for l in range(n_layers):
        rows = _rows(params_like.weights[l])
        bias = _bias_list(params_like.biases[l])
        nxt = []
        for row, b in zip(rows, bias):
            acc = b
            for w, zj in zip(row, z):
                acc = acc + w * zj
            nxt.append(acc)
        if l < n_layers - 1:
            nxt = [tanh(u) for u in nxt]
        z = nxt
    return z


def forward(params, r):
    """Network outputs as a float64 array: shape (n_out,) for a scalar
    radius, (len(r), n_out) for a 1-d array of radii."""
    if np.ndim(r) == 0:
        return np.array(eval_chain(params, float(r)), dtype=np.float64)
    return np.array([eval_chain(params, float(ri)) for ri in np.asarray(r)],
                    dtype=np.float64)


def forward_with_derivative(params, r):
    """Outputs and their derivatives with respect to the radius.

    Forward-mode: the input is seeded with tangent 1 and the parameters
    (being plain floats here) carry tangent 0. The value half of the result
    is bit-identical to ``forward``. Shapes follow ``forward``.
    """
    if np.ndim(r) == 0:
        out = eval_chain(params, Dual(float(r), 1.0))
        vals = np.array([o.v for o in out], dtype=np.float64)
        ders = np.array([o.t for o in out], dtype=np.float64)
        return vals, ders
    rows = [eval_chain(params, Dual(float(ri), 1.0)) for ri in np.asarray(r)]
    vals = np.array([[o.v for o in row] for row in rows], dtype=np.float64)
    ders = np.array([[o.t for o in row] for row in rows], dtype=np.float64)
    return vals, ders


def save_weights(params, path):
    """Write a weight file; 17 significant digits round-trip float64 exactly."""
    if params.input_map is not None:
        raise ValueError("weight files cannot carry an input map; train without normalization to persist")
    lines = [WEIGHTS_HEADER, " ".join(str(w) for w in params.widths)]
    for w, b in zip(params.weights, params.biases):
        for row in w:
            lines.append(" ".join(format(v, ".17g") for v in row))
        lines.append(" ".join(format(v, ".17g") for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_floats(text, line_no, expect):
    parts = text.split()
    if len(parts) != expect:
        raise WeightFormatError(line_no, f"expected {expect} numbers, got {len(parts)}")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise WeightFormatError(line_no, str(exc)) from None
    if not all(math.isfinite(v) for v in vals):
        raise WeightFormatError(line_no, "non-finite value")
    return vals


def load_weights(path):
    """Read a weight file back into Params; rejects malformed input with
    the offending line number."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != WEIGHTS_HEADER:
        raise WeightFormatError(1, f"missing '{WEIGHTS_HEADER}' header")
    if len(lines) < 2:
        raise WeightFormatError(2, "missing architecture line")
    try:
        widths = _check_widths(int(p) for p in lines[1].split())
    except ValueError as exc:
        raise WeightFormatError(2, f"bad architecture: {exc}") from None
    ws, bs = [], []
    ln = 2
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        rows = []
        for _ in range(n_out):
            ln += 1
            if ln > len(lines):
                raise WeightFormatError(ln, "unexpected end of file")
            rows.append(_parse_floats(lines[ln - 1], ln, n_in))
        ln += 1
        if ln > len(lines):
            raise WeightFormatError(ln, "unexpected end of file")
        bias = _parse_floats(lines[ln - 1], ln, n_out)
        ws.append(np.array(rows))
        bs.append(np.array(bias))
    for extra in range(ln, len(lines)):
        if lines[extra].strip():
            raise WeightFormatError(extra + 1, "trailing content")
    return Params(ws, bs)
