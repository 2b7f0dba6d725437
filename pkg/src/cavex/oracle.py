"""Reference stress fields and accuracy metrics, independent of any network.

Closed forms are used wherever they exist:

* isotropic elastic shell under inner/outer pressure (two-coefficient
  1/r^3 solution via a 2x2 linear solve),
* the elastic region of the elasto-plastic cases (outer pressure condition
  plus exact-yield condition at the interface radius),
* the plastic region (log profile for Tresca, power law for Mohr-Coulomb).

The anisotropic case has no such form here; it is integrated as a
two-equation ODE system (equilibrium plus the anisotropic material
relation solved for the tangential gradient) with classical fixed-step
RK4, shot from the outer radius and matched to the inner pressure by
bisection on the unknown outer tangential stress.

Besides sampled ``StressField``s, each solution is also available as a
callable ``r -> (values, derivatives)`` so the physics losses can be
driven with exact fields in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .physics import CaseSpec, spec_yield

__all__ = [
    "StressField",
    "Metrics",
    "lame_coefficients",
    "lame_solution",
    "lame_field",
    "lame_extended_field",
    "ep_interface",
    "ep_solution",
    "ep_fields",
    "recovered_pressure",
    "aniso_solution",
    "aniso_field",
    "rk4_solve",
    "metrics",
]

RK4_STEPS = 10_000  # default fixed-step count over one region


@dataclass
class StressField:
    """Stresses sampled on an increasing radius grid. ``region`` tags which
    part of the domain the samples cover: elastic, plastic or whole."""

    r: np.ndarray
    sigma_r: np.ndarray
    sigma_theta: np.ndarray
    region: str = "whole"

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=np.float64)
        self.sigma_r = np.asarray(self.sigma_r, dtype=np.float64)
        self.sigma_theta = np.asarray(self.sigma_theta, dtype=np.float64)
        if not (self.r.shape == self.sigma_r.shape == self.sigma_theta.shape):
            raise ValueError("field components must share one grid")
        if self.r.ndim != 1 or self.r.size < 1:
            raise ValueError("need a 1-d grid")
        if np.any(np.diff(self.r) <= 0.0):
            raise ValueError("grid must be strictly increasing")
        if self.region not in ("elastic", "plastic", "whole"):
            raise ValueError(f"unknown region tag {self.region!r}")


@dataclass
class Metrics:
    """Per-component agreement between a predicted and an exact field."""

    mse_r: float
    mse_theta: float
    r2_r: float
    r2_theta: float
    err_r: np.ndarray
    err_theta: np.ndarray

    @property
    def max_abs_err(self):
        return max(float(np.max(np.abs(self.err_r))), float(np.max(np.abs(self.err_theta))))


def _as_grid(lo, hi, grid):
    if isinstance(grid, int):
        if grid < 2:
            raise ValueError("need at least two grid points")
        return np.linspace(lo, hi, grid)
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or g.size < 1:
        raise ValueError("grid must be one-dimensional")
    return g


# --- isotropic elastic shell ------------------------------------------------


def lame_coefficients(spec):
    """(C1, C2) of sigma_r = C1 + C2/r^3, fixed by the two pressure conditions."""
    m = np.array([[1.0, spec.a ** -3], [1.0, spec.b ** -3]])
    rhs = np.array([spec.p, spec.p0])
    c1, c2 = np.linalg.solve(m, rhs)
    return float(c1), float(c2)


def _lame_eval(c1, c2, r):
    sr = c1 + c2 / r**3
    st = c1 - 0.5 * c2 / r**3
    dsr = -3.0 * c2 / r**4
    dst = 1.5 * c2 / r**4
    return (sr, st), (dsr, dst)


def lame_solution(spec, grid=100):
    """Exact elastic field on a grid over [a, b]."""
    g = _as_grid(spec.a, spec.b, grid)
    c1, c2 = lame_coefficients(spec)
    (sr, st), _ = _lame_eval(c1, c2, g)
    return StressField(g, sr, st, "whole")


def lame_field(spec):
    """Exact elastic field as a callable with analytic derivatives."""
    c1, c2 = lame_coefficients(spec)

    def field(r):
        return _lame_eval(c1, c2, float(r))

    return field


def lame_extended_field(spec, width=5):
    """Exact (sigma_r, sigma_theta, eps_r, eps_theta[, u]) field.

    Strains follow the isotropic material law, the displacement follows
    u = -r eps_theta; used to drive the wider output formulations with a
    residual-free field.
    """
    if width not in (4, 5):
        raise ValueError("extended field has 4 or 5 components")
    c1, c2 = lame_coefficients(spec)
    e, nu = spec.E, spec.nu

    def field(r):
        r = float(r)
        (sr, st), (dsr, dst) = _lame_eval(c1, c2, r)
        er = (sr - 2.0 * nu * st) / e
        et = ((1.0 - nu) * st - nu * sr) / e
        der = (dsr - 2.0 * nu * dst) / e
        det = ((1.0 - nu) * dst - nu * dsr) / e
        if width == 4:
            return (sr, st, er, et), (dsr, dst, der, det)
        u = -r * et
        du = -(et + r * det)
        return (sr, st, er, et, u), (dsr, dst, der, det, du)

    return field


# --- elasto-plastic shell ---------------------------------------------------


def ep_interface(spec):
    """Elastic coefficients and interface stresses of an elasto-plastic case.

    Returns (c1, c2, sigma_r(c), sigma_theta(c)): the outer region is the
    1/r^3 elastic solution pinned by sigma_r(b) = p0 and by sitting exactly
    on the yield envelope at r = c.
    """
    yp = spec_yield(spec)
    c, b = spec.c, spec.b
    # rows: outer pressure condition; yield condition at c
    m = np.array([
        [1.0, b ** -3],
        [1.0 - yp.alpha, (1.0 + 0.5 * yp.alpha) / c**3],
    ])
    rhs = np.array([spec.p0, yp.sigma_y])
    c1, c2 = np.linalg.solve(m, rhs)
    (sr_c, st_c), _ = _lame_eval(c1, c2, c)
    return float(c1), float(c2), float(sr_c), float(st_c)


def _plastic_eval(spec, r):
    """Closed-form plastic stresses and derivatives at radius r <= c."""
    yp = spec_yield(spec)
    _, _, sr_c, _ = ep_interface(spec)
    if yp.alpha == 1.0:
        # equilibrium with sigma_r - sigma_theta = sigma_y constant
        sr = sr_c + 2.0 * yp.sigma_y * math.log(spec.c / r)
        dsr = -2.0 * yp.sigma_y / r
    else:
        beta = 2.0 * (1.0 - yp.alpha) / yp.alpha
        k = yp.sigma_y / (yp.alpha - 1.0)
        sr = (sr_c + k) * (r / spec.c) ** beta - k
        dsr = beta * (sr + k) / r
    st = (sr - yp.sigma_y) / yp.alpha
    dst = dsr / yp.alpha
    return (sr, st), (dsr, dst)


def ep_solution(spec, grid=100):
    """(elastic field on [c, b], plastic field on [a, c]).

    ``grid`` is a per-region point count, or a pair of explicit grids
    (elastic_grid, plastic_grid). Both regions include the shared point c,
    where the two fields agree by construction.
    """
    if isinstance(grid, tuple):
        g_el, g_pl = (_as_grid(spec.c, spec.b, grid[0]), _as_grid(spec.a, spec.c, grid[1]))
    else:
        g_el = _as_grid(spec.c, spec.b, grid)
        g_pl = _as_grid(spec.a, spec.c, grid)
    c1, c2, _, _ = ep_interface(spec)
    (sr_e, st_e), _ = _lame_eval(c1, c2, g_el)
    pl = [_plastic_eval(spec, float(r))[0] for r in g_pl]
    sr_p = np.array([v[0] for v in pl])
    st_p = np.array([v[1] for v in pl])
    return (
        StressField(g_el, sr_e, st_e, "elastic"),
        StressField(g_pl, sr_p, st_p, "plastic"),
    )


def ep_fields(spec):
    """(elastic, plastic) callables with analytic derivatives."""
    c1, c2, _, _ = ep_interface(spec)

    def elastic(r):
        return _lame_eval(c1, c2, float(r))

    def plastic(r):
        return _plastic_eval(spec, float(r))

    return elastic, plastic


def recovered_pressure(spec):
    """Cavity pressure implied by an elasto-plastic case: the plastic
    radial stress evaluated at the inner radius."""
    (sr_a, _), _ = _plastic_eval(spec, spec.a)
    return sr_a


# --- anisotropic elastic shell (RK4 shooting) --------------------------------


def _ode_coefficients(spec):
    """(ca, cb) of sigma_theta' = (ca sigma_r + cb sigma_theta)/r.

    Obtained by substituting equilibrium into the anisotropic material
    relation. With equal radial and tangential constants it reduces to
    ca = 1, cb = -1, the isotropic stress relation.
    """
    e_rad = spec.E_rad if spec.E_rad is not None else spec.E
    nu_rad = spec.nu_rad if spec.nu_rad is not None else spec.nu
    scale = spec.E / (1.0 - spec.nu)
    ca = scale * (1.0 - nu_rad) / e_rad
    cb = scale * (2.0 * nu_rad / e_rad - (1.0 + spec.nu) / spec.E)
    return ca, cb


def _rk4_pair_py(ca, cb, r0, u0, v0, r1, n):
    # u' = 2(v - u)/r, v' = (ca u + cb v)/r; fixed-step classical RK4
    h = (r1 - r0) / n
    u, v, r = u0, v0, r0
    for i in range(n):
        k1u = 2.0 * (v - u) / r
        k1v = (ca * u + cb * v) / r
        rm = r + 0.5 * h
        u2 = u + 0.5 * h * k1u
        v2 = v + 0.5 * h * k1v
        k2u = 2.0 * (v2 - u2) / rm
        k2v = (ca * u2 + cb * v2) / rm
        u3 = u + 0.5 * h * k2u
        v3 = v + 0.5 * h * k2v
        k3u = 2.0 * (v3 - u3) / rm
        k3v = (ca * u3 + cb * v3) / rm
        re = r0 + (i + 1) * h
        u4 = u + h * k3u
        v4 = v + h * k3v
        k4u = 2.0 * (v4 - u4) / re
        k4v = (ca * u4 + cb * v4) / re
        u = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        r = re
    return u, v


try:  # pragma: no cover
    from numba import njit as _njit

    _rk4_pair = _njit(cache=True)(_rk4_pair_py)
except ImportError:  # pragma: no cover
    _rk4_pair = _rk4_pair_py


def _segment_steps(spec, r_from, r_to, steps):
    return max(1, int(round(steps * abs(r_to - r_from) / (spec.b - spec.a))))


def _shoot_inward(spec, st_b, steps):
    """sigma_r at the inner radius when starting from (p0, st_b) at b."""
    ca, cb = _ode_coefficients(spec)
    n = _segment_steps(spec, spec.b, spec.a, steps)
    sr_a, _ = _rk4_pair(ca, cb, spec.b, float(spec.p0), float(st_b), spec.a, n)
    return sr_a


@lru_cache(maxsize=64)
def _aniso_outer_tangential(spec, steps=RK4_STEPS):
    """Tangential stress at r = b matching sigma_r(a) = p, by bisection.

    The bracket comes from a sign scan over +-10 max(|p|, |p0|, 1); the
    mismatch is affine in the unknown, so a single sign change exists.
    """
    target = float(spec.p)

    def mismatch(g):
        return _shoot_inward(spec, g, steps) - target

    scale = max(abs(target), abs(spec.p0), 1.0)
    gs = np.linspace(-10.0 * scale, 10.0 * scale, 65)
    fs = [mismatch(g) for g in gs]
    lo = hi = None
    for i in range(len(gs) - 1):
        if fs[i] == 0.0:
            return float(gs[i])
        if fs[i] * fs[i + 1] < 0.0:
            lo, hi, flo = gs[i], gs[i + 1], fs[i]
            break
    else:
        raise RuntimeError("no sign change in the shooting scan; widen the bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = mismatch(mid)
        if abs(fm) < 1e-12 or (hi - lo) < 1e-15 * scale:
            return float(mid)
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return float(0.5 * (lo + hi))


def _aniso_at(spec, r, steps=RK4_STEPS):
    st_b = _aniso_outer_tangential(spec, steps)
    ca, cb = _ode_coefficients(spec)
    n = _segment_steps(spec, spec.b, r, steps)
    if r == spec.b:
        return float(spec.p0), st_b
    return _rk4_pair(ca, cb, spec.b, float(spec.p0), st_b, float(r), n)


def aniso_solution(spec, grid=100, steps=RK4_STEPS):
    """Anisotropic elastic field on a grid over [a, b], by RK4 shooting.

    Integration runs once from b down through the grid points, so cost is
    one traversal regardless of grid size.
    """
    g = _as_grid(spec.a, spec.b, grid)
    st_b = _aniso_outer_tangential(spec, steps)
    ca, cb = _ode_coefficients(spec)
    sr = np.empty(g.size)
    st = np.empty(g.size)
    u, v, r_cur = float(spec.p0), float(st_b), spec.b
    for j in range(g.size - 1, -1, -1):
        r_next = float(g[j])
        if r_next != r_cur:
            u, v = _rk4_pair(ca, cb, r_cur, u, v, r_next, _segment_steps(spec, r_cur, r_next, steps))
            r_cur = r_next
        sr[j], st[j] = u, v
    return StressField(g, sr, st, "whole")


def aniso_field(spec, fd_step=3e-6, steps=RK4_STEPS):
    """Anisotropic field as a callable; derivatives by central differences
    on fresh integrations (the integrated field has no analytic form).

    The default step balances difference truncation against integration
    noise near the inner radius, where the field steepens.
    """

    def field(r):
        r = float(r)
        vals = _aniso_at(spec, r, steps)
        plus = _aniso_at(spec, r + fd_step, steps)
        minus = _aniso_at(spec, r - fd_step, steps)
        dsr = (plus[0] - minus[0]) / (2.0 * fd_step)
        dst = (plus[1] - minus[1]) / (2.0 * fd_step)
        return vals, (dsr, dst)

    return field


# --- general-purpose RK4 ------------------------------------------------------


def rk4_solve(rhs, r0, y0, r1, steps):
    """Classical fixed-step RK4 for y' = rhs(r, y).

    Returns (radii, states) with ``steps + 1`` rows including both ends.
    Integrates in either direction.
    """
    if steps < 1:
        raise ValueError("need at least one step")
    y = np.asarray(y0, dtype=np.float64).copy()
    if y.ndim != 1:
        raise ValueError("state must be a vector")
    rs = np.linspace(r0, r1, steps + 1)
    ys = np.empty((steps + 1, y.size))
    ys[0] = y
    h = (r1 - r0) / steps
    for i in range(steps):
        r = rs[i]
        k1 = np.asarray(rhs(r, y))
        k2 = np.asarray(rhs(r + 0.5 * h, y + 0.5 * h * k1))
        k3 = np.asarray(rhs(r + 0.5 * h, y + 0.5 * h * k2))
        k4 = np.asarray(rhs(rs[i + 1], y + h * k3))
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ys[i + 1] = y
    return rs, ys


# --- metrics ------------------------------------------------------------------


def _r2(err, exact):
    ss_res = float(np.sum(err**2))
    ss_tot = float(np.sum((exact - exact.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else -math.inf
    return 1.0 - ss_res / ss_tot


def metrics(pred, exact):
    """MSE, R-squared and pointwise errors per stress component.

    Both fields must be sampled on the identical grid.
    """
    if not np.array_equal(pred.r, exact.r):
        raise ValueError("fields are sampled on different grids")
    err_r = pred.sigma_r - exact.sigma_r
    err_t = pred.sigma_theta - exact.sigma_theta
    return Metrics(
        mse_r=float(np.mean(err_r**2)),
        mse_theta=float(np.mean(err_t**2)),
        r2_r=_r2(err_r, exact.sigma_r),
        r2_theta=_r2(err_t, exact.sigma_theta),
        err_r=err_r,
        err_theta=err_t,
    )
