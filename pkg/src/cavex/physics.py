"""Governing relations and residual losses for spherical cavity expansion.

Sign convention: compressive stresses positive. Fields vary with the radius
only; sigma_r is the radial and sigma_theta the tangential component, in
kPa throughout.

The loss builders accept any of three "model" shapes:

* ``mlp.Params``        - plain float evaluation,
* a lifted parameter set (``Params.with_values`` over tape variables) -
  the loss is recorded on the tape for gradient training,
* a callable ``r -> (values, derivatives)`` - used to drive the losses
  with closed-form fields in tests.

Every residual is written for generic scalars, so the same expression
serves all three. Loss terms are mean squared residuals over the
collocation points plus one squared mismatch per boundary condition; the
total is their weighted sum. Term insertion order is stable and is the
order reported in loss-history CSV columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import mlp
from .autodiff import Dual

__all__ = [
    "CaseSpec",
    "YieldParams",
    "LossWeights",
    "LossBreakdown",
    "CASES",
    "FORMULATION_WIDTHS",
    "yield_params",
    "spec_yield",
    "equilibrium_residual",
    "formc_stress_residual",
    "aniso_residual",
    "yield_residual",
    "loss_case_i",
    "loss_case_ii",
    "loss_ep_elastic",
    "loss_ep_plastic",
    "loss_formulation",
    "loss_data",
]


@dataclass(frozen=True)
class CaseSpec:
    """Geometry, loading and material data for one expansion problem.

    ``a``/``b`` are the inner/outer radii, ``c`` the elastic-plastic
    interface radius (elasto-plastic cases only). ``p`` is the applied
    cavity pressure for purely elastic cases; elasto-plastic cases recover
    it instead. ``E_rad``/``nu_rad``, when set, are the radial-direction
    elastic constants of an anisotropic medium (``E``/``nu`` then act in
    the tangential direction).
    """

    a: float
    b: float
    E: float
    nu: float
    p: float | None = None
    p0: float = 0.0
    E_rad: float | None = None
    nu_rad: float | None = None
    c: float | None = None
    yield_kind: str = "none"
    s_u: float | None = None
    sigma_y: float | None = None
    phi_deg: float | None = None
    cohesion: float | None = None

    def __post_init__(self):
        if not (0.0 < self.a < self.b):
            raise ValueError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        if self.E <= 0.0 or not (0.0 < self.nu < 0.5):
            raise ValueError("elastic constants out of range")
        if (self.E_rad is None) != (self.nu_rad is None):
            raise ValueError("anisotropy needs both E_rad and nu_rad")
        if self.E_rad is not None and (self.E_rad <= 0.0 or not (0.0 < self.nu_rad < 0.5)):
            raise ValueError("radial elastic constants out of range")
        if self.yield_kind not in ("none", "tresca", "mohr-coulomb"):
            raise ValueError(f"unknown yield kind {self.yield_kind!r}")
        if self.yield_kind == "none":
            if self.p is None:
                raise ValueError("elastic case needs the cavity pressure p")
            if self.c is not None:
                raise ValueError("plastic radius given but no yield criterion")
        else:
            if self.c is None or not (self.a < self.c < self.b):
                raise ValueError("elasto-plastic case needs a < c < b")
            spec_yield(self)  # validates the yield inputs

    @property
    def anisotropic(self):
        return self.E_rad is not None

    def scaled(self, k):
        """Same problem with all stress-like inputs multiplied by k."""
        return replace(
            self,
            p=None if self.p is None else k * self.p,
            p0=k * self.p0,
            s_u=None if self.s_u is None else k * self.s_u,
            sigma_y=None if self.sigma_y is None else k * self.sigma_y,
            cohesion=None if self.cohesion is None else k * self.cohesion,
        )


@dataclass(frozen=True)
class YieldParams:
    """Linear yield envelope sigma_r - alpha * sigma_theta = sigma_y."""

    alpha: float
    sigma_y: float


def yield_params(kind, s_u=None, sigma_y=None, phi_deg=None, cohesion=None):
    """Yield-envelope coefficients for the supported criteria.

    Tresca: alpha = 1 and sigma_y = 2 s_u (or sigma_y given directly).
    Mohr-Coulomb with friction angle phi and cohesion C:
    alpha = (1 + sin phi) / (1 - sin phi), sigma_y = 2 C cos phi / (1 - sin phi).
    """
    if kind == "tresca":
        if s_u is not None:
            return YieldParams(1.0, 2.0 * float(s_u))
        if sigma_y is not None:
            return YieldParams(1.0, float(sigma_y))
        raise ValueError("tresca needs s_u or sigma_y")
    if kind == "mohr-coulomb":
        if phi_deg is None or cohesion is None:
            raise ValueError("mohr-coulomb needs phi_deg and cohesion")
        if not (0.0 <= phi_deg < 90.0):
            raise ValueError(f"friction angle {phi_deg} deg out of [0, 90)")
        s = math.sin(math.radians(phi_deg))
        co = math.cos(math.radians(phi_deg))
        return YieldParams((1.0 + s) / (1.0 - s), 2.0 * float(cohesion) * co / (1.0 - s))
    raise ValueError(f"no yield parameters for kind {kind!r}")


def spec_yield(spec):
    return yield_params(spec.yield_kind, s_u=spec.s_u, sigma_y=spec.sigma_y,
                        phi_deg=spec.phi_deg, cohesion=spec.cohesion)


# Table of the four built-in problems (stresses in kPa).
CASES = {
    "i": CaseSpec(a=0.4, b=2.0, E=1.0e5, nu=0.3, p=5.0, p0=0.0),
    "ii": CaseSpec(a=0.4, b=2.0, E=1.0e5, nu=0.3, p=5.0, p0=0.0, E_rad=0.8e5, nu_rad=0.24),
    "iii": CaseSpec(a=0.2, b=2.0, E=1.0e5, nu=0.3, p0=0.0, c=0.8, yield_kind="tresca", s_u=3.0),
    "iv": CaseSpec(a=0.2, b=2.0, E=1.0e5, nu=0.3, p0=0.0, c=0.8, yield_kind="mohr-coulomb",
                   phi_deg=15.0, cohesion=2.5),
}

# Network output widths: C predicts the two stresses, B adds both strains,
# A adds the displacement on top.
FORMULATION_WIDTHS = {"A": 5, "B": 4, "C": 2}


# --- residuals -------------------------------------------------------------


def equilibrium_residual(sigma_r, sigma_theta, dsigma_r_dr, r):
    """Radial momentum balance: 2 (sigma_r - sigma_theta) + r dsigma_r/dr."""
    return 2.0 * (sigma_r - sigma_theta) + r * dsigma_r_dr


def formc_stress_residual(sigma_r, sigma_theta, dsigma_theta_dr, r):
    """Stress-only field relation (sigma_r - sigma_theta) - r dsigma_theta/dr.

    This is compatibility and the isotropic constitutive law folded into
    one equation between the two stresses; together with equilibrium it
    closes the elastic problem without strain or displacement outputs.
    """
    return (sigma_r - sigma_theta) - r * dsigma_theta_dr


def aniso_residual(sigma_r, sigma_theta, dsigma_r_dr, dsigma_theta_dr, r, spec):
    """Anisotropic counterpart of the stress-only relation.

    (1+nu_rad)/E_rad sigma_r - (1+nu)/E sigma_theta
      + (nu_rad/E_rad) r dsigma_r/dr - ((1-nu)/E) r dsigma_theta/dr
    """
    if not spec.anisotropic:
        raise ValueError("anisotropic residual needs E_rad and nu_rad")
    ca = (1.0 + spec.nu_rad) / spec.E_rad
    cb = (1.0 + spec.nu) / spec.E
    cc = spec.nu_rad / spec.E_rad
    cd = (1.0 - spec.nu) / spec.E
    return ca * sigma_r - cb * sigma_theta + cc * (r * dsigma_r_dr) - cd * (r * dsigma_theta_dr)


def yield_residual(sigma_r, sigma_theta, yp):
    """Distance from the yield envelope: (sigma_r - alpha sigma_theta) - sigma_y."""
    return (sigma_r - yp.alpha * sigma_theta) - yp.sigma_y


# --- loss machinery --------------------------------------------------------


@dataclass(frozen=True)
class LossWeights:
    """Multipliers for the loss families; the governing equations are
    unweighted sums by default."""

    pde: float = 1.0
    bc: float = 1.0
    data: float = 1.0


@dataclass
class LossBreakdown:
    """Weighted total plus the individual named terms.

    ``total == sum(weights[k] * terms[k])`` to round-off; term order is the
    reporting order.
    """

    total: object
    terms: dict
    weights: dict


def _model_evaluators(model, n_out):
    """(values_fn, values_and_derivatives_fn) for any supported model shape."""
    if hasattr(model, "weights"):
        widths = model.widths
        if widths[-1] != n_out:
            raise ValueError(f"model outputs {widths[-1]} components, this loss needs {n_out}")
        tape = getattr(model, "tape", None)

        if tape is None:
            def values(r):
                return mlp.eval_chain(model, float(r))

            def values_and_ders(r):
                out = mlp.eval_chain(model, Dual(float(r), 1.0))
                return [o.v for o in out], [o.t for o in out]
        else:
            def values(r):
                return mlp.eval_chain(model, tape.const(float(r)))

            def values_and_ders(r):
                out = mlp.eval_chain(model, Dual(tape.const(float(r)), tape.const(1.0)))
                return [o.v for o in out], [o.t for o in out]

        return values, values_and_ders

    if callable(model):
        def values_and_ders(r):
            vals, ders = model(float(r))
            if len(vals) != n_out or len(ders) != n_out:
                raise ValueError(f"field callable returned {len(vals)} components, this loss needs {n_out}")
            return vals, ders

        def values(r):
            return values_and_ders(r)[0]

        return values, values_and_ders

    raise TypeError(f"unsupported model type {type(model).__name__}")


def _mean_sq(residuals):
    acc = residuals[0] * residuals[0]
    for v in residuals[1:]:
        acc = acc + v * v
    return acc / len(residuals)


def _sq(x):
    return x * x


def _finish(terms, wmap):
    total = None
    for name, term in terms.items():
        contrib = term if wmap[name] == 1.0 else wmap[name] * term
        total = contrib if total is None else total + contrib
    return LossBreakdown(total, terms, wmap)


def _check_collocation(collocation):
    pts = [float(r) for r in collocation]
    if not pts:
        raise ValueError("empty collocation set")
    return pts


def loss_data(model, points):
    """Optional measured-data misfit: sum over components of the MSE against
    observed (r, sigma_r, sigma_theta) triples. Unused by the built-in cases."""
    values, _ = _model_evaluators(model, 2)
    res_r, res_t = [], []
    for r, sr_obs, st_obs in points:
        out = values(float(r))
        res_r.append(out[0] - float(sr_obs))
        res_t.append(out[1] - float(st_obs))
    return _mean_sq(res_r) + _mean_sq(res_t)


def _maybe_data(terms, wmap, model, data, w):
    if data is not None:
        terms["data"] = loss_data(model, data)
        wmap["data"] = w.data


def loss_case_i(model, collocation, spec, weights=None, data=None):
    """Isotropic elastic loss: stress-relation + equilibrium residuals over
    the collocation points, pressure conditions at both radii."""
    w = weights or LossWeights()
    pts = _check_collocation(collocation)
    values, values_and_ders = _model_evaluators(model, 2)
    res_form, res_eq = [], []
    for r in pts:
        (sr, st), (dsr, dst) = values_and_ders(r)
        res_form.append(formc_stress_residual(sr, st, dst, r))
        res_eq.append(equilibrium_residual(sr, st, dsr, r))
    terms = {
        "pde_stress": _mean_sq(res_form),
        "pde_equilibrium": _mean_sq(res_eq),
        "bc_inner": _sq(values(spec.a)[0] - spec.p),
        "bc_outer": _sq(values(spec.b)[0] - spec.p0),
    }
    wmap = {"pde_stress": w.pde, "pde_equilibrium": w.pde, "bc_inner": w.bc, "bc_outer": w.bc}
    _maybe_data(terms, wmap, model, data, w)
    return _finish(terms, wmap)


def loss_case_ii(model, collocation, spec, weights=None, data=None):
    """Anisotropic elastic loss; the material relation replaces the
    isotropic stress relation, boundary terms unchanged.

    The material residual carries a 1/modulus scale, so squared with unit
    weight it is invisible next to the equilibrium and boundary terms
    (ratio ~E^2, here 1e10) and the optimizer settles on fields that never
    satisfy it. Multiplying by E restates it in stress units with the same
    zero set, which puts all terms on one scale without touching the
    physics or the weights.
    """
    w = weights or LossWeights()
    pts = _check_collocation(collocation)
    values, values_and_ders = _model_evaluators(model, 2)
    scale = float(spec.E)
    res_aniso, res_eq = [], []
    for r in pts:
        (sr, st), (dsr, dst) = values_and_ders(r)
        res_aniso.append(scale * aniso_residual(sr, st, dsr, dst, r, spec))
        res_eq.append(equilibrium_residual(sr, st, dsr, r))
    terms = {
        "pde_aniso": _mean_sq(res_aniso),
        "pde_equilibrium": _mean_sq(res_eq),
        "bc_inner": _sq(values(spec.a)[0] - spec.p),
        "bc_outer": _sq(values(spec.b)[0] - spec.p0),
    }
    wmap = {"pde_aniso": w.pde, "pde_equilibrium": w.pde, "bc_inner": w.bc, "bc_outer": w.bc}
    _maybe_data(terms, wmap, model, data, w)
    return _finish(terms, wmap)


def loss_ep_elastic(model, collocation, spec, weights=None, data=None):
    """Elastic-region loss of the two-stage elasto-plastic pipeline.

    Collocation spans [c, b]. Instead of a known cavity pressure, the inner
    boundary condition states that the material is exactly at yield at the
    interface radius c.
    """
    w = weights or LossWeights()
    yp = spec_yield(spec)
    pts = _check_collocation(collocation)
    values, values_and_ders = _model_evaluators(model, 2)
    res_form, res_eq = [], []
    for r in pts:
        (sr, st), (dsr, dst) = values_and_ders(r)
        res_form.append(formc_stress_residual(sr, st, dst, r))
        res_eq.append(equilibrium_residual(sr, st, dsr, r))
    at_c = values(spec.c)
    terms = {
        "pde_stress": _mean_sq(res_form),
        "pde_equilibrium": _mean_sq(res_eq),
        "bc_yield": _sq(yield_residual(at_c[0], at_c[1], yp)),
        "bc_outer": _sq(values(spec.b)[0] - spec.p0),
    }
    wmap = {"pde_stress": w.pde, "pde_equilibrium": w.pde, "bc_yield": w.bc, "bc_outer": w.bc}
    _maybe_data(terms, wmap, model, data, w)
    return _finish(terms, wmap)


def loss_ep_plastic(model, collocation, spec, boundary, weights=None, data=None):
    """Plastic-region loss, trained after the elastic stage.

    Collocation spans [a, c]. ``boundary`` is the pair of stresses the
    elastic stage predicts at c, frozen as constants; both components are
    matched there. In the plastic region the yield envelope holds
    identically, so it joins equilibrium as a field residual.
    """
    w = weights or LossWeights()
    yp = spec_yield(spec)
    sr_c, st_c = float(boundary[0]), float(boundary[1])
    pts = _check_collocation(collocation)
    values, values_and_ders = _model_evaluators(model, 2)
    res_eq, res_yield = [], []
    for r in pts:
        (sr, st), (dsr, _dst) = values_and_ders(r)
        res_eq.append(equilibrium_residual(sr, st, dsr, r))
        res_yield.append(yield_residual(sr, st, yp))
    at_c = values(spec.c)
    terms = {
        "pde_equilibrium": _mean_sq(res_eq),
        "pde_yield": _mean_sq(res_yield),
        "bc_continuity_radial": _sq(at_c[0] - sr_c),
        "bc_continuity_tangential": _sq(at_c[1] - st_c),
    }
    wmap = {"pde_equilibrium": w.pde, "pde_yield": w.pde,
            "bc_continuity_radial": w.bc, "bc_continuity_tangential": w.bc}
    _maybe_data(terms, wmap, model, data, w)
    return _finish(terms, wmap)


def _loss_formulation_a(model, collocation, spec, weights=None, data=None):
    # Outputs: sigma_r, sigma_theta, eps_r, eps_theta, u. Strain-displacement
    # compatibility and the isotropic material law appear as separate
    # residuals; only equilibrium touches a stress derivative.
    w = weights or LossWeights()
    pts = _check_collocation(collocation)
    values, values_and_ders = _model_evaluators(model, 5)
    e, inv_e = spec.E, 1.0 / spec.E
    nu = spec.nu
    res_eq, res_cr, res_ct, res_mr, res_mt = [], [], [], [], []
    for r in pts:
        (sr, st, er, et, u), (dsr, _dst, _der, _det, du) = values_and_ders(r)
        res_eq.append(equilibrium_residual(sr, st, dsr, r))
        res_cr.append(er + du)          # eps_r = -du/dr
        res_ct.append(et + u / r)       # eps_theta = -u/r
        res_mr.append(er - (sr - 2.0 * nu * st) * inv_e)
        res_mt.append(et - ((1.0 - nu) * st - nu * sr) * inv_e)
    terms = {
        "pde_equilibrium": _mean_sq(res_eq),
        "pde_compat_radial": _mean_sq(res_cr),
        "pde_compat_tangential": _mean_sq(res_ct),
        "pde_material_radial": _mean_sq(res_mr),
        "pde_material_tangential": _mean_sq(res_mt),
        "bc_inner": _sq(values(spec.a)[0] - spec.p),
        "bc_outer": _sq(values(spec.b)[0] - spec.p0),
    }
    wmap = {k: (w.bc if k.startswith("bc_") else w.pde) for k in terms}
    _maybe_data(terms, wmap, model, data, w)
    return _finish(terms, wmap)


def _loss_formulation_b(model, collocation, spec, weights=None, data=None):
    # Outputs: sigma_r, sigma_theta, eps_r, eps_theta. The two
    # strain-displacement relations collapse into eps_r = d(r eps_theta)/dr,
    # eliminating the displacement output.
    w = weights or LossWeights()
    pts = _check_collocation(collocation)
    values, values_and_ders = _model_evaluators(model, 4)
    inv_e = 1.0 / spec.E
    nu = spec.nu
    res_eq, res_cc, res_mr, res_mt = [], [], [], []
    for r in pts:
        (sr, st, er, et), (dsr, _dst, _der, det) = values_and_ders(r)
        res_eq.append(equilibrium_residual(sr, st, dsr, r))
        res_cc.append(er - (et + r * det))
        res_mr.append(er - (sr - 2.0 * nu * st) * inv_e)
        res_mt.append(et - ((1.0 - nu) * st - nu * sr) * inv_e)
    terms = {
        "pde_equilibrium": _mean_sq(res_eq),
        "pde_compat_combined": _mean_sq(res_cc),
        "pde_material_radial": _mean_sq(res_mr),
        "pde_material_tangential": _mean_sq(res_mt),
        "bc_inner": _sq(values(spec.a)[0] - spec.p),
        "bc_outer": _sq(values(spec.b)[0] - spec.p0),
    }
    wmap = {k: (w.bc if k.startswith("bc_") else w.pde) for k in terms}
    _maybe_data(terms, wmap, model, data, w)
    return _finish(terms, wmap)


def loss_formulation(form, model, collocation, spec, weights=None, data=None):
    """Case-i loss under output formulation "A", "B" or "C".

    The formulations differ in which fields the network predicts and which
    governing equations appear as residuals; "C" is the two-output
    stress-only loss of ``loss_case_i``. "A"/"B" are isotropic-only.
    """
    if spec.anisotropic or spec.yield_kind != "none":
        if form != "C":
            raise ValueError("formulations A and B are defined for the isotropic elastic case only")
    if form == "A":
        return _loss_formulation_a(model, collocation, spec, weights, data)
    if form == "B":
        return _loss_formulation_b(model, collocation, spec, weights, data)
    if form == "C":
        return loss_case_i(model, collocation, spec, weights, data)
    raise ValueError(f"unknown formulation {form!r}")
