"""Residual and loss checks against closed-form fields.

The exact solutions from the oracle module drive every loss here through
the callable-model route, so a loss builder that mangles a residual or a
boundary term shows up as a nonzero total on a field that should zero it.
"""

import math

import numpy as np
import pytest

from cavex import mlp, oracle, physics
from cavex.physics import CASES, LossWeights, yield_params

CASE_I = CASES["i"]
CASE_II = CASES["ii"]
CASE_III = CASES["iii"]
CASE_IV = CASES["iv"]

# Interface stresses of the built-in elasto-plastic cases, frozen from
# oracle.ep_interface.
IFACE_TRESCA = (3.7439999999999998, -2.2560000000000002)
IFACE_MC = (3.2203965693229453, -1.9404953686945954)


def grid(spec, n=9):
    return np.linspace(spec.a, spec.b, n)


# --- yield envelopes ---------------------------------------------------------


def test_yield_params_tresca_from_undrained_strength():
    yp = yield_params("tresca", s_u=3.0)
    assert yp.alpha == 1.0
    assert yp.sigma_y == 6.0


def test_yield_params_tresca_direct_sigma_y():
    yp = yield_params("tresca", sigma_y=7.0)
    assert yp.alpha == 1.0
    assert yp.sigma_y == 7.0


def test_yield_params_mohr_coulomb_frictionless_matches_tresca():
    # at zero friction angle the envelope degenerates to Tresca with
    # s_u = cohesion
    yp = yield_params("mohr-coulomb", phi_deg=0.0, cohesion=2.5)
    assert yp.alpha == 1.0
    assert yp.sigma_y == 5.0


def test_yield_params_mohr_coulomb_15_degrees():
    # frozen from math.sin/cos at exactly 15 degrees
    yp = yield_params("mohr-coulomb", phi_deg=15.0, cohesion=2.5)
    assert abs(yp.alpha - 1.6983963724170996) < 1e-15
    assert abs(yp.sigma_y - 6.516126864206028) < 1e-12


def test_yield_params_friction_angle_sweep():
    # alpha grows monotonically from 1 and sigma_y stays positive across
    # the admissible friction range
    prev = 0.0
    for phi in range(0, 90, 5):
        yp = yield_params("mohr-coulomb", phi_deg=float(phi), cohesion=1.0)
        assert yp.alpha >= 1.0
        assert yp.alpha > prev
        assert yp.sigma_y > 0.0
        prev = yp.alpha


def test_yield_params_input_validation():
    with pytest.raises(ValueError):
        yield_params("tresca")
    with pytest.raises(ValueError):
        yield_params("mohr-coulomb", phi_deg=15.0)
    with pytest.raises(ValueError):
        yield_params("mohr-coulomb", cohesion=2.5)
    with pytest.raises(ValueError):
        yield_params("mohr-coulomb", phi_deg=90.0, cohesion=2.5)
    with pytest.raises(ValueError):
        yield_params("mohr-coulomb", phi_deg=-1.0, cohesion=2.5)
    with pytest.raises(ValueError):
        yield_params("von-mises", s_u=3.0)


def test_spec_yield_matches_direct_call():
    assert physics.spec_yield(CASE_III) == yield_params("tresca", s_u=3.0)
    assert physics.spec_yield(CASE_IV) == yield_params(
        "mohr-coulomb", phi_deg=15.0, cohesion=2.5)


# --- case table and validation ----------------------------------------------


def test_case_table_entries():
    assert set(CASES) == {"i", "ii", "iii", "iv"}
    assert CASE_I.p == 5.0 and CASE_I.b == 2.0
    assert CASE_II.anisotropic and not CASE_I.anisotropic
    assert CASE_III.yield_kind == "tresca" and CASE_III.c == 0.8
    assert CASE_IV.yield_kind == "mohr-coulomb"


def test_case_spec_validation():
    with pytest.raises(ValueError):
        physics.CaseSpec(a=2.0, b=0.4, E=1e5, nu=0.3, p=5.0)
    with pytest.raises(ValueError):
        physics.CaseSpec(a=0.4, b=2.0, E=1e5, nu=0.6, p=5.0)
    with pytest.raises(ValueError):
        physics.CaseSpec(a=0.4, b=2.0, E=1e5, nu=0.3, p=5.0, E_rad=0.8e5)
    with pytest.raises(ValueError):
        physics.CaseSpec(a=0.4, b=2.0, E=1e5, nu=0.3)  # no pressure
    with pytest.raises(ValueError):
        physics.CaseSpec(a=0.4, b=2.0, E=1e5, nu=0.3, p=5.0, c=1.0)
    with pytest.raises(ValueError):
        physics.CaseSpec(a=0.4, b=2.0, E=1e5, nu=0.3, c=3.0,
                         yield_kind="tresca", s_u=3.0)  # c outside (a, b)
    with pytest.raises(ValueError):
        physics.CaseSpec(a=0.4, b=2.0, E=1e5, nu=0.3, c=1.0,
                         yield_kind="tresca")  # no strength given


def test_scaled_case_multiplies_stress_inputs_only():
    s = CASE_III.scaled(10.0)
    assert s.s_u == 30.0
    assert s.p0 == 0.0
    assert (s.a, s.b, s.c, s.E, s.nu) == (0.2, 2.0, 0.8, 1e5, 0.3)
    s4 = CASE_IV.scaled(10.0)
    assert s4.cohesion == 25.0
    assert s4.phi_deg == 15.0


# --- pointwise residuals ------------------------------------------------------


def test_equilibrium_residual_anchors():
    # a uniform hydrostatic field is in equilibrium
    assert physics.equilibrium_residual(4.0, 4.0, 0.0, 1.3) == 0.0
    assert physics.equilibrium_residual(1.0, 0.0, 0.0, 2.0) == 2.0


def test_formc_stress_residual_anchor():
    assert physics.formc_stress_residual(2.0, 1.0, 0.0, 1.0) == 1.0


def test_residuals_vanish_on_elastic_solution():
    # frozen field values of case i at r = 1
    sr, st = 0.28225806451612895, -0.20161290322580663
    dsr, dst = -0.9677419354838711, 0.48387096774193555
    assert abs(physics.equilibrium_residual(sr, st, dsr, 1.0)) < 1e-12
    assert abs(physics.formc_stress_residual(sr, st, dst, 1.0)) < 1e-12

    field = oracle.lame_field(CASE_I)
    for r in grid(CASE_I, 17):
        (sr, st), (dsr, dst) = field(r)
        assert abs(physics.equilibrium_residual(sr, st, dsr, r)) < 1e-12
        assert abs(physics.formc_stress_residual(sr, st, dst, r)) < 1e-12


def test_aniso_residual_reduces_to_isotropic_on_lame_field():
    # with matching constants in both directions the anisotropic relation
    # must accept the isotropic solution
    iso_twin = physics.CaseSpec(a=0.4, b=2.0, E=1e5, nu=0.3, p=5.0,
                                E_rad=1e5, nu_rad=0.3)
    field = oracle.lame_field(CASE_I)
    for r in grid(CASE_I, 17):
        (sr, st), (dsr, dst) = field(r)
        assert abs(physics.aniso_residual(sr, st, dsr, dst, r, iso_twin)) < 1e-18


def test_aniso_residual_vanishes_on_anisotropic_solution():
    field = oracle.aniso_field(CASE_II)
    for r in grid(CASE_II, 9):
        (sr, st), (dsr, dst) = field(r)
        assert abs(physics.aniso_residual(sr, st, dsr, dst, r, CASE_II)) < 1e-12


def test_aniso_residual_zero_field():
    assert physics.aniso_residual(0.0, 0.0, 0.0, 0.0, 1.0, CASE_II) == 0.0


def test_aniso_residual_requires_anisotropic_case():
    with pytest.raises(ValueError):
        physics.aniso_residual(1.0, 1.0, 0.0, 0.0, 1.0, CASE_I)


def test_yield_residual_zero_at_interface():
    yp = physics.spec_yield(CASE_III)
    sr_c, st_c = IFACE_TRESCA
    assert abs(physics.yield_residual(sr_c, st_c, yp)) < 1e-12

    yp4 = physics.spec_yield(CASE_IV)
    sr4, st4 = IFACE_MC
    assert abs(physics.yield_residual(sr4, st4, yp4)) < 1e-12


def test_yield_residual_throughout_plastic_region():
    _, plastic = oracle.ep_fields(CASE_IV)
    yp = physics.spec_yield(CASE_IV)
    for r in np.linspace(CASE_IV.a, CASE_IV.c, 9):
        (sr, st), _ = plastic(r)
        assert abs(physics.yield_residual(sr, st, yp)) < 1e-12


def test_yield_residual_sign():
    yp = yield_params("tresca", s_u=3.0)
    assert physics.yield_residual(7.0, 0.0, yp) == 1.0   # past the envelope
    assert physics.yield_residual(5.0, 0.0, yp) == -1.0  # inside it


# --- losses vanish on exact fields -------------------------------------------


def test_loss_case_i_zero_on_exact_field():
    bd = physics.loss_case_i(oracle.lame_field(CASE_I), grid(CASE_I), CASE_I)
    assert bd.total < 1e-24
    assert all(v < 1e-24 for v in bd.terms.values())


def test_loss_case_ii_zero_on_exact_field():
    # the anisotropic oracle integrates numerically and differentiates by
    # finite differences, so the floor sits higher than closed form
    bd = physics.loss_case_ii(oracle.aniso_field(CASE_II), grid(CASE_II), CASE_II)
    assert bd.total < 1e-16


def test_loss_ep_zero_on_exact_fields():
    for spec, iface in ((CASE_III, IFACE_TRESCA), (CASE_IV, IFACE_MC)):
        elastic, plastic = oracle.ep_fields(spec)
        bd_el = physics.loss_ep_elastic(
            elastic, np.linspace(spec.c, spec.b, 9), spec)
        bd_pl = physics.loss_ep_plastic(
            plastic, np.linspace(spec.a, spec.c, 9), spec, iface)
        assert bd_el.total < 1e-24
        assert bd_pl.total < 1e-24


def test_loss_formulations_zero_on_extended_fields():
    for form, width in (("A", 5), ("B", 4)):
        field = oracle.lame_extended_field(CASE_I, width=width)
        bd = physics.loss_formulation(form, field, grid(CASE_I), CASE_I)
        assert bd.total < 1e-24


def test_loss_formulation_c_is_the_stress_only_loss():
    params = mlp.init_params(mlp.default_architecture(2), seed=3)
    g = grid(CASE_I)
    via_form = physics.loss_formulation("C", params, g, CASE_I)
    direct = physics.loss_case_i(params, g, CASE_I)
    assert via_form.total == direct.total
    assert via_form.terms.keys() == direct.terms.keys()


# --- zero-network anchors -----------------------------------------------------

# With all parameters zero the network output and its derivative vanish,
# so every loss reduces to the squared boundary data.


def zero_params(n_out):
    arch = mlp.default_architecture(n_out)
    p = mlp.init_params(arch, seed=0)
    return mlp.Params([np.zeros_like(w) for w in p.weights],
                      [np.zeros_like(b) for b in p.biases])


def test_zero_network_case_i_loss():
    bd = physics.loss_case_i(zero_params(2), grid(CASE_I), CASE_I)
    assert bd.total == 25.0
    assert bd.terms["bc_inner"] == 25.0
    assert bd.terms["bc_outer"] == 0.0
    assert bd.terms["pde_stress"] == 0.0
    assert bd.terms["pde_equilibrium"] == 0.0


def test_zero_network_case_ii_loss():
    bd = physics.loss_case_ii(zero_params(2), grid(CASE_II), CASE_II)
    assert bd.total == 25.0


def test_zero_network_ep_elastic_loss():
    # zero stresses sit sigma_y away from the yield envelope
    bd = physics.loss_ep_elastic(
        zero_params(2), np.linspace(CASE_III.c, CASE_III.b, 9), CASE_III)
    assert bd.total == 36.0
    assert bd.terms["bc_yield"] == 36.0

    bd4 = physics.loss_ep_elastic(
        zero_params(2), np.linspace(CASE_IV.c, CASE_IV.b, 9), CASE_IV)
    sigma_y = physics.spec_yield(CASE_IV).sigma_y
    assert bd4.terms["bc_yield"] == sigma_y * sigma_y


def test_zero_network_ep_plastic_loss():
    sr_c, st_c = IFACE_TRESCA
    bd = physics.loss_ep_plastic(
        zero_params(2), np.linspace(CASE_III.a, CASE_III.c, 9),
        CASE_III, IFACE_TRESCA)
    assert bd.terms["pde_yield"] == 36.0
    assert bd.terms["bc_continuity_radial"] == sr_c * sr_c
    assert bd.terms["bc_continuity_tangential"] == st_c * st_c
    expect = 36.0 + sr_c * sr_c + st_c * st_c
    assert abs(bd.total - expect) < 1e-12


# --- structural properties ----------------------------------------------------


def test_term_names_and_order():
    g = grid(CASE_I, 3)
    p2 = zero_params(2)
    assert list(physics.loss_case_i(p2, g, CASE_I).terms) == [
        "pde_stress", "pde_equilibrium", "bc_inner", "bc_outer"]
    assert list(physics.loss_case_ii(p2, g, CASE_II).terms) == [
        "pde_aniso", "pde_equilibrium", "bc_inner", "bc_outer"]
    assert list(physics.loss_ep_elastic(p2, g, CASE_III).terms) == [
        "pde_stress", "pde_equilibrium", "bc_yield", "bc_outer"]
    assert list(physics.loss_ep_plastic(p2, g, CASE_III, (1.0, 0.0)).terms) == [
        "pde_equilibrium", "pde_yield",
        "bc_continuity_radial", "bc_continuity_tangential"]
    assert list(physics.loss_formulation("A", zero_params(5), g, CASE_I).terms) == [
        "pde_equilibrium", "pde_compat_radial", "pde_compat_tangential",
        "pde_material_radial", "pde_material_tangential", "bc_inner", "bc_outer"]
    assert list(physics.loss_formulation("B", zero_params(4), g, CASE_I).terms) == [
        "pde_equilibrium", "pde_compat_combined",
        "pde_material_radial", "pde_material_tangential", "bc_inner", "bc_outer"]


def test_total_is_weighted_sum_of_terms():
    params = mlp.init_params(mlp.default_architecture(2), seed=5)
    w = LossWeights(pde=0.7, bc=1.3, data=2.0)
    data = [(1.0, 0.3, -0.2), (1.5, 0.1, -0.1)]
    bd = physics.loss_case_i(params, grid(CASE_I), CASE_I, weights=w, data=data)
    recon = sum(bd.weights[k] * bd.terms[k] for k in bd.terms)
    assert abs(bd.total - recon) < 1e-12 * max(1.0, abs(bd.total))
    assert bd.weights["pde_stress"] == 0.7
    assert bd.weights["bc_inner"] == 1.3
    assert bd.weights["data"] == 2.0


def test_boundary_weight_doubles_boundary_contribution():
    params = mlp.init_params(mlp.default_architecture(2), seed=5)
    g = grid(CASE_I)
    base = physics.loss_case_i(params, g, CASE_I)
    heavy = physics.loss_case_i(params, g, CASE_I, weights=LossWeights(bc=2.0))
    extra = base.terms["bc_inner"] + base.terms["bc_outer"]
    assert abs((heavy.total - base.total) - extra) < 1e-12 * max(1.0, base.total)


def test_loss_scales_quadratically_with_stress_scale():
    # multiply the loading and a (deliberately wrong) trial field by k:
    # every residual is linear in the stresses, so each term picks up k^2
    k = 10.0
    base_field = oracle.lame_field(CASE_I)

    def perturbed(scale):
        def field(r):
            (sr, st), (dsr, dst) = base_field(r)
            return ((scale * (sr + math.sin(r)), scale * (st + math.cos(r))),
                    (scale * (dsr + math.cos(r)), scale * (dst - math.sin(r))))
        return field

    g = grid(CASE_I)
    bd1 = physics.loss_case_i(perturbed(1.0), g, CASE_I)
    bdk = physics.loss_case_i(perturbed(k), g, CASE_I.scaled(k))
    for name in bd1.terms:
        assert abs(bdk.terms[name] - k * k * bd1.terms[name]) \
            < 1e-9 * max(1.0, abs(bd1.terms[name]) * k * k)


def test_ep_losses_scale_quadratically_with_stress_scale():
    k = 10.0
    elastic, plastic = oracle.ep_fields(CASE_III)
    spec_k = CASE_III.scaled(k)

    def scaled_field(f):
        def field(r):
            (sr, st), (dsr, dst) = f(r)
            return ((k * (sr + 0.5), k * (st - 0.5)), (k * dsr, k * dst))
        return field

    ge = np.linspace(CASE_III.c, CASE_III.b, 9)
    gp = np.linspace(CASE_III.a, CASE_III.c, 9)
    sr_c, st_c = IFACE_TRESCA

    def unscaled_field(f):
        def field(r):
            (sr, st), (dsr, dst) = f(r)
            return ((sr + 0.5, st - 0.5), (dsr, dst))
        return field

    bd1 = physics.loss_ep_elastic(unscaled_field(elastic), ge, CASE_III)
    bdk = physics.loss_ep_elastic(scaled_field(elastic), ge, spec_k)
    p1 = physics.loss_ep_plastic(unscaled_field(plastic), gp, CASE_III,
                                 (sr_c, st_c))
    pk = physics.loss_ep_plastic(scaled_field(plastic), gp, spec_k,
                                 (k * sr_c, k * st_c))
    for one, many in ((bd1, bdk), (p1, pk)):
        for name in one.terms:
            assert abs(many.terms[name] - k * k * one.terms[name]) \
                < 1e-9 * max(1.0, abs(one.terms[name]) * k * k)


# --- measured-data misfit -----------------------------------------------------


def test_loss_data_zero_on_exact_values():
    field = oracle.lame_field(CASE_I)
    points = []
    for r in (0.5, 1.0, 1.5):
        (sr, st), _ = field(r)
        points.append((r, sr, st))
    assert physics.loss_data(field, points) < 1e-28


def test_loss_data_unit_offset_single_point():
    # one observation whose radial stress is off by exactly 1 kPa
    field = oracle.lame_field(CASE_I)
    (sr, st), _ = field(1.0)
    assert physics.loss_data(field, [(1.0, sr - 1.0, st)]) == 1.0


def test_loss_data_offset_averages_over_points():
    field = oracle.lame_field(CASE_I)
    (sr1, st1), _ = field(1.0)
    (sr2, st2), _ = field(1.5)
    points = [(1.0, sr1 - 1.0, st1), (1.5, sr2, st2)]
    assert abs(physics.loss_data(field, points) - 0.5) < 1e-15


# --- input validation ---------------------------------------------------------


def test_loss_rejects_wrong_output_width():
    p5 = mlp.init_params(mlp.default_architecture(5), seed=0)
    with pytest.raises(ValueError):
        physics.loss_case_i(p5, grid(CASE_I, 3), CASE_I)
    p2 = mlp.init_params(mlp.default_architecture(2), seed=0)
    with pytest.raises(ValueError):
        physics.loss_formulation("A", p2, grid(CASE_I, 3), CASE_I)


def test_loss_rejects_wrong_callable_width():
    def three_wide(r):
        return (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)

    with pytest.raises(ValueError):
        physics.loss_case_i(three_wide, grid(CASE_I, 3), CASE_I)


def test_loss_rejects_empty_collocation():
    p2 = zero_params(2)
    with pytest.raises(ValueError):
        physics.loss_case_i(p2, [], CASE_I)
    with pytest.raises(ValueError):
        physics.loss_ep_plastic(p2, [], CASE_III, (1.0, 0.0))


def test_loss_rejects_unsupported_model():
    with pytest.raises(TypeError):
        physics.loss_case_i(42, grid(CASE_I, 3), CASE_I)


def test_formulation_validation():
    p2 = zero_params(2)
    g = grid(CASE_I, 3)
    with pytest.raises(ValueError):
        physics.loss_formulation("D", p2, g, CASE_I)
    with pytest.raises(ValueError):
        physics.loss_formulation("A", zero_params(5), g, CASE_II)
    with pytest.raises(ValueError):
        physics.loss_formulation("B", zero_params(4), g, CASE_III)
    # C stays available for every case
    bd = physics.loss_formulation("C", p2, g, CASE_I)
    assert bd.total == 25.0
