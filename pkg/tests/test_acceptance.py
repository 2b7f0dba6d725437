"""Acceptance gate: ten end-to-end checks, one test per criterion.

Each test trains with default budgets (or replays the CLI) and scores the
result against the built-in reference solutions. Wall-clock limits are
asserted alongside accuracy so regressions in either direction surface
here first.
"""

import dataclasses
import time

import numpy as np
import pytest

from cavex import cli, mlp, oracle, physics, train
from cavex.autodiff import check_gradient
from cavex.optim import OptimOptions


# --- shared training runs (default budgets, trained once) --------------------

@pytest.fixture(scope="module")
def case_i_run():
    t0 = time.perf_counter()
    rep = train.train_case(train.default_config("i"))
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def case_ii_run():
    t0 = time.perf_counter()
    rep = train.train_case(train.default_config("ii"))
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def case_iii_run():
    t0 = time.perf_counter()
    res = train.train_elastoplastic(train.default_config("iii"))
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def case_iv_run():
    t0 = time.perf_counter()
    res = train.train_elastoplastic(train.default_config("iv"))
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def formulation_runs():
    # one fixed budget across A, B, C; tolerance stops disabled so every
    # run consumes exactly the same number of iterations
    opts = OptimOptions(max_iters=200, grad_tol=0.0, loss_tol=0.0,
                        plateau_patience=0, capture_grads=50)
    out = {}
    for form in ("A", "B", "C"):
        cfg = train.TrainConfig(case="i", formulation=form, seeds=(0,),
                                optim=opts)
        rep = train.train_case(cfg)
        out[form] = (rep, train.tail_mean_abs_grads(rep.trace, rep.params))
    return out


def assert_elastic_bounds(metrics, mse_cap):
    assert metrics.mse_r <= mse_cap
    assert metrics.mse_theta <= mse_cap
    assert metrics.r2_r >= 0.999
    assert metrics.r2_theta >= 0.999


def interface_gap(res, spec):
    at_c_elastic = np.asarray(mlp.forward(res.elastic.params, spec.c))
    at_c_plastic = np.asarray(mlp.forward(res.plastic.params, spec.c))
    return np.abs(at_c_elastic - at_c_plastic)


def assert_two_stage_bounds(res, spec, seconds, budget):
    assert_elastic_bounds(res.elastic.metrics, 1e-4)
    assert_elastic_bounds(res.plastic.metrics, 1e-3)
    _, _, sr_c, st_c = oracle.ep_interface(spec)
    assert abs(res.frozen[0] - sr_c) < 1e-2
    assert abs(res.frozen[1] - st_c) < 1e-2
    exact_p = oracle.recovered_pressure(spec)
    assert abs(res.recovered_pressure - exact_p) < 0.02 * abs(exact_p)
    assert seconds < budget


# --- criteria -----------------------------------------------------------------

def test_criterion_01_elastic_isotropic_accuracy(case_i_run):
    rep, seconds = case_i_run
    assert_elastic_bounds(rep.metrics, 1e-4)
    assert seconds < 60.0


def test_criterion_02_elastic_anisotropic_accuracy(case_ii_run):
    rep, seconds = case_ii_run
    assert rep.metrics.mse_r <= 1e-3
    assert rep.metrics.mse_theta <= 1e-3
    assert rep.metrics.r2_r >= 0.999
    assert rep.metrics.r2_theta >= 0.999
    assert seconds < 60.0


def test_criterion_03_tresca_two_stage_accuracy(case_iii_run):
    res, seconds = case_iii_run
    assert_two_stage_bounds(res, physics.CASES["iii"], seconds, 120.0)


def test_criterion_04_mohr_coulomb_two_stage_accuracy(case_iv_run):
    res, seconds = case_iv_run
    assert_two_stage_bounds(res, physics.CASES["iv"], seconds, 120.0)


def test_criterion_05_formulation_study(formulation_runs):
    rep_a, tails_a = formulation_runs["A"]
    rep_b, tails_b = formulation_runs["B"]
    rep_c, tails_c = formulation_runs["C"]
    # the two-output stress formulation beats the strain/displacement
    # formulations by three orders of magnitude on the same budget
    assert rep_c.metrics.mse_r <= 1e-3 * rep_a.metrics.mse_r
    assert rep_c.metrics.mse_r <= 1e-3 * rep_b.metrics.mse_r
    # and its hidden layers keep training: larger late-stage gradients
    assert len(tails_a) == len(tails_b) == len(tails_c) == 3
    for c_val, a_val, b_val in zip(tails_c, tails_a, tails_b):
        assert c_val > a_val
        assert c_val > b_val


def test_criterion_06_convergence_speed(case_i_run, case_ii_run):
    for rep, _ in (case_i_run, case_ii_run):
        losses = np.asarray(rep.trace.losses)
        below = np.flatnonzero(losses < 1e-4)
        assert below.size > 0
        assert below[0] <= 1000


def test_criterion_07_autodiff_property_suite():
    spec = physics.CASES["i"]
    archs = [(1, 5, 2), (1, 8, 8, 2), (1, 6, 4, 2), (1, 16, 16, 16, 2)]
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()

    # parameter gradients: tape vs central differences over every weight
    # and bias; the step suits the loss magnitude (roundoff ~ eps |loss| /
    # step must stay below truncation)
    worst = 0.0
    for k in range(100):
        arch = archs[k % 4] if k % 10 == 0 else archs[k % 3]
        params = mlp.init_params(mlp.Architecture(arch), seed=k)
        col = np.sort(rng.uniform(spec.a, spec.b, 3))
        worst = max(worst, check_gradient(
            lambda m: physics.loss_case_i(m, col, spec), params, step=3e-5))
    assert worst < 1e-5

    # input derivatives: dual-number tangent vs central differences
    h = 1e-7
    worst_in = 0.0
    for k in range(100):
        params = mlp.init_params(mlp.Architecture(archs[k % 4]), seed=1000 + k)
        for r in rng.uniform(spec.a, spec.b, 3):
            _, d_ad = mlp.forward_with_derivative(params, r)
            d_fd = (np.asarray(mlp.forward(params, r + h))
                    - np.asarray(mlp.forward(params, r - h))) / (2.0 * h)
            err = np.max(np.abs(np.asarray(d_ad) - d_fd)
                         / np.maximum(np.abs(d_fd), 1.0))
            worst_in = max(worst_in, float(err))
    assert worst_in < 1e-6
    assert time.perf_counter() - t0 < 10.0


def test_criterion_08_oracle_self_checks():
    t0 = time.perf_counter()

    # isotropic shell: both governing equations, analytic derivatives
    spec_i = physics.CASES["i"]
    f = oracle.lame_field(spec_i)
    for r in np.linspace(spec_i.a, spec_i.b, 17)[1:-1]:
        (sr, st), (dsr, dst) = f(r)
        assert abs(physics.equilibrium_residual(sr, st, dsr, r)) < 1e-8
        assert abs(physics.formc_stress_residual(sr, st, dst, r)) < 1e-8

    # anisotropic shell: integrated field, difference-quotient derivatives
    spec_ii = physics.CASES["ii"]
    g = oracle.aniso_field(spec_ii)
    for r in np.linspace(spec_ii.a, spec_ii.b, 9)[1:-1]:
        (sr, st), (dsr, dst) = g(r)
        assert abs(physics.equilibrium_residual(sr, st, dsr, r)) < 1e-8
        assert abs(physics.aniso_residual(sr, st, dsr, dst, r, spec_ii)) < 1e-8

    # two-region cases: elastic equations outside c, equilibrium plus the
    # yield envelope inside
    for case in ("iii", "iv"):
        spec = physics.CASES[case]
        elastic, plastic = oracle.ep_fields(spec)
        yp = physics.spec_yield(spec)
        for r in np.linspace(spec.c, spec.b, 9)[1:-1]:
            (sr, st), (dsr, dst) = elastic(r)
            assert abs(physics.equilibrium_residual(sr, st, dsr, r)) < 1e-8
            assert abs(physics.formc_stress_residual(sr, st, dst, r)) < 1e-8
        for r in np.linspace(spec.a, spec.c, 9)[1:-1]:
            (sr, st), (dsr, _) = plastic(r)
            assert abs(physics.equilibrium_residual(sr, st, dsr, r)) < 1e-8
            assert abs(physics.yield_residual(sr, st, yp)) < 1e-8

    # closed-form plastic branch against a blind RK4 integration
    spec3 = physics.CASES["iii"]
    yp3 = physics.spec_yield(spec3)
    _, _, sr_c, _ = oracle.ep_interface(spec3)
    rhs = lambda r, y: np.array([-2.0 * yp3.sigma_y / r])
    rs, ys = oracle.rk4_solve(rhs, spec3.c, np.array([sr_c]), spec3.a, 2000)
    _, plastic3 = oracle.ep_fields(spec3)
    for r, y in zip(rs[::250], ys[::250]):
        assert abs(y[0] - plastic3(r)[0][0]) < 1e-8

    # a frictionless Mohr-Coulomb material is a Tresca material
    mc0 = dataclasses.replace(spec3, yield_kind="mohr-coulomb", s_u=None,
                              phi_deg=0.0, cohesion=3.0)
    grids = (np.linspace(spec3.c, spec3.b, 33), np.linspace(spec3.a, spec3.c, 33))
    for tre, fri in zip(oracle.ep_solution(spec3, grids),
                        oracle.ep_solution(mc0, grids)):
        assert np.max(np.abs(tre.sigma_r - fri.sigma_r)) < 1e-8
        assert np.max(np.abs(tre.sigma_theta - fri.sigma_theta)) < 1e-8

    assert time.perf_counter() - t0 < 5.0


def test_criterion_09_interface_continuity(case_iii_run, case_iv_run):
    for (res, _), case in ((case_iii_run, "iii"), (case_iv_run, "iv")):
        gap = interface_gap(res, physics.CASES[case])
        assert gap[0] < 1e-2
        assert gap[1] < 1e-2


def test_criterion_10_bit_identical_reruns(tmp_path, capsys):
    def rerun(argv, names):
        dirs = []
        for tag in ("first", "second"):
            out = tmp_path / f"{argv[0]}_{tag}"
            assert cli.main(argv + ["--out", str(out)]) == 0
            dirs.append(out)
        for name in names:
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
        return dirs[0]

    first = rerun(["train", "--case", "i", "--seed", "1", "--iters", "25",
                   "--n-col", "8"],
                  ["stress_field.csv", "loss_history.csv", "gradhist.csv",
                   "weights.txt"])
    rerun(["compare-formulations", "--seed", "1", "--iters", "25"],
          ["formulations.csv", "gradhist_A.csv", "gradhist_B.csv",
           "gradhist_C.csv"])
    rerun(["evaluate", "--case", "i", "--weights", str(first / "weights.txt")],
          ["stress_field.csv"])
    capsys.readouterr()
