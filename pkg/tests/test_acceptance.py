"""Acceptance criteria, one test each; every test prints a single PASS or FAIL line."""

import time

import numpy as np
import pytest
import shapely

from conftest import solve
from oracles import grid_search_misfit, hausdorff_bruteforce, x1_squared_couple
from test_boundary_data import MISFIT_CASES, disc_traces, zero_field, zero_grad
from platelab.boundary_data import extract_traces, gauge_min_misfit
from platelab.geometry import Circle, PlanarDomain, StarInclusion, hausdorff_distance
from platelab.inversion import InverseSetup, reconstruct
from platelab.material import IsotropicPlate
from platelab.presets import default_plate, disc_domain, disc_inclusion, instance_family
from platelab.solver import CoupleField, FunctionField, solve_rigid_form
from platelab.stability import (
    SweepSetup,
    dilation_family,
    fit_log_law,
    sweep,
    theta0,
    verify_fvr_boundary,
    verify_lps,
    verify_three_spheres,
)


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def instances():
    """Three instances of the family solved at resolution 64, with their couple fields."""
    plate = default_plate()
    out = []
    for dom, inc in instance_family(10)[::4][:3]:
        couple = CoupleField.default(dom)
        out.append((inc, couple, solve(dom, inc, plate, couple, 64)))
    return out


def gauge_removed_l2(sol, exact):
    q = sol.grid.quadrature()
    e = sol.evaluate(q.pts)[0] - exact(q.pts)
    A = np.column_stack([np.ones(len(e)), q.pts])
    c = np.linalg.solve(A.T @ (q.w[:, None] * A), A.T @ (q.w * e))
    return float(np.sqrt(np.sum(q.w * (e - A @ c) ** 2)))


def test_criterion_1_manufactured_convergence(verdict):
    t0 = time.perf_counter()
    dom = PlanarDomain(Circle((0, 0), 1.0), sigma=(0.0, 0.5), r0=1.0, M1=10.0)
    plate = IsotropicPlate.constant(1.0, 1.0, h=0.1)
    couple = x1_squared_couple(dom, plate)
    errs = [gauge_removed_l2(solve(dom, None, plate, couple, res), lambda p: p[:, 0] ** 2) for res in (32, 64, 128)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    wall = time.perf_counter() - t0
    verdict(1, bool(np.all(orders >= 1.8) and wall <= 120),
            f"L2 errors {np.round(errs, 10).tolist()}, orders {np.round(orders, 3).tolist()}, {wall:.1f} s")


def test_criterion_2_gauge_structure(verdict):
    t0 = time.perf_counter()
    dom, plate = disc_domain(), default_plate()
    couple = CoupleField.default(dom)
    truth = disc_inclusion(0.4)
    t1 = extract_traces(solve(dom, truth, plate, couple, 32), dom)
    t2 = extract_traces(solve(dom, StarInclusion.disc((0.05, 0.0), 0.45), plate, couple, 16), dom)
    g = np.array([0.7, -1.3, 2.1]) * np.abs(t1.w_values).max()
    e0 = gauge_min_misfit(t1, t2)[0]
    e1 = gauge_min_misfit(t1.plus_affine(g), t2.plus_affine(g))[0]
    change = abs(e1 - e0) / e0
    bounds = (np.array([-0.25, -0.25, 0.2]), np.array([0.25, 0.25, 0.6]))
    runs = []
    for observed in (t1, t1.plus_affine(g)):
        setup = InverseSetup(dom, plate, couple, observed, bounds, resolution=16, budget=80, restarts=0, truth=truth)
        runs.append(reconstruct(setup, [0.05, 0.0, 0.35]).best.params)
    gap = float(np.abs(runs[0] - runs[1]).max())
    wall = time.perf_counter() - t0
    verdict(2, bool(change <= 1e-12 and gap <= 1e-9 * dom.r0 and wall <= 300),
            f"relative misfit change {change:.2e}, argmin gap {gap:.2e}, {wall:.1f} s")


def test_criterion_3_rigid_form(verdict, instances):
    worst_eq, worst_cons = 0.0, 0.0
    for _, couple, sol in instances:
        rig = solve_rigid_form(sol.grid, sol.plate, couple, dirichlet=sol)
        q = sol.grid.quadrature()
        w_rigid = rig.evaluate(q.pts)[0]
        g = rig.gauge[0] + q.pts @ rig.gauge[1:]
        cons = np.abs((w_rigid - g) - sol.evaluate(q.pts)[0]).max() / np.abs(w_rigid).max()
        worst_eq = max(worst_eq, float(np.abs(rig.diagnostics["equilibrium"]).max()))
        worst_cons = max(worst_cons, float(cons))
    tol = 1e-10
    verdict(3, worst_eq <= 1e-6 and worst_cons <= 10 * tol,
            f"max normalized reaction {worst_eq:.2e}, max consistency gap {worst_cons:.2e}")


def test_criterion_4_dilation_sweep(verdict):
    t0 = time.perf_counter()
    dom, plate = disc_domain(), default_plate()
    base = disc_inclusion(0.4)
    sizes = [0.02, 0.04, 0.06, 0.08, 0.1, 0.13, 0.16, 0.2]
    records = sweep(base, dilation_family(base, sizes), SweepSetup(dom, plate, CoupleField.default(dom), 96, 2))
    fit = fit_log_law(records)
    eps = [r.epsilon_norm for r in records]
    increasing = all(a < b for a, b in zip(eps, eps[1:]))
    wall = time.perf_counter() - t0
    verdict(4, bool(fit.eta_fit > 0 and fit.r2 >= 0.9 and increasing and wall <= 1800),
            f"eta {fit.eta_fit:.3f}, C {fit.C_fit:.3f}, R^2 {fit.r2:.4f}, increasing {increasing}, {wall:.1f} s")


def test_criterion_5_boundary_vanishing_rate(verdict, instances):
    exps = []
    for inc, _, sol in instances:
        for x in inc.boundary_points(4):
            exps.append(verify_fvr_boundary(sol, tuple(x), [0.02, 0.04, 0.08, 0.16]).exponent)
    model = FunctionField(
        lambda p: p[:, 1] ** 2,
        lambda p: np.column_stack([np.zeros(len(p)), 2 * p[:, 1]]),
        lambda p: np.tile(np.diag([0.0, 2.0]), (len(p), 1, 1)),
        shapely.box(-2, 0, 2, 2),
    )
    p_model = verify_fvr_boundary(model, (0, 0), [0.02, 0.05, 0.1, 0.2], r0=1.0).exponent
    ok = all(5.5 <= p <= 40 for p in exps) and abs(p_model - 6) <= 0.2
    verdict(5, ok, f"exponents {min(exps):.3f} to {max(exps):.3f} on 12 points, squared-distance model {p_model:.4f}")


def test_criterion_6_three_spheres(verdict):
    rng = np.random.default_rng(6)
    r1 = rng.uniform(0.01, 1.0, 100)
    r3 = r1 * rng.uniform(1.5, 10.0, 100)
    r2 = r1 + (r3 - r1) * rng.uniform(0.1, 0.9, 100)
    c0 = rng.uniform(0.5, 1.0, 100)
    direct = np.array([np.log(c * c_ / b) / (2 * np.log(c_ / a)) for a, b, c_, c in zip(r1, r2, r3, c0)])
    formula_gap = float(np.abs(theta0(c0, r1, r2, r3) - direct).max())
    plate = default_plate()
    Q, nested = [], True
    for dom, inc in instance_family(10):
        sol = solve(dom, inc, plate, CoupleField.default(dom), 32)
        rep = verify_three_spheres(sol, (0.0, 1.05), 0.1, 0.2, 0.4)
        Q.append(rep.Q)
        nested &= rep.nested
    spread = max(Q) / min(Q)
    verdict(6, bool(formula_gap <= 1e-12 and nested and spread < 10),
            f"theta0 gap {formula_gap:.1e}, nested {nested}, Q from {min(Q):.4f} to {max(Q):.4f} (ratio {spread:.3f})")


def test_criterion_7_smallness_profile(verdict, instances):
    inc, couple, sol = instances[0]
    rep = verify_lps(sol, couple, [0.05, 0.1, 0.2, 0.4])
    env = rep.envelope
    ok = rep.positive and len(rep.profile) == 4 and env.get("finite", False) and 0.5 <= env["B_trial"] <= 4.0
    profile = ", ".join(f"{k:g}: {v:.3e}" for k, v in rep.profile.items())
    verdict(7, bool(ok), f"m = {{{profile}}}, envelope B {env.get('B_trial')}, R^2 {env.get('r2', float('nan')):.3f}")


def test_criterion_8_noiseless_disc_recovery(verdict):
    dom, plate = disc_domain(), default_plate()
    couple = CoupleField.default(dom)
    truth = disc_inclusion(0.4)
    observed = extract_traces(solve(dom, truth, plate, couple, 128), dom)
    bounds = (np.array([-0.25, -0.25, 0.2]), np.array([0.25, 0.25, 0.5]))
    setup = InverseSetup(dom, plate, couple, observed, bounds, resolution=64, budget=500, restarts=0, truth=truth)
    res = reconstruct(setup, [0.1, 0.0, 0.4])
    ok = res.hausdorff <= 0.05 * dom.r0 and res.evaluations <= 500 and res.wall_time <= 1200
    verdict(8, bool(ok), f"d_H {res.hausdorff:.5f} r0 after {res.evaluations} solves, {res.wall_time:.1f} s")


def test_criterion_9_oracles(verdict):
    rng = np.random.default_rng(9)
    step = 1e-2
    worst_h = 0.0
    for _ in range(20):
        a, b = (
            StarInclusion(tuple(rng.uniform(-0.3, 0.3, 2)), (rng.uniform(0.3, 0.6), *rng.uniform(-0.05, 0.05, 4)))
            for _ in range(2)
        )
        oracle = hausdorff_bruteforce(a.polygon(4096), b.polygon(4096), step / 2)
        worst_h = max(worst_h, abs(hausdorff_distance(a, b, step=step) - oracle))
    worst_m = 0.0
    for _, sigma, w, grad in MISFIT_CASES:
        t1, t2 = disc_traces(zero_field, zero_grad, sigma), disc_traces(w, grad, sigma)
        scale = max(np.abs(t2.w_values).max(), np.abs(t2.dn_values).max())
        oracle, _ = grid_search_misfit(t1, t2, np.zeros(3), np.full(3, 4.0 * scale), n=31, levels=7)
        worst_m = max(worst_m, abs(gauge_min_misfit(t1, t2)[0] - oracle) / oracle)
    eps = np.logspace(-12, -1.5, 8)
    fit = fit_log_law(list(zip(eps, 2.0 * np.abs(np.log(eps)) ** -0.5)))
    law_gap = max(abs(fit.C_fit - 2.0) / 2.0, abs(fit.eta_fit - 0.5))
    ok = worst_h <= step and worst_m <= 1e-4 and law_gap <= 1e-6
    verdict(9, bool(ok), f"Hausdorff gap {worst_h:.2e} (step {step}), misfit rel gap {worst_m:.1e}, law gap {law_gap:.1e}")
