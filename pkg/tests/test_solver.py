import numpy as np
import pytest
import shapely

from conftest import solve
from oracles import clamped_annulus_field, x1_squared_couple
from platelab.errors import InvalidGeometryError, InvalidInputError, ResolutionError, UndefinedRatioError
from platelab.geometry import Circle, PlanarDomain, StarInclusion
from platelab.material import IsotropicPlate
from platelab.solver import (
    CoupleField,
    FunctionField,
    boundary_affine_fit,
    build_grid,
    energy,
    equilibrium_residuals,
    h_minus_half_norm,
    h_minus_half_surrogate,
    hessian_l2,
    release_factorizations,
    solve_dirichlet_form,
    solve_rigid_form,
    verify_energy_estimate,
    work_identity,
)
from platelab.solver.solve import _system


def zero_couple(domain):
    return CoupleField(domain.boundary, np.zeros(256), np.zeros(256))


def gauge_removed_l2(sol, exact):
    """L2 error of ``sol - exact`` after removing the best affine fit."""
    q = sol.grid.quadrature()
    e = sol.evaluate(q.pts)[0] - exact(q.pts)
    A = np.column_stack([np.ones(len(e)), q.pts])
    c = np.linalg.solve(A.T @ (q.w[:, None] * A), A.T @ (q.w * e))
    r = e - A @ c
    return float(np.sqrt(np.sum(q.w * r**2)))


# ---------------------------------------------------------------- grids


def test_grid_disc_in_disc_clearance(domain, inclusion):
    pg = build_grid(domain, inclusion, 64)
    clearance = pg.background.omega.exterior.distance(pg.inclusion_polygon)
    assert clearance / pg.h >= 64
    assert pg.counts["clamped_dofs"] > 0 and pg.counts["neumann_dofs"] > 0


def test_grid_without_inclusion_has_no_clamped_dofs(domain):
    assert build_grid(domain, None, 16).counts["clamped_dofs"] == 0


def test_grid_rejects_compactness_violation(domain):
    with pytest.raises(InvalidGeometryError):
        build_grid(domain, StarInclusion.disc((1.0, 0.0), 0.4), 16)


def test_grid_rejects_coarse_resolution(domain, inclusion):
    """Clearance is at least r0, so only grids coarser than 8 cells per r0 can fail."""
    build_grid(domain, inclusion, 8)
    with pytest.raises(ResolutionError):
        build_grid(domain, StarInclusion.disc((0.0, 0.0), 0.6), 4)


# ---------------------------------------------------------------- Dirichlet form


def test_zero_couple_gives_zero_field(domain, inclusion, plate):
    sol = solve(domain, inclusion, plate, zero_couple(domain), 16)
    assert np.all(sol.coef == 0.0)


def test_manufactured_x1_squared_converges():
    dom = PlanarDomain(Circle((0, 0), 1.0), sigma=(0.0, 0.5), r0=1.0, M1=10.0)
    plate = IsotropicPlate.constant(1.0, 1.0, h=0.1)
    couple = x1_squared_couple(dom, plate)
    errs = [gauge_removed_l2(solve(dom, None, plate, couple, res), lambda p: p[:, 0] ** 2) for res in (16, 32)]
    assert errs[1] < errs[0] / 3
    assert errs[1] < 1e-4


def test_clamped_annulus_matches_radial_solution():
    a, b = 0.5, 2.0
    dom = PlanarDomain(Circle((0, 0), b), sigma=(0.0, 0.5), r0=1.0, M1=10.0)
    plate = IsotropicPlate.constant(1.0, 1.0, h=0.1)
    B, nu = (float(v[0]) for v in plate.stiffness(np.zeros((1, 2))))
    couple = CoupleField.from_functions(dom.boundary, lambda p, n, t: np.ones(len(p)), None, n=1024)
    exact = clamped_annulus_field(a, b, 1.0, B, nu)
    sol = solve(dom, StarInclusion.disc((0.0, 0.0), a), plate, couple, 32)
    q = sol.grid.quadrature()
    err = np.sqrt(np.sum(q.w * (sol.evaluate(q.pts)[0] - exact(q.pts)) ** 2))
    assert err / np.sqrt(np.sum(q.w * exact(q.pts) ** 2)) < 1e-3
    # radial symmetry: values on a circle agree to grid tolerance
    th = np.linspace(0, 2 * np.pi, 37)[:-1]
    ring = 1.2 * np.column_stack([np.cos(th), np.sin(th)])
    vals = sol(ring)
    assert np.ptp(vals) < 1e-3 * np.abs(vals).max()


def test_clamped_traces_vanish(solution32):
    inc = solution32.inclusion
    pts = inc.boundary_points(256)
    w, gw, _ = solution32.evaluate(pts, mask_inclusion=False)
    q = solution32.grid.quadrature()
    scale = np.abs(solution32.evaluate(q.pts)[0]).max()
    assert np.abs(w).max() <= 1e-10 * scale
    assert np.abs(gw).max() <= 1e-10 * scale / solution32.domain.r0


def test_solver_residual_within_tolerance(solution32):
    assert solution32.residual <= 1e-10


def test_bilinear_form_symmetric_and_nonnegative(domain, inclusion, plate, rng):
    pg = build_grid(domain, inclusion, 16)
    K = _system(pg, plate, factor=False)["K"]
    for _ in range(5):
        u, v = rng.standard_normal((2, K.shape[0]))
        assert u @ (K @ v) == pytest.approx(v @ (K @ u), rel=1e-12)
    U = rng.standard_normal((100, K.shape[0]))
    assert np.all(np.einsum("ij,ij->i", U, (K @ U.T).T) >= 0)


def test_discrete_coercivity_constant_positive(domain, inclusion, plate, rng):
    """``a(w, w) >= c int |D2 w|^2`` on random spline fields, with ``c`` measured."""
    sol = solve(domain, inclusion, plate, CoupleField.default(domain), 16)
    info = _system(sol.grid, plate, factor=False)
    ratios = []
    for _ in range(5):
        u = np.zeros_like(sol.coef)
        u[info["active"]] = rng.standard_normal(info["active"].size)
        sol.coef = u
        ratios.append(float(u @ (info["K"] @ u)) / hessian_l2(sol))
    assert min(ratios) > 0


def test_solution_linear_in_couple(domain, inclusion, plate):
    c1 = CoupleField.default(domain)
    c2 = CoupleField.from_cartesian(
        domain.boundary, np.roll(c1.cartesian(), 40, axis=0) * np.array([1.0, -0.5]), c1.support
    )
    both = CoupleField(domain.boundary, c1.m_n + 2 * c2.m_n, c1.m_tau + 2 * c2.m_tau)
    pg = build_grid(domain, inclusion, 16)
    u1 = solve_dirichlet_form(pg, plate, c1).coef
    u2 = solve_dirichlet_form(pg, plate, c2).coef
    u12 = solve_dirichlet_form(pg, plate, both).coef
    release_factorizations()
    np.testing.assert_allclose(u12, u1 + 2 * u2, atol=1e-9 * np.abs(u12).max())


def test_work_identity(solution32):
    gap, a, work = work_identity(solution32)
    assert a > 0 and gap <= 1e-8


# ---------------------------------------------------------------- rigid form


def test_rigid_form_equilibrium_and_consistency(solution32):
    rig = solve_rigid_form(solution32.grid, solution32.plate, solution32.couple, dirichlet=solution32)
    assert np.all(np.abs(rig.diagnostics["equilibrium"]) <= 1e-6)
    q = solution32.grid.quadrature()
    w_rigid = rig.evaluate(q.pts)[0]
    g = rig.gauge[0] + q.pts @ rig.gauge[1:]
    assert np.max(np.abs((w_rigid - g) - solution32.evaluate(q.pts)[0])) <= 1e-12 * np.abs(w_rigid).max()
    # the rigid trace has no affine component left on the outer boundary
    assert np.abs(boundary_affine_fit(rig)).max() <= 1e-10 * np.abs(rig.gauge).max()


def test_rigid_form_zero_couple_is_zero(domain, inclusion, plate):
    sol = solve(domain, inclusion, plate, zero_couple(domain), 16)
    rig = solve_rigid_form(sol.grid, plate, sol.couple, dirichlet=sol)
    assert np.all(rig.gauge == 0) and np.all(equilibrium_residuals(sol) == 0)


# ---------------------------------------------------------------- integrals


def x1_squared_field(region, plate):
    return FunctionField(
        lambda p: p[:, 0] ** 2,
        lambda p: np.column_stack([2 * p[:, 0], np.zeros(len(p))]),
        lambda p: np.tile(np.array([[2.0, 0.0], [0.0, 0.0]]), (len(p), 1, 1)),
        region,
        plate,
    )


def test_energy_of_x1_squared_unit_square():
    plate = IsotropicPlate.constant(0.0, 6.0, h=1.0)  # B = 1, nu = 0
    f = x1_squared_field(shapely.box(0, 0, 1, 1), plate)
    assert energy(f) == pytest.approx(4.0, rel=1e-12)
    assert hessian_l2(f) == pytest.approx(4.0, rel=1e-12)


def test_energy_of_affine_field_is_zero(plate):
    f = FunctionField(
        lambda p: 1 + p[:, 0] - 2 * p[:, 1],
        lambda p: np.tile([1.0, -2.0], (len(p), 1)),
        lambda p: np.zeros((len(p), 2, 2)),
        shapely.box(0, 0, 1, 1),
        plate,
    )
    assert energy(f) == 0.0 and hessian_l2(f) == 0.0


def test_energy_of_empty_region_is_zero(solution32):
    assert energy(solution32, shapely.Polygon()) == 0.0


def test_hessian_integral_monotone_in_region(solution32):
    vals = [hessian_l2(solution32, shapely.Point(0, 0).buffer(r, 128)) for r in (0.6, 0.9, 1.2, 1.6)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= hessian_l2(solution32)


# ---------------------------------------------------------------- energy estimate


def test_energy_estimate_stable_under_refinement(domain, inclusion, plate, couple):
    sols = [solve(domain, inclusion, plate, couple, res) for res in (16, 24, 32)]
    rep = verify_energy_estimate(sols)
    assert rep.stable and not rep.flagged


def test_energy_estimate_scale_invariant(solution32):
    r1 = verify_energy_estimate(solution32).ratios[0]
    sol = solution32
    scaled = type(sol)(sol.grid, sol.plate, sol.couple.scaled(3.0), 3.0 * sol.coef)
    assert verify_energy_estimate(scaled).ratios[0] == pytest.approx(r1, rel=1e-12)


def test_energy_estimate_zero_couple_rejected(solution32, domain):
    with pytest.raises(UndefinedRatioError):
        verify_energy_estimate(solution32, zero_couple(domain))


# ---------------------------------------------------------------- H^-1/2 surrogate


@pytest.mark.parametrize("k", [1, 2, 5, 16])
def test_surrogate_single_mode(k):
    th = np.arange(512) * 2 * np.pi / 512
    samples = np.cos(k * th) / np.sqrt(np.pi)  # unit L2 norm on the unit circle
    assert h_minus_half_norm(samples, 2 * np.pi) == pytest.approx((1 + k * k) ** -0.25, rel=1e-12)


def test_surrogate_constant_equals_l2():
    samples = np.full((128, 2), [0.3, -0.4])
    assert h_minus_half_norm(samples, 2 * np.pi) == pytest.approx(0.5 * np.sqrt(2 * np.pi), rel=1e-12)


def test_surrogate_zero_and_empty(domain):
    assert h_minus_half_surrogate(zero_couple(domain)) == 0.0
    with pytest.raises(InvalidInputError):
        h_minus_half_norm(np.zeros(0), 1.0)


def test_default_couple_invariants(domain, couple):
    checks = couple.check(domain)
    assert all(checks.values()), checks
