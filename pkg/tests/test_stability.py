import importlib
import warnings

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from platelab.errors import (
    ConfigError,
    InvalidGeometryError,
    InvalidInputError,
    SolverError,
    UndefinedRatioError,
    UnderdeterminedError,
)
from platelab.geometry import StarInclusion
from platelab.solver import CoupleField, FunctionField
from platelab.stability import (
    StabilityRecord,
    SweepSetup,
    dilation_family,
    fit_log_law,
    normalized_epsilon,
    read_records,
    sweep,
    theta0,
    verify_cauchy_decay,
    verify_fvr_boundary,
    verify_fvr_interior,
    verify_lps,
    verify_three_spheres,
    write_gnuplot,
    write_records,
)
sweep_module = importlib.import_module("platelab.stability.sweep")

SIZES = [0.02, 0.04, 0.06, 0.08, 0.1, 0.13, 0.16, 0.2]
BASE = StarInclusion.disc((0.0, 0.0), 0.4)


@pytest.fixture(scope="module")
def dilation_records(domain, plate, couple):
    setup = SweepSetup(domain, plate, couple, resolution=16, data_factor=2)
    return sweep(BASE, dilation_family(BASE, SIZES), setup)


# ---------------------------------------------------------------- sweep


def test_sweep_identity_pair(domain, plate, couple):
    setup = SweepSetup(domain, plate, couple, resolution=16, data_factor=1)
    (rec,) = sweep(BASE, [BASE], setup)
    assert rec.ok
    assert rec.epsilon <= 1e-10 * setup.couple_norm
    assert rec.delta == 0.0 and rec.d == 0.0 and rec.d_m == 0.0
    assert rec.L1 == 0.0 and rec.L2 == 0.0


def test_sweep_dilation_records(dilation_records):
    assert len(dilation_records) == 8
    assert [r.pair_id for r in dilation_records] == list(range(8))
    for rec, s in zip(dilation_records, SIZES):
        assert rec.ok
        assert rec.delta == pytest.approx(s, abs=1e-3)
        assert rec.d_m <= rec.d
        assert rec.resolution == 16 and rec.data_resolution == 32
    eps = [r.epsilon_norm for r in dilation_records]
    assert all(a < b for a, b in zip(eps, eps[1:]))


def test_sweep_cauchy_energy_grows_with_delta(dilation_records):
    rep = verify_cauchy_decay(dilation_records)
    assert rep.n_points == 8
    assert rep.spearman_delta >= 0.9


def test_sweep_rejects_inadmissible_inclusion(domain, plate, couple):
    setup = SweepSetup(domain, plate, couple, resolution=16)
    with pytest.raises(InvalidInputError, match="a-priori"):
        sweep(BASE, [StarInclusion.disc((0.0, 0.0), 1.0)], setup)


def test_sweep_flags_failed_pair_and_continues(domain, plate, couple, monkeypatch):
    real = sweep_module._solve

    def failing(dom, inc, pl, cp, res):
        if inc.radii[0] > 0.45:
            raise SolverError("synthetic failure")
        return real(dom, inc, pl, cp, res)

    monkeypatch.setattr(sweep_module, "_solve", failing)
    setup = SweepSetup(domain, plate, couple, resolution=16)
    recs = sweep(BASE, dilation_family(BASE, [0.02, 0.1]), setup)
    assert recs[0].ok and not recs[1].ok
    assert "synthetic failure" in recs[1].flag and np.isnan(recs[1].epsilon)


def test_sweep_normalized_misfit_invariant_under_couple_scaling(domain, plate, couple):
    pert = dilation_family(BASE, [0.05])
    a = sweep(BASE, pert, SweepSetup(domain, plate, couple, resolution=16))[0]
    b = sweep(BASE, pert, SweepSetup(domain, plate, couple.scaled(3.0), resolution=16))[0]
    assert b.epsilon == pytest.approx(3.0 * a.epsilon, rel=1e-8)
    assert b.epsilon_norm == pytest.approx(a.epsilon_norm, rel=1e-8)
    assert b.L1 == pytest.approx(9.0 * a.L1, rel=1e-8) and b.L2 == pytest.approx(9.0 * a.L2, rel=1e-8)


def test_sweep_parallel_matches_serial(domain, plate, couple):
    pert = dilation_family(BASE, [0.03, 0.09])
    serial = sweep(BASE, pert, SweepSetup(domain, plate, couple, resolution=16, jobs=1))
    parallel = sweep(BASE, pert, SweepSetup(domain, plate, couple, resolution=16, jobs=2))
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]


def test_record_invariants():
    with pytest.raises(InvalidInputError):
        StabilityRecord(0, 0.1, 0.1, 0.1, 0.1, 0.2, 0, 0, 16, 0)
    with pytest.raises(InvalidInputError):
        StabilityRecord(0, -0.1, 0.1, 0.1, 0.2, 0.1, 0, 0, 16, 0)
    flagged = StabilityRecord(0, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan, 16, 0, flag="failed")
    assert not flagged.ok


def test_normalized_epsilon_requires_nonzero_couple(domain, plate):
    zero = CoupleField(domain.boundary, np.zeros(64), np.zeros(64))
    with pytest.raises(UndefinedRatioError):
        normalized_epsilon(1.0, plate, zero, 1.0)


# ---------------------------------------------------------------- log-law fit


def planted(C, eta, n=8):
    eps = np.logspace(-12, -1.5, n)
    return [(e, C * abs(np.log(e)) ** (-eta)) for e in eps]


@pytest.mark.parametrize("C,eta", [(2.0, 0.5), (0.3, 1.7), (5.0, 0.1)])
def test_fit_recovers_planted_law(C, eta):
    fit = fit_log_law(planted(C, eta))
    assert fit.C_fit == pytest.approx(C, rel=1e-6)
    assert fit.eta_fit == pytest.approx(eta, abs=1e-6)
    assert fit.r2 == pytest.approx(1.0, abs=1e-9)
    assert fit.eta_ci[0] <= fit.eta_fit <= fit.eta_ci[1]


def test_fit_constant_delta_gives_zero_eta():
    fit = fit_log_law([(e, 0.1) for e in np.logspace(-8, -2, 6)])
    assert fit.eta_fit == pytest.approx(0.0, abs=1e-12)
    assert fit.r2 == 1.0


def test_fit_excludes_out_of_range_records_with_warning():
    data = planted(2.0, 0.5) + [(1.5, 0.1), (0.0, 0.1)]
    with pytest.warns(UserWarning, match="excluded 2"):
        fit = fit_log_law(data)
    assert fit.excluded == [8, 9] and fit.n_points == 8
    assert fit.eta_fit == pytest.approx(0.5, abs=1e-6)


def test_fit_needs_five_points():
    with pytest.raises(UnderdeterminedError):
        fit_log_law(planted(2.0, 0.5, n=4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(UnderdeterminedError):
            fit_log_law(planted(2.0, 0.5, n=4) + [(2.0, 1.0)] * 3)


def test_fit_accepts_records_and_dicts():
    recs = [StabilityRecord(k, 1.0, e, d, d, d, 0.0, 0.0, 16, 0) for k, (e, d) in enumerate(planted(2.0, 0.5))]
    a = fit_log_law(recs)
    b = fit_log_law([r.to_dict() for r in recs])
    assert a.to_dict() == b.to_dict()
    assert a.eta_fit == pytest.approx(0.5, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.0, 3.0))
def test_fit_round_trip_property(C, eta):
    fit = fit_log_law(planted(C, eta))
    assert fit.C_fit == pytest.approx(C, rel=1e-6)
    assert fit.eta_fit == pytest.approx(eta, abs=1e-6)


# ---------------------------------------------------------------- three spheres


def test_theta0_example():
    assert theta0(1.0, 1.0, 2.0, 4.0) == pytest.approx(0.25, abs=1e-15)


def test_theta0_matches_direct_formula_on_grid():
    rng = np.random.default_rng(0)
    r1 = rng.uniform(0.01, 1.0, 100)
    r3 = r1 * rng.uniform(1.5, 10.0, 100)
    r2 = r1 + (r3 - r1) * rng.uniform(0.1, 0.9, 100)
    c0 = rng.uniform(0.5, 1.0, 100)
    direct = np.array([np.log(c * c_ / b) / (2 * np.log(c_ / a)) for a, b, c_, c in zip(r1, r2, r3, c0)])
    np.testing.assert_allclose(theta0(c0, r1, r2, r3), direct, rtol=1e-12, atol=1e-15)


def test_theta0_monotone_in_r2_and_c0():
    r2 = np.linspace(1.1, 3.9, 50)
    assert np.all(np.diff(theta0(0.9, 1.0, r2, 4.0)) < 0)
    c0 = np.linspace(0.3, 1.0, 50)
    assert np.all(np.diff(theta0(c0, 1.0, 2.0, 4.0)) > 0)


@pytest.mark.parametrize("args", [(0.9, 0.0, 1.0, 2.0), (0.9, 2.0, 1.0, 2.0), (0.0, 1.0, 2.0, 4.0)])
def test_theta0_rejects_bad_parameters(args):
    with pytest.raises(InvalidInputError):
        theta0(*args)


def constant_hessian_field(region=None, H=((1.0, 0.3), (0.3, -0.5))):
    H = np.array(H)
    return FunctionField(
        lambda p: 0.5 * np.einsum("ij,mi,mj->m", H, p, p),
        lambda p: p @ H,
        lambda p: np.tile(H, (len(p), 1, 1)),
        region if region is not None else shapely.box(-1, -1, 1, 1),
    )


def power_hessian_field(m):
    """A field whose Hessian has Frobenius norm ``|x|^m sqrt(2)``."""
    return FunctionField(
        lambda p: np.zeros(len(p)),
        lambda p: np.zeros((len(p), 2)),
        lambda p: np.linalg.norm(p, axis=1)[:, None, None] ** m * np.eye(2),
        shapely.box(-1, -1, 1, 1),
    )


def test_three_spheres_constant_hessian_closed_form():
    f = constant_hessian_field()
    r1, r2, r3 = 0.1, 0.2, 0.4
    rep = verify_three_spheres(f, (0, 0), r1, r2, r3, c0_trial=1.0, r_bar=0.9)
    th = np.log(r3 / r2) / (2 * np.log(r3 / r1))
    assert rep.theta0 == pytest.approx(th, rel=1e-14)
    assert rep.ratio == pytest.approx(r2**2 / (r1 ** (2 * th) * r3 ** (2 * (1 - th))), rel=1e-10)
    assert rep.nested and not rep.flagged


def test_three_spheres_constant_trial_factor():
    f = constant_hessian_field()
    rep = verify_three_spheres(f, (0, 0), 0.1, 0.2, 0.4, c0_trial=1.0, r_bar=0.9, C_trial=1.5)
    assert rep.Q == pytest.approx(rep.ratio * 4.0**-1.5, rel=1e-14)


def test_three_spheres_on_solution(solution32):
    rep = verify_three_spheres(solution32, (0.0, 0.9), 0.05, 0.1, 0.2)
    assert rep.nested and np.isfinite(rep.ratio) and rep.ratio > 0


def test_three_spheres_errors(solution32):
    with pytest.raises(InvalidInputError):
        verify_three_spheres(solution32, (0.0, 0.9), 0.2, 0.1, 0.05)
    with pytest.raises(InvalidGeometryError):
        verify_three_spheres(solution32, (0.0, 0.9), 0.05, 0.1, 0.2, r_bar=1.0)
    with pytest.raises(InvalidInputError):
        # clearance at (0, 0.9) is 0.5, the gap to the inclusion
        verify_three_spheres(solution32, (0.0, 0.9), 0.05, 0.3, 0.48)


def test_three_spheres_vanishing_field_flagged():
    rep = verify_three_spheres(constant_hessian_field(H=((0, 0), (0, 0))), (0, 0), 0.1, 0.2, 0.4, 1.0, 0.9)
    assert rep.flagged and "vanishing" in rep.notes[0]


# ---------------------------------------------------------------- vanishing rates


def test_interior_exponent_constant_hessian():
    rep = verify_fvr_interior(constant_hessian_field(), (0, 0), [0.05, 0.1, 0.2, 0.4], cbar0_trial=1.0)
    assert rep.exponent == pytest.approx(2.0, abs=1e-9)
    assert rep.stabilized and rep.finite and not rep.notes


@pytest.mark.parametrize("m", [1, 2, 3])
def test_interior_exponent_power_field(m):
    rep = verify_fvr_interior(power_hessian_field(m), (0, 0), [0.05, 0.1, 0.2, 0.4], cbar0_trial=1.0)
    # polar integration: int_0^r 2 t^(2m) 2 pi t dt is proportional to r^(2m + 2)
    assert rep.exponent == pytest.approx(2 + 2 * m, abs=1e-3)


def test_interior_exponent_on_solution(solution32):
    rep = verify_fvr_interior(solution32, (0.0, 0.9), [0.025, 0.05, 0.1, 0.2])
    assert rep.finite and 1.5 < rep.exponent < 40


def test_interior_ladder_leaving_region(solution32):
    with pytest.raises(InvalidGeometryError):
        verify_fvr_interior(solution32, (0.0, 0.9), [0.1, 0.6])
    with pytest.raises(InvalidInputError):
        verify_fvr_interior(solution32, (0.0, 0.9), [0.2, 0.1])


def half_plane_field(scale=1.0):
    """``w = x2^2`` on the upper half plane: the squared distance to the line ``x2 = 0``."""
    return FunctionField(
        lambda p: scale * p[:, 1] ** 2,
        lambda p: scale * np.column_stack([np.zeros(len(p)), 2 * p[:, 1]]),
        lambda p: scale * np.tile(np.diag([0.0, 2.0]), (len(p), 1, 1)),
        shapely.box(-2, 0, 2, 2),
    )


def test_boundary_exponent_half_plane_model():
    radii = [0.02, 0.05, 0.1, 0.2]
    rep = verify_fvr_boundary(half_plane_field(), (0, 0), radii, cbar_trial=0.25, r0=1.0)
    # oracle: int over the half disc of x2^4 is pi r^6 / 16
    np.testing.assert_allclose(rep.integrals, np.pi * np.array(radii) ** 6 / 16, rtol=1e-3)
    assert rep.exponent == pytest.approx(6.0, abs=0.01)
    assert rep.B == pytest.approx(4.0**6, rel=1e-2)


def test_boundary_zero_field_flagged():
    rep = verify_fvr_boundary(half_plane_field(0.0), (0, 0), [0.05, 0.1], r0=1.0)
    assert rep.flagged and rep.B is None


def test_boundary_point_must_lie_on_inclusion(solution32):
    with pytest.raises(InvalidInputError):
        verify_fvr_boundary(solution32, (0.0, 0.5), [0.02, 0.05])
    with pytest.raises(InvalidInputError):
        verify_fvr_boundary(solution32, (0.0, 0.4), [0.1, 0.3])


def test_boundary_exponent_on_clamped_solution(solution32):
    rep = verify_fvr_boundary(solution32, (0.0, 0.4), [0.02, 0.04, 0.08, 0.16])
    assert 5.5 <= rep.exponent <= 40
    # the curved boundary lowers the slope on large discs; it tends to 6 as r shrinks
    assert rep.local[0] > rep.local[-1] and rep.local[0] == pytest.approx(6.0, abs=0.2)
    assert rep.B > 1


# ---------------------------------------------------------------- smallness profile


def test_lps_positive_with_finite_envelope(solution32, couple):
    rep = verify_lps(solution32, couple, [0.05, 0.1, 0.2, 0.4], max_centres=16)
    assert rep.positive and set(rep.profile) == {0.05, 0.1, 0.2, 0.4}
    assert rep.envelope["finite"] and 0.5 <= rep.envelope["B_trial"] <= 4.0


def test_lps_fixed_centres_nondecreasing(solution32, couple):
    centres = np.array([[0.0, 1.0], [-0.9, -0.5], [1.0, 0.0]])
    rep = verify_lps(solution32, couple, [0.05, 0.1, 0.2, 0.3], centres=centres)
    vals = list(rep.profile.values())
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_lps_skips_radius_with_empty_erosion(solution32, couple):
    rep = verify_lps(solution32, couple, [0.1, 1.2], max_centres=8)
    assert list(rep.profile) == [0.1] and "skipped" in rep.notes[0]


def test_lps_zero_couple_rejected(solution32, domain):
    zero = CoupleField(domain.boundary, np.zeros(64), np.zeros(64))
    with pytest.raises(UndefinedRatioError):
        verify_lps(solution32, zero, [0.1])


# ---------------------------------------------------------------- purity and Cauchy report


def test_verifications_are_pure(solution32, couple):
    calls = [
        lambda: verify_three_spheres(solution32, (0.0, 0.9), 0.05, 0.1, 0.2).to_dict(),
        lambda: verify_fvr_interior(solution32, (0.0, 0.9), [0.05, 0.1, 0.2]).to_dict(),
        lambda: verify_fvr_boundary(solution32, (0.0, 0.4), [0.05, 0.1, 0.2]).to_dict(),
        lambda: verify_lps(solution32, couple, [0.1, 0.2], max_centres=8).to_dict(),
    ]
    coef = solution32.coef.copy()
    for call in calls:
        assert call() == call()
    np.testing.assert_array_equal(coef, solution32.coef)


def test_cauchy_report_needs_three_records(dilation_records):
    with pytest.raises(InvalidInputError):
        verify_cauchy_decay(dilation_records[:2])


# ---------------------------------------------------------------- files


def test_records_round_trip(tmp_path, dilation_records):
    path = write_records(tmp_path / "sweep.csv", dilation_records)
    back = read_records(path)
    assert [r.to_dict() for r in back] == [r.to_dict() for r in dilation_records]


def test_read_minimal_records_and_errors(tmp_path):
    path = tmp_path / "min.csv"
    path.write_text("epsilon_norm,delta\n" + "".join(f"{float(e)!r},{float(d)!r}\n" for e, d in planted(2.0, 0.5)))
    fit = fit_log_law(read_records(path))
    assert fit.eta_fit == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(ConfigError):
        read_records(tmp_path / "missing.csv")
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        read_records(tmp_path / "bad.csv")
    (tmp_path / "nan.csv").write_text("epsilon_norm,delta\n0.1,abc\n")
    with pytest.raises(ConfigError, match="column delta"):
        read_records(tmp_path / "nan.csv")


def test_gnuplot_script_includes_fit(tmp_path):
    text = write_gnuplot(tmp_path / "p.gp", "sweep.csv", {"C_fit": 2.0, "eta_fit": 0.5}).read_text()
    assert "plot 'sweep.csv'" in text and "C * x**(-eta)" in text and "eta = 0.5" in text
    assert "C * x" not in write_gnuplot(tmp_path / "q.gp", "sweep.csv").read_text()
