"""Local quantities of solved fields: three-spheres ratios, vanishing rates, smallness profiles."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import shapely
from scipy import stats

from ..errors import InvalidGeometryError, InvalidInputError, UndefinedRatioError
from ..solver.norms import _field_region, disc, disc_integral, h_minus_half_surrogate, integrate

DEFAULT_C0 = 0.9
DEFAULT_CBAR = 0.25
DEFAULT_CBAR0 = 0.25
DEFAULT_S = 1.5
EXPONENT_CAP = 40.0
VANISHING = 1e-300


def theta0(c0, r1, r2, r3):
    """Three-spheres exponent ``log(c0 r3 / r2) / (2 log(r3 / r1))``.

    Raises
    ------
    InvalidInputError
        Unless ``0 < r1 < r3`` and ``c0, r2 > 0``.
    """
    c0, r1, r2, r3 = (np.asarray(v, dtype=float) for v in (c0, r1, r2, r3))
    if np.any(r1 <= 0) or np.any(r3 <= r1) or np.any(r2 <= 0) or np.any(c0 <= 0):
        raise InvalidInputError("three-spheres exponent needs 0 < r1 < r3 and positive c0, r2")
    out = np.log(c0 * r3 / r2) / (2.0 * np.log(r3 / r1))
    return float(out) if out.ndim == 0 else out


def _region(solution):
    return _field_region(solution)


def _clearance(solution, x):
    """Distance from ``x`` to the boundary of the field's region (zero outside it)."""
    region = _region(solution)
    p = shapely.Point(*x)
    if not region.contains(p):
        return 0.0
    return float(region.boundary.distance(p))


def _disc_integrals(solution, x, radii, quantity, require_inside=True):
    return np.array([disc_integral(solution, x, r, quantity, require_inside=require_inside) for r in radii])


@dataclass
class ThreeSpheresReport:
    """Disc integrals of ``|D2 w|^2`` and the interpolation ratio.

    ``ratio = I2 / (I1^theta0 I3^(1 - theta0))`` is dimensionless; ``Q`` is
    ``ratio * (r3 / r1)^(-C_trial)``.
    """

    center: tuple
    radii: tuple
    c0_trial: float
    theta0: float
    integrals: tuple
    ratio: float
    Q: float
    nested: bool
    flagged: bool
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def verify_three_spheres(solution, x, r1, r2, r3, c0_trial=DEFAULT_C0, r_bar=None, C_trial=0.0):
    """Three-spheres quantities of ``|D2 w|^2`` at an interior point.

    ``r_bar`` defaults to the distance from ``x`` to the boundary of the
    field's region.

    Raises
    ------
    InvalidInputError
        Unless ``r1 < r2 < r3 < c0_trial * r_bar``.
    InvalidGeometryError
        If ``B_{r_bar}(x)`` leaves the region.
    """
    if not (0 < r1 < r2 < r3):
        raise InvalidInputError(f"radii must satisfy 0 < r1 < r2 < r3, got ({r1}, {r2}, {r3})")
    x = tuple(float(v) for v in x)
    clear = _clearance(solution, x)
    if r_bar is None:
        r_bar = clear
    if r_bar > clear * (1 + 1e-9) or r_bar <= 0:
        raise InvalidGeometryError(f"disc of radius {r_bar:.4g} at {x} leaves the region (clearance {clear:.4g})")
    if not r3 < c0_trial * r_bar:
        raise InvalidInputError(f"r3 = {r3:.4g} must be below c0 * r_bar = {c0_trial * r_bar:.4g}")
    th = theta0(c0_trial, r1, r2, r3)
    I1, I2, I3 = _disc_integrals(solution, x, (r1, r2, r3), "hess2")
    notes = []
    nested = bool(I1 <= I2 * (1 + 1e-12) and I2 <= I3 * (1 + 1e-12))
    if I1 <= VANISHING * max(I3, 1.0) or I3 == 0:
        notes.append("vanishing field: inner integral is zero")
        ratio = float("inf")
    else:
        ratio = float(I2 / (I1**th * I3 ** (1 - th)))
    Q = ratio * (r3 / r1) ** (-C_trial)
    return ThreeSpheresReport(x, (r1, r2, r3), c0_trial, th, (float(I1), float(I2), float(I3)), ratio, Q, nested,
                              bool(notes), notes)


@dataclass
class ExponentReport:
    """Power-law fit ``I(r) ~ r^p`` on a ladder of radii.

    ``local`` holds the slopes between consecutive radii; ``exponent`` is
    the least-squares slope over the whole ladder.
    """

    center: tuple
    radii: tuple
    integrals: tuple
    local: tuple
    exponent: float
    r2: float
    stabilized: bool
    finite: bool
    flagged: bool
    B: float | None = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _power_fit(x, radii, values, notes):
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        notes.append("vanishing field: a disc integral is zero")
        return ExponentReport(tuple(x), tuple(radii), tuple(values), (), float("nan"), float("nan"), False, False,
                              True, None, notes)
    lr, lv = np.log(radii), np.log(values)
    local = np.diff(lv) / np.diff(lr)
    fit = stats.linregress(lr, lv)
    p = float(fit.slope)
    stabilized = bool(len(local) >= 2 and abs(local[-1] - local[-2]) <= 0.1 * max(abs(local[-1]), 1.0))
    return ExponentReport(tuple(x), tuple(float(r) for r in radii), tuple(float(v) for v in values),
                          tuple(float(v) for v in local), p, float(fit.rvalue**2), stabilized,
                          bool(np.isfinite(p) and p <= EXPONENT_CAP), False, None, notes)


def _check_ladder(radii):
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) < 2 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise InvalidInputError("radii ladder must be at least two increasing positive radii")
    return radii


def verify_fvr_interior(solution, x, radii, cbar0_trial=DEFAULT_CBAR0):
    """Growth exponent of ``r -> int_{B_r(x)} |D2 w|^2`` at an interior point.

    A field with constant Hessian gives exponent 2.  A ladder whose largest
    radius exceeds ``cbar0_trial`` times the clearance of ``x`` is noted.

    Raises
    ------
    InvalidGeometryError
        If a disc of the ladder leaves the region.
    """
    radii = _check_ladder(radii)
    x = tuple(float(v) for v in x)
    clear = _clearance(solution, x)
    if radii[-1] > clear:
        raise InvalidGeometryError(f"disc of radius {radii[-1]:.4g} at {x} leaves the region (clearance {clear:.4g})")
    notes = []
    if radii[-1] > cbar0_trial * clear:
        notes.append(f"largest radius exceeds {cbar0_trial:g} times the clearance {clear:.4g}")
    vals = _disc_integrals(solution, x, radii, "hess2")
    return _power_fit(x, radii, vals, notes)


def verify_fvr_boundary(solution, x, radii, cbar_trial=DEFAULT_CBAR, C_trial=0.0, r0=None, tol=None):
    """Growth exponent of ``r -> int_{B_r(x) minus D} w^2`` at a point of the inclusion boundary.

    Also returns the instance constant ``B = I(r0) / I(cbar r0) * (r0 / (cbar r0))^C_trial``
    comparing the outer disc of radius ``r0`` with the middle disc of radius
    ``cbar r0``.  For a clamped inclusion ``w = O(dist^2)`` near ``x`` and the
    exponent is about 6.

    Raises
    ------
    InvalidInputError
        If ``x`` is farther than ``tol`` from the inclusion boundary or the
        ladder reaches ``cbar r0``.
    """
    radii = _check_ladder(radii)
    x = tuple(float(v) for v in x)
    if r0 is None:
        r0 = solution.domain.r0
    region = _region(solution)
    inc = getattr(solution, "inclusion", None)
    if inc is not None:
        tol = tol if tol is not None else 1e-3 * r0
        gap = shapely.Point(*x).distance(inc.polygon(4096).exterior)
        if gap > tol:
            raise InvalidInputError(f"point {x} is {gap:.3g} away from the inclusion boundary")
    r2 = cbar_trial * r0
    if radii[-1] > r2 * (1 + 1e-12):
        raise InvalidInputError(f"ladder radius {radii[-1]:.4g} exceeds cbar * r0 = {r2:.4g}")
    vals = np.array([integrate(solution, disc(x, r), ("w2",))["w2"] for r in radii])
    rep = _power_fit(x, radii, vals, [])
    if not rep.flagged:
        outer = integrate(solution, disc(x, r0), ("w2",))["w2"]
        middle = integrate(solution, disc(x, r2), ("w2",))["w2"]
        if not disc(x, r0).difference(region).is_empty:
            rep.notes.append("outer disc is clipped by the region")
        rep.B = float(outer / middle * (r0 / r2) ** C_trial) if middle > 0 else float("inf")
    return rep


@dataclass
class LPSReport:
    """Smallest normalized disc energy over sampled centres for each radius.

    ``profile`` maps radius to ``m(rho)``; ``envelope`` is the best
    exponential fit ``log m = a - b (r0 / rho)^B_trial`` over the trial
    exponents.
    """

    profile: dict
    positive: bool
    n_centres: dict
    envelope: dict
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "profile": {f"{k:.6g}": v for k, v in self.profile.items()},
            "positive": self.positive,
            "n_centres": {f"{k:.6g}": v for k, v in self.n_centres.items()},
            "envelope": self.envelope,
            "notes": list(self.notes),
        }


def lps_centres(solution, rho, s_trial=DEFAULT_S, max_centres=64):
    """Lattice of centres in the region eroded by ``s_trial * rho``.

    The lattice spacing is ``rho`` or coarser so that at most about
    ``max_centres`` centres are returned.
    """
    region = _region(solution)
    eroded = region.buffer(-s_trial * rho, quad_segs=32)
    if eroded.is_empty:
        return np.zeros((0, 2))
    spacing = max(rho, np.sqrt(eroded.area / max_centres))
    xmin, ymin, xmax, ymax = eroded.bounds
    X, Y = np.meshgrid(np.arange(xmin + 0.5 * spacing, xmax, spacing), np.arange(ymin + 0.5 * spacing, ymax, spacing),
                       indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    keep = shapely.contains_xy(eroded, pts[:, 0], pts[:, 1])
    pts = pts[keep]
    if len(pts) == 0:
        c = eroded.representative_point()
        pts = np.array([[c.x, c.y]])
    return pts


def verify_lps(solution, couple, rhos, s_trial=DEFAULT_S, centres=None, max_centres=64,
               B_trials=np.linspace(0.5, 4.0, 15), r0=None):
    """Profile ``rho -> m(rho) = min_x B_ref^2 int_{B_rho(x)} |D2 w|^2 / (r0^2 ||M||^2)``.

    Centres are lattice points of the region eroded by ``s_trial * rho``
    unless ``centres`` is given (then the same centres serve every radius,
    which makes ``m`` nondecreasing).  A radius for which the eroded region
    is empty is skipped with a note.

    Raises
    ------
    UndefinedRatioError
        If the couple field has zero norm.
    """
    rhos = np.asarray(rhos, dtype=float)
    if r0 is None:
        r0 = solution.domain.r0
    mnorm = h_minus_half_surrogate(couple)
    if mnorm == 0:
        raise UndefinedRatioError("couple field has zero norm")
    B_ref = solution.plate.reference_stiffness
    norm = B_ref**2 / (r0**2 * mnorm**2)
    profile, counts, notes = {}, {}, []
    for rho in rhos:
        pts = np.asarray(centres, dtype=float) if centres is not None else lps_centres(solution, rho, s_trial, max_centres)
        if centres is None and len(pts) == 0:
            notes.append(f"rho = {rho:.4g}: eroded region is empty, skipped")
            continue
        vals = [disc_integral(solution, p, rho, "hess2") for p in pts]
        profile[float(rho)] = float(min(vals) * norm)
        counts[float(rho)] = int(len(pts))
    positive = bool(profile) and all(v > 0 for v in profile.values())
    envelope = _envelope(profile, r0, B_trials) if positive and len(profile) >= 2 else {}
    return LPSReport(profile, positive, counts, envelope, notes)


def _envelope(profile, r0, B_trials):
    rho = np.array(list(profile))
    lm = np.log(np.array(list(profile.values())))
    best = None
    for B in B_trials:
        t = (r0 / rho) ** B
        if np.ptp(t) == 0:
            continue
        fit = stats.linregress(t, lm)
        r2 = float(fit.rvalue**2) if len(t) > 2 else 1.0
        cand = {"B_trial": float(B), "a": float(fit.intercept), "b": float(-fit.slope), "r2": r2,
                "finite": bool(np.isfinite(fit.slope) and np.isfinite(fit.intercept))}
        if best is None or cand["r2"] > best["r2"]:
            best = cand
    return best or {}


@dataclass
class CauchyReport:
    """Trend of the Cauchy-continuation energies over a sweep.

    ``spearman_delta`` correlates ``L = max(L1, L2)`` with ``delta``;
    ``spearman_log`` correlates ``log L`` with ``log|log eps|`` (negative when
    ``L`` grows with the misfit).  ``sigma_fit`` is the slope of
    ``log L = a - sigma log|log eps|``.
    """

    n_points: int
    spearman_delta: float
    spearman_log: float
    sigma_fit: float
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def verify_cauchy_decay(records):
    """Correlation report for the energies ``L_i`` stored in sweep records.

    Raises
    ------
    InvalidInputError
        If fewer than three usable records remain.
    """
    rows = [r for r in records if not getattr(r, "flag", "")]
    notes = []
    L = np.array([max(r.L1, r.L2) for r in rows], dtype=float)
    eps = np.array([r.epsilon_norm for r in rows], dtype=float)
    delta = np.array([r.delta for r in rows], dtype=float)
    ok = (L > 0) & (eps > 0) & (eps < 1)
    if (~ok).any():
        notes.append(f"{int((~ok).sum())} records with zero energy or misfit outside (0, 1) left out of the log trend")
    if len(rows) < 3:
        raise InvalidInputError("Cauchy-decay report needs at least three records")
    rho_delta = float(stats.spearmanr(L, delta).statistic)
    if ok.sum() >= 3:
        x = np.log(np.abs(np.log(eps[ok])))
        y = np.log(L[ok])
        rho_log = float(stats.spearmanr(y, x).statistic)
        sigma = float(-stats.linregress(x, y).slope)
    else:
        rho_log = sigma = float("nan")
    return CauchyReport(len(rows), rho_delta, rho_log, sigma, notes)
