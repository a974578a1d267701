"""Integrals of solved fields over regions: energies, Hessian norms, ``H^2`` norms.

Regions are ``None`` (the whole computational region), a shapely geometry
(clipped exactly against the cells), or any object with a ``contains(pts)``
method such as :class:`platelab.geometry.RegionMask` (point lookup on the
quadrature nodes of the whole region).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import shapely

from ..errors import InvalidGeometryError, UndefinedRatioError
from .quadrature import disc_polygon, triangle_rule

QUANTITIES = ("area", "w2", "grad2", "hess2", "energy")
RATIO_FLAG = 1e4


@dataclass
class FunctionField:
    """Analytic field on a planar region, with the evaluation protocol of a solution.

    ``w``, ``grad`` and ``hess`` map an ``(m, 2)`` array of points to arrays of
    shapes ``(m,)``, ``(m, 2)`` and ``(m, 2, 2)``.  ``region`` is a shapely
    geometry on which the field lives; ``plate`` supplies ``B`` and ``nu``
    for the energy integrand.
    """

    w: object
    grad: object
    hess: object
    region: object
    plate: object = None

    def evaluate(self, pts, inward=None, mask_inclusion=True):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return self.w(pts), self.grad(pts), self.hess(pts)

    def region_polygon(self):
        return self.region


def _field_region(field_):
    if hasattr(field_, "grid") and hasattr(field_.grid, "region_polygon"):
        return field_.grid.region_polygon()
    return field_.region_polygon()


def region_rule(solution, region=None):
    """Quadrature rule ``(pts, w)`` over ``region`` intersected with the field's region.

    For spline solutions, cells lying inside a shapely region reuse the
    solver's rule; cells crossing the region boundary are clipped exactly
    and integrated with a positive triangle rule.
    """
    if not hasattr(solution, "grid") or not hasattr(solution.grid, "quadrature"):
        geom = _field_region(solution)
        if region is not None:
            geom = shapely.intersection(geom, region)
        pts, w = triangle_rule(geom) if not geom.is_empty else (np.zeros((0, 2)), np.zeros(0))
        return pts, w
    pg = solution.grid
    if region is None:
        rule = pg.quadrature()
        return rule.pts, rule.w
    if not isinstance(region, shapely.Geometry):
        rule = pg.quadrature()
        keep = np.asarray(region.contains(rule.pts), dtype=bool)
        return rule.pts[keep], rule.w[keep]
    if region.is_empty:
        return np.zeros((0, 2)), np.zeros(0)
    g = pg.grid
    xmin, ymin, xmax, ymax = region.bounds
    i0, j0 = g.cell_index(np.array([xmin, ymin]))
    i1, j1 = g.cell_index(np.array([xmax, ymax]))
    I, J = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    boxes = g.boxes(I, J)
    shapely.prepare(region)
    inside = shapely.contains(region, boxes)
    touching = shapely.intersects(region, boxes) & ~inside
    cells = I * g.ny + J
    rule = pg.quadrature(cells[inside])
    pts, wts = [rule.pts], [rule.w]
    if touching.any():
        domain_geom = pg.region_polygon()
        clipped = shapely.intersection(shapely.intersection(boxes[touching], region), domain_geom)
        for geom in clipped:
            if geom.is_empty or geom.area == 0:
                continue
            p_, w_ = triangle_rule(geom)
            pts.append(p_)
            wts.append(w_)
    return np.concatenate(pts), np.concatenate(wts)


def integrate(solution, region=None, quantities=QUANTITIES):
    """Integrals of ``1``, ``w^2``, ``|grad w|^2``, ``|D2 w|^2`` and ``P D2w : D2w``.

    Returns a dict keyed by the requested quantity names.
    """
    pts, wts = region_rule(solution, region)
    out = {q: 0.0 for q in quantities}
    if len(wts) == 0:
        return out
    w, gw, H = solution.evaluate(pts, mask_inclusion=False)
    if "area" in out:
        out["area"] = float(np.sum(wts))
    if "w2" in out:
        out["w2"] = float(np.sum(wts * w**2))
    if "grad2" in out:
        out["grad2"] = float(np.sum(wts * np.sum(gw**2, axis=1)))
    if "hess2" in out:
        out["hess2"] = float(np.sum(wts * np.sum(H**2, axis=(1, 2))))
    if "energy" in out:
        B, nu = solution.plate.stiffness(pts)
        tr = H[:, 0, 0] + H[:, 1, 1]
        dens = B * ((1 - nu) * np.sum(H**2, axis=(1, 2)) + nu * tr**2)
        out["energy"] = float(np.sum(wts * dens))
    return out


def energy(solution, region=None):
    """``int_region P D2w : D2w``."""
    return integrate(solution, region, ("energy",))["energy"]


def hessian_l2(solution, region=None):
    """``int_region |D2 w|^2`` (Frobenius norm)."""
    return integrate(solution, region, ("hess2",))["hess2"]


def displacement_l2(solution, region=None):
    """``int_region w^2``."""
    return integrate(solution, region, ("w2",))["w2"]


def h2_norm(solution, r0=None, region=None):
    """Scale-normalized ``H^2`` norm.

    ``||w|| = r0^-1 (int w^2 + r0^2 int |grad w|^2 + r0^4 int |D2 w|^2)^(1/2)``,
    which has the units of ``w`` and is homogeneous under rescaling of lengths.
    """
    if r0 is None:
        r0 = solution.domain.r0
    q = integrate(solution, region, ("w2", "grad2", "hess2"))
    return float(np.sqrt(q["w2"] + r0**2 * q["grad2"] + r0**4 * q["hess2"]) / r0)


def disc(center, radius, n=256):
    """Area-preserving polygon of a disc, used as an integration region."""
    return disc_polygon(center, radius, n)


def disc_integral(solution, center, radius, quantity="hess2", n=256, require_inside=False):
    """Integral of one quantity over ``B_radius(center)`` intersected with the field's region.

    Raises
    ------
    InvalidGeometryError
        If ``require_inside`` and the disc is not contained in the region.
    """
    d = disc(center, radius, n)
    if require_inside:
        region = _field_region(solution)
        if not region.buffer(1e-12 * radius).contains(d):
            raise InvalidGeometryError(f"disc of radius {radius:.4g} at {tuple(center)} leaves the region")
    return integrate(solution, d, (quantity,))[quantity]


def h_minus_half_surrogate(couple):
    """Fourier surrogate of ``||M||_{H^-1/2}`` of a couple field.

    Each Cartesian component is expanded in arc-length Fourier modes ``m_k``
    (normalized so that ``sum |m_k|^2 = int |M|^2``) and mode ``k`` is
    weighted by ``(1 + xi_k^2)^(-1/2)`` with ``xi_k = 2 pi k / |dOmega|``.
    """
    return couple.h_minus_half()


@dataclass
class EnergyEstimateReport:
    """Ratios ``B_ref ||w||_H2 / (r0^2 ||M||)`` along a refinement sequence."""

    resolutions: list
    ratios: list
    h2_norms: list
    couple_norm: float
    flagged: bool
    notes: list = field(default_factory=list)

    @property
    def last_change(self):
        if len(self.ratios) < 2:
            return float("nan")
        return abs(self.ratios[-1] - self.ratios[-2]) / abs(self.ratios[-1])

    @property
    def stable(self):
        return len(self.ratios) >= 2 and self.last_change < 0.1

    def to_dict(self):
        return {
            "resolutions": list(self.resolutions),
            "ratios": list(self.ratios),
            "h2_norms": list(self.h2_norms),
            "couple_norm": self.couple_norm,
            "flagged": self.flagged,
            "last_change": self.last_change,
            "notes": list(self.notes),
        }


def verify_energy_estimate(solutions, couple=None):
    """Energy-estimate ratio for one solution or a refinement sequence.

    The ratio is ``B_ref ||w||_H2 / (r0^2 ||M||_surrogate)`` where ``B_ref``
    is the reference bending stiffness of the plate, making the ratio
    dimensionless.  It is flagged when any ratio exceeds ``1e4``.

    Raises
    ------
    UndefinedRatioError
        If the couple norm vanishes.
    """
    if not isinstance(solutions, (list, tuple)):
        solutions = [solutions]
    couple = couple if couple is not None else solutions[0].couple
    mnorm = h_minus_half_surrogate(couple)
    if mnorm == 0:
        raise UndefinedRatioError("couple field has zero norm: energy ratio undefined")
    res, ratios, norms, notes = [], [], [], []
    for sol in solutions:
        r0 = sol.domain.r0
        nrm = h2_norm(sol, r0)
        ratio = sol.plate.reference_stiffness * nrm / (r0**2 * mnorm)
        res.append(sol.grid.resolution)
        norms.append(nrm)
        ratios.append(float(ratio))
        if ratio > RATIO_FLAG:
            notes.append(f"ratio {ratio:.3g} exceeds {RATIO_FLAG:g} at resolution {sol.grid.resolution}")
    return EnergyEstimateReport(res, ratios, norms, float(mnorm), bool(notes), notes)


def work_identity(solution):
    """Relative gap between the boundary work ``l(w)`` and ``a(w, w)``.

    For the Galerkin solution ``a(w, w) = l(w)``, so the stored strain energy
    ``(1/2) a(w, w)`` is half the work of the data.
    """
    from .solve import _system

    info = _system(solution.grid, solution.plate, factor=False)
    u = solution.coef
    a = float(u @ (info["K"] @ u))
    work = float(solution.diagnostics["load"] @ u)
    return abs(work - a) / max(abs(a), 1e-300), a, work
