"""Grid masks of planar regions: eroded domains, the component touching the arc, cones."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy import ndimage

from ..errors import InvalidGeometryError, InvalidInputError


@dataclass(frozen=True)
class RegionMask:
    """Boolean mask on the cell centres of a uniform grid.

    Cell ``(i, j)`` has centre ``(x0 + (i + 1/2) h, y0 + (j + 1/2) h)``.
    ``flags`` records notes such as an empty erosion.
    """

    x0: float
    y0: float
    h: float
    mask: np.ndarray
    flags: tuple = field(default=())

    @classmethod
    def covering(cls, bounds, h, pad=1):
        """All-false mask on a grid covering ``bounds`` with ``pad`` extra cells."""
        xmin, ymin, xmax, ymax = bounds
        x0, y0 = xmin - pad * h, ymin - pad * h
        nx = int(np.ceil((xmax - x0) / h)) + pad
        ny = int(np.ceil((ymax - y0) / h)) + pad
        return cls(x0, y0, h, np.zeros((nx, ny), dtype=bool))

    @property
    def shape(self):
        return self.mask.shape

    def centres(self):
        nx, ny = self.shape
        X, Y = np.meshgrid(self.x0 + (np.arange(nx) + 0.5) * self.h, self.y0 + (np.arange(ny) + 0.5) * self.h, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def with_mask(self, mask, *flags):
        return RegionMask(self.x0, self.y0, self.h, np.asarray(mask, dtype=bool), self.flags + tuple(flags))

    def index(self, pts):
        pts = np.asarray(pts, dtype=float)
        i = np.floor((pts[..., 0] - self.x0) / self.h).astype(np.int64)
        j = np.floor((pts[..., 1] - self.y0) / self.h).astype(np.int64)
        return i, j

    def contains(self, pts):
        """Whether points fall in a cell of the mask (points off the grid are outside)."""
        i, j = self.index(pts)
        nx, ny = self.shape
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.zeros(np.shape(i), dtype=bool)
        out[ok] = self.mask[i[ok], j[ok]]
        return out

    @property
    def area(self):
        return float(self.mask.sum() * self.h**2)

    @property
    def empty(self):
        return not self.mask.any()

    def __and__(self, other):
        return self.with_mask(self.mask & other.mask)

    def __or__(self, other):
        return self.with_mask(self.mask | other.mask)

    def __sub__(self, other):
        return self.with_mask(self.mask & ~other.mask)

    def issubset(self, other, tolerance_cells=0):
        """``self`` is contained in ``other`` dilated by ``tolerance_cells`` cells."""
        grown = other.mask
        if tolerance_cells:
            grown = ndimage.binary_dilation(grown, iterations=int(tolerance_cells))
        return bool(np.all(~self.mask | grown))


def domain_mask(domain, resolution=32):
    """Mask of the domain's cells (cell centres inside ``Omega``) with ``h = r0 / resolution``."""
    h = domain.r0 / resolution
    poly = domain.polygon(step=h / 4)
    base = RegionMask.covering(poly.bounds, h)
    c = base.centres()
    return base.with_mask(shapely.contains_xy(poly, c[..., 0], c[..., 1])), poly


def erode(region, rho, resolution=32):
    """``{x in region : dist(x, boundary) > rho}`` on a grid.

    ``region`` is a :class:`PlanarDomain` (distances measured exactly to the
    polygonized boundary at the cell centres) or a :class:`RegionMask`
    (Euclidean distance transform from the cells outside the mask, measured
    to the nearest outside cell centre minus half a cell).  An empty result
    is flagged, not raised.
    """
    if rho < 0:
        raise InvalidInputError("erosion radius must be nonnegative")
    if isinstance(region, RegionMask):
        padded = np.pad(region.mask, 1)
        dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1] * region.h - 0.5 * region.h
        mask = region.mask & (dist > rho)
        out = region.with_mask(mask)
    else:
        base, poly = domain_mask(region, resolution)
        c = base.centres()
        shapely.prepare(poly)
        dist = shapely.distance(shapely.points(c[base.mask]), poly.exterior)
        mask = np.zeros(base.shape, dtype=bool)
        mask[base.mask] = dist > rho
        out = base.with_mask(mask)
    if out.empty:
        out = out.with_mask(out.mask, f"empty erosion: rho={rho:g} reaches the inradius")
    return out


def _sigma_probe_points(domain, h, n=None):
    """Points one cell inside the domain along the measurement arc.

    At depth ``h`` the containing cell has its centre inside the domain, so
    the probed cells are the arc-adjacent cells of the mask.
    """
    n = n or max(16, int(np.ceil(domain.sigma_length / (0.5 * h))))
    s, _ = domain.sigma_arclength(n)
    pts, _, nrm, _ = domain.boundary.frame(s)
    return pts - h * nrm


def connected_component_touching(domain, d1, d2, resolution=32):
    """Component of ``Omega`` minus ``closure(D1 u D2)`` whose boundary contains the arc.

    Cells are kept when their centre lies in ``Omega`` and outside both
    inclusions; connectivity is through cell faces, so a pocket enclosed by
    the inclusions is never reached through a diagonal.

    Raises
    ------
    InvalidGeometryError
        If a cell adjacent to the arc is covered by an inclusion.
    """
    base, _ = domain_mask(domain, resolution)
    c = base.centres()
    free = base.mask.copy()
    for inc in (d1, d2):
        if inc is None:
            continue
        poly = inc.polygon(max(256, int(np.ceil(2 * np.pi * inc.max_radius() / (base.h / 4)))))
        free &= ~shapely.intersects_xy(poly, c[..., 0], c[..., 1])
    probes = _sigma_probe_points(domain, base.h)
    i, j = base.index(probes)
    nx, ny = base.shape
    if np.any((i < 0) | (i >= nx) | (j < 0) | (j >= ny)):
        raise InvalidGeometryError("arc probe outside the region grid")
    if not np.all(free[i, j]):
        raise InvalidGeometryError("a cell adjacent to the measurement arc is covered by an inclusion")
    labels, _ = ndimage.label(free)
    keep = np.unique(labels[i, j])
    return base.with_mask(np.isin(labels, keep[keep > 0]))


def component_polygon(domain, d1, d2, n=None):
    """Polygon of the component of ``Omega`` minus ``closure(D1 u D2)`` touching the arc.

    Exact counterpart of :func:`connected_component_touching` on the
    polygonized geometry, used for integrals over ``Omega`` minus ``G``.
    """
    step = domain.r0 / 200
    omega = domain.polygon(step=step)
    holes = [inc.polygon(n or 1024) for inc in (d1, d2) if inc is not None]
    rest = omega.difference(shapely.union_all(holes)) if holes else omega
    probe = _sigma_probe_points(domain, step, 64)
    parts = [g for g in getattr(rest, "geoms", [rest]) if g.geom_type == "Polygon"]
    touching = [g for g in parts if np.any(shapely.contains_xy(g, probe[:, 0], probe[:, 1]))]
    if not touching:
        raise InvalidGeometryError("no component of the complement touches the measurement arc")
    return shapely.union_all(touching), omega


def truncated_cone_contains(vertex, axis, m0, radius, query):
    """Whether ``query`` lies in the truncated cone of the case analysis.

    The cone has vertex ``vertex``, unit axis ``axis`` and half-opening
    ``pi/2 - arctan(m0)``, intersected with the open ball ``B_radius(vertex)``.
    """
    if radius <= 0:
        raise InvalidInputError("cone radius must be positive")
    v = np.asarray(query, dtype=float) - np.asarray(vertex, dtype=float)
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    r = np.linalg.norm(v, axis=-1)
    half = np.pi / 2 - np.arctan(m0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = np.clip(np.sum(v * a, axis=-1) / r, -1.0, 1.0)
    ang = np.arccos(np.where(r > 0, cosang, 1.0))
    out = (r < radius) & (r > 0) & (ang < half)
    return bool(out) if np.ndim(out) == 0 else out
