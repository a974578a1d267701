"""Hausdorff-type distances between closed planar regions given by boundary samplings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import shapely
from scipy.spatial import cKDTree

from ..errors import InvalidInputError

DEFAULT_STEP_FRACTION = 1.0 / 200.0


@dataclass(frozen=True)
class SampledRegion:
    """Closed region described by a dense sampling of its boundary.

    ``points`` is an ``(n, 2)`` array of boundary samples in order around the
    boundary; ``step`` is the sampling step (the accuracy of every distance
    computed from the sampling).
    """

    points: np.ndarray
    step: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != 2:
            raise InvalidInputError("empty or malformed boundary sampling")
        object.__setattr__(self, "points", pts)

    @classmethod
    def of(cls, obj, step=None):
        """Sampling of a :class:`StarInclusion`, a curve, a polygon or a point array."""
        if isinstance(obj, cls):
            return obj
        if hasattr(obj, "sample_step") and hasattr(obj, "radii"):
            step = step or 1e-3
            return cls(obj.sample_step(step), step)
        if hasattr(obj, "sample") and hasattr(obj, "length"):
            step = step or 1e-3
            n = max(16, int(np.ceil(obj.length / step)))
            return cls(obj.sample(n), obj.length / n)
        if isinstance(obj, shapely.Polygon):
            ring = np.asarray(obj.exterior.coords)[:-1]
            return cls.from_points(ring, step)
        return cls.from_points(obj, step)

    @classmethod
    def from_points(cls, pts, step=None):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise InvalidInputError("empty boundary sampling")
        if step is None:
            seg = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
            step = float(seg.max()) if len(pts) > 1 else 0.0
        return cls(pts, float(step))

    @property
    def polygon(self):
        if len(self.points) < 3:
            return shapely.MultiPoint(self.points)
        return shapely.make_valid(shapely.Polygon(self.points))


def _densify(ring, step):
    """Samples of a closed ring with spacing at most ``step / 2``."""
    nxt = np.roll(ring, -1, axis=0)
    seg = np.linalg.norm(nxt - ring, axis=1)
    k = np.maximum(1, np.ceil(2 * seg / step).astype(int))
    owner = np.repeat(np.arange(len(ring)), k)
    t = (np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)) / np.repeat(k, k)
    return ring[owner] + t[:, None] * (nxt - ring)[owner]


def _signed_distance_fn(poly, step):
    """Signed distance to the boundary of a polygon, negative inside.

    The boundary is resampled with spacing ``step / 2`` and queried through
    a KD-tree; magnitudes overestimate the exact distance by at most
    ``step^2 / (32 d)``, far below the sampling step.
    """
    polys = [g for g in getattr(poly, "geoms", [poly]) if g.geom_type == "Polygon"]
    rings = [np.asarray(r.coords)[:-1] for g in polys for r in [g.exterior, *g.interiors]]
    tree = cKDTree(np.vstack([_densify(r, step) for r in rings]))
    shapely.prepare(poly)

    def sdist(points):
        if len(points) == 0:
            return np.zeros(0)
        d = tree.query(points)[0]
        return np.where(shapely.contains_xy(poly, points[:, 0], points[:, 1]), -d, d)

    return sdist


def _sup_over_region(region, samples, value, step, signed=True):
    """``sup`` over a closed region of ``max(value, 0)`` for a 1-Lipschitz ``value``.

    The boundary samples are evaluated directly.  The interior is searched by
    branch and bound on a quadtree: on a cell of size ``s`` with centre value
    ``v`` the function stays below ``v + s / sqrt(2)``, so only cells that
    could beat the incumbent by more than ``step / 2`` are refined, down to
    size ``step``.  Cell membership in the region is decided the same way
    from the signed distance to the region.
    """
    best = float(np.max(np.maximum(value(samples), 0.0), initial=0.0))
    if region.is_empty or region.area == 0:
        return best
    inside_fn = _signed_distance_fn(region, step)
    xmin, ymin, xmax, ymax = region.bounds
    size = max(xmax - xmin, ymax - ymin) / 32
    x = np.arange(xmin + 0.5 * size, xmax + 0.5 * size, size)
    y = np.arange(ymin + 0.5 * size, ymax + 0.5 * size, size)
    X, Y = np.meshgrid(x, y, indexing="ij")
    centres = np.stack([X.ravel(), Y.ravel()], axis=-1)
    while len(centres):
        rad = size / np.sqrt(2)
        r = inside_fn(centres)
        centres, r = centres[r < rad], r[r < rad]
        v = value(centres)
        if np.any(r <= 0):
            best = max(best, float(np.max(v[r <= 0])))
        if size <= step:
            break
        c = centres[v + rad > best + 0.5 * step]
        size *= 0.5
        offs = 0.5 * size * np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]])
        centres = (c[:, None, :] + offs[None]).reshape(-1, 2)
    return best


def directed_distance(a, b, step=None):
    """``sup_{x in A} dist(x, B)`` for closed regions given by boundary samplings."""
    a = SampledRegion.of(a, step)
    b = SampledRegion.of(b, step)
    step = step or max(a.step, b.step)
    return _sup_over_region(a.polygon, a.points, _signed_distance_fn(b.polygon, step), step)


def hausdorff_distance(a, b, step=None):
    """Hausdorff distance between the closed regions bounded by two samplings.

    Each directed distance is the maximum of the exact distance to the
    polygon of the other region over the boundary samples of one region and
    over its interior (searched by branch and bound down to the sampling
    step), so the accuracy is bounded by the sampling step.

    Raises
    ------
    InvalidInputError
        If a sampling is empty.
    """
    a = SampledRegion.of(a, step)
    b = SampledRegion.of(b, step)
    return max(directed_distance(a, b, step), directed_distance(b, a, step))


def _check_contained(domain, poly, name):
    if domain is None:
        return
    outer = domain.polygon()
    if not outer.buffer(1e-9 * domain.r0).contains(poly):
        raise InvalidInputError(f"{name} is not contained in the domain")


def complement_distances(domain, d1, d2, step=None):
    """Distances ``d`` and ``d_m`` between the complements of two inclusions.

    ``d = d_H(closure(Omega minus D1), closure(Omega minus D2))`` and
    ``d_m = max(max_{x in dD1} dist(x, closure(Omega minus D2)),
    max_{x in dD2} dist(x, closure(Omega minus D1)))``.

    For ``D2`` compactly inside ``Omega``, ``dist(x, closure(Omega minus D2))``
    is the distance from ``x`` to ``dD2`` when ``x`` lies in ``D2`` and zero
    otherwise, so ``d`` is the largest such distance over ``D2 minus D1``
    (and symmetrically).  The boundary samples used for ``d_m`` are part of
    the samples used for ``d``, so ``d_m <= d`` holds exactly.

    Returns
    -------
    d, d_m : float
    """
    step = step or (domain.r0 * DEFAULT_STEP_FRACTION if domain is not None else 1e-3)
    s1 = SampledRegion.of(d1, step)
    s2 = SampledRegion.of(d2, step)
    p1, p2 = s1.polygon, s2.polygon
    _check_contained(domain, p1, "first inclusion")
    _check_contained(domain, p2, "second inclusion")

    def one_way(sa, pa, pb):
        # sup over B minus A of the distance to dB; the part of dA inside B gives d_m
        bdry = sa.points
        in_b = shapely.contains_xy(pb, bdry[:, 0], bdry[:, 1])
        sd = _signed_distance_fn(pb, step)

        def dist(pts):
            return np.abs(sd(pts))

        dm = float(np.max(dist(bdry[in_b]), initial=0.0))
        d = _sup_over_region(shapely.difference(pb, pa), bdry[in_b], dist, step)
        return max(d, dm), dm

    a12, m12 = one_way(s1, p1, p2)
    a21, m21 = one_way(s2, p2, p1)
    d, dm = max(a12, a21), max(m12, m21)
    assert dm <= d, "d_m must not exceed d"
    return d, dm
