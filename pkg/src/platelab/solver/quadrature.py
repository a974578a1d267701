"""Quadrature rules on cells and on arbitrary polygons."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import shapely


@lru_cache(maxsize=None)
def gauss(n):
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def tensor_gauss(n):
    """``n x n`` Gauss rule on the unit square; returns ``(tx, ty, w)``."""
    x, w = gauss(n)
    tx, ty = np.meshgrid(x, x, indexing="ij")
    return tx.ravel(), ty.ravel(), np.outer(w, w).ravel()


def _rings(geom):
    """Exterior and interior rings of a (multi)polygon, each as an (m, 2) array.

    Exteriors are returned counterclockwise and holes clockwise.
    """
    out = []
    for poly in getattr(geom, "geoms", [geom]):
        if poly.is_empty or poly.geom_type != "Polygon":
            continue
        poly = shapely.orient_polygons(poly) if hasattr(shapely, "orient_polygons") else shapely.geometry.polygon.orient(poly, 1.0)
        out.append(np.asarray(poly.exterior.coords))
        out.extend(np.asarray(r.coords) for r in poly.interiors)
    return out


def polygon_rule(geom, xref, n_edge=4, n_inner=4):
    """Quadrature points and weights for a polygon via Green's theorem.

    Uses ``int_P f = oint F dy`` with ``F(x, y) = int_{xref}^x f(s, y) ds``.
    The rule integrates polynomials of degree ``2 n - 1`` in each variable
    exactly; weights may be negative.

    Returns
    -------
    pts : (m, 2) array
    w : (m,) array
    """
    ue, we = gauss(n_edge)
    ui, wi = gauss(n_inner)
    pts, wts = [], []
    for ring in _rings(geom):
        a = ring[:-1]
        b = ring[1:]
        dy = b[:, 1] - a[:, 1]
        keep = dy != 0
        a, b, dy = a[keep], b[keep], dy[keep]
        if not len(a):
            continue
        ex = a[:, None, 0] + ue[None, :] * (b - a)[:, None, 0]
        ey = a[:, None, 1] + ue[None, :] * (b - a)[:, None, 1]
        span = ex - xref
        px = xref + span[:, :, None] * ui[None, None, :]
        py = np.broadcast_to(ey[:, :, None], px.shape)
        w = (dy[:, None, None] * we[None, :, None] * span[:, :, None]) * wi[None, None, :]
        pts.append(np.stack([px.ravel(), py.ravel()], axis=-1))
        wts.append(w.ravel())
    if not pts:
        return np.zeros((0, 2)), np.zeros(0)
    return np.concatenate(pts), np.concatenate(wts)


@lru_cache(maxsize=None)
def collapsed_gauss(n):
    """Duffy-collapsed Gauss rule on the reference triangle ``(0,0), (1,0), (0,1)``."""
    x, w = gauss(n)
    u, v = np.meshgrid(x, x, indexing="ij")
    a = u.ravel()
    b = (v * (1 - u)).ravel()
    wt = (np.outer(w, w) * (1 - u)).ravel()
    return a, b, wt


def triangle_rule(geom, n=4):
    """Positive-weight rule with all nodes inside a polygon.

    The polygon is split by a constrained Delaunay triangulation and each
    triangle receives a collapsed ``n x n`` Gauss rule.
    """
    tris = shapely.constrained_delaunay_triangles(geom)
    coords = np.array([np.asarray(t.exterior.coords)[:3] for t in getattr(tris, "geoms", [])])
    if coords.size == 0:
        return np.zeros((0, 2)), np.zeros(0)
    a, b, w = collapsed_gauss(n)
    p0 = coords[:, 0]
    e1 = coords[:, 1] - p0
    e2 = coords[:, 2] - p0
    jac = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    pts = p0[:, None, :] + a[None, :, None] * e1[:, None, :] + b[None, :, None] * e2[:, None, :]
    return pts.reshape(-1, 2), (jac[:, None] * w[None, :]).ravel()


def disc_polygon(center, radius, n=256):
    """Regular ``n``-gon with the same area as the disc."""
    th = np.arange(n) * (2 * np.pi / n)
    rn = radius * np.sqrt(2 * np.pi / (n * np.sin(2 * np.pi / n)))
    return shapely.Polygon(np.asarray(center) + rn * np.stack([np.cos(th), np.sin(th)], axis=-1))
