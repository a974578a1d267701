"""Cut-cell Cartesian grids for the plate domain with a clamped inclusion.

The grid carries the geometry only: cell classification, quadrature rules
and the clamping weight.  Stiffness matrices are assembled in
:mod:`platelab.solver.assembly`.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np
import shapely

from ..errors import InvalidGeometryError, ResolutionError
from .quadrature import polygon_rule, tensor_gauss, triangle_rule

MIN_CLEARANCE_CELLS = 8


class CellGrid:
    """Uniform cells of size ``h`` covering a bounding box.

    Cell ``(i, j)`` has flat index ``i * ny + j``; spline coefficient
    ``(jx, jy)`` has flat index ``jx * ncy + jy``.
    """

    def __init__(self, bounds, h, p=2, pad=2):
        xmin, ymin, xmax, ymax = bounds
        self.h = float(h)
        self.p = int(p)
        self.x0 = (np.floor(xmin / h) - pad) * h
        self.y0 = (np.floor(ymin / h) - pad) * h
        self.nx = int(np.ceil((xmax - self.x0) / h)) + pad
        self.ny = int(np.ceil((ymax - self.y0) / h)) + pad
        self.ncx = self.nx + self.p
        self.ncy = self.ny + self.p
        k = np.arange(self.p + 1)
        self._local = (k[:, None] * self.ncy + k[None, :]).ravel()

    @property
    def n_dofs(self):
        return self.ncx * self.ncy

    @property
    def nb(self):
        return (self.p + 1) ** 2

    def cell_index(self, pts):
        pts = np.asarray(pts, dtype=float)
        i = np.floor((pts[..., 0] - self.x0) / self.h).astype(np.int64)
        j = np.floor((pts[..., 1] - self.y0) / self.h).astype(np.int64)
        return np.clip(i, 0, self.nx - 1), np.clip(j, 0, self.ny - 1)

    def local_coords(self, pts, i, j):
        pts = np.asarray(pts, dtype=float)
        return (pts[..., 0] - self.x0) / self.h - i, (pts[..., 1] - self.y0) / self.h - j

    def cell_dofs(self, i, j):
        """Flat coefficient indices of the ``(p + 1)^2`` splines living on each cell."""
        base = np.asarray(i) * self.ncy + np.asarray(j)
        return base[..., None] + self._local

    def cell_centers(self, i, j):
        return np.stack([self.x0 + (np.asarray(i) + 0.5) * self.h, self.y0 + (np.asarray(j) + 0.5) * self.h], axis=-1)

    def boxes(self, i, j):
        x = self.x0 + np.asarray(i) * self.h
        y = self.y0 + np.asarray(j) * self.h
        return shapely.box(x, y, x + self.h, y + self.h)

    def dof_ij(self, dofs):
        return np.divmod(np.asarray(dofs), self.ncy)

    def greville(self):
        """Coordinates at which affine functions equal their spline coefficients."""
        shift = (self.p - 1) / 2.0
        gx = self.x0 + self.h * (np.arange(self.ncx) - shift)
        gy = self.y0 + self.h * (np.arange(self.ncy) - shift)
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=-1)

    def node_points(self):
        """Cell corners as an ``(nx + 1, ny + 1, 2)`` array."""
        x = self.x0 + self.h * np.arange(self.nx + 1)
        y = self.y0 + self.h * np.arange(self.ny + 1)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.stack([X, Y], axis=-1)


def _raster_cells(grid, ring, step):
    """Cells touched by a closed polyline, found by dense sampling of its edges."""
    a = ring[:-1]
    b = ring[1:]
    seg = np.linalg.norm(b - a, axis=1)
    nsub = np.maximum(np.ceil(seg / step).astype(int), 1)
    t = np.concatenate([np.arange(n + 1) / n for n in nsub])
    owner = np.repeat(np.arange(len(a)), nsub + 1)
    pts = a[owner] + t[:, None] * (b - a)[owner]
    i, j = grid.cell_index(pts)
    cells = np.unique(i * grid.ny + j)
    # include 8-neighbours so that corner-grazing cells are not missed
    ci, cj = np.divmod(cells, grid.ny)
    di, dj = np.meshgrid([-1, 0, 1], [-1, 0, 1], indexing="ij")
    ni = np.clip(ci[:, None] + di.ravel(), 0, grid.nx - 1)
    nj = np.clip(cj[:, None] + dj.ravel(), 0, grid.ny - 1)
    return np.unique(ni * grid.ny + nj)


@dataclass
class CellRule:
    """Concatenated quadrature points of several cells, sorted by cell."""

    cells: np.ndarray
    pts: np.ndarray
    w: np.ndarray
    owner: np.ndarray

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros((0, 2)), np.zeros(0), np.zeros(0, np.int64))

    @classmethod
    def from_geometries(cls, grid, cells, geoms, n_edge=4, n_inner=4, method="green"):
        """Rules for clipped cells.

        ``method="green"`` uses the boundary-integral rule (exact for the
        polynomial integrands of unweighted cells); ``"triangles"`` keeps all
        nodes inside the clipped region with positive weights, as required
        for the non-polynomial clamping weight.
        """
        pts, w, owner = [], [], []
        ci, _ = np.divmod(cells, grid.ny)
        xref = grid.x0 + ci * grid.h
        for k, (c, g) in enumerate(zip(cells, geoms)):
            if method == "green":
                p_, w_ = polygon_rule(g, xref[k], n_edge, n_inner)
            else:
                p_, w_ = triangle_rule(g, n_edge)
            pts.append(p_)
            w.append(w_)
            owner.append(np.full(len(w_), c, dtype=np.int64))
        if not pts:
            return cls.empty()
        return cls(np.asarray(cells, dtype=np.int64), np.concatenate(pts), np.concatenate(w), np.concatenate(owner))

    @classmethod
    def full_cells(cls, grid, cells, n):
        tx, ty, tw = tensor_gauss(n)
        ci, cj = np.divmod(np.asarray(cells, dtype=np.int64), grid.ny)
        px = grid.x0 + (ci[:, None] + tx[None, :]) * grid.h
        py = grid.y0 + (cj[:, None] + ty[None, :]) * grid.h
        w = np.broadcast_to(tw * grid.h**2, px.shape)
        owner = np.repeat(np.asarray(cells, dtype=np.int64), len(tw))
        return cls(np.asarray(cells, dtype=np.int64), np.stack([px.ravel(), py.ravel()], axis=-1), w.ravel().copy(), owner)

    def concat(self, other):
        return CellRule(
            np.concatenate([self.cells, other.cells]),
            np.concatenate([self.pts, other.pts]),
            np.concatenate([self.w, other.w]),
            np.concatenate([self.owner, other.owner]),
        )

    def __len__(self):
        return len(self.w)


class BackgroundGrid:
    """Cut-cell discretization of the plate domain without inclusion.

    Instances are cached per ``(domain, resolution, p)``; inclusion-specific
    grids reuse the outer-boundary geometry, the load quadrature and the
    assembled background stiffness.
    """

    _cache = weakref.WeakKeyDictionary()

    def __init__(self, domain, resolution, p=2, boundary_vertices=None):
        self.domain = domain
        self.resolution = int(resolution)
        self.h = domain.r0 / self.resolution
        self.p = p
        L = domain.length
        nv = boundary_vertices or max(64, int(np.ceil(L / self.h)))
        self.vertex_fractions = np.arange(nv) / nv
        verts = domain.boundary.point_at_fraction(self.vertex_fractions)
        self.omega = shapely.Polygon(verts)
        if not self.omega.is_valid:
            raise InvalidGeometryError("polygonized outer boundary is not simple")
        self.grid = g = CellGrid(self.omega.bounds, self.h, p)
        ring = np.vstack([verts, verts[:1]])
        cand = _raster_cells(g, ring, self.h / 4)
        ci, cj = np.divmod(cand, g.ny)
        clipped = shapely.intersection(g.boxes(ci, cj), self.omega)
        area = shapely.area(clipped)
        full_cand = area >= self.h**2 * (1 - 1e-12)
        cut = (area > 0) & ~full_cand
        self.cut_cells = cand[cut]
        self.cut_geoms = clipped[cut]
        # interior cells: centre inside and not a cut candidate
        I, J = np.meshgrid(np.arange(g.nx), np.arange(g.ny), indexing="ij")
        centres = g.cell_centers(I.ravel(), J.ravel())
        inside = shapely.contains_xy(self.omega, centres[:, 0], centres[:, 1])
        inside[cand] = False
        inside[cand[full_cand]] = True
        self.full_cells = np.flatnonzero(inside)
        self.cut_rule = CellRule.from_geometries(g, self.cut_cells, self.cut_geoms)
        self.load_rule = self._boundary_rule()
        self.cell_kind = np.zeros(g.nx * g.ny, dtype=np.int8)  # 0 outside, 1 full, 2 cut
        self.cell_kind[self.full_cells] = 1
        self.cell_kind[self.cut_cells] = 2
        support = np.zeros(g.n_dofs, dtype=bool)
        for cells in (self.full_cells, self.cut_cells):
            i, j = np.divmod(cells, g.ny)
            support[g.cell_dofs(i, j).ravel()] = True
        self.support = support
        self.stiffness_cache = {}

    @classmethod
    def get(cls, domain, resolution, p=2):
        per_domain = cls._cache.setdefault(domain, {})
        key = (int(resolution), int(p))
        if key not in per_domain:
            per_domain[key] = cls(domain, resolution, p)
        return per_domain[key]

    def _boundary_rule(self, n_gauss=3):
        """Gauss points on the polygon edges with arc-length weights of the true curve."""
        from .quadrature import gauss

        u, w = gauss(n_gauss)
        nv = len(self.vertex_fractions)
        verts = np.asarray(self.omega.exterior.coords)[:nv]
        a, b = verts, np.roll(verts, -1, axis=0)
        pts = a[:, None, :] + u[None, :, None] * (b - a)[:, None, :]
        frac = (self.vertex_fractions[:, None] + u[None, :] / nv).ravel()
        weights = np.broadcast_to(w * (self.domain.length / nv), (nv, n_gauss)).ravel()
        _, tan, nrm, _ = self.domain.boundary.frame(frac * self.domain.length)
        return {"pts": pts.reshape(-1, 2), "frac": frac, "w": weights.copy(), "normal": nrm, "tangent": tan}

    def cell_area(self, cells):
        area = np.full(len(cells), self.h**2)
        kind = self.cell_kind[cells]
        area[kind == 0] = 0.0
        cut = kind == 2
        if cut.any():
            lookup = dict(zip(self.cut_cells.tolist(), shapely.area(self.cut_geoms).tolist()))
            area[cut] = [lookup[c] for c in np.asarray(cells)[cut]]
        return area


class ClampWeight:
    """Weight ``s = psi(phi / l)^2`` vanishing to second order on the inclusion boundary.

    ``phi`` is the radial level set of the inclusion and
    ``psi(t) = 1 - (1 - t)^3`` for ``t < 1``, ``psi = 1`` otherwise, so ``s``
    is ``C^2`` and identically one at distance ``l`` from the inclusion.
    """

    def __init__(self, inclusion, width):
        self.inclusion = inclusion
        self.width = float(width)
        th = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
        r, dr = inclusion.radius(th, order=1)
        self.rmin = float(r.min())
        self.lipschitz = float(np.sqrt(1.0 + (2.0 * np.abs(dr).max() / self.rmin) ** 2))

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        m = len(pts)
        s = np.ones(m)
        gs = np.zeros((m, 2))
        Hs = np.zeros((m, 2, 2))
        c = np.asarray(self.inclusion.center)
        near = np.linalg.norm(pts - c, axis=1) < self.inclusion.max_radius() + self.width
        if not near.any():
            return s, gs, Hs
        q = pts[near]
        off = np.linalg.norm(q - c, axis=1) < 1e-12 * self.rmin
        q[off] += 1e-9 * self.rmin
        phi, gphi, hphi = self.inclusion.level_set(q)
        t = phi / self.width
        inner = t < 1
        one = 1.0 - np.where(inner, t, 1.0)
        psi = 1.0 - one**3
        dpsi = 3.0 * one**2
        ddpsi = -6.0 * one
        gt = gphi / self.width
        ht = hphi / self.width
        s[near] = psi * psi
        gs[near] = (2 * psi * dpsi)[:, None] * gt
        Hs[near] = (2 * (dpsi**2 + psi * ddpsi))[:, None, None] * gt[:, :, None] * gt[:, None, :] + (2 * psi * dpsi)[:, None, None] * ht
        return s, gs, Hs


@dataclass
class PlateGrid:
    """Discretization of the plate with a clamped inclusion (or none).

    Attributes
    ----------
    background : BackgroundGrid
    inclusion : StarInclusion or None
    clamp : ClampWeight or None
    removed_cells : cells of the background that lie inside the inclusion
    near_rule : quadrature of cells that are cut by the inclusion or feel the clamping weight
    """

    background: BackgroundGrid
    inclusion: object
    clamp: object
    removed_cells: np.ndarray
    near_cells: np.ndarray
    near_rule: CellRule
    inclusion_polygon: object = None
    counts: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.background.grid

    @property
    def domain(self):
        return self.background.domain

    @property
    def h(self):
        return self.background.h

    @property
    def resolution(self):
        return self.background.resolution

    def region_polygon(self):
        """The computational region ``Omega_h`` minus the inclusion polygon."""
        if self.inclusion_polygon is None:
            return self.background.omega
        return self.background.omega.difference(self.inclusion_polygon)

    def quadrature(self, cells=None):
        """Quadrature rule over the whole computational region (or selected cells)."""
        bg = self.background
        g = bg.grid
        special = set(self.near_cells.tolist()) | set(self.removed_cells.tolist())
        full = bg.full_cells if not special else np.setdiff1d(bg.full_cells, self.near_cells, assume_unique=True)
        if self.removed_cells.size:
            full = np.setdiff1d(full, self.removed_cells, assume_unique=True)
        if cells is not None:
            full = np.intersect1d(full, cells)
        rule = CellRule.full_cells(g, full, g.p + 1)
        cut = bg.cut_rule
        near = self.near_rule
        if cells is not None:
            keep = np.isin(cut.owner, cells)
            cut = CellRule(np.intersect1d(cut.cells, cells), cut.pts[keep], cut.w[keep], cut.owner[keep])
            keep = np.isin(near.owner, cells)
            near = CellRule(np.intersect1d(near.cells, cells), near.pts[keep], near.w[keep], near.owner[keep])
        return rule.concat(cut).concat(near)


def build_grid(domain, inclusion, resolution, p=2, clamp_width=0.25, check=True):
    """Build the cut-cell grid for ``Omega`` minus a clamped inclusion.

    Parameters
    ----------
    domain : PlanarDomain
    inclusion : StarInclusion or None
    resolution : int
        Cells per ``r0``.
    clamp_width : float
        Width of the clamping weight layer in units of ``r0``.

    Raises
    ------
    InvalidGeometryError
        If the inclusion is not compactly contained with clearance ``r0``.
    ResolutionError
        If fewer than eight cells separate the inclusion from the outer boundary.
    """
    bg = BackgroundGrid.get(domain, resolution, p)
    g = bg.grid
    counts = {"neumann_dofs": int(_dofs_of(g, bg.cut_cells).size), "clamped_dofs": 0}
    if inclusion is None:
        return PlateGrid(bg, None, None, np.zeros(0, np.int64), np.zeros(0, np.int64), CellRule.empty(), None, counts)
    n_d = max(128, int(np.ceil(2 * inclusion.curve().length / bg.h)))
    dpoly = inclusion.polygon(n_d)
    if check:
        if not bg.omega.contains(dpoly):
            raise InvalidGeometryError("compactness: inclusion is not contained in the domain")
        clearance = bg.omega.exterior.distance(dpoly)
        if clearance < domain.r0 * (1 - 1e-6):
            raise InvalidGeometryError(f"compactness: clearance {clearance / domain.r0:.4g} r0 < r0")
        if clearance / bg.h < MIN_CLEARANCE_CELLS:
            raise ResolutionError(f"only {clearance / bg.h:.1f} cells between inclusion and boundary")
    width = clamp_width * domain.r0
    clamp = ClampWeight(inclusion, width)
    cx, cy = inclusion.center
    reach = inclusion.max_radius() + width + 2 * bg.h
    i0, j0 = g.cell_index(np.array([cx - reach, cy - reach]))
    i1, j1 = g.cell_index(np.array([cx + reach, cy + reach]))
    I, J = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    cand = I * g.ny + J
    centres = g.cell_centers(I, J)
    phi = inclusion.level_set(centres, derivatives=0)
    margin = clamp.lipschitz * bg.h / np.sqrt(2) * 1.05
    sel = phi < width + margin
    cand, I, J, phi = cand[sel], I[sel], J[sel], phi[sel]
    if np.any(bg.cell_kind[cand] != 1):
        raise InvalidGeometryError("clamping layer reaches the outer boundary")
    boxes = g.boxes(I, J)
    inter = shapely.area(shapely.intersection(boxes, dpoly))
    removed = inter >= bg.h**2 * (1 - 1e-12)
    cut = (inter > 0) & ~removed
    free = inter == 0
    geoms = shapely.difference(boxes[cut], dpoly)
    rule = CellRule.from_geometries(g, cand[cut], geoms, method="triangles")
    rule = rule.concat(CellRule.full_cells(g, cand[free], 4))
    order = np.argsort(rule.owner, kind="stable")
    rule = CellRule(np.sort(rule.cells), rule.pts[order], rule.w[order], rule.owner[order])
    counts["clamped_dofs"] = int(_dofs_of(g, cand[cut]).size)
    return PlateGrid(bg, inclusion, clamp, cand[removed], cand[~removed], rule, dpoly, counts)


def _dofs_of(grid, cells):
    i, j = np.divmod(np.asarray(cells, dtype=np.int64), grid.ny)
    return np.unique(grid.cell_dofs(i, j))
