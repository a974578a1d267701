"""Forward solves: Dirichlet-normalized form and rigid-inclusion form."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import SolverError
from .assembly import load_support, load_vector, stiffness, weighted_basis
from .linalg import FactorizedSystem

DEFAULT_REL_TOL = 1e-10
DROP_TOL = 1e-12


@dataclass
class DiscreteSolution:
    """Spline coefficients of the transverse displacement on ``Omega \\ D``.

    ``w(x) = s(x) * sum_a coef[a] N_a(x) + g(x)`` where ``s`` is the clamping
    weight and ``g`` the affine gauge (zero for the Dirichlet form).
    """

    grid: object
    plate: object
    couple: object
    coef: np.ndarray
    kind: str = "dirichlet"
    gauge: np.ndarray = field(default_factory=lambda: np.zeros(3))
    residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def inclusion(self):
        return self.grid.inclusion

    @property
    def domain(self):
        return self.grid.domain

    def _cells_for(self, pts, inward=None):
        """Cells whose polynomial is used at ``pts``.

        Points slightly outside the polygonized boundary use the nearest cell
        that only involves active coefficients, searched along ``inward``.
        """
        g = self.grid.grid
        i, j = g.cell_index(pts)
        if inward is None:
            return i, j
        active = self.diagnostics["active_mask"]
        step = np.sign(np.round(inward, 12)).astype(np.int64)
        for _ in range(3):
            bad = ~np.all(active[g.cell_dofs(i, j)], axis=1)
            if not bad.any():
                break
            i = np.where(bad, np.clip(i + step[:, 0], 0, g.nx - 1), i)
            j = np.where(bad, np.clip(j + step[:, 1], 0, g.ny - 1), j)
        return i, j

    def evaluate(self, pts, inward=None, mask_inclusion=True):
        """Values, gradients and Hessians of ``w`` at points.

        Returns arrays of shapes ``(m,)``, ``(m, 2)``, ``(m, 2, 2)``.  With
        ``mask_inclusion=False`` the spline representation is evaluated
        inside the inclusion too, as needed by quadrature rules whose nodes
        leave the integration region.
        """
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        g = self.grid.grid
        w = np.zeros(len(pts))
        gw = np.zeros((len(pts), 2))
        Hw = np.zeros((len(pts), 2, 2))
        outside_d = np.ones(len(pts), dtype=bool)
        if self.inclusion is not None and mask_inclusion:
            outside_d = ~self.inclusion.contains(pts)
        idx = np.flatnonzero(outside_d)
        for a in range(0, len(idx), 20000):
            sel = idx[a : a + 20000]
            q = pts[sel]
            i, j = self._cells_for(q, None if inward is None else np.asarray(inward)[sel])
            N, dN, d2N = weighted_basis(g, q, i, j, self.grid.clamp)
            c = self.coef[g.cell_dofs(i, j)]
            w[sel] = np.sum(N * c, axis=1)
            gw[sel] = np.einsum("mak,ma->mk", dN, c)
            h = np.einsum("mak,ma->mk", d2N, c)
            Hw[sel] = np.stack([np.stack([h[:, 0], h[:, 2]], -1), np.stack([h[:, 2], h[:, 1]], -1)], 1)
        c0, c1, c2 = self.gauge
        w = w + c0 + c1 * pts[:, 0] + c2 * pts[:, 1]
        gw = gw + np.array([c1, c2])
        return w, gw, Hw

    def __call__(self, pts):
        return self.evaluate(pts)[0]

    def values(self, pts):
        return self.evaluate(pts)[0]


def _active_dofs(K, candidates, tol):
    d = K.diagonal()
    cand = np.flatnonzero(candidates)
    dmax = d[cand].max() if cand.size else 0.0
    keep = cand[d[cand] > tol * dmax]
    return keep


def _pins(grid, active, pts_ref):
    """Three well separated coefficients pinned to remove the affine kernel."""
    gre = grid.greville()[active]
    chosen = []
    for p in pts_ref:
        k = int(np.argmin(np.linalg.norm(gre - p, axis=1)))
        chosen.append(k)
    return np.array(sorted(set(chosen)))


def compatibility_projection(bg, f):
    """Remove from ``f`` its component along the coefficient vectors of affine functions.

    The discrete load then vanishes on affine functions exactly.  Returns the
    projected load and the relative size of the removed part.
    """
    S = load_support(bg)
    gre = bg.grid.greville()[S]
    A = np.column_stack([np.ones(len(S)), gre])
    fs = f[S]
    coef, *_ = np.linalg.lstsq(A, fs, rcond=None)
    out = f.copy()
    out[S] = fs - A @ coef
    nf = np.linalg.norm(fs)
    return out, (0.0 if nf == 0 else float(np.linalg.norm(A @ coef) / nf))


_LIVE_FACTOR = []


def _system(pgrid, plate, drop_tol=DROP_TOL, factor=True):
    """Stiffness, active coefficients and factorization for a grid/plate pair.

    Matrices are cached on the grid.  Only the most recent factorization is
    kept alive, since a fine-grid factor occupies on the order of a gigabyte.
    """
    from .assembly import plate_key

    cache = pgrid.__dict__.setdefault("_systems", {})
    key = (plate_key(plate), drop_tol)
    info = cache.get(key)
    if info is None:
        t0 = time.perf_counter()
        K = stiffness(pgrid, plate)
        bg = pgrid.background
        g = bg.grid
        active = _active_dofs(K, bg.support, drop_tol)
        pinned = np.zeros(0, dtype=np.int64)
        if pgrid.inclusion is None:
            xmin, ymin, xmax, ymax = bg.omega.bounds
            c = np.array(bg.omega.centroid.coords[0])
            rad = 0.3 * min(xmax - xmin, ymax - ymin)
            ang = np.pi / 2 + np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
            ref = c + rad * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
            pinned = active[_pins(g, active, ref)]
            active = np.setdiff1d(active, pinned)
        mask = np.zeros(g.n_dofs, dtype=bool)
        mask[active] = True
        mask[pinned] = True
        info = {"K": K, "active": active, "pinned": pinned, "active_mask": mask, "factor": None}
        info["assembly_time"] = time.perf_counter() - t0
        cache.clear()
        cache[key] = info
    if factor and info["factor"] is None:
        while _LIVE_FACTOR:
            _LIVE_FACTOR.pop()["factor"] = None
        g = pgrid.background.grid
        t1 = time.perf_counter()
        active = info["active"]
        ix, iy = g.dof_ij(active)
        info["factor"] = FactorizedSystem(info["K"][active][:, active], ix, iy, g.p)
        info["factor_time"] = time.perf_counter() - t1
        _LIVE_FACTOR.append(info)
    return info


def release_factorizations():
    """Drop the cached factorization (frees memory between large solves)."""
    while _LIVE_FACTOR:
        _LIVE_FACTOR.pop()["factor"] = None


def solve_dirichlet_form(pgrid, plate, couple, rel_tol=DEFAULT_REL_TOL, project=True):
    """Solve the plate problem with the inclusion clamped (``w = dw/dn = 0`` on ``dD``).

    Without inclusion the affine kernel is removed by pinning three
    coefficients; the data must then be compatible.

    Raises
    ------
    SolverError
        For a singular system or if the residual exceeds ``rel_tol``.
    """
    bg = pgrid.background
    if pgrid.inclusion is None and couple.compatibility_defect() > 1e-8:
        raise SolverError(
            "no inclusion and incompatible couple data: the system is singular",
            diagnostics={"compatibility_defect": couple.compatibility_defect()},
        )
    info = _system(pgrid, plate)
    f = load_vector(bg, couple)
    defect = 0.0
    if project:
        f, defect = compatibility_projection(bg, f)
    fa = f[info["active"]]
    u, res, raw = info["factor"].solve(fa, rel_tol=rel_tol)
    coef = np.zeros(bg.grid.n_dofs)
    coef[info["active"]] = u
    diag = {
        "active_mask": info["active_mask"],
        "n_dofs": int(len(info["active"])),
        "compatibility_projection": defect,
        "raw_residual": raw,
        "assembly_time": info["assembly_time"],
        "factor_time": info["factor_time"],
        "fill": info["factor"].fill,
        "load": f,
    }
    return DiscreteSolution(pgrid, plate, couple, coef, "dirichlet", np.zeros(3), res, diag)


def boundary_affine_fit(sol, n=None):
    """Least-squares affine fit of ``w`` on the outer boundary (trapezoid weights)."""
    dom = sol.domain
    n = n or max(256, int(np.ceil(dom.length / sol.grid.h)))
    s = np.arange(n) * (dom.length / n)
    pts, _, nrm, _ = dom.boundary.frame(s)
    w = sol.evaluate(pts, inward=-nrm)[0]
    A = np.column_stack([np.ones(n), pts])
    c, *_ = np.linalg.lstsq(A, w, rcond=None)
    return c


def solve_rigid_form(pgrid, plate, couple, rel_tol=DEFAULT_REL_TOL, dirichlet=None):
    """Rigid-inclusion solution ``w = w_D + g`` with ``w = g`` affine on the inclusion.

    The Dirichlet-form solution ``w_D`` is shifted by the affine ``g`` that
    makes the boundary trace of ``w`` orthogonal to affine functions.  The
    equilibrium of the inclusion is certified by the weak-form reactions
    ``a(w, (1 - s) g_k)`` for ``g_k in {1, x1, x2}`` stored in
    ``diagnostics['equilibrium']``.
    """
    wd = dirichlet if dirichlet is not None else solve_dirichlet_form(pgrid, plate, couple, rel_tol)
    g = -boundary_affine_fit(wd)
    sol = DiscreteSolution(pgrid, plate, couple, wd.coef, "rigid", g, wd.residual, dict(wd.diagnostics))
    sol.diagnostics["equilibrium"] = equilibrium_residuals(wd)
    return sol


def equilibrium_residuals(sol):
    """Normalized reactions ``a(w, v_k)`` of the inclusion for the three affine motions.

    ``v_k = (1 - s) g_k`` with ``g_k in {1, x1, x2}`` equals ``g_k`` on the
    inclusion boundary and vanishes outside the clamping layer, so
    ``a(w, v_k)`` is the weak form of the resultant force and moments acting
    on the inclusion.  Each value is divided by ``sqrt(a(w, w) a(v_k, v_k))``.
    """
    pg = sol.grid
    rule = pg.near_rule
    if sol.inclusion is None or len(rule) == 0:
        return np.zeros(3)
    info = _system(pg, sol.plate, factor=False)
    u = sol.coef
    energy = float(u @ (info["K"] @ u))
    _, _, Hw = sol.evaluate(rule.pts, mask_inclusion=False)
    s, gs, Hs = pg.clamp(rule.pts)
    B, nu = sol.plate.stiffness(rule.pts)
    out = np.zeros(3)
    for k in range(3):
        gval = np.ones(len(rule)) if k == 0 else rule.pts[:, k - 1]
        ggrad = np.zeros((len(rule), 2))
        if k:
            ggrad[:, k - 1] = 1.0
        sym = gs[:, :, None] * ggrad[:, None, :]
        Hv = -(Hs * gval[:, None, None] + sym + np.swapaxes(sym, 1, 2))
        PHw = B[:, None, None] * ((1 - nu)[:, None, None] * Hw + (nu * np.trace(Hw, axis1=1, axis2=2))[:, None, None] * np.eye(2))
        PHv = B[:, None, None] * ((1 - nu)[:, None, None] * Hv + (nu * np.trace(Hv, axis1=1, axis2=2))[:, None, None] * np.eye(2))
        react = np.sum(rule.w * np.sum(PHw * Hv, axis=(1, 2)))
        ev = np.sum(rule.w * np.sum(PHv * Hv, axis=(1, 2)))
        out[k] = react / np.sqrt(max(energy * ev, 1e-300))
    return out


def project_function(pgrid, plate, func, couple=None):
    """``L^2`` projection of ``func(pts)`` onto the spline space of a plate grid.

    The spline space reproduces polynomials of degree ``p`` exactly, so the
    projection of such a polynomial is exact up to rounding.  Intended for
    grids without inclusion (the clamping weight is applied otherwise).
    """
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    g = pgrid.grid
    rule = pgrid.quadrature()
    i, j = g.cell_index(rule.pts)
    N, _, _ = weighted_basis(g, rule.pts, i, j, pgrid.clamp)
    dofs = g.cell_dofs(i, j)
    rows = np.repeat(np.arange(len(rule)), N.shape[1])
    A = sp.csr_matrix((N.ravel(), (rows, dofs.ravel())), shape=(len(rule), g.n_dofs))
    used = np.unique(dofs)
    A = A[:, used]
    W = sp.diags(rule.w)
    M = (A.T @ W @ A).tocsc()
    # coefficients whose support barely meets the region make the mass matrix singular
    d = M.diagonal()
    keep = d > DROP_TOL * d.max()
    used, A, M = used[keep], A[:, keep], M[keep][:, keep]
    rhs = A.T @ (rule.w * func(rule.pts))
    coef = np.zeros(g.n_dofs)
    coef[used] = spla.spsolve(M, rhs)
    mask = np.zeros(g.n_dofs, dtype=bool)
    mask[used] = True
    return DiscreteSolution(pgrid, plate, couple, coef, "projection", np.zeros(3), 0.0, {"active_mask": mask})
