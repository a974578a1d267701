"""Stiffness and load assembly for the spline discretization.

The bilinear form is ``a(u, v) = int B [(1 - nu) D2u : D2v + nu lap u lap v]``
and the load is ``l(v) = int_{dOmega} (M_tau,s v - M_n dv/dn) ds``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .bspline import tensor_basis
from .quadrature import tensor_gauss

CHUNK = 40000


def weighted_basis(grid, pts, i, j, clamp=None):
    """Basis values, gradients and Hessians ``(xx, yy, xy)`` of ``s * N_a``."""
    tx, ty = grid.local_coords(pts, i, j)
    N, dN, d2N = tensor_basis(grid.p, tx, ty, grid.h)
    if clamp is None:
        return N, dN, d2N
    s, gs, Hs = clamp(pts)
    sN = s[:, None] * N
    dW = s[:, None, None] * dN + N[:, :, None] * gs[:, None, :]
    d2W = np.empty_like(d2N)
    d2W[..., 0] = s[:, None] * d2N[..., 0] + 2 * gs[:, None, 0] * dN[..., 0] + N * Hs[:, None, 0, 0]
    d2W[..., 1] = s[:, None] * d2N[..., 1] + 2 * gs[:, None, 1] * dN[..., 1] + N * Hs[:, None, 1, 1]
    d2W[..., 2] = (
        s[:, None] * d2N[..., 2] + gs[:, None, 0] * dN[..., 1] + gs[:, None, 1] * dN[..., 0] + N * Hs[:, None, 0, 1]
    )
    return sN, dW, d2W


def _point_forms(H):
    """Per-point matrices of ``D2u : D2v`` and ``lap u lap v`` from Hessians."""
    G1 = (
        H[:, :, None, 0] * H[:, None, :, 0]
        + H[:, :, None, 1] * H[:, None, :, 1]
        + 2 * H[:, :, None, 2] * H[:, None, :, 2]
    )
    lap = H[..., 0] + H[..., 1]
    G2 = lap[:, :, None] * lap[:, None, :]
    return G1, G2


def element_matrices(grid, rule, plate, clamp=None):
    """Element stiffness matrices of the cells of a point rule.

    Returns ``(cells, Ke)`` with ``Ke`` of shape ``(n_cells, nb, nb)``.
    The rule's points must be sorted by owning cell.
    """
    nb = grid.nb
    if len(rule) == 0:
        return np.zeros(0, np.int64), np.zeros((0, nb, nb))
    cells, start = np.unique(rule.owner, return_index=True)
    out = np.zeros((len(cells), nb, nb))
    bounds = np.append(start, len(rule))
    k0 = 0
    while k0 < len(cells):
        # chunk on whole cells
        k1 = int(np.searchsorted(bounds, bounds[k0] + CHUNK, side="right")) - 1
        k1 = max(k1, k0 + 1)
        a, b = bounds[k0], bounds[k1]
        pts = rule.pts[a:b]
        i, j = np.divmod(rule.owner[a:b], grid.ny)
        _, _, H = weighted_basis(grid, pts, i, j, clamp)
        B, nu = plate.stiffness(pts)
        c1 = rule.w[a:b] * B * (1 - nu)
        c2 = rule.w[a:b] * B * nu
        G1, G2 = _point_forms(H)
        contrib = c1[:, None, None] * G1 + c2[:, None, None] * G2
        out[k0:k1] = np.add.reduceat(contrib, bounds[k0:k1] - a, axis=0)
        k0 = k1
    return cells, out


def full_cell_matrices(grid, cells, plate):
    """Element matrices of uncut, unweighted cells with a ``(p+1)^2`` Gauss rule."""
    nb = grid.nb
    n = grid.p + 1
    tx, ty, tw = tensor_gauss(n)
    _, _, H = tensor_basis(grid.p, tx, ty, grid.h)
    G1, G2 = _point_forms(H)
    G1 = G1.reshape(len(tw), -1) * (tw * grid.h**2)[:, None]
    G2 = G2.reshape(len(tw), -1) * (tw * grid.h**2)[:, None]
    cells = np.asarray(cells, dtype=np.int64)
    if plate.is_constant:
        B, nu = plate.stiffness(np.zeros(2))
        Ke = B * ((1 - nu) * G1.sum(axis=0) + nu * G2.sum(axis=0))
        return np.broadcast_to(Ke.reshape(nb, nb), (len(cells), nb, nb))
    ci, cj = np.divmod(cells, grid.ny)
    out = np.empty((len(cells), nb, nb))
    for a in range(0, len(cells), CHUNK // len(tw)):
        sl = slice(a, a + CHUNK // len(tw))
        px = grid.x0 + (ci[sl, None] + tx[None, :]) * grid.h
        py = grid.y0 + (cj[sl, None] + ty[None, :]) * grid.h
        B, nu = plate.stiffness(np.stack([px, py], axis=-1))
        out[sl] = ((B * (1 - nu)) @ G1 + (B * nu) @ G2).reshape(-1, nb, nb)
    return out


def scatter(grid, cells, Ke, sign=1.0):
    """COO triplets of element matrices placed at their global indices."""
    i, j = np.divmod(np.asarray(cells, dtype=np.int64), grid.ny)
    dofs = grid.cell_dofs(i, j)
    nb = grid.nb
    rows = np.broadcast_to(dofs[:, :, None], (len(cells), nb, nb)).ravel()
    cols = np.broadcast_to(dofs[:, None, :], (len(cells), nb, nb)).ravel()
    return rows, cols, (sign * Ke).ravel()


def to_csr(grid, triplets):
    rows = np.concatenate([t[0] for t in triplets])
    cols = np.concatenate([t[1] for t in triplets])
    vals = np.concatenate([t[2] for t in triplets])
    n = grid.n_dofs
    return sp.csr_matrix((vals, (rows.astype(np.int32), cols.astype(np.int32))), shape=(n, n))


def plate_key(plate):
    return repr(sorted(plate.to_dict().items()))


def _assemble_full(g, cells, plate, sign=1.0, block=20000):
    """Sum of full-cell element matrices, built in blocks to bound memory."""
    n = g.n_dofs
    K = sp.csr_matrix((n, n))
    for a in range(0, len(cells), block):
        c = cells[a : a + block]
        K = K + to_csr(g, [scatter(g, c, full_cell_matrices(g, c, plate), sign)])
    return K


def background_stiffness(bg, plate):
    """Stiffness of the domain without inclusion; cached on the background grid."""
    key = plate_key(plate)
    if key not in bg.stiffness_cache:
        g = bg.grid
        K = _assemble_full(g, bg.full_cells, plate)
        cells, Ke = element_matrices(g, bg.cut_rule, plate)
        K = K + to_csr(g, [scatter(g, cells, Ke)])
        if len(bg.stiffness_cache) >= 2:
            bg.stiffness_cache.pop(next(iter(bg.stiffness_cache)))
        bg.stiffness_cache[key] = K
    return bg.stiffness_cache[key]


def stiffness(pgrid, plate):
    """Global stiffness for a plate grid (full coefficient numbering)."""
    bg = pgrid.background
    K = background_stiffness(bg, plate)
    if pgrid.inclusion is None:
        return K
    g = bg.grid
    plain = np.concatenate([pgrid.removed_cells, pgrid.near_cells])
    cells, Ke = element_matrices(g, pgrid.near_rule, plate, pgrid.clamp)
    return K + _assemble_full(g, plain, plate, sign=-1.0) + to_csr(g, [scatter(g, cells, Ke)])


def load_vector(bg, couple):
    """``l(N_a)`` for every coefficient, using the boundary rule of the background grid."""
    g = bg.grid
    r = bg.load_rule
    pts = r["pts"]
    i, j = g.cell_index(pts)
    N, dN, _ = tensor_basis(g.p, *g.local_coords(pts, i, j), g.h)
    dn = np.einsum("mak,mk->ma", dN, r["normal"])
    mn = couple.moment_n(r["frac"])
    dt = couple.dtau_ds(r["frac"])
    vals = r["w"][:, None] * (dt[:, None] * N - mn[:, None] * dn)
    f = np.zeros(g.n_dofs)
    np.add.at(f, g.cell_dofs(i, j).ravel(), vals.ravel())
    return f


def load_support(bg):
    g = bg.grid
    i, j = g.cell_index(bg.load_rule["pts"])
    return np.unique(g.cell_dofs(i, j))
