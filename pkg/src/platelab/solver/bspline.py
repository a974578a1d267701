"""Uniform tensor-product B-splines on a Cartesian cell grid.

Cell ``i`` along an axis covers ``[x0 + i h, x0 + (i + 1) h]``.  In that cell
the ``p + 1`` nonzero univariate splines belong to coefficients ``i .. i + p``;
local spline ``k`` equals the cardinal B-spline evaluated at ``t + p - k``
where ``t`` is the local coordinate in ``[0, 1]``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.interpolate import BSpline


@lru_cache(maxsize=None)
def local_polynomials(p):
    """Monomial coefficients ``C[k, m]`` with ``N_k(t) = sum_m C[k, m] t^m``."""
    cardinal = BSpline.basis_element(np.arange(p + 2, dtype=float), extrapolate=False)
    t = np.linspace(0.0, 1.0, p + 1) * 0.8 + 0.1
    V = np.vander(t, p + 1, increasing=True)
    C = np.empty((p + 1, p + 1))
    for k in range(p + 1):
        C[k] = np.linalg.solve(V, cardinal(t + p - k))
    return C


def univariate(p, t, nderiv=2):
    """Values and derivatives of the local splines at local coordinates ``t``.

    Returns an array of shape ``(nderiv + 1, len(t), p + 1)`` with
    derivatives taken in the local coordinate.
    """
    t = np.asarray(t, dtype=float)
    C = local_polynomials(p)
    out = np.zeros((nderiv + 1,) + t.shape + (p + 1,))
    powers = np.stack([t**m for m in range(p + 1)], axis=-1)
    for d in range(nderiv + 1):
        Cd = np.zeros_like(C)
        for m in range(d, p + 1):
            fac = np.prod(np.arange(m - d + 1, m + 1)) if d else 1.0
            Cd[:, m - d] = C[:, m] * fac
        out[d] = powers @ Cd.T
    return out


def tensor_basis(p, tx, ty, h):
    """Tensor-product local basis at points with local coordinates ``(tx, ty)``.

    Returns ``(N, dN, d2N)`` with shapes ``(m, nb)``, ``(m, nb, 2)`` and
    ``(m, nb, 3)``; the Hessian is stored as ``(xx, yy, xy)``.  Local index
    ``a = kx * (p + 1) + ky``.  Derivatives are physical (scaled by ``h``).
    """
    bx = univariate(p, tx)
    by = univariate(p, ty)
    m = len(tx)
    nb = (p + 1) ** 2

    def outer(u, v):
        return (u[:, :, None] * v[:, None, :]).reshape(m, nb)

    N = outer(bx[0], by[0])
    dN = np.stack([outer(bx[1], by[0]), outer(bx[0], by[1])], axis=-1) / h
    d2N = np.stack([outer(bx[2], by[0]), outer(bx[0], by[2]), outer(bx[1], by[1])], axis=-1) / (h * h)
    return N, dN, d2N


def greville(p, n_coef, x0, h):
    """Greville abscissae of the coefficients along one axis.

    Affine functions ``a + b x`` have spline coefficients ``a + b * greville``.
    """
    return x0 + h * (np.arange(n_coef) - (p - 1) / 2.0)
