"""Measurement traces on the arc and the affine-gauge misfit."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
import shapely
from scipy.optimize import minimize

from .errors import InvalidGeometryError, InvalidInputError, UnderdeterminedError

DEFAULT_SAMPLES = 256


@dataclass(frozen=True)
class TraceData:
    """Displacement and normal-derivative traces at uniform arc positions of the arc.

    ``s`` holds absolute arc-length positions on the boundary; ``points``
    and ``normals`` the corresponding boundary points and outer normals.
    """

    s: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    w_values: np.ndarray
    dn_values: np.ndarray
    r0: float
    step: float
    sigma: tuple = (0.0, 1.0)
    length: float = 1.0

    def __post_init__(self):
        if len(self.w_values) != len(self.s) or len(self.dn_values) != len(self.s):
            raise InvalidInputError("trace arrays must have equal lengths")

    @property
    def n(self):
        return len(self.s)

    @property
    def fractions(self):
        return np.mod(self.s / self.length, 1.0)

    def weights(self):
        """Trapezoid weights on the uniform samples."""
        w = np.full(self.n, self.step)
        if self.n > 1:
            w[0] = w[-1] = 0.5 * self.step
        return w

    def with_values(self, w_values, dn_values):
        return replace(self, w_values=np.asarray(w_values, dtype=float), dn_values=np.asarray(dn_values, dtype=float))

    def plus_affine(self, c):
        """Traces of ``w + c0 + c1 x1 + c2 x2``."""
        c = np.asarray(c, dtype=float)
        return self.with_values(
            self.w_values + c[0] + self.points @ c[1:],
            self.dn_values + self.normals @ c[1:],
        )

    def scaled(self, factor):
        return self.with_values(factor * self.w_values, factor * self.dn_values)

    def to_rows(self):
        return np.column_stack([self.fractions, self.w_values, self.dn_values])

    def sidecar(self, **extra):
        meta = {"sigma": list(self.sigma), "r0": self.r0, "n_samples": self.n, "step": self.step}
        meta.update(extra)
        return json.dumps(meta, sort_keys=True, indent=2)


def sigma_samples(domain, n_samples=DEFAULT_SAMPLES):
    """Uniform arc positions strictly inside the arc with points and normals."""
    if n_samples < 1:
        raise InvalidInputError("need at least one sample")
    s, step = domain.sigma_arclength(n_samples)
    pts, _, nrm, _ = domain.boundary.frame(s)
    return s, step, pts, nrm


def extract_traces(solution, domain=None, n_samples=DEFAULT_SAMPLES):
    """Traces of ``w`` and ``dw/dn`` on the arc, evaluated from a solved or analytic field.

    The spline is evaluated directly at the exact boundary points; points a
    fraction of a cell outside the polygonized domain use the polynomial of
    the nearest cell with active coefficients.

    Raises
    ------
    InvalidGeometryError
        If a sample lies outside the grid covering the domain (or outside
        the region of an analytic field).
    """
    domain = domain or solution.domain
    s, step, pts, nrm = sigma_samples(domain, n_samples)
    if hasattr(solution, "grid"):
        g = solution.grid.grid
        lo = np.array([g.x0, g.y0])
        hi = lo + g.h * np.array([g.nx, g.ny])
        if np.any(pts < lo) or np.any(pts > hi):
            raise InvalidGeometryError("trace sample outside the solver grid")
    else:
        # analytic fields: the samples must lie on the closure of the field's region
        cover = solution.region_polygon().buffer(1e-9 * domain.r0)
        if not np.all(shapely.contains_xy(cover, pts[:, 0], pts[:, 1])):
            raise InvalidGeometryError("trace sample outside the field's region")
    w, gw, _ = solution.evaluate(pts, inward=-nrm)
    dn = np.sum(gw * nrm, axis=1)
    return TraceData(s, pts, nrm, w, dn, domain.r0, step, tuple(domain.sigma), domain.length)


def analytic_traces(domain, w, grad, n_samples=DEFAULT_SAMPLES):
    """Traces of an analytic field given by callables ``w(pts)`` and ``grad(pts)``."""
    s, step, pts, nrm = sigma_samples(domain, n_samples)
    return TraceData(s, pts, nrm, w(pts), np.sum(grad(pts) * nrm, axis=1), domain.r0, step, tuple(domain.sigma), domain.length)


def _check_pair(t1, t2):
    if t1.n < 4:
        raise UnderdeterminedError(f"gauge fit needs at least 4 samples, got {t1.n}")
    if t1.n != t2.n or not np.allclose(t1.s, t2.s):
        raise InvalidInputError("traces are not sampled on the same arc positions")


def misfit_objective(t1, t2):
    """Return ``J(c)`` and the design blocks of the sum-of-norms gauge problem.

    ``J(c) = ||w2 - w1 - g||_{L2} + r0 ||dn(w2 - w1 - g)||_{L2}`` for
    ``g = c0 + c1 x1 + c2 x2``.
    """
    wt = np.sqrt(t1.weights())
    d = (t2.w_values - t1.w_values) * wt
    e = (t2.dn_values - t1.dn_values) * wt * t1.r0
    A1 = np.column_stack([np.ones(t1.n), t1.points]) * wt[:, None]
    A2 = np.column_stack([np.zeros(t1.n), t1.normals]) * (wt * t1.r0)[:, None]

    def J(c):
        return float(np.linalg.norm(d - A1 @ c) + np.linalg.norm(e - A2 @ c))

    return J, (A1, d), (A2, e)


def gauge_min_misfit(t1, t2, polish=True, max_iter=200):
    """Minimal affine-gauge misfit between two trace sets.

    Minimizes ``||w2 - w1 - g||_{L2(S)} + r0 ||d_n(w2 - w1 - g)||_{L2(S)}``
    over affine ``g``.  The stacked least-squares minimizer of the sum of
    squares is refined by majorize-minimize reweighting (each norm is
    majorized by a quadratic at the current iterate) and finally polished
    by a Nelder-Mead search in scale-free coordinates.

    Returns
    -------
    epsilon : float
    g_star : ndarray of shape (3,)
        Coefficients ``(c0, c1, c2)`` with ``t2 ~ t1 + g_star``.
    """
    _check_pair(t1, t2)
    J, (A1, d), (A2, e) = misfit_objective(t1, t2)
    A = np.vstack([A1, A2])
    b = np.concatenate([d, e])
    c, *_ = np.linalg.lstsq(A, b, rcond=None)
    best_c, best = c, J(c)
    scale = np.linalg.norm(b)
    if scale == 0 or not polish:
        return (best if scale else 0.0), (best_c if scale else np.zeros(3))
    floor = 1e-14 * scale
    for _ in range(max_iter):
        n1 = max(np.linalg.norm(d - A1 @ c), floor)
        n2 = max(np.linalg.norm(e - A2 @ c), floor)
        w1, w2 = 1.0 / np.sqrt(n1), 1.0 / np.sqrt(n2)
        c_new, *_ = np.linalg.lstsq(np.vstack([w1 * A1, w2 * A2]), np.concatenate([w1 * d, w2 * e]), rcond=None)
        val = J(c_new)
        step = np.linalg.norm(c_new - c)
        c = c_new
        if val < best:
            best_c, best = c, val
        if step <= 1e-13 * (np.linalg.norm(c) + scale):
            break
    if best > 0:
        # scale-free polish: c = best_c + sigma * z, objective relative to best
        col = np.maximum(np.linalg.norm(A, axis=0), 1e-300)
        sigma = np.maximum(np.abs(best_c), best / col) * 1e-3
        f0 = best
        res = minimize(
            lambda z: J(best_c + sigma * z) / f0,
            np.zeros(3),
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000, "initial_simplex": np.vstack([np.zeros(3), np.eye(3)])},
        )
        cand = best_c + sigma * res.x
        val = J(cand)
        if val < best:
            best_c, best = cand, val
    return float(best), np.asarray(best_c)


def add_noise(t, level, seed=None):
    """Add Gaussian noise with standard deviation ``level * RMS`` to each trace."""
    if level < 0:
        raise InvalidInputError("noise level must be nonnegative")
    if level == 0:
        return t.with_values(t.w_values.copy(), t.dn_values.copy())
    rng = np.random.default_rng(seed)
    rms_w = np.sqrt(np.mean(t.w_values**2))
    rms_d = np.sqrt(np.mean(t.dn_values**2))
    return t.with_values(
        t.w_values + level * rms_w * rng.standard_normal(t.n),
        t.dn_values + level * rms_d * rng.standard_normal(t.n),
    )


def write_traces(path, t, **meta):
    """CSV ``(arc_length_fraction, w, dn_w)`` plus a JSON sidecar next to it."""
    np.savetxt(path, t.to_rows(), delimiter=",", header="arc_length_fraction,w,dn_w", comments="", fmt="%.17g")
    with open(str(path) + ".json", "w") as fh:
        fh.write(t.sidecar(**meta))
