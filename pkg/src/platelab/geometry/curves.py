"""Closed boundary curves parametrized by arc length.

All curves are oriented counterclockwise.  The outer normal is the tangent
rotated clockwise by a quarter turn, so that ``tangent = e3 x normal``.
"""

from __future__ import annotations

import numpy as np
import shapely

from ..errors import InvalidGeometryError


def _rot_cw(t):
    return np.stack([t[..., 1], -t[..., 0]], axis=-1)


class ClosedCurve:
    """Interface for arc-length parametrized closed curves.

    Subclasses implement :meth:`_eval` returning points, unit tangents and
    signed curvature at absolute arc-length positions in ``[0, length)``.
    """

    kind = "abstract"
    length: float

    def _eval(self, s):
        raise NotImplementedError

    def _wrap(self, s):
        return np.mod(np.asarray(s, dtype=float), self.length)

    def point(self, s):
        return self._eval(self._wrap(s))[0]

    def tangent(self, s):
        return self._eval(self._wrap(s))[1]

    def normal(self, s):
        return _rot_cw(self.tangent(s))

    def curvature(self, s):
        return self._eval(self._wrap(s))[2]

    def frame(self, s):
        """Return ``(points, tangents, normals, curvature)`` at ``s``."""
        p, t, k = self._eval(self._wrap(s))
        return p, t, _rot_cw(t), k

    def point_at_fraction(self, f):
        return self.point(np.asarray(f, dtype=float) * self.length)

    def sample(self, n):
        """Uniform arc-length samples, ``n`` points starting at ``s = 0``."""
        s = np.arange(n) * (self.length / n)
        return self.point(s)

    def sample_step(self, step):
        n = max(int(np.ceil(self.length / step)), 16)
        return self.sample(n)

    def diameter(self, n=2048):
        from scipy.spatial import ConvexHull
        from scipy.spatial.distance import pdist

        pts = self.sample(n)
        hull = pts[ConvexHull(pts).vertices]
        return float(pdist(hull).max())

    def polygon(self, n):
        """Inscribed polygon with vertices at uniform arc-length fractions."""
        return shapely.Polygon(self.sample(n))

    def check_simple(self, n=2048):
        ring = shapely.LinearRing(self.sample(n))
        if not ring.is_simple:
            raise InvalidGeometryError(f"{self.kind} boundary curve self-intersects")
        if shapely.Polygon(ring).area <= 0.0 or not ring.is_ccw:
            raise InvalidGeometryError(f"{self.kind} boundary curve is degenerate or clockwise")

    def to_dict(self):
        raise NotImplementedError


class Circle(ClosedCurve):
    kind = "circle"

    def __init__(self, center=(0.0, 0.0), radius=1.0):
        if radius <= 0:
            raise InvalidGeometryError("circle radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.length = 2.0 * np.pi * self.radius

    def _eval(self, s):
        th = s / self.radius
        c, sn = np.cos(th), np.sin(th)
        p = self.center + self.radius * np.stack([c, sn], axis=-1)
        t = np.stack([-sn, c], axis=-1)
        return p, t, np.full(np.shape(s), 1.0 / self.radius)

    def to_dict(self):
        return {"type": "circle", "center": self.center.tolist(), "radius": self.radius}


class FourierStarCurve(ClosedCurve):
    """Star-shaped curve ``c + r(theta) (cos theta, sin theta)``.

    ``coeffs = (a0, a1, b1, ..., aK, bK)`` with
    ``r(theta) = a0 + sum_k ak cos(k theta) + bk sin(k theta)``.
    Arc length is obtained from the exact Fourier integral of the speed
    sampled on a dense angle grid; the inverse map is found by Newton steps.
    """

    kind = "fourier-star"

    def __init__(self, center, coeffs, n_dense=4096):
        self.center = np.asarray(center, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.size % 2 != 1:
            raise InvalidGeometryError("fourier-star needs an odd number of coefficients")
        th = np.arange(n_dense) * (2 * np.pi / n_dense)
        if np.min(radius_series(self.coeffs, th)[0]) <= 0:
            raise InvalidGeometryError("fourier-star radius must stay positive")
        r, dr, _ = radius_series(self.coeffs, th)
        speed = np.sqrt(r * r + dr * dr)
        spec = np.fft.rfft(speed) / n_dense
        self._mean_speed = spec[0].real
        k = np.arange(1, spec.size)
        # speed = m + sum 2 Re(c_k e^{ik th}); integral term uses 2 Re(c_k e^{ik th} / (ik))
        ck = spec[1:].copy()
        if n_dense % 2 == 0:
            ck[-1] *= 0.5
        # the speed is analytic, so its spectrum decays fast; drop negligible modes
        keep = np.nonzero(np.abs(ck) > 1e-15 * self._mean_speed)[0]
        kmax = keep[-1] + 1 if keep.size else 0
        self._k = k[:kmax]
        self._ck = ck[:kmax]
        self.length = 2 * np.pi * self._mean_speed

    def _s_of_theta(self, th):
        th = np.asarray(th, dtype=float)
        flat = th.reshape(-1)
        coef = self._ck / (1j * self._k)
        osc = np.empty(flat.size)
        for i in range(0, flat.size, 4096):
            e = np.exp(1j * np.multiply.outer(flat[i : i + 4096], self._k))
            osc[i : i + 4096] = 2.0 * np.real(e @ coef)
        osc0 = 2.0 * np.real(coef.sum())
        return self._mean_speed * th + osc.reshape(th.shape) - osc0

    def _theta_of_s(self, s):
        s = np.asarray(s, dtype=float)
        th = s / self._mean_speed
        for _ in range(30):
            r, dr, _ = radius_series(self.coeffs, th)
            sp = np.sqrt(r * r + dr * dr)
            step = (self._s_of_theta(th) - s) / sp
            th = th - step
            if np.max(np.abs(step), initial=0.0) < 1e-14:
                break
        return th

    def _eval(self, s):
        th = self._theta_of_s(s)
        return star_frame(self.center, self.coeffs, th)

    def to_dict(self):
        return {"type": "fourier-star", "center": self.center.tolist(), "coeffs": self.coeffs.tolist()}


class RoundedPolygon(ClosedCurve):
    """Polygon whose corners are replaced by circular fillets.

    With ``fillet = 0`` the curve is the plain polygon; tangents at corners
    are then one-sided.
    """

    kind = "polygon-smoothed"

    def __init__(self, vertices, fillet=0.0):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3:
            raise InvalidGeometryError("polygon needs at least three vertices")
        if shapely.Polygon(v).exterior.is_ccw is False:
            v = v[::-1]
        self.vertices = v
        self.fillet = float(fillet)
        pieces = []
        n = len(v)
        for i in range(n):
            a, b, c = v[i - 1], v[i], v[(i + 1) % n]
            u1 = (b - a) / np.linalg.norm(b - a)
            u2 = (c - b) / np.linalg.norm(c - b)
            turn = np.arctan2(u1[0] * u2[1] - u1[1] * u2[0], u1 @ u2)
            if turn <= 0 and self.fillet > 0:
                raise InvalidGeometryError("rounded polygon must be convex")
            cut = self.fillet * np.tan(abs(turn) / 2)
            pieces.append((b - cut * u1, b + cut * u2, u1, u2, turn, cut))
        segs = []
        for i in range(n):
            start = pieces[i][1]
            end = pieces[(i + 1) % n][0]
            seglen = np.linalg.norm(end - start)
            if seglen < -1e-12 or (end - start) @ pieces[i][3] < -1e-12:
                raise InvalidGeometryError("fillet radius too large for polygon edges")
            segs.append(("line", start, pieces[i][3], seglen))
            nxt = pieces[(i + 1) % n]
            if self.fillet > 0:
                u1 = nxt[2]
                center = nxt[0] + self.fillet * np.array([-u1[1], u1[0]])
                segs.append(("arc", center, nxt[0], self.fillet * nxt[4]))
        self._segs = segs
        self._starts = np.concatenate([[0.0], np.cumsum([sg[3] for sg in segs])])
        self.length = float(self._starts[-1])

    def _eval(self, s):
        s = np.asarray(s, dtype=float)
        flat = s.reshape(-1)
        p = np.empty((flat.size, 2))
        t = np.empty((flat.size, 2))
        k = np.zeros(flat.size)
        idx = np.clip(np.searchsorted(self._starts, flat, side="right") - 1, 0, len(self._segs) - 1)
        for j, seg in enumerate(self._segs):
            m = idx == j
            if not m.any():
                continue
            loc = flat[m] - self._starts[j]
            if seg[0] == "line":
                _, start, u, _ = seg
                p[m] = start + loc[:, None] * u
                t[m] = u
            else:
                _, center, start, _ = seg
                r0 = start - center
                ang = loc / self.fillet
                c, sn = np.cos(ang), np.sin(ang)
                rv = np.stack([c * r0[0] - sn * r0[1], sn * r0[0] + c * r0[1]], axis=-1)
                p[m] = center + rv
                t[m] = np.stack([-rv[:, 1], rv[:, 0]], axis=-1) / self.fillet
                k[m] = 1.0 / self.fillet
        return p.reshape(s.shape + (2,)), t.reshape(s.shape + (2,)), k.reshape(s.shape)

    def to_dict(self):
        return {"type": "polygon-smoothed", "vertices": self.vertices.tolist(), "fillet": self.fillet}


def radius_series(coeffs, theta, order=2):
    """Radius and its first ``order`` angular derivatives."""
    theta = np.asarray(theta, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    out = [np.full(theta.shape, coeffs[0])] + [np.zeros(theta.shape) for _ in range(order)]
    for k in range(1, (coeffs.size - 1) // 2 + 1):
        a, b = coeffs[2 * k - 1], coeffs[2 * k]
        c, s = np.cos(k * theta), np.sin(k * theta)
        # d^m/dtheta^m of (a cos + b sin) cycles with period 4
        terms = [a * c + b * s, k * (-a * s + b * c), -k**2 * (a * c + b * s), -k**3 * (-a * s + b * c)]
        for m in range(order + 1):
            out[m] = out[m] + (k**4) ** (m // 4) * terms[m % 4]
    return out


def star_frame(center, coeffs, theta):
    """Points, unit tangents and curvature of a star curve at angles ``theta``."""
    r, dr, ddr = radius_series(coeffs, theta)
    c, s = np.cos(theta), np.sin(theta)
    p = np.asarray(center) + np.stack([r * c, r * s], axis=-1)
    d = np.stack([dr * c - r * s, dr * s + r * c], axis=-1)
    speed = np.hypot(d[..., 0], d[..., 1])
    kappa = (r * r + 2 * dr * dr - r * ddr) / speed**3
    return p, d / speed[..., None], kappa


def curve_from_dict(spec):
    kind = spec.get("type", "circle")
    if kind == "circle":
        return Circle(spec.get("center", (0.0, 0.0)), spec["radius"])
    if kind == "fourier-star":
        return FourierStarCurve(spec.get("center", (0.0, 0.0)), spec["coeffs"])
    if kind == "polygon-smoothed":
        return RoundedPolygon(spec["vertices"], spec.get("fillet", 0.0))
    raise InvalidGeometryError(f"unknown boundary type {kind!r}")
