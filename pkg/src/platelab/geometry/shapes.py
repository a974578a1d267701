"""Plate domain, star-shaped inclusions and the a-priori admissibility checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import shapely

from ..errors import InvalidGeometryError
from .curves import Circle, ClosedCurve, FourierStarCurve, radius_series


@dataclass(frozen=True)
class PlanarDomain:
    """Mid-plane of the plate together with the measurement arc.

    Parameters
    ----------
    boundary : ClosedCurve
        Counterclockwise outer boundary.
    sigma : tuple of float
        Start and end of the measurement arc as arc-length fractions of the
        boundary.  The arc runs counterclockwise and may wrap past 0.
    r0, M0, M1, delta0 : float
        A-priori constants: reference length, graph-regularity constant,
        diameter constant and arc-fraction constant.
    p0 : float, optional
        Arc fraction of the distinguished point of the arc; defaults to its
        midpoint.
    """

    boundary: ClosedCurve
    sigma: tuple = (0.0, 0.5)
    r0: float = 1.0
    M0: float = 0.5
    M1: float = 10.0
    delta0: float = 0.1
    p0: float | None = None

    def __post_init__(self):
        if self.r0 <= 0:
            raise InvalidGeometryError("r0 must be positive")
        if self.M0 < 0.5:
            raise InvalidGeometryError("M0 must be at least 1/2")
        if not 0 < self.delta0 < 1:
            raise InvalidGeometryError("delta0 must lie in (0, 1)")
        f0, f1 = float(self.sigma[0]), float(self.sigma[1])
        object.__setattr__(self, "sigma", (f0, f1))
        if self.p0 is None:
            object.__setattr__(self, "p0", (f0 + 0.5 * self.sigma_fraction) % 1.0)

    @property
    def length(self):
        return self.boundary.length

    @property
    def sigma_fraction(self):
        f0, f1 = self.sigma
        span = (f1 - f0) % 1.0
        return 1.0 if span == 0.0 and f1 != f0 else span

    @property
    def sigma_length(self):
        return self.sigma_fraction * self.length

    def in_sigma(self, frac, margin=0.0):
        """Whether boundary fractions lie on the arc (optionally shrunk by ``margin``)."""
        rel = np.mod(np.asarray(frac, dtype=float) - self.sigma[0], 1.0)
        return (rel > margin) & (rel < self.sigma_fraction - margin)

    def sigma_arclength(self, n):
        """Cell-centred uniform arc-length positions strictly inside the arc."""
        step = self.sigma_length / n
        return self.sigma[0] * self.length + (np.arange(n) + 0.5) * step, step

    @property
    def p0_point(self):
        return self.boundary.point_at_fraction(self.p0)

    def polygon(self, n=None, step=None):
        if n is None:
            n = max(64, int(np.ceil(self.length / (step or self.r0 / 200))))
        return self.boundary.polygon(n)

    def contains(self, pts, n=4096):
        pts = np.asarray(pts, dtype=float)
        return shapely.contains_xy(self.polygon(n), pts[..., 0], pts[..., 1])

    def diameter(self):
        return self.boundary.diameter()

    def bounds(self, n=4096):
        return self.polygon(n).bounds


@dataclass(frozen=True)
class StarInclusion:
    """Star-shaped inclusion ``{c + rho (cos t, sin t): rho < r(t)}``.

    ``radii = (a0, a1, b1, ..., aK, bK)`` are Fourier coefficients of the
    radius function.
    """

    center: tuple
    radii: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in np.ravel(self.center))
        r = tuple(float(v) for v in np.ravel(self.radii))
        if len(c) != 2:
            raise InvalidGeometryError("inclusion center must be a 2-vector")
        if len(r) % 2 != 1:
            raise InvalidGeometryError("radius coefficients must be (a0, a1, b1, ..., aK, bK)")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radii", r)
        th = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        if np.min(self.radius(th)) <= 0:
            raise InvalidGeometryError("inclusion radius function must stay positive")

    @classmethod
    def disc(cls, center, radius, K=0):
        return cls(center, (radius,) + (0.0,) * (2 * K))

    @classmethod
    def from_params(cls, params):
        p = np.asarray(params, dtype=float)
        return cls(p[:2], p[2:])

    @property
    def params(self):
        return np.array(self.center + self.radii)

    @property
    def K(self):
        return (len(self.radii) - 1) // 2

    def with_modes(self, K):
        r = list(self.radii[: 2 * K + 1]) + [0.0] * max(0, 2 * K + 1 - len(self.radii))
        return StarInclusion(self.center, r)

    def dilated(self, factor):
        return StarInclusion(self.center, tuple(factor * np.asarray(self.radii)))

    def radius(self, theta, order=0):
        out = radius_series(self.radii, theta, order=max(order, 0))
        return out[0] if order == 0 else out

    def curve(self):
        if self.K == 0:
            return Circle(self.center, self.radii[0])
        return FourierStarCurve(self.center, self.radii)

    def boundary_points(self, n):
        """Points at equally spaced polar angles."""
        th = np.arange(n) * (2 * np.pi / n)
        r = self.radius(th)
        return np.asarray(self.center) + np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)

    def sample_step(self, step):
        curve = self.curve()
        return curve.sample(max(16, int(np.ceil(curve.length / step))))

    def polygon(self, n=512):
        return shapely.Polygon(self.boundary_points(n))

    def max_radius(self, n=2048):
        return float(np.max(self.radius(np.linspace(0, 2 * np.pi, n, endpoint=False))))

    def min_radius(self, n=2048):
        return float(np.min(self.radius(np.linspace(0, 2 * np.pi, n, endpoint=False))))

    def level_set(self, pts, derivatives=2):
        """Radial level set ``phi = |x - c| - r(theta)`` with gradient and Hessian.

        ``phi < 0`` inside the inclusion.  Returns ``(phi, grad, hess)`` with
        shapes ``(m,)``, ``(m, 2)`` and ``(m, 2, 2)``.  Undefined at the center.
        """
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        dx = pts[:, 0] - self.center[0]
        dy = pts[:, 1] - self.center[1]
        rho2 = dx * dx + dy * dy
        rho = np.sqrt(rho2)
        th = np.arctan2(dy, dx)
        r, dr, ddr = radius_series(self.radii, th)
        phi = rho - r
        if derivatives == 0:
            return phi
        er = np.stack([dx, dy], axis=-1) / rho[:, None]
        gth = np.stack([-dy, dx], axis=-1) / rho2[:, None]
        grad = er - dr[:, None] * gth
        rho4 = rho2 * rho2
        hth = np.empty((len(pts), 2, 2))
        hth[:, 0, 0] = 2 * dx * dy / rho4
        hth[:, 1, 1] = -hth[:, 0, 0]
        hth[:, 0, 1] = hth[:, 1, 0] = (dy * dy - dx * dx) / rho4
        hess = (np.eye(2) - er[:, :, None] * er[:, None, :]) / rho[:, None, None]
        hess -= ddr[:, None, None] * gth[:, :, None] * gth[:, None, :]
        hess -= dr[:, None, None] * hth
        return phi, grad, hess

    def contains(self, pts):
        return self.level_set(pts, derivatives=0) < 0

    def to_dict(self):
        return {"center": list(self.center), "radii": list(self.radii)}


@dataclass
class AprioriCheck:
    name: str
    passed: bool
    value: float
    threshold: float
    relation: str


@dataclass
class AprioriReport:
    """Named pass/fail results, each with its measured value and threshold."""

    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def summary(self):
        lines = []
        for c in self.checks:
            flag = "ok  " if c.passed else "FAIL"
            lines.append(f"{flag} {c.name}: {c.value:.6g} {c.relation} {c.threshold:.6g}")
        return "\n".join(lines)

    def to_dict(self):
        return {"passed": self.passed, "checks": [vars(c) for c in self.checks]}


def regularity_proxy(inclusion, n=1024):
    """Largest scaled curvature derivative of orders 0 to 4 on ``∂D``.

    The curvature is sampled at uniform arc length and differentiated by
    periodic divided differences; order ``k`` is scaled by ``r0**(k+1)``
    outside this function.
    """
    curve = inclusion.curve()
    step = curve.length / n
    kappa = curve.curvature(np.arange(n) * step)
    out = [np.max(np.abs(kappa))]
    d = kappa
    for _ in range(4):
        d = (np.roll(d, -1) - d) / step
        out.append(np.max(np.abs(d)))
    return np.array(out)


def check_apriori(domain, inclusion, curvature_bound=1e4, n=2048):
    """Evaluate the a-priori assumptions for a domain/inclusion pair.

    Raises
    ------
    InvalidGeometryError
        If either boundary curve self-intersects.
    """
    domain.boundary.check_simple(n)
    if inclusion is not None and not shapely.LinearRing(inclusion.boundary_points(n)).is_simple:
        raise InvalidGeometryError("inclusion boundary self-intersects")
    r0 = domain.r0
    rep = AprioriReport()
    diam = domain.diameter()
    rep.checks.append(AprioriCheck("bound_area", diam <= domain.M1 * r0 * (1 + 1e-12), diam / r0, domain.M1, "<="))
    if inclusion is not None:
        omega = domain.polygon(n)
        poly = inclusion.polygon(n)
        inside = omega.contains(poly)
        clear = omega.exterior.distance(poly) if inside else 0.0
        rep.checks.append(AprioriCheck("compactness", inside and clear >= r0 * (1 - 1e-9), clear / r0, 1.0, ">="))
        prox = regularity_proxy(inclusion) * r0 ** np.arange(1, 6)
        rep.checks.append(AprioriCheck("reg_D", bool(np.all(prox <= curvature_bound)), float(prox.max()), curvature_bound, "<="))
    frac = domain.sigma_fraction
    rep.checks.append(AprioriCheck("small_enough", frac <= 1 - domain.delta0, frac, 1 - domain.delta0, "<="))
    rep.checks.append(_large_enough(domain, n))
    return rep


def _large_enough(domain, n):
    """Boundary points inside the rectangle ``R_{r0, 2 M0 r0}(P0)`` must lie on the arc.

    The rectangle is taken in the tangent/normal frame at ``P0``.
    """
    s = np.arange(n) / n
    pts = domain.boundary.point_at_fraction(s)
    p, t, nrm, _ = domain.boundary.frame(domain.p0 * domain.length)
    rel = pts - p
    a, b = domain.r0, 2 * domain.M0 * domain.r0
    in_rect = (np.abs(rel @ t) < a) & (np.abs(rel @ nrm) < b)
    outside = in_rect & ~domain.in_sigma(s)
    frac_bad = float(outside.sum()) / max(int(in_rect.sum()), 1)
    return AprioriCheck("large_enough", not outside.any(), frac_bad, 0.0, "<=")
