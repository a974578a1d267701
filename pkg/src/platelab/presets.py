"""Ready-made instances used by the command line, the tests and the benchmarks."""

from __future__ import annotations

from .geometry.curves import Circle, FourierStarCurve
from .geometry.shapes import PlanarDomain, StarInclusion
from .material import Expression, IsotropicPlate


def default_plate(r0=1.0):
    """Constant ``(lambda, mu) = (1, 1)`` with thickness ``0.1 r0``."""
    return IsotropicPlate.constant(1.0, 1.0, h=0.1 * r0)


def heterogeneous_plate(r0=1.0):
    """``lambda = 1`` and ``mu = 1 + 0.2 sin(pi x1 / r0)`` with thickness ``0.1 r0``."""
    return IsotropicPlate(Expression("1"), Expression(f"1 + 0.2*sin(pi*x1/{float(r0)!r})"), h=0.1 * r0)


def disc_domain(radius=1.7, r0=1.0, sigma=(0.0, 0.5), center=(0.0, 0.0)):
    """Circular plate with the measurement arc on the upper half by default."""
    return PlanarDomain(Circle(center, radius), sigma=sigma, r0=r0)


def star_domain(r0=1.0, sigma=(0.0, 0.5)):
    """Gently non-circular plate of mean radius ``1.8 r0``."""
    curve = FourierStarCurve((0.0, 0.0), (1.8 * r0, 0.08 * r0, 0.0, 0.0, 0.05 * r0))
    return PlanarDomain(curve, sigma=sigma, r0=r0)


def disc_inclusion(radius=0.4, center=(0.0, 0.0), K=0):
    return StarInclusion.disc(center, radius, K)


def instance_family(n=10):
    """``n`` admissible (domain, inclusion) pairs varying the inclusion's position and shape."""
    out = []
    dom = disc_domain()
    for k in range(n):
        t = k / max(n - 1, 1)
        cx = -0.2 + 0.4 * t
        cy = 0.15 * (1 - 2 * t) ** 2 - 0.1
        a1 = 0.04 * (1 - t)
        b2 = 0.03 * t
        inc = StarInclusion((cx, cy), (0.35, a1, 0.0, 0.0, b2))
        out.append((dom, inc))
    return out
