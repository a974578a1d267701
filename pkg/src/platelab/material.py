"""Isotropic plate constitutive law.

Lamé fields are closed-form expressions in ``x1, x2`` parsed with sympy, so
their derivatives up to order four are exact on samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
import sympy

from .errors import ConfigError, InvalidInputError, SingularModuliError

_X1, _X2 = sympy.symbols("x1 x2", real=True)
_NAMESPACE = {
    "x1": _X1,
    "x2": _X2,
    "sin": sympy.sin,
    "cos": sympy.cos,
    "exp": sympy.exp,
    "pi": sympy.pi,
}


class Expression:
    """Scalar field ``f(x1, x2)`` given as an expression string.

    The grammar is arithmetic (``+ - * / **``), ``sin``, ``cos``, ``exp``,
    the constant ``pi``, numeric literals and the coordinates ``x1, x2``.
    """

    def __init__(self, text):
        self.text = str(text)
        try:
            expr = sympy.parse_expr(self.text, local_dict=dict(_NAMESPACE), global_dict={"__builtins__": {}, **_sympy_atoms()})
        except Exception as exc:  # sympy raises a variety of parse errors
            raise ConfigError(f"cannot parse expression {self.text!r}: {exc}") from exc
        if not isinstance(expr, sympy.Expr) or expr.free_symbols - {_X1, _X2}:
            raise ConfigError(f"expression {self.text!r} may only use x1 and x2")
        self.expr = expr
        self.is_constant = not expr.free_symbols
        self._cache = {}

    def derivative(self, nx=0, ny=0):
        """Callable evaluating ``d^(nx+ny) f / dx1^nx dx2^ny`` on ``(..., 2)`` points."""
        key = (nx, ny)
        if key not in self._cache:
            d = self.expr
            if nx:
                d = sympy.diff(d, _X1, nx)
            if ny:
                d = sympy.diff(d, _X2, ny)
            fn = sympy.lambdify((_X1, _X2), d, modules="numpy")
            self._cache[key] = fn
        fn = self._cache[key]

        def evaluate(pts):
            pts = np.asarray(pts, dtype=float)
            out = fn(pts[..., 0], pts[..., 1])
            return np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1]).copy()

        return evaluate

    def __call__(self, pts):
        return self.derivative()(pts)

    def __repr__(self):
        return f"Expression({self.text!r})"


def _sympy_atoms():
    return {"Integer": sympy.Integer, "Float": sympy.Float, "Rational": sympy.Rational, "Symbol": sympy.Symbol}


def young_poisson(lam, mu):
    """Young modulus and Poisson ratio from the Lamé moduli.

    ``E = mu (2 mu + 3 lam) / (mu + lam)`` and ``nu = lam / (2 (mu + lam))``.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    s = mu + lam
    if np.any(s == 0):
        raise SingularModuliError("mu + lambda vanishes")
    if np.any(mu <= 0) or np.any(s < 0):
        raise InvalidInputError("young_poisson requires mu > 0 and mu + lambda > 0")
    E = mu * (2 * mu + 3 * lam) / s
    nu = lam / (2 * s)
    if E.ndim == 0:
        return float(E), float(nu)
    return E, nu


def bending_stiffness(E, nu, h):
    """``B = h^3 E / (12 (1 - nu^2))``."""
    E = np.asarray(E, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu * nu == 1):
        raise SingularModuliError("Poisson ratio of modulus one")
    if np.any(np.abs(nu) > 1) or h <= 0:
        raise InvalidInputError("bending_stiffness requires |nu| < 1 and h > 0")
    B = h**3 / 12.0 * E / (1 - nu * nu)
    return float(B) if B.ndim == 0 else B


def plate_tensor_apply(B, nu, A):
    """``P A = B [(1 - nu) sym(A) + nu tr(A) I]``; broadcasts over leading axes."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)[..., None, None]
    nu = np.asarray(nu, dtype=float)[..., None, None]
    sym = 0.5 * (A + np.swapaxes(A, -1, -2))
    tr = np.trace(A, axis1=-2, axis2=-1)[..., None, None]
    return B * ((1 - nu) * sym + nu * tr * np.eye(2))


def tensor_quadratic_form(B, nu, A):
    """``P A : A = B [(1 - nu) |A|^2 + nu (tr A)^2]`` for symmetric ``A``."""
    A = np.asarray(A, dtype=float)
    frob = np.sum(A * A, axis=(-2, -1))
    tr = np.trace(A, axis1=-2, axis2=-1)
    out = np.asarray(B) * ((1 - np.asarray(nu)) * frob + np.asarray(nu) * tr * tr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class PlateTensorSample:
    B: float
    nu: float
    point: tuple

    def __post_init__(self):
        assert self.B > 0, "bending stiffness must be positive"
        assert -1 < self.nu < 0.5, "Poisson ratio outside (-1, 1/2)"


@dataclass
class ConvexityReport:
    min_mu: float
    min_2mu_3lam: float
    alpha0: float
    gamma0: float
    c4_norm: float = float("nan")
    Lambda0: float = float("inf")
    n_points: int = 0

    @property
    def mu_ok(self):
        return self.min_mu >= self.alpha0

    @property
    def bulk_ok(self):
        return self.min_2mu_3lam >= self.gamma0

    @property
    def c4_ok(self):
        return not self.c4_norm > self.Lambda0

    @property
    def passed(self):
        return self.mu_ok and self.bulk_ok

    def to_dict(self):
        d = dict(vars(self))
        d.update(mu_ok=self.mu_ok, bulk_ok=self.bulk_ok, c4_ok=self.c4_ok, passed=self.passed)
        return d


@dataclass
class IsotropicPlate:
    """Lamé coefficient fields, thickness and a-priori material constants."""

    lambda_field: Expression
    mu_field: Expression
    h: float = 0.1
    alpha0: float = 0.5
    gamma0: float = 0.5
    Lambda0: float = 100.0
    _const: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.lambda_field, Expression):
            self.lambda_field = Expression(self.lambda_field)
        if not isinstance(self.mu_field, Expression):
            self.mu_field = Expression(self.mu_field)
        if self.h <= 0:
            raise InvalidInputError("plate thickness must be positive")
        if self.is_constant:
            lam = float(self.lambda_field.expr)
            mu = float(self.mu_field.expr)
            E, nu = young_poisson(lam, mu)
            self._const = (bending_stiffness(E, nu, self.h), nu)

    @classmethod
    def constant(cls, lam=1.0, mu=1.0, h=0.1, **kw):
        return cls(Expression(repr(float(lam))), Expression(repr(float(mu))), h=h, **kw)

    @property
    def is_constant(self):
        return self.lambda_field.is_constant and self.mu_field.is_constant

    def lam(self, pts):
        return self.lambda_field(pts)

    def mu(self, pts):
        return self.mu_field(pts)

    def stiffness(self, pts):
        """Bending stiffness and Poisson ratio fields at ``pts``."""
        pts = np.asarray(pts, dtype=float)
        if self._const is not None:
            B, nu = self._const
            shape = pts.shape[:-1]
            return np.full(shape, B), np.full(shape, nu)
        E, nu = young_poisson(self.lam(pts), self.mu(pts))
        return bending_stiffness(E, nu, self.h), nu

    def sample(self, point):
        B, nu = self.stiffness(np.asarray(point, dtype=float))
        return PlateTensorSample(float(B), float(nu), tuple(point))

    @property
    def reference_stiffness(self):
        """Bending stiffness at the origin, used to make moments dimensionless."""
        return float(self.stiffness(np.zeros(2))[0])

    def c4_proxy(self, pts):
        """Max over samples of all partial derivatives of order at most four."""
        best = 0.0
        for field_ in (self.lambda_field, self.mu_field):
            for order in range(5):
                for combo in combinations_with_replacement((0, 1), order):
                    nx = combo.count(0)
                    vals = field_.derivative(nx, order - nx)(pts)
                    best = max(best, float(np.max(np.abs(vals))))
        return best

    def to_dict(self):
        return {
            "lambda": self.lambda_field.text,
            "mu": self.mu_field.text,
            "h": self.h,
            "alpha0": self.alpha0,
            "gamma0": self.gamma0,
            "Lambda0": self.Lambda0,
        }


def check_convexity(plate, grid):
    """Compare sampled ``min mu`` and ``min (2 mu + 3 lam)`` with ``alpha0, gamma0``.

    ``grid`` is any array of points with trailing dimension 2.
    """
    pts = np.asarray(grid, dtype=float).reshape(-1, 2)
    mu = plate.mu(pts)
    lam = plate.lam(pts)
    return ConvexityReport(
        min_mu=float(mu.min()),
        min_2mu_3lam=float((2 * mu + 3 * lam).min()),
        alpha0=plate.alpha0,
        gamma0=plate.gamma0,
        c4_norm=plate.c4_proxy(pts),
        Lambda0=plate.Lambda0,
        n_points=len(pts),
    )
