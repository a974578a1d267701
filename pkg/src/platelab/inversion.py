"""Reconstruction of a rigid inclusion from boundary traces by derivative-free search."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .boundary_data import DEFAULT_SAMPLES, extract_traces, gauge_min_misfit
from .errors import InvalidGeometryError, InvalidInputError, ResolutionError, SolverError
from .geometry.distances import hausdorff_distance
from .geometry.shapes import StarInclusion
from .solver.grid import build_grid
from .solver.solve import solve_dirichlet_form

PENALTY_FACTOR = 1e6


class BudgetExhausted(Exception):
    """Raised inside the objective when the evaluation budget is spent."""


def data_scale(traces):
    """Gauge-minimal misfit of a trace set against zero traces, the unit of the misfit.

    Adding an affine function to the data leaves it unchanged, so the
    penalty, the floor and the stopping tolerance are gauge invariant.
    """
    zero = np.zeros_like(traces.w_values)
    return float(gauge_min_misfit(traces, traces.with_values(zero, zero))[0])


def default_bounds(domain, k_modes, center, radius, spread=None):
    """Box bounds around a reference inclusion: center, mean radius and Fourier modes."""
    r0 = domain.r0
    spread = spread or r0
    lo = [center[0] - spread, center[1] - spread, max(0.05 * r0, radius - spread)]
    hi = [center[0] + spread, center[1] + spread, radius + spread]
    for _ in range(2 * k_modes):
        lo.append(-0.25 * radius)
        hi.append(0.25 * radius)
    return np.array(lo), np.array(hi)


@dataclass
class InverseSetup:
    """Everything the misfit needs: forward model, data and search space.

    ``bounds`` is a pair of arrays over the parameters
    ``(cx, cy, a0, a1, b1, ..., aK, bK)`` of a :class:`StarInclusion`.
    """

    domain: object
    plate: object
    couple: object
    observed: object
    bounds: tuple
    resolution: int = 32
    budget: int = 500
    restarts: int = 3
    seed: int = 0
    n_samples: int = DEFAULT_SAMPLES
    truth: object = None
    floor: float = 1e-8

    def __post_init__(self):
        lo, hi = (np.asarray(b, dtype=float) for b in self.bounds)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise InvalidInputError("bounds must be two arrays with lower < upper")
        if (len(lo) - 3) % 2:
            raise InvalidInputError("parameter vector must be (cx, cy, a0, a1, b1, ..., aK, bK)")
        self.bounds = (lo, hi)
        if abs(self.observed.length - self.domain.length) > 1e-9 * self.domain.length or tuple(self.observed.sigma) != tuple(
            self.domain.sigma
        ):
            raise InvalidInputError("observed traces are not sampled on the arc of the domain")
        self.scale = data_scale(self.observed)
        self.omega_polygon = self.domain.polygon(4096)

    @property
    def k_modes(self):
        return (len(self.bounds[0]) - 3) // 2

    @property
    def penalty(self):
        return PENALTY_FACTOR * max(self.scale, 1e-300)


@dataclass
class Evaluation:
    params: tuple
    misfit: float
    flagged: str = ""
    restart: int = 0


def forward_traces(inclusion, setup):
    """Solve the Dirichlet form for a candidate and extract its traces."""
    pg = build_grid(setup.domain, inclusion, setup.resolution)
    sol = solve_dirichlet_form(pg, setup.plate, setup.couple)
    return extract_traces(sol, setup.domain, setup.n_samples)


def _candidate(params, setup):
    """Inclusion for a parameter vector, or the reason it is inadmissible."""
    try:
        inc = StarInclusion.from_params(params)
    except InvalidGeometryError as exc:
        return None, f"invalid shape: {exc}"
    omega = setup.omega_polygon
    poly = inc.polygon(1024)
    if not omega.contains(poly) or omega.exterior.distance(poly) < setup.domain.r0:
        return None, "compactness"
    return inc, ""


def misfit(params, setup, flags=None):
    """Gauge-minimal misfit between the prediction for ``params`` and the observed traces.

    Inadmissible candidates (non-positive radius, compactness violation,
    unresolvable geometry or a failed solve) return the finite penalty
    ``1e6 * data scale``; the reason is appended to ``flags`` when given.
    """
    inc, reason = _candidate(params, setup)
    if inc is not None:
        try:
            pred = forward_traces(inc, setup)
            return gauge_min_misfit(setup.observed, pred)[0]
        except (InvalidGeometryError, ResolutionError, SolverError) as exc:
            reason = f"{type(exc).__name__}: {exc}"
    if flags is not None:
        flags.append(reason)
    return setup.penalty


@dataclass
class ReconstructionResult:
    best: StarInclusion
    misfit: float
    history: list
    evaluations: int
    converged: bool
    hausdorff: float | None = None
    wall_time: float = 0.0
    restarts_run: int = 0
    notes: list = field(default_factory=list)

    def to_dict(self):
        """Deterministic record (the wall time is reported separately)."""
        return {
            "best_params": [float(v) for v in self.best.params],
            "misfit": float(self.misfit),
            "hausdorff": None if self.hausdorff is None else float(self.hausdorff),
            "evaluations": int(self.evaluations),
            "converged": bool(self.converged),
            "restarts_run": int(self.restarts_run),
            "notes": list(self.notes),
        }


class _Objective:
    """Budgeted, memoized objective recording the full evaluation history."""

    def __init__(self, setup):
        self.setup = setup
        self.history = []
        self.cache = {}
        self.restart = 0
        self.best = (np.inf, None)

    def __call__(self, x):
        lo, hi = self.setup.bounds
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        key = tuple(np.round(x, 14))
        if key in self.cache:
            return self.cache[key]
        if len(self.history) >= self.setup.budget:
            raise BudgetExhausted
        flags = []
        val = float(misfit(x, self.setup, flags))
        if not np.isfinite(val):
            val, flags = self.setup.penalty, flags + ["non-finite"]
        self.cache[key] = val
        self.history.append(Evaluation(tuple(float(v) for v in x), val, "; ".join(flags), self.restart))
        if val < self.best[0]:
            self.best = (val, x.copy())
        return val


def _simplex(x0, lo, hi, frac):
    """Initial simplex with steps of ``frac`` times the box width, kept inside the box."""
    n = len(x0)
    sim = np.tile(x0, (n + 1, 1))
    width = hi - lo
    for k in range(n):
        step = frac * width[k]
        sim[k + 1, k] = x0[k] + step if x0[k] + step <= hi[k] else x0[k] - step
    return sim


def reconstruct(setup, init, xatol=None, simplex_fraction=0.05):
    """Bounded Nelder-Mead from ``init`` followed by seeded random restarts.

    Each restart starts from the best point so far perturbed uniformly within
    10% of the box width.  All runs share one evaluation budget; when the
    budget is exhausted the best point so far is returned, with
    ``converged=False`` unless an earlier run had already converged.
    ``init`` is a parameter vector or a :class:`StarInclusion`.  ``xatol``
    is the simplex size at which a run stops, ``1e-3 r0`` by default.
    """
    t0 = time.perf_counter()
    lo, hi = setup.bounds
    x0 = np.asarray(init.params if isinstance(init, StarInclusion) else init, dtype=float)
    if x0.shape != lo.shape:
        raise InvalidInputError(f"initial guess has {x0.size} parameters, bounds have {lo.size}")
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise InvalidInputError("initial guess lies outside the bounds")
    obj = _Objective(setup)
    rng = np.random.default_rng(setup.seed)
    xatol = xatol if xatol is not None else 1e-3 * setup.domain.r0
    converged = False
    notes = []
    runs = 0
    try:
        f0 = obj(x0)
        if f0 <= setup.floor * setup.scale:
            converged = True
            notes.append("initial guess already at the misfit floor")
        else:
            starts = [x0]
            for r in range(setup.restarts + 1):
                if r > 0:
                    best_x = obj.best[1]
                    pert = rng.uniform(-0.1, 0.1, size=len(lo)) * (hi - lo)
                    starts.append(np.clip(best_x + pert, lo, hi))
                obj.restart = r
                res = minimize(
                    obj,
                    starts[-1],
                    method="Nelder-Mead",
                    bounds=list(zip(lo, hi)),
                    options={
                        "initial_simplex": _simplex(starts[-1], lo, hi, simplex_fraction),
                        "xatol": xatol,
                        "fatol": setup.floor * setup.scale,
                        "maxfev": setup.budget,
                    },
                )
                runs += 1
                converged = converged or bool(res.success)
                if obj.best[0] <= setup.floor * setup.scale:
                    break
    except BudgetExhausted:
        # a completed earlier run keeps its convergence status
        pass
    if len(obj.history) >= setup.budget:
        notes.append("evaluation budget exhausted")
    val, x = obj.best
    best = StarInclusion.from_params(x)
    dh = None
    if setup.truth is not None:
        dh = hausdorff_distance(best, setup.truth, step=setup.domain.r0 / 200)
    return ReconstructionResult(
        best, val, obj.history, len(obj.history), converged, dh, time.perf_counter() - t0, runs, notes
    )
