"""Pairs of inclusions: forward solves, misfits and set distances per pair."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import shapely

from ..boundary_data import DEFAULT_SAMPLES, extract_traces, gauge_min_misfit
from ..errors import InvalidGeometryError, InvalidInputError, ResolutionError, SolverError, UndefinedRatioError
from ..geometry.distances import complement_distances, hausdorff_distance
from ..geometry.regions import component_polygon
from ..geometry.shapes import StarInclusion, check_apriori
from ..solver.grid import build_grid
from ..solver.norms import hessian_l2, h_minus_half_surrogate
from ..solver.solve import release_factorizations, solve_dirichlet_form

RECORD_COLUMNS = ("pair_id", "epsilon", "epsilon_norm", "delta", "d", "d_m", "L1", "L2", "resolution", "seed")


@dataclass
class StabilityRecord:
    """Misfit and distances for one pair ``(D1, D2)``.

    ``epsilon_norm`` is ``B_ref * epsilon / (r0^2 * ||M||)`` with the
    ``H^-1/2`` surrogate norm of the couple field.  ``L1`` and ``L2`` are
    the Hessian energies of ``w_1`` and ``w_2`` on ``(Omega minus G) minus D_i``
    where ``G`` is the complement component touching the arc.  A pair whose
    solve failed carries ``nan`` values and a nonempty ``flag``.
    """

    pair_id: int
    epsilon: float
    epsilon_norm: float
    delta: float
    d: float
    d_m: float
    L1: float
    L2: float
    resolution: int
    seed: int
    couple_norm: float = float("nan")
    data_resolution: int = 0
    flag: str = ""

    def __post_init__(self):
        if self.flag:
            return
        for name in ("epsilon", "delta", "d", "d_m"):
            if not getattr(self, name) >= 0:
                raise InvalidInputError(f"record {self.pair_id}: {name} must be nonnegative")
        if self.d_m > self.d:
            raise InvalidInputError(f"record {self.pair_id}: d_m exceeds d")

    @property
    def ok(self):
        return not self.flag

    @property
    def d_over_dm(self):
        return self.d / self.d_m if self.d_m > 0 else float("inf")

    def row(self):
        return [getattr(self, c) for c in RECORD_COLUMNS]

    def to_dict(self):
        return asdict(self)


@dataclass
class SweepSetup:
    """Forward model shared by every pair of a sweep.

    The base inclusion is solved at ``resolution * data_factor`` (the data)
    and each perturbed inclusion at ``resolution`` (the model), so the two
    solves never share a discretization.  ``jobs`` caps the number of pairs
    solved concurrently.
    """

    domain: object
    plate: object
    couple: object
    resolution: int = 96
    data_factor: int = 2
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    jobs: int = 1

    @property
    def data_resolution(self):
        return int(self.resolution * self.data_factor)

    @property
    def couple_norm(self):
        return float(h_minus_half_surrogate(self.couple))

    def normalize(self, epsilon):
        """Dimensionless misfit ``B_ref * epsilon / (r0^2 * ||M||)``."""
        return normalized_epsilon(epsilon, self.plate, self.couple, self.domain.r0)


def normalized_epsilon(epsilon, plate, couple, r0):
    """``B_ref * epsilon / (r0^2 * ||M||_surrogate)``; invariant under scaling of ``M``."""
    mnorm = h_minus_half_surrogate(couple)
    if mnorm == 0:
        raise UndefinedRatioError("couple field has zero norm")
    return plate.reference_stiffness * np.asarray(epsilon, dtype=float) / (r0**2 * mnorm)


def dilation_family(base, sizes):
    """Inclusions whose mean radius exceeds that of ``base`` by each of ``sizes``.

    For a disc the Hausdorff distance to ``base`` equals the size exactly.
    """
    out = []
    for s in sizes:
        radii = list(base.radii)
        radii[0] += float(s)
        out.append(StarInclusion(tuple(base.center), tuple(radii)))
    return out


def _solve(domain, inclusion, plate, couple, resolution):
    sol = solve_dirichlet_form(build_grid(domain, inclusion, resolution), plate, couple)
    release_factorizations()
    return sol


def cauchy_region(domain, d1, d2, inclusion):
    """``(Omega minus G) minus D`` for the complement component ``G`` touching the arc."""
    g_poly, omega = component_polygon(domain, d1, d2)
    if g_poly.is_empty:
        raise InvalidGeometryError("the component touching the arc is empty")
    rest = omega.difference(g_poly).difference(inclusion.polygon(1024))
    return rest


def cauchy_integral(solution, domain, d1, d2):
    """``int_{(Omega minus G) minus D} |D2 w|^2`` for the solution on ``D = solution.inclusion``."""
    region = cauchy_region(domain, d1, d2, solution.inclusion)
    # slivers left by polygonization carry no area
    if region.is_empty or region.area <= 1e-10 * domain.r0**2:
        return 0.0
    region = shapely.make_valid(region)
    return float(hessian_l2(solution, region))


def _pair(args):
    pid, base, pert, setup, base_traces, base_sol = args
    rec = dict(pair_id=pid, resolution=setup.resolution, seed=setup.seed, couple_norm=setup.couple_norm,
               data_resolution=setup.data_resolution)
    try:
        sol = _solve(setup.domain, pert, setup.plate, setup.couple, setup.resolution)
        traces = extract_traces(sol, setup.domain, setup.n_samples)
        eps = gauge_min_misfit(base_traces, traces)[0]
        step = setup.domain.r0 / 200
        delta = hausdorff_distance(base, pert, step=step)
        d, dm = complement_distances(setup.domain, base, pert, step=step)
        L1 = cauchy_integral(base_sol, setup.domain, base, pert)
        L2 = cauchy_integral(sol, setup.domain, base, pert)
    except (InvalidGeometryError, ResolutionError, SolverError) as exc:
        nan = float("nan")
        return StabilityRecord(epsilon=nan, epsilon_norm=nan, delta=nan, d=nan, d_m=nan, L1=nan, L2=nan,
                               flag=f"{type(exc).__name__}: {exc}", **rec)
    return StabilityRecord(epsilon=float(eps), epsilon_norm=float(setup.normalize(eps)), delta=float(delta),
                           d=float(d), d_m=float(dm), L1=L1, L2=L2, **rec)


def sweep(base, perturbations, setup):
    """One record per pair ``(base, perturbed)``, in the order of ``perturbations``.

    The base is solved once at the data resolution; each perturbed
    inclusion is solved at the model resolution.  ``epsilon`` is the
    gauge-minimal trace misfit, ``delta`` the Hausdorff distance of the
    inclusions and ``(d, d_m)`` the complement distances.  A failed solve
    yields a flagged record and the sweep continues.

    Raises
    ------
    InvalidInputError
        If an inclusion fails the a-priori checks.
    """
    for k, inc in enumerate([base, *perturbations]):
        rep = check_apriori(setup.domain, inc)
        if not rep.passed:
            names = ", ".join(c.name for c in rep.failures())
            raise InvalidInputError(f"inclusion {k} fails the a-priori checks: {names}")
    base_sol = _solve(setup.domain, base, setup.plate, setup.couple, setup.data_resolution)
    base_traces = extract_traces(base_sol, setup.domain, setup.n_samples)
    tasks = [(k, base, p, setup, base_traces, base_sol) for k, p in enumerate(perturbations)]
    jobs = max(1, int(setup.jobs or 1))
    if jobs == 1 or len(tasks) < 2:
        return [_pair(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks), os.cpu_count() or 1)) as ex:
        return list(ex.map(_pair, tasks))
