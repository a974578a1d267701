"""Command-line entry point: ``platelab forward | invert | sweep | fit | verify | check-config``.

Each command writes into one experiment directory: the outputs, a copy of
the configuration, ``manifest.json`` with SHA-256 hashes of every input
file, and ``meta.json`` with timestamps and wall times.  Everything except
``meta.json`` is byte-identical across runs with the same configuration.

Exit codes: 0 success, 1 configuration or validation error, 2 solver
failure, 3 no convergence within the evaluation budget.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import shapely
from shapely.ops import polylabel

from . import __version__
from .boundary_data import add_noise, extract_traces, write_traces
from .config import ExperimentConfig, schema_help
from .errors import (
    ConfigError,
    InvalidGeometryError,
    InvalidInputError,
    PlateLabError,
    ResolutionError,
    SolverError,
    UnderdeterminedError,
    UndefinedRatioError,
)
from .geometry.shapes import check_apriori
from .inversion import InverseSetup, default_bounds, reconstruct
from .solver.grid import build_grid
from .solver.norms import _field_region, energy, verify_energy_estimate
from .solver.solve import release_factorizations, solve_dirichlet_form
from .stability import (
    SweepSetup,
    dilation_family,
    fit_log_law,
    read_records,
    sweep,
    verify_cauchy_decay,
    verify_fvr_boundary,
    verify_fvr_interior,
    verify_lps,
    verify_three_spheres,
    write_gnuplot,
    write_json,
    write_records,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_NOCONV = 0, 1, 2, 3
VERIFY_CHOICES = ("3sph", "fvr-int", "fvr-bnd", "lps", "cauchy")


class _NotConverged(Exception):
    pass


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Experiment:
    """Output directory of one command with its manifest and metadata."""

    def __init__(self, cfg, command, out=None):
        self.cfg = cfg
        self.command = command
        self.dir = Path(out) if out else cfg.path("output.dir")
        self.dir.mkdir(parents=True, exist_ok=True)
        self.t0 = time.perf_counter()
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self.outputs = []
        self.extra_meta = {}

    def file(self, name):
        p = self.dir / name
        self.outputs.append(name)
        return p

    def inputs(self):
        out = {}
        if self.cfg.source is not None:
            out["config"] = str(self.cfg.source)
        for key in ("geometry", "material", "couple.path", "verify.records"):
            if self.cfg.get(key) is not None:
                out[key] = str(self.cfg.path(key))
        return out

    def finish(self, status):
        (self.dir / "config.yaml").write_text(self.cfg.dumps())
        hashes = {k: _sha256(p) for k, p in sorted(self.inputs().items()) if Path(p).exists()}
        manifest = {
            "command": self.command,
            "platelab_version": __version__,
            "input_sha256": hashes,
            "outputs": sorted(set(self.outputs)),
            "status": status,
        }
        write_json(self.dir / "manifest.json", manifest)
        meta = {
            "started": self.started,
            "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "wall_time_s": time.perf_counter() - self.t0,
        }
        meta.update(self.extra_meta)
        write_json(self.dir / "meta.json", meta)


def _load(args):
    cfg = ExperimentConfig.load(args.config)
    domain, inclusion, plate, couple = cfg.validate()
    return cfg, domain, inclusion, plate, couple


def _require_apriori(domain, inclusion):
    rep = check_apriori(domain, inclusion)
    if not rep.passed:
        names = ", ".join(f"{c.name} ({c.value:.4g} {c.relation} {c.threshold:.4g})" for c in rep.failures())
        raise ConfigError(f"a-priori check failed: {names}")
    return rep


def _solve(cfg, domain, inclusion, plate, couple, resolution=None):
    resolution = resolution or int(cfg.get("solver.resolution"))
    pg = build_grid(domain, inclusion, resolution, clamp_width=float(cfg.get("solver.clamp_width")))
    sol = solve_dirichlet_form(pg, plate, couple, rel_tol=float(cfg.get("solver.rel_tol")))
    release_factorizations()
    return sol


def dump_solution(path, sol, step):
    """CSV ``(x1, x2, w)`` on a lattice inside the solution's region and a JSON header."""
    region = _field_region(sol)
    xmin, ymin, xmax, ymax = region.bounds
    X, Y = np.meshgrid(np.arange(xmin, xmax + step / 2, step), np.arange(ymin, ymax + step / 2, step), indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts = pts[shapely.contains_xy(region, pts[:, 0], pts[:, 1])]
    w = sol.evaluate(pts)[0]
    np.savetxt(path, np.column_stack([pts, w]), delimiter=",", header="x1,x2,w", comments="", fmt="%.17g")
    return pts, w


def cmd_check_config(args):
    cfg, domain, inclusion, plate, couple = _load(args)
    if inclusion is not None:
        _require_apriori(domain, inclusion)
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_forward(args):
    cfg, domain, inclusion, plate, couple = _load(args)
    if inclusion is not None:
        _require_apriori(domain, inclusion)
    exp = Experiment(cfg, "forward", args.out)
    sol = _solve(cfg, domain, inclusion, plate, couple)
    res = int(cfg.get("solver.resolution"))
    step = float(cfg.get("solver.dump_step") or domain.r0 / res)
    dump_solution(exp.file("solution.csv"), sol, step)
    report = verify_energy_estimate(sol, couple)
    header = {
        "resolution": res,
        "rel_tol": float(cfg.get("solver.rel_tol")),
        "residual": float(sol.residual),
        "gauge": [float(v) for v in sol.gauge],
        "energy": energy(sol),
        "h2_norm": float(report.h2_norms[0]),
        "dump_step": step,
    }
    write_json(exp.file("solution.json"), header)
    write_json(exp.file("energy.json"), report.to_dict())
    traces = extract_traces(sol, domain, int(cfg.get("solver.n_samples")))
    write_traces(exp.file("traces.csv"), traces, noise_level=0.0, seed=cfg.seed)
    exp.outputs.append("traces.csv.json")
    exp.finish("ok")
    print(f"forward: residual {sol.residual:.3g}, energy ratio {report.ratios[0]:.4g} -> {exp.dir}")
    return EXIT_OK


def cmd_invert(args):
    cfg, domain, truth, plate, couple = _load(args)
    if truth is None:
        raise ConfigError("invert needs an inclusion in the geometry file to synthesize data")
    _require_apriori(domain, truth)
    exp = Experiment(cfg, "invert", args.out)
    res = int(cfg.get("solver.resolution"))
    seed = cfg.get("invert.seed")
    seed = cfg.seed if seed is None else int(seed)
    n_samples = int(cfg.get("solver.n_samples"))
    data = _solve(cfg, domain, truth, plate, couple, res * int(cfg.get("invert.data_resolution_factor")))
    observed = add_noise(extract_traces(data, domain, n_samples), float(cfg.get("invert.noise")), seed)
    init = cfg.init_inclusion(domain).with_modes(int(cfg.get("invert.k_modes")))
    spread = cfg.get("invert.spread")
    bounds = default_bounds(domain, init.K, init.center, init.radii[0], spread)
    setup = InverseSetup(domain, plate, couple, observed, bounds, resolution=res, budget=int(cfg.get("invert.budget")),
                         restarts=int(cfg.get("invert.restarts")), seed=seed, n_samples=n_samples, truth=truth)
    result = reconstruct(setup, init)
    write_json(exp.file("reconstruction.json"), result.to_dict())
    exp.extra_meta["reconstruction_wall_time_s"] = result.wall_time
    status = "ok" if result.converged else "not converged"
    exp.finish(status)
    dh = "n/a" if result.hausdorff is None else f"{result.hausdorff:.4g}"
    print(f"invert: misfit {result.misfit:.4g}, d_H {dh}, {result.evaluations} solves, {status} -> {exp.dir}")
    if not result.converged:
        raise _NotConverged("; ".join(result.notes) or "Nelder-Mead did not converge")
    return EXIT_OK


def _jobs(args, cfg):
    if args.jobs is not None:
        return args.jobs
    env = os.environ.get("PLATELAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"PLATELAB_JOBS must be an integer, got {env!r}") from exc
    return int(cfg.get("sweep.jobs"))


def cmd_sweep(args):
    cfg, domain, base, plate, couple = _load(args)
    if base is None:
        raise ConfigError("sweep needs a base inclusion in the geometry file")
    if cfg.get("sweep.family") != "dilation":
        raise ConfigError(f"unknown sweep.family {cfg.get('sweep.family')!r}")
    sizes = [float(s) * domain.r0 for s in cfg.get("sweep.sizes")]
    setup = SweepSetup(domain, plate, couple, resolution=int(cfg.get("solver.resolution")),
                       data_factor=int(cfg.get("sweep.data_resolution_factor")),
                       n_samples=int(cfg.get("solver.n_samples")), seed=cfg.seed, jobs=_jobs(args, cfg))
    exp = Experiment(cfg, "sweep", args.out)
    records = sweep(base, dilation_family(base, sizes), setup)
    write_records(exp.file("records.csv"), records)
    fit = None
    try:
        fit = fit_log_law(records, family="dilation").to_dict()
    except UnderdeterminedError as exc:
        fit = {"error": str(exc)}
    write_json(exp.file("fit.json"), fit)
    write_gnuplot(exp.file("sweep.gp"), "records.csv", fit)
    flagged = sum(1 for r in records if r.flag)
    exp.finish("ok" if not flagged else f"{flagged} flagged pairs")
    print(f"sweep: {len(records)} records ({flagged} flagged) -> {exp.dir}")
    return EXIT_OK


def cmd_fit(args):
    records = []
    for p in args.records:
        records.extend(read_records(p))
    fit = fit_log_law(records, family=args.family)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "fit.json", fit.to_dict())
    write_gnuplot(out / "fit.gp", Path(args.records[0]).name, fit.to_dict())
    print(f"fit: C = {fit.C_fit:.6g}, eta = {fit.eta_fit:.6g}, R^2 = {fit.r2:.4f}, n = {fit.n_points} -> {out}")
    return EXIT_OK


def _interior_point(sol):
    region = _field_region(sol)
    p = polylabel(region, tolerance=1e-3 * sol.domain.r0)
    return (p.x, p.y), float(region.boundary.distance(p))


def _boundary_point(sol):
    inc = sol.inclusion
    if inc is None:
        raise ConfigError("fvr-bnd needs an inclusion in the geometry file")
    return tuple(float(v) for v in inc.boundary_points(4)[0])


def cmd_verify(args):
    cfg, domain, inclusion, plate, couple = _load(args)
    which = args.which
    r0 = domain.r0
    point = cfg.get("verify.point")
    radii = cfg.get("verify.radii")
    if which == "3sph" and radii is not None:
        if len(radii) != 3 or not (0 < radii[0] < radii[1] < radii[2]):
            raise InvalidInputError(f"3sph needs radii r1 < r2 < r3, got {radii}")
    if which == "cauchy":
        exp = Experiment(cfg, f"verify {which}", args.out)
        if cfg.get("verify.records") is None:
            raise ConfigError("verify cauchy needs verify.records (a sweep CSV)")
        report = verify_cauchy_decay(read_records(cfg.path("verify.records"))).to_dict()
    else:
        if inclusion is not None:
            _require_apriori(domain, inclusion)
        exp = Experiment(cfg, f"verify {which}", args.out)
        sol = _solve(cfg, domain, inclusion, plate, couple)
        C_trial = float(cfg.get("verify.C_trial"))
        if which == "3sph":
            x, clear = _interior_point(sol) if point is None else (tuple(point), None)
            if radii is None:
                r3 = 0.5 * float(cfg.get("verify.c0")) * (clear if clear is not None else r0)
                radii = [r3 / 4, r3 / 2, r3]
            report = verify_three_spheres(sol, x, *radii, c0_trial=float(cfg.get("verify.c0")), C_trial=C_trial).to_dict()
        elif which == "fvr-int":
            x, clear = _interior_point(sol) if point is None else (tuple(point), None)
            if radii is None:
                top = float(cfg.get("verify.cbar0")) * (clear if clear is not None else r0)
                radii = [top / 8, top / 4, top / 2, top]
            report = verify_fvr_interior(sol, x, radii, float(cfg.get("verify.cbar0"))).to_dict()
        elif which == "fvr-bnd":
            x = _boundary_point(sol) if point is None else tuple(point)
            cbar = float(cfg.get("verify.cbar"))
            if radii is None:
                radii = [cbar * r0 / 8, cbar * r0 / 4, cbar * r0 / 2, cbar * r0]
            report = verify_fvr_boundary(sol, x, radii, cbar, C_trial).to_dict()
        else:
            rhos = [float(r) * r0 for r in cfg.get("verify.rhos")]
            report = verify_lps(sol, couple, rhos, float(cfg.get("verify.s")),
                                max_centres=int(cfg.get("verify.max_centres"))).to_dict()
    write_json(exp.file(f"verify_{which}.json"), report)
    exp.finish("ok")
    print(f"verify {which}: -> {exp.dir / f'verify_{which}.json'}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="platelab",
        description="Rigid inclusions in Kirchhoff-Love plates: forward solves, reconstruction and stability experiments.",
        epilog="configuration keys (YAML, dotted names denote nesting):\n" + schema_help()
        + "\n\nexit codes: 0 ok, 1 configuration or validation error, 2 solver failure, 3 no convergence",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"platelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, help_, func):
        p = sub.add_parser(name, help=help_, description=help_, epilog=schema_help(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("config", help="experiment configuration (YAML)")
        p.add_argument("--out", help="experiment directory (overrides output.dir)")
        p.set_defaults(func=func)
        return p

    with_config("check-config", "validate a configuration and its referenced files without running", cmd_check_config)
    with_config("forward", "solve the forward problem and dump the solution, traces and energy report", cmd_forward)
    with_config("invert", "reconstruct the inclusion from synthetic traces", cmd_invert)
    p = with_config("sweep", "solve a perturbation sweep and fit the logarithmic law", cmd_sweep)
    p.add_argument("--jobs", type=int, default=None, help="pairs solved concurrently (env PLATELAB_JOBS)")
    p = with_config("verify", "evaluate a local quantity on a solved field", cmd_verify)
    p.add_argument("which", choices=VERIFY_CHOICES)
    p = sub.add_parser("fit", help="fit the logarithmic law to sweep CSV files")
    p.add_argument("records", nargs="+", help="sweep CSV files (columns epsilon_norm and delta at least)")
    p.add_argument("--out", default=".", help="directory for fit.json and fit.gp")
    p.add_argument("--family", default="", help="label of the instance family")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NotConverged as exc:
        print(f"platelab: not converged: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (SolverError, ResolutionError) as exc:
        print(f"platelab: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, InvalidInputError, InvalidGeometryError, UnderdeterminedError, UndefinedRatioError) as exc:
        print(f"platelab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlateLabError as exc:
        print(f"platelab: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
