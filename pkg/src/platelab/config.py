"""Experiment configuration: YAML documents addressed by dotted keys.

Every key with its default and meaning is listed in :data:`SCHEMA`; the
command-line help prints the same table.  Relative file paths are resolved
against the directory of the configuration file.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, InvalidInputError, SingularModuliError
from .geometry.io import inclusion_from_dict, load_geometry
from .material import Expression, IsotropicPlate
from .solver.couple import CoupleField

# (dotted key, default, description)
SCHEMA = [
    ("geometry", None, "geometry YAML file (boundary, sigma, r0, a-priori constants, optional inclusion)"),
    ("material", None, "material YAML file (lambda, mu expressions; h; alpha0, gamma0, Lambda0)"),
    ("couple.type", "default", "couple field: 'default' (bending bump on the arc) or 'csv'"),
    ("couple.amplitude", 1.0, "amplitude of the default couple field"),
    ("couple.path", None, "CSV file (arc_length_fraction, m_n, m_tau) when couple.type is 'csv'"),
    ("couple.support", None, "support [start, end] as arc fractions for a CSV couple (default: whole boundary)"),
    ("solver.resolution", 32, "cells per r0 of the forward grid (8 to 512)"),
    ("solver.rel_tol", 1e-10, "relative residual tolerance of the linear solve"),
    ("solver.clamp_width", 0.25, "width of the clamping weight in units of r0"),
    ("solver.n_samples", 256, "trace samples on the measurement arc"),
    ("solver.dump_step", None, "spacing of the solution dump lattice (default: r0 / resolution)"),
    ("invert.k_modes", 2, "Fourier modes of the reconstructed inclusion"),
    ("invert.budget", 500, "forward solves allowed (1 to 100000)"),
    ("invert.restarts", 3, "seeded restarts after the first Nelder-Mead run"),
    ("invert.seed", None, "restart seed (default: the global seed)"),
    ("invert.data_resolution_factor", 2, "data resolution as a multiple of solver.resolution"),
    ("invert.init", None, "initial inclusion {center, radii} (default: disc at the origin, radius r0 / 4)"),
    ("invert.spread", None, "half-width of the center and radius bounds (default: r0)"),
    ("invert.noise", 0.0, "relative Gaussian noise added to the synthetic data"),
    ("sweep.family", "dilation", "perturbation family: 'dilation'"),
    ("sweep.sizes", [0.02, 0.04, 0.06, 0.08, 0.1, 0.13, 0.16, 0.2], "perturbation sizes in units of r0"),
    ("sweep.data_resolution_factor", 2, "data resolution as a multiple of solver.resolution"),
    ("sweep.jobs", 1, "pairs solved concurrently (overridden by --jobs or PLATELAB_JOBS)"),
    ("verify.point", None, "evaluation point [x1, x2] (default: chosen from the geometry)"),
    ("verify.radii", None, "radii: three values for 3sph, a ladder for fvr-int and fvr-bnd"),
    ("verify.c0", 0.9, "trial c0 of the three-spheres exponent"),
    ("verify.cbar", 0.25, "trial cbar for the boundary vanishing rate"),
    ("verify.cbar0", 0.25, "trial cbar0 for the interior vanishing rate"),
    ("verify.s", 1.5, "trial erosion factor s for the smallness profile"),
    ("verify.C_trial", 0.0, "trial exponent of the constant factor in Q and B"),
    ("verify.rhos", [0.05, 0.1, 0.2, 0.4], "smallness-profile radii in units of r0"),
    ("verify.max_centres", 64, "sampled centres per radius for the smallness profile"),
    ("verify.records", None, "sweep CSV used by 'verify cauchy'"),
    ("output.dir", "out", "experiment directory"),
    ("seed", 0, "global seed"),
]
DEFAULTS = {k: v for k, v, _ in SCHEMA}
LIMITS = {
    "solver.resolution": (8, 512),
    "invert.budget": (1, 100000),
    "invert.restarts": (0, 1000),
    "invert.k_modes": (0, 16),
    "invert.data_resolution_factor": (1, 8),
    "sweep.data_resolution_factor": (1, 8),
    "sweep.jobs": (1, 1024),
}


def schema_help():
    """Plain-text table of every configuration key."""
    width = max(len(k) for k, _, _ in SCHEMA)
    lines = []
    for k, v, desc in SCHEMA:
        lines.append(f"  {k:<{width}}  {desc} [default: {v!r}]")
    return "\n".join(lines)


def _get(doc, key):
    cur = doc
    for part in key.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise KeyError(key)
        cur = cur[part]
    return cur


def _set(doc, key, value):
    parts = key.split(".")
    cur = doc
    for part in parts[:-1]:
        cur = cur.setdefault(part, {})
    cur[parts[-1]] = value


def _flatten(doc, prefix=""):
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and key not in ("invert.init",):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


@dataclass
class ExperimentConfig:
    """A parsed configuration: the document as given plus its base directory."""

    doc: dict
    base_dir: Path = field(default_factory=Path.cwd)
    source: Path | None = None

    @classmethod
    def from_dict(cls, doc, base_dir=None):
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a mapping")
        cfg = cls(copy.deepcopy(doc), Path(base_dir) if base_dir else Path.cwd())
        cfg.check_keys()
        return cfg

    @classmethod
    def load(cls, path):
        """Parse a YAML configuration file.

        Raises
        ------
        ConfigError
            If the file is missing, not YAML, or has unknown keys.
        """
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"configuration file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"configuration file {path} is not valid YAML: {exc}") from exc
        cfg = cls.from_dict(doc or {}, path.resolve().parent)
        cfg.source = path
        return cfg

    def get(self, key):
        try:
            return _get(self.doc, key)
        except KeyError:
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}") from None
            return copy.deepcopy(DEFAULTS[key])

    def set(self, key, value):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        _set(self.doc, key, value)

    def to_dict(self):
        return copy.deepcopy(self.doc)

    def dumps(self):
        return yaml.safe_dump(self.doc, sort_keys=True)

    def check_keys(self):
        unknown = sorted(k for k in _flatten(self.doc) if k not in DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")

    def path(self, key):
        value = self.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def seed(self):
        return int(self.get("seed"))

    def validate(self):
        """Check limits and that every referenced file exists and parses.

        Returns the loaded ``(domain, inclusion, plate, couple)``.

        Raises
        ------
        ConfigError
        """
        self.check_keys()
        for key, (lo, hi) in LIMITS.items():
            v = self.get(key)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or not lo <= v <= hi:
                raise ConfigError(f"{key} must be an integer in [{lo}, {hi}], got {v!r}")
        if self.get("geometry") is None:
            raise ConfigError("configuration has no 'geometry' file")
        domain, inclusion = load_geometry(self.path("geometry"))
        plate = load_material(self.path("material")) if self.get("material") is not None else IsotropicPlate.constant()
        couple = self.couple(domain)
        return domain, inclusion, plate, couple

    def couple(self, domain):
        kind = self.get("couple.type")
        if kind == "default":
            return CoupleField.default(domain, amplitude=float(self.get("couple.amplitude")))
        if kind == "csv":
            if self.get("couple.path") is None:
                raise ConfigError("couple.type 'csv' needs couple.path")
            support = self.get("couple.support")
            return load_couple(self.path("couple.path"), domain, tuple(support) if support else (0.0, 1.0))
        raise ConfigError(f"unknown couple.type {kind!r}")

    def init_inclusion(self, domain):
        doc = self.get("invert.init")
        if doc is None:
            return inclusion_from_dict({"center": [0.0, 0.0], "radii": [0.25 * domain.r0]})
        return inclusion_from_dict(doc)


def load_material(path):
    """Read an :class:`IsotropicPlate` from a YAML file.

    Raises
    ------
    ConfigError
        If the file is missing, not YAML, or the moduli are invalid.
    """
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"material file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"material file {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict) or "lambda" not in doc or "mu" not in doc:
        raise ConfigError(f"material file {path} needs 'lambda' and 'mu' entries")
    try:
        kw = {k: float(doc[k]) for k in ("h", "alpha0", "gamma0", "Lambda0") if k in doc}
        return IsotropicPlate(Expression(str(doc["lambda"])), Expression(str(doc["mu"])), **kw)
    except (InvalidInputError, SingularModuliError, ValueError) as exc:
        raise ConfigError(f"material file {path}: {exc}") from exc


def load_couple(path, domain, support=(0.0, 1.0)):
    """Read a couple field from CSV columns ``(arc_length_fraction, m_n, m_tau)``.

    Raises
    ------
    ConfigError
        If the file is missing or malformed.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"couple file not found: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"couple file {path} is malformed: {exc}") from exc
    if data.shape[1] != 3 or len(data) < 8:
        raise ConfigError(f"couple file {path} needs three columns and at least 8 rows")
    try:
        return CoupleField.from_samples(domain.boundary, data[:, 0], data[:, 1], data[:, 2], support=support)
    except InvalidInputError as exc:
        raise ConfigError(f"couple file {path}: {exc}") from exc


def write_couple(path, couple):
    np.savetxt(path, couple.to_rows(), delimiter=",", header="arc_length_fraction,m_n,m_tau", comments="", fmt="%.17g")


__all__ = [
    "DEFAULTS",
    "LIMITS",
    "SCHEMA",
    "ExperimentConfig",
    "load_couple",
    "load_material",
    "schema_help",
    "write_couple",
]
