"""Geometry documents: outer boundary, measurement arc, a-priori constants and inclusion.

A geometry file is a YAML mapping::

    boundary:            # circle | fourier-star | polygon-smoothed
      type: circle
      center: [0.0, 0.0]
      radius: 1.7
    sigma: [0.0, 0.5]    # arc endpoints as arc-length fractions (counterclockwise)
    r0: 1.0
    M0: 0.5
    M1: 10.0
    delta0: 0.1
    p0: null             # arc fraction of the distinguished point (default: arc midpoint)
    inclusion:           # optional
      center: [0.0, 0.0]
      radii: [0.4]       # (a0, a1, b1, ..., aK, bK)

Boundary types take ``center, radius`` (circle), ``center, coeffs``
(fourier-star) or ``vertices, fillet`` (polygon-smoothed).  Lengths are in
the units of ``r0``.
"""

from __future__ import annotations

import yaml

from ..errors import ConfigError, InvalidGeometryError
from .curves import curve_from_dict
from .shapes import PlanarDomain, StarInclusion

DOMAIN_KEYS = ("r0", "M0", "M1", "delta0", "p0")


def domain_from_dict(doc):
    if "boundary" not in doc:
        raise ConfigError("geometry document has no 'boundary' entry")
    try:
        boundary = curve_from_dict(doc["boundary"])
        kw = {k: doc[k] for k in DOMAIN_KEYS if doc.get(k) is not None}
        return PlanarDomain(boundary, tuple(doc.get("sigma", (0.0, 0.5))), **kw)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed geometry document: {exc}") from exc


def inclusion_from_dict(doc):
    if doc is None:
        return None
    try:
        return StarInclusion(tuple(doc["center"]), tuple(doc["radii"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed inclusion entry: {exc}") from exc


def geometry_to_dict(domain, inclusion=None):
    doc = {"boundary": domain.boundary.to_dict(), "sigma": list(domain.sigma)}
    doc.update({k: getattr(domain, k) for k in DOMAIN_KEYS})
    if inclusion is not None:
        doc["inclusion"] = inclusion.to_dict()
    return doc


def load_geometry(path):
    """Read ``(domain, inclusion)`` from a geometry file; inclusion may be ``None``.

    Raises
    ------
    ConfigError
        If the file is missing, not YAML, or lacks required entries.
    """
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"geometry file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"geometry file {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"geometry file {path} must contain a mapping")
    try:
        return domain_from_dict(doc), inclusion_from_dict(doc.get("inclusion"))
    except InvalidGeometryError as exc:
        raise ConfigError(f"geometry file {path}: {exc}") from exc


def save_geometry(path, domain, inclusion=None):
    with open(path, "w") as fh:
        yaml.safe_dump(geometry_to_dict(domain, inclusion), fh, sort_keys=False)
