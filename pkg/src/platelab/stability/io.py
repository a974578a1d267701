"""Sweep and fit files: record CSV, fit JSON and a gnuplot script per sweep."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from ..errors import ConfigError
from .sweep import RECORD_COLUMNS, StabilityRecord

EXTRA_COLUMNS = ("couple_norm", "data_resolution", "flag")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(path, records):
    """CSV with the record columns followed by the couple norm, data resolution and flag."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(RECORD_COLUMNS + EXTRA_COLUMNS)
        for r in records:
            wr.writerow([_fmt(v) for v in r.row()] + [_fmt(getattr(r, c)) for c in EXTRA_COLUMNS])
    return path


def read_records(path):
    """Records from a sweep CSV; only ``epsilon_norm`` and ``delta`` are required.

    Raises
    ------
    ConfigError
        If the file is missing, lacks the required columns or holds a
        value that is not a number.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"records file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"epsilon_norm", "delta"} <= set(rows[0]):
        raise ConfigError(f"{path} needs at least the columns epsilon_norm and delta")
    out = []
    for k, row in enumerate(rows):
        def num(name, default=math.nan):
            v = row.get(name)
            if v in (None, ""):
                return default
            try:
                return float(v)
            except ValueError:
                raise ConfigError(f"{path}: row {k + 1}, column {name}: {v!r} is not a number") from None

        eps, delta = num("epsilon_norm"), num("delta")
        d = num("d", delta)
        out.append(
            StabilityRecord(
                pair_id=int(num("pair_id", k)),
                epsilon=num("epsilon", eps),
                epsilon_norm=eps,
                delta=delta,
                d=d,
                d_m=num("d_m", d),
                L1=num("L1"),
                L2=num("L2"),
                resolution=int(num("resolution", 0)),
                seed=int(num("seed", 0)),
                couple_norm=num("couple_norm"),
                data_resolution=int(num("data_resolution", 0)),
                flag=row.get("flag", "") or "",
            )
        )
    return out


def write_json(path, payload):
    """Deterministic JSON (sorted keys, fixed indentation)."""
    path = Path(path)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, allow_nan=True) + "\n")
    return path


def write_gnuplot(path, csv_name, fit=None):
    """Script plotting ``delta`` against ``|log eps|`` on log axes, with the fitted law if given."""
    lines = [
        "# delta against |log eps_norm| from the sweep records",
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel '|log eps_norm|'",
        "set ylabel 'delta / r0'",
        "set key top right",
    ]
    plot = f"plot '{csv_name}' using (abs(log($3))):4 skip 1 with points pt 7 title 'sweep'"
    if fit is not None and math.isfinite(fit.get("C_fit", math.nan)):
        lines.append(f"C = {fit['C_fit']!r}")
        lines.append(f"eta = {fit['eta_fit']!r}")
        plot += ", C * x**(-eta) with lines title 'fit'"
    lines.append(plot)
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
