"""Empirical stability lab: sweeps of inclusion pairs, the log-law fit and local field checks."""

from .fit import EmpiricalConstants, fit_log_law
from .io import read_records, write_gnuplot, write_json, write_records
from .sweep import (
    RECORD_COLUMNS,
    StabilityRecord,
    SweepSetup,
    cauchy_integral,
    cauchy_region,
    dilation_family,
    normalized_epsilon,
    sweep,
)
from .verify import (
    CauchyReport,
    ExponentReport,
    LPSReport,
    ThreeSpheresReport,
    lps_centres,
    theta0,
    verify_cauchy_decay,
    verify_fvr_boundary,
    verify_fvr_interior,
    verify_lps,
    verify_three_spheres,
)

__all__ = [
    "RECORD_COLUMNS",
    "CauchyReport",
    "EmpiricalConstants",
    "ExponentReport",
    "LPSReport",
    "StabilityRecord",
    "SweepSetup",
    "ThreeSpheresReport",
    "cauchy_integral",
    "cauchy_region",
    "dilation_family",
    "fit_log_law",
    "lps_centres",
    "normalized_epsilon",
    "read_records",
    "sweep",
    "theta0",
    "verify_cauchy_decay",
    "verify_fvr_boundary",
    "verify_fvr_interior",
    "verify_lps",
    "verify_three_spheres",
    "write_gnuplot",
    "write_json",
    "write_records",
]
