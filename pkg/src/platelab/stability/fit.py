"""Least-squares fit of the logarithmic stability law and the measured constants."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import UnderdeterminedError

MIN_POINTS = 5


@dataclass
class EmpiricalConstants:
    """Constants measured on one family of instances.

    ``C_fit`` and ``eta_fit`` come from the fit
    ``log delta = log C - eta log|log eps|`` with ``eta_ci`` the 95%
    confidence interval of ``eta``.  The remaining fields are filled by the
    verification operations when they are run on the same family.
    """

    C_fit: float = float("nan")
    eta_fit: float = float("nan")
    eta_ci: tuple = (float("nan"), float("nan"))
    r2: float = float("nan")
    residual: float = float("nan")
    n_points: int = 0
    excluded: list = field(default_factory=list)
    theta0: float | None = None
    tau_interior_fit: float | None = None
    tau_boundary_fit: float | None = None
    lps_profile: dict | None = None
    B_suc2: float | None = None
    family: str = ""

    def to_dict(self):
        out = {
            "C_fit": self.C_fit,
            "eta_fit": self.eta_fit,
            "eta_ci": list(self.eta_ci),
            "r2": self.r2,
            "residual": self.residual,
            "n_points": self.n_points,
            "excluded": list(self.excluded),
            "family": self.family,
        }
        for name in ("theta0", "tau_interior_fit", "tau_boundary_fit", "lps_profile", "B_suc2"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


def _pairs(records):
    """``(pair_id, epsilon_norm, delta)`` from records, dicts or plain tuples."""
    out = []
    for k, r in enumerate(records):
        if isinstance(r, dict):
            out.append((r.get("pair_id", k), float(r["epsilon_norm"]), float(r["delta"])))
        elif hasattr(r, "epsilon_norm"):
            if getattr(r, "flag", ""):
                continue
            out.append((r.pair_id, float(r.epsilon_norm), float(r.delta)))
        else:
            eps, delta = r
            out.append((k, float(eps), float(delta)))
    return out


def fit_log_law(records, family=""):
    """Fit ``log delta = log C - eta log|log eps|`` on the normalized misfits.

    Records with ``eps >= 1`` (outside the range of the law), ``eps <= 0`` or
    ``delta <= 0`` are excluded with a warning and listed in ``excluded``.

    Raises
    ------
    UnderdeterminedError
        If fewer than five records remain.
    """
    used, excluded = [], []
    for pid, eps, delta in _pairs(records):
        if not (0 < eps < 1) or not delta > 0:
            excluded.append(pid)
        else:
            used.append((eps, delta))
    if excluded:
        warnings.warn(f"excluded {len(excluded)} records with normalized misfit outside (0, 1) or zero distance")
    if len(used) < MIN_POINTS:
        raise UnderdeterminedError(f"log-law fit needs at least {MIN_POINTS} usable records, got {len(used)}")
    eps, delta = np.array(used).T
    x = np.log(np.abs(np.log(eps)))
    y = np.log(delta)
    if np.ptp(x) == 0:
        raise UnderdeterminedError("all usable records have the same misfit")
    res = stats.linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    n = len(x)
    tq = stats.t.ppf(0.975, n - 2)
    eta = -float(res.slope)
    return EmpiricalConstants(
        C_fit=float(np.exp(res.intercept)),
        eta_fit=eta,
        eta_ci=(eta - tq * float(res.stderr), eta + tq * float(res.stderr)),
        r2=r2,
        residual=float(np.sqrt(np.mean(resid**2))),
        n_points=n,
        excluded=list(excluded),
        family=family,
    )
