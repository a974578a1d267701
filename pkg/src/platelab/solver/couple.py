"""Boundary couple fields and the Fourier surrogate of the ``H^{-1/2}`` norm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import InvalidInputError


def _resample_uniform(frac, values, n):
    frac = np.asarray(frac, dtype=float)
    order = np.argsort(frac)
    frac, values = frac[order], np.asarray(values, dtype=float)[order]
    xp = np.concatenate([frac - 1.0, frac, frac + 1.0])
    fp = np.concatenate([values, values, values])
    return np.interp(np.arange(n) / n, xp, fp)


def h_minus_half_norm(samples, length):
    """Fourier surrogate of the ``H^{-1/2}`` norm of a periodic vector field.

    ``samples`` has shape ``(n,)`` or ``(n, c)`` with uniform arc-length
    spacing over a closed curve of the given length.  Each component is
    expanded in arc-length Fourier modes normalized so that
    ``sum_k |m_k|^2 = int |m|^2 ds``; mode ``k`` is weighted by
    ``(1 + xi_k^2)^(-1/2)`` with ``xi_k = 2 pi k / length``.
    """
    m = np.asarray(samples, dtype=float)
    if m.size == 0:
        raise InvalidInputError("empty couple data")
    if m.ndim == 1:
        m = m[:, None]
    n = m.shape[0]
    coef = np.fft.fft(m, axis=0) * np.sqrt(length) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    weight = 1.0 / np.sqrt(1.0 + (2 * np.pi * k / length) ** 2)
    return float(np.sqrt(np.sum(weight[:, None] * np.abs(coef) ** 2)))


def bump(frac, start, end):
    """Cosine-squared bump supported on the arc ``[start, end]`` (fractions, may wrap)."""
    span = (end - start) % 1.0
    rel = np.mod(np.asarray(frac, dtype=float) - start, 1.0) / span
    out = np.sin(np.pi * rel) ** 2
    return np.where(rel < 1.0, out, 0.0)


@dataclass(frozen=True)
class CoupleField:
    """Bending and twisting moments sampled at uniform arc-length fractions.

    ``m_n[i]`` and ``m_tau[i]`` are the values at fraction ``i / n`` of the
    boundary curve.  The Cartesian couple is ``M = m_tau tau + m_n n``.
    """

    boundary: object
    m_n: np.ndarray
    m_tau: np.ndarray
    support: tuple = (0.0, 1.0)

    def __post_init__(self):
        m_n = np.asarray(self.m_n, dtype=float)
        m_tau = np.asarray(self.m_tau, dtype=float)
        if m_n.size == 0 or m_n.shape != m_tau.shape or m_n.ndim != 1:
            raise InvalidInputError("couple samples must be two equal-length 1-D arrays")
        object.__setattr__(self, "m_n", m_n)
        object.__setattr__(self, "m_tau", m_tau)
        n = m_n.size
        # spectral arc-length derivative of the twisting moment
        k = np.fft.fftfreq(n, d=1.0 / n) * (2 * np.pi / self.boundary.length)
        if n % 2 == 0:
            k[n // 2] = 0.0
        dtau = np.real(np.fft.ifft(1j * k * np.fft.fft(m_tau)))
        x = np.arange(n + 1) / n
        object.__setattr__(self, "_mn_spline", CubicSpline(x, np.append(m_n, m_n[0]), bc_type="periodic"))
        object.__setattr__(self, "_dtau_spline", CubicSpline(x, np.append(dtau, dtau[0]), bc_type="periodic"))
        object.__setattr__(self, "_tau_spline", CubicSpline(x, np.append(m_tau, m_tau[0]), bc_type="periodic"))

    @property
    def n(self):
        return self.m_n.size

    @property
    def fractions(self):
        return np.arange(self.n) / self.n

    @classmethod
    def from_functions(cls, boundary, m_n, m_tau=None, n=1024, support=(0.0, 1.0)):
        """Sample callables of boundary ``(points, normals, tangents)`` at ``n`` fractions."""
        s = np.arange(n) * (boundary.length / n)
        p, t, nrm, _ = boundary.frame(s)
        vn = m_n(p, nrm, t)
        vt = np.zeros(n) if m_tau is None else m_tau(p, nrm, t)
        return cls(boundary, np.broadcast_to(vn, (n,)).copy(), np.broadcast_to(vt, (n,)).copy(), support)

    @classmethod
    def from_samples(cls, boundary, frac, m_n, m_tau, n=None, support=(0.0, 1.0)):
        """Build from possibly non-uniform samples, resampling when needed."""
        frac = np.asarray(frac, dtype=float)
        n = n or frac.size
        if frac.size == n and np.allclose(frac, np.arange(n) / n, atol=1e-12):
            return cls(boundary, m_n, m_tau, support)
        return cls(boundary, _resample_uniform(frac, m_n, n), _resample_uniform(frac, m_tau, n), support)

    @classmethod
    def from_cartesian(cls, boundary, M, support=(0.0, 1.0)):
        n = len(M)
        s = np.arange(n) * (boundary.length / n)
        _, t, nrm, _ = boundary.frame(s)
        return cls(boundary, np.sum(M * nrm, axis=1), np.sum(M * t, axis=1), support)

    @classmethod
    def default(cls, domain, amplitude=1.0, n=1024):
        """Cosine-squared bending bump on the middle third of the measurement arc.

        The Cartesian couple is made compatible by subtracting a constant
        vector times the same bump, which keeps the support unchanged.
        """
        f0 = domain.sigma[0]
        span = domain.sigma_fraction
        support = ((f0 + span / 3) % 1.0, (f0 + 2 * span / 3) % 1.0)
        frac = np.arange(n) / n
        b = bump(frac, *support)
        s = frac * domain.length
        _, t, nrm, _ = domain.boundary.frame(s)
        M = amplitude * b[:, None] * nrm
        c = M.sum(axis=0) / b.sum()
        M = M - b[:, None] * c
        return cls(domain.boundary, np.sum(M * nrm, axis=1), np.sum(M * t, axis=1), support)

    def frame(self):
        s = self.fractions * self.boundary.length
        return self.boundary.frame(s)

    def cartesian(self):
        _, t, nrm, _ = self.frame()
        return self.m_tau[:, None] * t + self.m_n[:, None] * nrm

    def moment_n(self, frac):
        return self._mn_spline(np.mod(frac, 1.0))

    def moment_tau(self, frac):
        return self._tau_spline(np.mod(frac, 1.0))

    def dtau_ds(self, frac):
        return self._dtau_spline(np.mod(frac, 1.0))

    def scaled(self, s):
        return CoupleField(self.boundary, s * self.m_n, s * self.m_tau, self.support)

    def l2_norm(self):
        ds = self.boundary.length / self.n
        return float(np.sqrt(np.sum(self.cartesian() ** 2) * ds))

    def h_minus_half(self):
        return h_minus_half_norm(self.cartesian(), self.boundary.length)

    def frequency_ratio(self):
        hm = self.h_minus_half()
        return np.inf if hm == 0 else self.l2_norm() / hm

    def compatibility_defect(self):
        """``|int M ds|`` relative to ``int |M| ds``."""
        M = self.cartesian()
        tot = np.abs(M).sum()
        return 0.0 if tot == 0 else float(np.linalg.norm(M.sum(axis=0)) / tot)

    def is_zero(self):
        return not (np.any(self.m_n) or np.any(self.m_tau))

    def check(self, domain, F=10.0, tol=1e-10):
        """Invariant report: support inside the arc, compatibility, nontriviality, frequency."""
        M = np.linalg.norm(self.cartesian(), axis=1)
        scale = max(M.max(), 1e-300)
        outside = ~domain.in_sigma(self.fractions)
        checks = {
            "support_in_sigma": bool(np.all(M[outside] <= tol * scale)),
            "compatible": self.compatibility_defect() <= 1e-10,
            "nontrivial": not self.is_zero(),
            "frequency": bool(self.frequency_ratio() <= F),
        }
        return checks

    def to_rows(self):
        return np.column_stack([self.fractions, self.m_n, self.m_tau])
