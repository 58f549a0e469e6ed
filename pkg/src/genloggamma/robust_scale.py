"""
Tukey biweight rho/psi, M-scales and tau-scales.

``rho(u, c) = 3(u/c)^2 - 3(u/c)^4 + (u/c)^6`` for ``|u| <= c`` and 1 beyond,
which is ``1 - (1 - (u/c)^2)^3`` on the inner region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .exceptions import ParameterDomainError

__all__ = ["RhoParams", "rho", "psi", "m_scale", "tau_scale"]


@dataclass(frozen=True)
class RhoParams:
    """Tuning of the tau-scale.

    ``c1`` calibrates the M-scale (breakdown), ``c2`` the efficiency, and
    ``b`` is the M-scale target ``mean(rho(u / s, c1)) = b``.
    """

    c1: float = 1.548
    c2: float = 6.08
    b: float = 0.5

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ParameterDomainError("tuning constants must be positive")
        if not 0 < self.b < 1:
            raise ParameterDomainError(f"b must lie in (0, 1), got {self.b}")


def rho(u, c: float):
    """Tukey biweight rho, normalized so that sup rho = 1."""
    x2 = np.minimum((np.asarray(u, dtype=float) / c) ** 2, 1.0)
    return 1.0 - (1.0 - x2) ** 3


def psi(u, c: float):
    """Derivative of :func:`rho` with respect to ``u``."""
    x = np.asarray(u, dtype=float) / c
    w = np.clip(1.0 - x * x, 0.0, None)
    return 6.0 * x * w * w / c


def _rho_x2(x2):
    # rho and x * rho'(x) in terms of x^2 = (u / (c s))^2
    w = np.clip(1.0 - x2, 0.0, None)
    w2 = w * w
    return 1.0 - w2 * w, 6.0 * x2 * w2


def _breakdown(u, b):
    return np.count_nonzero(u) <= b * u.size


def m_scale(u, c: float = 1.548, b: float = 0.5, full_output: bool = False):
    """M-scale ``s`` solving ``mean(rho(u / s, c)) = b``.

    Returns 0 when all ``u`` are zero or when too few are nonzero for a
    positive root to exist (the scale has broken down). With
    ``full_output=True`` a ``(s, degenerate)`` pair is returned.
    """
    u = np.abs(np.asarray(u, dtype=float).ravel())
    if u.size == 0:
        raise ParameterDomainError("m_scale needs at least one value")
    if not 0 < b < 1:
        raise ParameterDomainError(f"b must lie in (0, 1), got {b}")
    if _breakdown(u, b):
        return (0.0, True) if full_output else 0.0

    def g(s):
        return np.mean(rho(u / s, c)) - b

    # g decreases in s; expand a bracket around the normalized MAD
    s0 = np.median(u) / 0.6745
    if not s0 > 0:
        s0 = np.max(u) / c
    lo, hi = s0, s0
    while g(hi) > 0:
        hi *= 2.0
    while g(lo) < 0:
        lo *= 0.5
    if lo == hi:
        s = lo
    else:
        s = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return (s, False) if full_output else s


def m_scale_rows(r, c: float, b: float, s0=None, rtol: float = 1e-10, maxiter: int = 60):
    """Row-wise M-scales of a 2-d array by safeguarded Newton iteration.

    Rows that break down get scale 0. Used where many candidate residual
    vectors are scored at once.
    """
    r = np.atleast_2d(np.asarray(r, dtype=float))
    nrow, n = r.shape
    out = np.zeros(nrow)
    ok = np.count_nonzero(r, axis=1) > b * n
    if not np.any(ok):
        return out
    r2 = r[ok] ** 2 if not np.all(ok) else r * r
    if s0 is None:
        s = np.sqrt(np.median(r2, axis=1)) / 0.6745
    else:
        s = np.asarray(s0, dtype=float)[ok].copy()
    bad = ~(s > 0) | ~np.isfinite(s)
    if np.any(bad):
        s[bad] = np.sqrt(r2[bad].max(axis=1)) / c
    lo = np.zeros_like(s)
    hi = np.full_like(s, np.inf)
    inv_c2 = 1.0 / (c * c)
    x2 = np.empty_like(r2)
    w = np.empty_like(r2)
    for _ in range(maxiter):
        np.multiply(r2, (inv_c2 / (s * s))[:, None], out=x2)
        np.subtract(1.0, x2, out=w)
        np.maximum(w, 0.0, out=w)
        w2 = w * w
        gval = 1.0 - b - np.mean(w2 * w, axis=1)
        slope = 6.0 * np.mean(x2 * w2, axis=1)  # = -s * dg/ds
        pos = gval > 0
        lo = np.where(pos, s, lo)
        hi = np.where(pos, hi, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            new = s * (1.0 + gval / slope)
        # bisection (or doubling) when Newton leaves the bracket
        outside = ~np.isfinite(new) | (new <= lo) | (new >= hi)
        if np.any(outside):
            fallback = np.where(np.isfinite(hi), 0.5 * (lo + hi), 2.0 * s)
            new = np.where(outside, fallback, new)
        done = np.all(np.abs(new - s) <= rtol * new)
        s = new
        if done:
            break
    out[ok] = s
    return out


def m_scale_1d(r, c: float, b: float, s0: float | None = None, rtol: float = 1e-10, maxiter: int = 100) -> float:
    """Single-vector version of :func:`m_scale_rows` without the array bookkeeping."""
    r2 = np.asarray(r, dtype=float) ** 2
    n = r2.size
    if np.count_nonzero(r2) <= b * n:
        return 0.0
    s = s0 if s0 is not None and s0 > 0 else math.sqrt(float(np.median(r2))) / 0.6745
    if not s > 0:
        s = math.sqrt(float(r2.max())) / c
    lo, hi = 0.0, math.inf
    k = 1.0 / (c * c)
    for _ in range(maxiter):
        x2 = r2 * (k / (s * s))
        w = np.maximum(1.0 - x2, 0.0)
        w2 = w * w
        gval = 1.0 - b - float(np.dot(w2, w)) / n
        slope = 6.0 * float(np.dot(x2, w2)) / n
        if gval > 0:
            lo = s
        else:
            hi = s
        new = s * (1.0 + gval / slope) if slope > 0 else math.nan
        if not (lo < new < hi):
            new = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * s
        if abs(new - s) <= rtol * new:
            return new
        s = new
    return s


def tau_scale(u, params: RhoParams | None = None, *, rho2=None, full_output: bool = False):
    """tau-scale ``sqrt(s1^2 * mean(rho2(u / s1)))`` with ``s1`` the M-scale.

    ``rho2`` replaces ``rho(., c2)``; it exists so that the least-squares
    identity can be checked with ``rho2 = lambda v: v**2``.
    """
    params = params or RhoParams()
    u = np.asarray(u, dtype=float).ravel()
    s1, degenerate = m_scale(u, params.c1, params.b, full_output=True)
    if s1 == 0.0:
        return (0.0, degenerate) if full_output else 0.0
    z = u / s1
    inner = np.mean(rho2(z) if rho2 is not None else rho(z, params.c2))
    tau = s1 * np.sqrt(inner)
    return (tau, False) if full_output else tau


def tau_scale_rows(r, params: RhoParams, s0=None):
    """Row-wise tau-scales; returns ``(tau, s1)`` arrays."""
    r = np.atleast_2d(np.asarray(r, dtype=float))
    s1 = m_scale_rows(r, params.c1, params.b, s0=s0)
    tau = np.zeros_like(s1)
    pos = s1 > 0
    if np.any(pos):
        z = r[pos] / s1[pos, None]
        tau[pos] = s1[pos] * np.sqrt(rho(z, params.c2).mean(axis=1))
    return tau, s1
