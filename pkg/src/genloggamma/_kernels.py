"""
Compiled inner loops for the tau regression.

These mirror ``qtau._search`` and ``qtau.irwls_refine`` and are used when
numba is importable; the numpy versions remain the reference
implementation and the fallback.
"""

from __future__ import annotations

import math

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None

__all__ = ["HAVE_NUMBA", "search", "irwls"]


def _jit(fn):
    if numba is None:
        return None
    return numba.njit(cache=True, nogil=True)(fn)


def _mscale(r2, c, b, s):
    n = r2.size
    k = 1.0 / (c * c)
    lo = 0.0
    hi = math.inf
    for _ in range(100):
        f = k / (s * s)
        acc1 = 0.0
        acc2 = 0.0
        for j in range(n):
            x2 = r2[j] * f
            if x2 < 1.0:
                w = 1.0 - x2
                w2 = w * w
                acc1 += w2 * w
                acc2 += x2 * w2
        g = 1.0 - b - acc1 / n
        slope = 6.0 * acc2 / n
        if g > 0:
            lo = s
        else:
            hi = s
        new = s * (1.0 + g / slope) if slope > 0 else math.nan
        if not (lo < new < hi):
            new = 0.5 * (lo + hi) if hi < math.inf else 2.0 * s
        if abs(new - s) <= 1e-10 * new:
            return new
        s = new
    return s


_mscale_nb = _jit(_mscale)


def _tau(r2, c1, c2, b, s0, tmp):
    """tau-scale and M-scale of squared residuals; ``s0 <= 0`` means no warm start."""
    n = r2.size
    nz = 0
    for j in range(n):
        if r2[j] != 0.0:
            nz += 1
    if nz <= b * n:
        return 0.0, 0.0
    s = s0
    if not s > 0:
        tmp[:] = r2
        s = math.sqrt(np.partition(tmp, n // 2)[n // 2]) / 0.6745
        if not s > 0:
            s = math.sqrt(r2.max()) / c1
    s = _mscale_nb(r2, c1, b, s)
    f = 1.0 / (c2 * c2 * s * s)
    acc = 0.0
    for j in range(n):
        x2 = r2[j] * f
        if x2 < 1.0:
            w = 1.0 - x2
            acc += 1.0 - w * w * w
        else:
            acc += 1.0
    return s * math.sqrt(acc / n), s


_tau_nb = _jit(_tau)


def _search(y, x, inv, pairs, c1, c2, b):
    n = y.size
    h = n // 2
    best = math.inf
    bmu = math.nan
    bsig = math.nan
    a = np.empty(n)
    r2 = np.empty(n)
    tmp = np.empty(n)
    for i in range(pairs.shape[0]):
        j1 = pairs[i, 0]
        j2 = pairs[i, 1]
        sl = (y[j1] - y[j2]) / (x[j1] - x[j2])
        ic = y[j1] - sl * x[j1]
        for j in range(n):
            a[j] = abs((y[j] - ic - sl * x[j]) * inv[j])
        tmp[:] = a
        thr = np.partition(tmp, h - 1)[h - 1]
        # the h smallest: everything strictly below thr, then ties in index order
        sw = 0.0
        sx = 0.0
        sy = 0.0
        sxx = 0.0
        sxy = 0.0
        cnt = 0
        for j in range(n):
            if a[j] < thr:
                v = inv[j] * inv[j]
                sw += v
                sx += v * x[j]
                sy += v * y[j]
                sxx += v * x[j] * x[j]
                sxy += v * x[j] * y[j]
                cnt += 1
        for j in range(n):
            if cnt >= h:
                break
            if a[j] == thr:
                v = inv[j] * inv[j]
                sw += v
                sx += v * x[j]
                sy += v * y[j]
                sxx += v * x[j] * x[j]
                sxy += v * x[j] * y[j]
                cnt += 1
        sl1 = (sw * sxy - sx * sy) / (sw * sxx - sx * sx)
        ic1 = (sy - sl1 * sx) / sw
        for j in range(n):
            r = (y[j] - ic1 - sl1 * x[j]) * inv[j]
            r2[j] = r * r
        tau, _ = _tau_nb(r2, c1, c2, b, 0.0, tmp)
        if tau < best:
            best = tau
            bmu = ic1
            bsig = sl1
    return bmu, bsig, best


def _irwls(mu, sigma, y, x, inv, c1, c2, b, max_it, tol):
    n = y.size
    r = np.empty(n)
    r2 = np.empty(n)
    tmp = np.empty(n)
    for j in range(n):
        r[j] = (y[j] - mu - sigma * x[j]) * inv[j]
        r2[j] = r[j] * r[j]
    best_tau, s_m = _tau_nb(r2, c1, c2, b, 0.0, tmp)
    bmu = mu
    bsig = sigma
    if best_tau == 0.0:
        return bmu, bsig, 0.0, 1
    for j in range(n):
        tmp[j] = abs(r[j])
    s = np.median(tmp) / 0.6745
    if s == 0.0:
        s = s_m
    k1 = 1.0 / (c1 * c1)
    k2 = 1.0 / (c2 * c2)
    it = 0
    for it in range(1, max_it + 1):
        acc = 0.0
        f = k1 / (s * s)
        for j in range(n):
            x2 = r2[j] * f
            if x2 < 1.0:
                w = 1.0 - x2
                acc += 1.0 - w * w * w
            else:
                acc += 1.0
        s = s * math.sqrt(acc / n / b)
        if not s > 0:
            break
        f1 = k1 / (s * s)
        f2 = k2 / (s * s)
        num = 0.0
        den = 0.0
        for j in range(n):
            z2 = r2[j] / (s * s)
            x2 = r2[j] * f1
            if x2 < 1.0:
                w = 1.0 - x2
                den += 6.0 * w * w * k1 * z2
            x2 = r2[j] * f2
            if x2 < 1.0:
                w = 1.0 - x2
                num += 2.0 * (1.0 - w * w * w) - 6.0 * w * w * k2 * z2
            else:
                num += 2.0
        if den == 0.0:
            break
        ratio = num / den
        sw = 0.0
        sx = 0.0
        sy = 0.0
        sxx = 0.0
        sxy = 0.0
        for j in range(n):
            wt = 0.0
            x2 = r2[j] * f1
            if x2 < 1.0:
                w = 1.0 - x2
                wt += ratio * 6.0 * w * w * k1
            x2 = r2[j] * f2
            if x2 < 1.0:
                w = 1.0 - x2
                wt += 6.0 * w * w * k2
            wt *= inv[j] * inv[j]
            sw += wt
            sx += wt * x[j]
            sy += wt * y[j]
            sxx += wt * x[j] * x[j]
            sxy += wt * x[j] * y[j]
        if not sw > 0:
            break
        det = sw * sxx - sx * sx
        if not det > 0:
            break
        new_sigma = (sw * sxy - sx * sy) / det
        new_mu = (sy - new_sigma * sx) / sw
        delta = max(abs(new_mu - mu), abs(new_sigma - sigma))
        mu = new_mu
        sigma = new_sigma
        for j in range(n):
            r[j] = (y[j] - mu - sigma * x[j]) * inv[j]
            r2[j] = r[j] * r[j]
        tau, s_new = _tau_nb(r2, c1, c2, b, s_m, tmp)
        if s_new > 0:
            s_m = s_new
        if tau < best_tau:
            best_tau = tau
            bmu = mu
            bsig = sigma
        if tau == 0.0 or delta <= tol * max(abs(sigma), 2.2250738585072014e-308):
            break
    return bmu, bsig, best_tau, it


_search_nb = _jit(_search)
_irwls_nb = _jit(_irwls)


def search(y, x, inv, pairs, c1, c2, b):
    """Compiled candidate search; ``inv`` must be an array (ones when unweighted)."""
    return _search_nb(y, x, inv, pairs, c1, c2, b)


def irwls(mu, sigma, y, x, inv, c1, c2, b, max_it, tol):
    """Compiled IRWLS; returns ``(mu, sigma, tau, iterations)``."""
    return _irwls_nb(float(mu), float(sigma), y, x, inv, c1, c2, b, int(max_it), float(tol))
