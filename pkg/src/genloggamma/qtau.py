"""
Quantile tau estimators (Qtau and weighted Qtau).

For a fixed shape ``lambda`` the order statistics ``y_(j)`` are regressed on
the standardized model quantiles ``x_j = Q*((j - 0.5)/n, lambda)``; location
and scale minimize a tau-scale of the residuals. The shape is then chosen on
an equally spaced grid.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .control import Control
from .distribution import Theta, log_density, std_quantile
from .exceptions import EstimationError, ParameterDomainError
from .results import FitResult, LambdaProfile
from .robust_scale import RhoParams, m_scale_rows, rho, tau_scale_rows

__all__ = [
    "QuantileDesign",
    "residuals",
    "subsample_search",
    "irwls_refine",
    "qtau_fit",
    "quantile_variances",
    "wqtau_scales",
    "wqtau_fit",
]

log = logging.getLogger(__name__)

# set to False to run the pure numpy reference loops
USE_KERNELS = _kernels.HAVE_NUMBA


def plotting_positions(n: int) -> np.ndarray:
    return (np.arange(1, n + 1) - 0.5) / n


@functools.lru_cache(maxsize=4096)
def _design_x(n: int, lam: float) -> np.ndarray:
    x = std_quantile(plotting_positions(n), lam)
    x.setflags(write=False)
    return x


@dataclass(frozen=True)
class QuantileDesign:
    """Order statistics against model quantiles for one shape value."""

    y_sorted: np.ndarray
    u_grid: np.ndarray
    x: np.ndarray
    lam: float

    @classmethod
    def build(cls, y, lam: float) -> "QuantileDesign":
        y = np.sort(np.asarray(y, dtype=float))
        n = y.size
        return cls(y, plotting_positions(n), _design_x(n, float(lam)), float(lam))

    @property
    def n(self) -> int:
        return self.y_sorted.size

    def is_valid(self) -> bool:
        x = self.x
        return bool(np.all(np.isfinite(x)) and np.all(np.diff(x) > 0))


def residuals(theta, design: QuantileDesign) -> np.ndarray:
    """``y_(j) - mu - sigma * x_j``."""
    mu, sigma, _ = theta
    return design.y_sorted - mu - sigma * design.x


def draw_pairs(n: int, count: int, seed) -> np.ndarray:
    """``count`` index pairs with distinct members, drawn up front."""
    rng = np.random.default_rng(seed)
    j1 = rng.integers(n, size=count)
    j2 = rng.integers(n - 1, size=count)
    j2 += j2 >= j1
    return np.column_stack([j1, j2])


def _search(y, x, inv_scale, pairs, params: RhoParams):
    """Best (mu, sigma, tau) over the two-point candidates."""
    if USE_KERNELS:
        inv = np.ones_like(y) if inv_scale is None else np.ascontiguousarray(inv_scale, dtype=float)
        return _kernels.search(y, x, inv, pairs, params.c1, params.c2, params.b)
    n = y.size
    j1, j2 = pairs[:, 0], pairs[:, 1]
    slope = (y[j1] - y[j2]) / (x[j1] - x[j2])
    icpt = y[j1] - slope * x[j1]
    r = y - icpt[:, None] - slope[:, None] * x
    if inv_scale is not None:
        r *= inv_scale
    # least squares on the half with the smallest absolute residuals
    h = n // 2
    idx = np.argpartition(np.abs(r), h - 1, axis=1)[:, :h]
    xs, ys = x[idx], y[idx]
    if inv_scale is None:
        sw = float(h)
        sx, sy = xs.sum(axis=1), ys.sum(axis=1)
        sxx, sxy = (xs * xs).sum(axis=1), (xs * ys).sum(axis=1)
    else:
        v = inv_scale[idx] ** 2
        sw = v.sum(axis=1)
        sx, sy = (v * xs).sum(axis=1), (v * ys).sum(axis=1)
        sxx, sxy = (v * xs * xs).sum(axis=1), (v * xs * ys).sum(axis=1)
    slope1 = (sw * sxy - sx * sy) / (sw * sxx - sx * sx)
    icpt1 = (sy - slope1 * sx) / sw
    r = y - icpt1[:, None] - slope1[:, None] * x
    if inv_scale is not None:
        r *= inv_scale
    tau, _ = tau_scale_rows(r, params)
    tau = np.where(np.isfinite(tau), tau, np.inf)
    best = int(np.argmin(tau))
    return float(icpt1[best]), float(slope1[best]), float(tau[best])


def subsample_search(design: QuantileDesign, control: Control, per_obs_scale=None):
    """Resampling search for starting values ``(mu, sigma)``.

    Each of ``control.n_resample`` candidates is built from an exact fit
    through two points, a least-squares refit on the ``n // 2`` points with
    the smallest absolute residuals, and scored by the tau-scale of its
    residuals. The candidate with the smallest tau wins (lowest index on
    ties).
    """
    if design.n < 4:
        raise ParameterDomainError("subsample_search needs n >= 4")
    if not design.is_valid():
        raise EstimationError(f"degenerate design at lambda = {design.lam}")
    pairs = draw_pairs(design.n, control.n_resample, control.seed)
    inv = None if per_obs_scale is None else 1.0 / np.asarray(per_obs_scale, dtype=float)
    mu, sigma, _ = _search(design.y_sorted, design.x, inv, pairs, control.rho_params)
    return mu, sigma


def _psi_over_u(z, c):
    w = np.clip(1.0 - (z / c) ** 2, 0.0, None)
    return 6.0 * w * w / (c * c)


def irwls_refine(mu, sigma, design: QuantileDesign, per_obs_scale, control: Control):
    """Iteratively reweighted least squares for the tau regression.

    Weights are ``W * phi_1 + phi_2`` with ``phi_k = psi_k(z) / z`` and
    ``z = r / s``; ``s`` follows the recursive M-scale update
    ``s <- s * sqrt(mean(rho_1(z)) / b)``. The iterate with the smallest
    tau-scale seen is returned, since the iteration is not guaranteed to
    decrease tau.

    Returns
    -------
    mu, sigma, tau, iterations
    """
    params = control.rho_params
    c1, c2, b = params.c1, params.c2, params.b
    y, x = design.y_sorted, design.x
    inv = None if per_obs_scale is None else 1.0 / np.asarray(per_obs_scale, dtype=float)
    if USE_KERNELS:
        ones = np.ones_like(y) if inv is None else inv
        return _kernels.irwls(mu, sigma, y, x, ones, c1, c2, b, control.max_it, control.refine_tol)

    def scaled(m, s_):
        r = y - m - s_ * x
        return r if inv is None else r * inv

    def tau_of(r, s_hint):
        tau, s1 = tau_scale_rows(r[None, :], params, s0=None if s_hint is None else [s_hint])
        return float(tau[0]), float(s1[0])

    r = scaled(mu, sigma)
    best_tau, s_m = tau_of(r, None)
    best = (float(mu), float(sigma))
    if best_tau == 0.0:
        return best[0], best[1], 0.0, 1
    s = np.median(np.abs(r)) / 0.6745
    if s == 0.0:
        s = s_m
    iterations = 0
    for iterations in range(1, control.max_it + 1):
        s = s * np.sqrt(np.mean(rho(r / s, c1)) / b)
        if not s > 0:
            break
        z = r / s
        p1 = _psi_over_u(z, c1)
        p2 = _psi_over_u(z, c2)
        den = np.sum(p1 * z * z)
        if den == 0.0:
            log.debug("IRWLS stopped: all residuals beyond c1 at lambda=%g", design.lam)
            break
        num = np.sum(2.0 * rho(z, c2) - p2 * z * z)
        w = (num / den) * p1 + p2
        if inv is not None:
            w = w * inv * inv
        sw = w.sum()
        if not sw > 0:
            break
        sx, sy = w @ x, w @ y
        sxx, sxy = w @ (x * x), w @ (x * y)
        det = sw * sxx - sx * sx
        if not det > 0:
            break
        new_sigma = (sw * sxy - sx * sy) / det
        new_mu = (sy - new_sigma * sx) / sw
        delta = max(abs(new_mu - mu), abs(new_sigma - sigma))
        mu, sigma = new_mu, new_sigma
        r = scaled(mu, sigma)
        tau, s_m = tau_of(r, s_m if s_m > 0 else None)
        if tau < best_tau:
            best_tau, best = tau, (float(mu), float(sigma))
        if tau == 0.0 or delta <= control.refine_tol * max(abs(sigma), np.finfo(float).tiny):
            break
    return best[0], best[1], best_tau, iterations


def _check_data(y, minimum: int):
    y = np.asarray(y, dtype=float).ravel()
    if y.size < minimum:
        raise ParameterDomainError(f"need at least {minimum} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ParameterDomainError("observations must be finite")
    return np.sort(y)


def _pick(grid, tau):
    """Index of the smallest tau; ties go to the smallest |lambda|."""
    finite = np.isfinite(tau)
    if not np.any(finite):
        raise EstimationError("tau search failed at every grid point")
    tmin = np.min(tau[finite])
    ties = np.flatnonzero(finite & (tau <= tmin * (1.0 + 1e-12)))
    return int(ties[np.argmin(np.abs(grid[ties]))])


def _grid_search(y, control: Control, inv_scale, starts=None):
    grid = control.lambda_grid()
    n = y.size
    params = control.rho_params
    scale = None if inv_scale is None else 1.0 / inv_scale
    pairs = draw_pairs(n, control.n_resample, control.seed) if starts is None else None
    mus = np.full(grid.size, np.nan)
    sigmas = np.full(grid.size, np.nan)
    taus = np.full(grid.size, np.inf)
    iters = np.zeros(grid.size, dtype=int)
    for k, lam in enumerate(grid):
        design = QuantileDesign(y, plotting_positions(n), _design_x(n, float(lam)), float(lam))
        if not design.is_valid():
            continue
        if starts is not None and np.isfinite(starts[0][k]) and np.isfinite(starts[1][k]):
            mu0, s0 = starts[0][k], starts[1][k]
        else:
            if pairs is None:
                pairs = draw_pairs(n, control.n_resample, control.seed)
            mu0, s0, _ = _search(y, design.x, inv_scale, pairs, params)
        if not (np.isfinite(mu0) and np.isfinite(s0)):
            continue
        mu, sigma, tau, it = irwls_refine(mu0, s0, design, scale, control)
        iters[k] = it
        if sigma > 0 and np.isfinite(tau):
            mus[k], sigmas[k], taus[k] = mu, sigma, tau
    best = _pick(grid, taus)
    profile = LambdaProfile(grid, mus, sigmas, taus)
    theta = Theta(mus[best], sigmas[best], grid[best])
    return theta, profile, int(iters[best]), float(taus[best])


def _fit_weights(y, theta, control):
    from .weighted_likelihood import wle_weights

    try:
        return wle_weights(y, theta, control)
    except (EstimationError, ParameterDomainError, FloatingPointError):
        return np.ones_like(y)


def qtau_fit(y, control: Control | None = None, weights=None) -> FitResult:
    """Qtau estimate: minimize the tau-scale of quantile residuals.

    Parameters
    ----------
    y : array_like
        Observations (at least 5, finite).
    control : Control, optional
    weights : array_like, optional
        Positive multipliers of the residuals, aligned with the *sorted*
        data; ``1 / weights`` act as per-observation scales.

    Returns
    -------
    FitResult
        ``weights`` holds the weighted-likelihood weights at the estimate, for
        outlier screening; ``profile`` holds the per-lambda search output.
    """
    control = control or Control()
    y = _check_data(y, 5)
    inv = None
    if weights is not None:
        inv = np.asarray(weights, dtype=float).ravel()
        if inv.shape != y.shape or not np.all(inv > 0) or not np.all(np.isfinite(inv)):
            raise ParameterDomainError("weights must be positive, finite and match the data")
    theta, profile, iterations, tau = _grid_search(y, control, inv)
    return FitResult(
        theta=theta,
        weights=_fit_weights(y, theta, control),
        iterations=iterations,
        method="QTau",
        data=y,
        tau=tau,
        profile=profile,
        scales=None if inv is None else 1.0 / inv,
    )


def quantile_variances(theta, u_grid) -> np.ndarray:
    """Asymptotic variances ``sigma^2 u (1-u) / f_lambda(Q*(u))^2`` of ``sqrt(n) r_j``.

    May contain ``inf`` where the model density underflows at extreme ``u``.
    """
    theta = theta if isinstance(theta, Theta) else Theta.from_sequence(theta)
    u = np.asarray(u_grid, dtype=float)
    q = std_quantile(u, theta.lam)
    logf = log_density(q, (0.0, 1.0, theta.lam))
    with np.errstate(over="ignore"):
        return theta.sigma**2 * u * (1.0 - u) * np.exp(-2.0 * logf)


def wqtau_scales(theta, n: int) -> np.ndarray:
    """Per-observation scales for WQtau, clamped to their 1% and 99% quantiles."""
    sd = np.sqrt(quantile_variances(theta, plotting_positions(n)))
    finite = np.isfinite(sd)
    if not np.any(finite):
        raise EstimationError("quantile variances are not finite")
    sd = np.where(finite, sd, np.max(sd[finite]))
    lo, hi = np.quantile(sd, [0.01, 0.99])
    return np.clip(sd, lo, hi)


def wqtau_fit(y, start=None, control: Control | None = None, weights=None) -> FitResult:
    """Weighted Qtau: Qtau with residuals divided by fixed scales ``v(theta_start, u_j)``.

    Parameters
    ----------
    y : array_like
        Observations.
    start : FitResult or Theta, optional
        The Qtau estimate; computed when omitted.
    control : Control, optional
    weights : array_like, optional
        Residual multipliers aligned with the sorted data, replacing the
        default ``1 / v(theta_start, u_j)``.

    Notes
    -----
    The scales are computed once at the start. Every point of the lambda
    grid is then refined by IRWLS from the starting ``(mu, sigma)``, so the
    result depends on the data only through the start and ``control``.
    """
    control = control or Control()
    y = _check_data(y, 5)
    if start is None:
        start = qtau_fit(y, control)
    theta0 = start.theta if isinstance(start, FitResult) else start
    theta0 = theta0 if isinstance(theta0, Theta) else Theta.from_sequence(theta0)
    if weights is None:
        scales = wqtau_scales(theta0, y.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != y.shape or not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ParameterDomainError("weights must be positive, finite and match the data")
        scales = 1.0 / w
    k = control.grid_n
    starts = (np.full(k, theta0.mu), np.full(k, theta0.sigma))
    theta, profile, iterations, tau = _grid_search(y, control, 1.0 / scales, starts)
    return FitResult(
        theta=theta,
        weights=_fit_weights(y, theta, control),
        iterations=iterations,
        method="WQTau",
        data=y,
        tau=tau,
        profile=profile,
        scales=scales,
    )
