"""
Weighted likelihood estimation.

Observations are downweighted through Pearson residuals
``delta = f*(y) / f*_theta(y) - 1`` comparing a Gaussian kernel density
estimate ``f*`` of the data with the equally smoothed model density
``f*_theta``. A residual adjustment function ``A`` turns residuals into
weights ``w = min(1, [A(delta) + 1]^+ / (delta + 1))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize
from scipy.special import logsumexp

from .control import Control, RafKind
from .distribution import Theta, log_density, quantile, score, score_jacobian
from .exceptions import EstimationError, ParameterDomainError
from .results import FitResult

__all__ = [
    "RafKind",
    "KernelDensity",
    "SmoothedModel",
    "SmoothedPair",
    "kde",
    "smoothed_model",
    "smoothed_pair",
    "pearson_residuals",
    "raf",
    "weights_from_residuals",
    "wle_weights",
    "ml_fit",
    "fiwl_fit",
    "oneswl_fit",
]

log = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_KDE_POINTS = 512
_KDE_CUT = 3.0
# cap on log(f*/f*_theta) so that delta stays finite
_MAX_LOG_RATIO = 700.0


class KernelDensity:
    """Gaussian kernel density estimate tabulated on 512 points and interpolated."""

    def __init__(self, y, bandwidth: float):
        y = np.asarray(y, dtype=float).ravel()
        if y.size < 2:
            raise ParameterDomainError("kde needs at least 2 observations")
        if not bandwidth > 0:
            raise ParameterDomainError("bandwidth must be positive")
        self.bandwidth = float(bandwidth)
        h = self.bandwidth
        self.grid = np.linspace(y.min() - _KDE_CUT * h, y.max() + _KDE_CUT * h, _KDE_POINTS)
        z = (self.grid[:, None] - y[None, :]) / h
        self.values = np.exp(-0.5 * z * z).mean(axis=1) / (h * math.sqrt(2 * math.pi))

    def __call__(self, x):
        return np.interp(x, self.grid, self.values, left=0.0, right=0.0)


class SmoothedModel:
    """Model density convolved with the kernel, as a mixture of K kernels at model quantiles."""

    def __init__(self, theta, bandwidth: float, K: int):
        if K < 2:
            raise ParameterDomainError("the smoothed model needs K >= 2")
        if not bandwidth > 0:
            raise ParameterDomainError("bandwidth must be positive")
        self.theta = theta
        self.bandwidth = float(bandwidth)
        self.centers = quantile((np.arange(1, K + 1) - 0.5) / K, theta)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x.ravel()[:, None] - self.centers[None, :]) / self.bandwidth
        out = logsumexp(-0.5 * z * z, axis=1) - math.log(self.centers.size * self.bandwidth) - _LOG_SQRT_2PI
        return out.reshape(x.shape)

    def __call__(self, x):
        return np.exp(self.logpdf(x))


@dataclass
class SmoothedPair:
    f_star: KernelDensity
    f_model_star: SmoothedModel
    bandwidth: float

    def residuals(self, x):
        with np.errstate(divide="ignore"):
            log_ratio = np.log(self.f_star(x)) - self.f_model_star.logpdf(x)
        if np.any(np.isnan(log_ratio)):
            raise EstimationError("smoothed model density vanished at an observation")
        return np.expm1(np.minimum(log_ratio, _MAX_LOG_RATIO))


def kde(y, bandwidth: float) -> KernelDensity:
    """Gaussian kernel density estimate with ``cut = 3`` and 512 grid points."""
    return KernelDensity(y, bandwidth)


def smoothed_model(theta, bandwidth: float, K: int) -> SmoothedModel:
    """``(1/K) sum_k k(y, y_k, h)`` with ``y_k`` the ``(k - 0.5)/K`` model quantiles."""
    return SmoothedModel(_theta(theta), bandwidth, int(K))


def smoothed_pair(y, theta, control: Control, bandwidth: float | None = None) -> SmoothedPair:
    theta = _theta(theta)
    h = control.bw * theta.sigma if bandwidth is None else bandwidth
    return SmoothedPair(kde(y, h), smoothed_model(theta, h, control.subdivisions), h)


def pearson_residuals(y, theta, control: Control | None = None, bandwidth: float | None = None):
    """Pearson residuals at the observations; bandwidth ``control.bw * sigma`` by default."""
    control = control or Control()
    y = np.asarray(y, dtype=float)
    return smoothed_pair(y, theta, control, bandwidth).residuals(y)


def raf(kind, delta, tau: float = 1.0):
    """Residual adjustment function ``A(delta)``.

    NED   ``2 - (2 + delta) exp(-delta)``
    GKL   ``log(tau delta + 1) / tau``, ``0 <= tau <= 1`` (``tau = 0`` is ML)
    PWD   ``tau ((delta + 1)^(1/tau) - 1)``, ``tau = inf`` gives ``log(delta + 1)``
    HD    PWD with ``tau = 2``
    SCHI2 ``(3 delta^2 + 4 delta) / (delta + 2)^2``, from the symmetric
          chi-squared disparity ``delta^2 / (delta + 2)``
    """
    kind = RafKind.parse(kind)
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < -1) or np.any(np.isnan(delta)):
        raise ParameterDomainError("Pearson residuals must be >= -1")
    if kind is RafKind.NED:
        return 2.0 - (2.0 + delta) * np.exp(-delta)
    if kind is RafKind.GKL:
        if not 0 <= tau <= 1:
            raise ParameterDomainError("GKL needs 0 <= tau <= 1")
        if tau == 0:
            return delta.copy()
        if np.any(tau * delta + 1 <= 0):
            raise ParameterDomainError("GKL needs tau * delta + 1 > 0")
        return np.log1p(tau * delta) / tau
    if kind is RafKind.HD:
        kind, tau = RafKind.PWD, 2.0
    if kind is RafKind.PWD:
        if tau == 0:
            raise ParameterDomainError("PWD needs tau != 0")
        if math.isinf(tau):
            return np.log1p(delta)
        with np.errstate(divide="ignore"):
            return tau * np.expm1(np.log1p(delta) / tau)
    return (3.0 * delta * delta + 4.0 * delta) / (delta + 2.0) ** 2


def weights_from_residuals(delta, control: Control):
    """``min(1, [A(delta) + 1]^+ / (delta + 1))``, zeroed below ``control.minw``."""
    delta = np.maximum(np.asarray(delta, dtype=float), -1.0 + 1e-12)
    a = raf(control.raf, delta, control.raf_tau)
    with np.errstate(invalid="ignore", over="ignore"):
        w = np.minimum(1.0, np.maximum(a + 1.0, 0.0) / (delta + 1.0))
    w = np.where(np.isnan(w), 0.0, w)
    return np.where(w < control.minw, 0.0, w)


def wle_weights(y, theta, control: Control | None = None, points=None, bandwidth: float | None = None):
    """Weights of the observations (or of ``points``) under ``theta``."""
    control = control or Control()
    y = np.asarray(y, dtype=float)
    pair = smoothed_pair(y, theta, control, bandwidth)
    at = y if points is None else np.asarray(points, dtype=float)
    return weights_from_residuals(pair.residuals(at), control)


def _theta(theta) -> Theta:
    if isinstance(theta, FitResult):
        return theta.theta
    if isinstance(theta, Theta):
        return theta
    return Theta.from_sequence(theta)


def _sorted_data(y, minimum):
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if y.size < minimum:
        raise ParameterDomainError(f"need at least {minimum} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ParameterDomainError("observations must be finite")
    return y


def _default_start(y, control):
    from .qtau import qtau_fit, wqtau_fit

    return wqtau_fit(y, qtau_fit(y, control), control).theta


# ---------------------------------------------------------------------------
# weighted Newton iterations with fixed weights


def _objective(y, w, theta_vec):
    try:
        th = Theta(*theta_vec)
    except ParameterDomainError:
        return -np.inf
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.sum(w * log_density(y, th))
    return val if np.isfinite(val) else -np.inf


def weighted_score(y, w, theta) -> np.ndarray:
    """``sum_j w_j z(y_j; theta)``; zero-weight rows are skipped so overflowed scores drop out."""
    keep = w > 0
    return w[keep] @ score(y[keep], theta)


def weighted_jacobian(y, w, theta) -> np.ndarray:
    """``sum_j w_j grad z(y_j; theta)`` over positive weights."""
    keep = w > 0
    return np.einsum("j,jab->ab", w[keep], score_jacobian(y[keep], theta))


def _newton_step(y, w, theta_vec, basis=None):
    """One damped Newton ascent step of ``sum w * loglik`` with weights held fixed.

    ``basis`` (3 x p) restricts the search to ``theta = theta_vec + basis @ d``.
    Returns the new vector and the weighted mean score at the old one.
    """
    th = Theta(*theta_vec)
    sw = np.sum(w)
    g = weighted_score(y, w, th) / sw
    H = weighted_jacobian(y, w, th) / sw
    if basis is not None:
        g = basis.T @ g
        H = basis.T @ H @ basis
    try:
        evals = np.linalg.eigvalsh(H)
        if np.all(evals < 0) and np.all(np.isfinite(evals)):
            d = -np.linalg.solve(H, g)
        else:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        # not locally concave: scaled gradient ascent, step length set by halving
        d = g / max(np.max(np.abs(np.diag(H))), 1.0)
    full = d if basis is None else basis @ d
    f0 = _objective(y, w, theta_vec)
    t = 1.0
    for _ in range(60):
        cand = theta_vec + t * full
        if cand[1] > 0 and _objective(y, w, cand) >= f0 - 1e-12 * abs(f0):
            return cand, g
        t *= 0.5
    return theta_vec, g


def _weighted_mle(y, w, theta_vec, basis=None, max_it=100, tol=1e-10):
    """Maximize ``sum w * loglik`` with fixed weights; returns (theta, iterations, converged)."""
    theta_vec = np.asarray(theta_vec, dtype=float)
    for it in range(1, max_it + 1):
        new, g = _newton_step(y, w, theta_vec, basis)
        step = np.max(np.abs(new - theta_vec))
        theta_vec = new
        if np.max(np.abs(g)) < tol or step < tol * max(1.0, theta_vec[1]):
            return theta_vec, it, True
    return theta_vec, max_it, False


def ml_fit(y, start=None, control: Control | None = None) -> FitResult:
    """Maximum likelihood by BFGS on ``(mu, log sigma, lambda)`` followed by Newton polishing.

    ``converged`` is true when the mean score at the returned estimate has
    max-norm below 1e-6.
    """
    control = control or Control()
    y = _sorted_data(y, 4)
    theta0 = _theta(start) if start is not None else Theta(np.mean(y), max(np.std(y), 1e-8), 0.0)
    n = y.size

    def nll(p):
        with np.errstate(over="ignore", invalid="ignore"):
            v = -np.sum(log_density(y, (p[0], math.exp(p[1]), p[2]))) / n
        return v if np.isfinite(v) else 1e300

    def grad(p):
        sig = math.exp(p[1])
        with np.errstate(over="ignore", invalid="ignore"):
            g = -score(y, (p[0], sig, p[2])).mean(axis=0)
        g[1] *= sig
        return np.where(np.isfinite(g), g, 0.0)

    p0 = np.array([theta0.mu, math.log(theta0.sigma), theta0.lam])
    res = optimize.minimize(nll, p0, jac=grad, method="BFGS", options={"gtol": 1e-9, "maxiter": 500})
    p = res.x if np.isfinite(res.fun) and res.fun < nll(p0) + 1e-12 else p0
    theta_vec = np.array([p[0], math.exp(p[1]), p[2]])
    theta_vec, it, _ = _weighted_mle(y, np.ones(n), theta_vec, max_it=control.max_it, tol=1e-12)
    theta = Theta(*theta_vec)
    gmax = np.max(np.abs(score(y, theta).mean(axis=0)))
    return FitResult(
        theta=theta,
        weights=np.ones(n),
        iterations=int(res.nit) + it,
        method="ML",
        data=y,
        converged=bool(gmax < 1e-6),
    )


def fiwl_fit(y, start=None, control: Control | None = None) -> FitResult:
    """Fully iterated weighted likelihood.

    Alternates weights at the current estimate (bandwidth ``bw * sigma``)
    with Newton steps on the weighted likelihood equations, the weights held
    fixed within a step, until the parameters move by less than
    ``refine_tol * sigma``.
    """
    control = control or Control()
    y = _sorted_data(y, 4)
    theta_vec = (_theta(start) if start is not None else _default_start(y, control)).as_array()
    converged = False
    it = 0
    for it in range(1, control.max_it + 1):
        w = wle_weights(y, theta_vec, control)
        if not np.any(w > 0):
            raise EstimationError("all weights are zero")
        new, _, _ = _weighted_mle(y, w, theta_vec, max_it=3, tol=1e-12)
        step = np.max(np.abs(new - theta_vec))
        theta_vec = new
        if step <= control.refine_tol * theta_vec[1]:
            converged = True
            break
    theta = Theta(*theta_vec)
    w = wle_weights(y, theta, control)
    if not converged:
        log.warning("FIWL did not converge in %d iterations", control.max_it)
    return FitResult(theta=theta, weights=w, iterations=it, method="WL", data=y, converged=converged)


def expected_weighted_information(theta, y, control: Control, bandwidth: float | None = None):
    """``-(1/K) sum_k w(y_k) grad z(y_k)`` over K = ``nexp`` model quantiles ``y_k``."""
    theta = _theta(theta)
    K = control.nexp
    yk = quantile((np.arange(1, K + 1) - 0.5) / K, theta)
    wk = wle_weights(y, theta, control, points=yk, bandwidth=bandwidth)
    return -weighted_jacobian(yk, wk, theta) / K


def oneswl_fit(y, start=None, control: Control | None = None) -> FitResult:
    """One-step weighted likelihood from ``start`` (a WQtau estimate by default).

    ``theta = start + step * J^-1 (1/n) sum_j w_j z(y_j, start)`` where ``J`` is
    the weighted information approximated on ``nexp`` model quantiles; the
    bandwidth stays at ``bw * sigma_start``. Reported weights are evaluated at
    the new estimate with the same bandwidth.
    """
    control = control or Control()
    y = _sorted_data(y, 4)
    theta0 = _theta(start) if start is not None else _default_start(y, control)
    h = control.bw * theta0.sigma
    w = wle_weights(y, theta0, control, bandwidth=h)
    g = weighted_score(y, w, theta0) / y.size
    J = expected_weighted_information(theta0, y, control, bandwidth=h)
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e12:
        raise EstimationError("weighted information is singular; use the fully iterated estimator (WL)")
    if control.step == 0:
        theta = theta0
    else:
        new = theta0.as_array() + control.step * linalg.solve(J, g, assume_a="sym")
        if not new[1] > 0:
            raise EstimationError("one-step update produced a nonpositive scale; use WL")
        theta = Theta(*new)
    return FitResult(
        theta=theta,
        weights=wle_weights(y, theta, control, bandwidth=h),
        iterations=1,
        method="oneWL",
        data=y,
    )
