"""
Generalized loggamma family LG(mu, sigma, lambda).

``y = mu + sigma * u`` where, for ``lambda != 0``, ``lambda**-2 * exp(lambda * u)``
is Gamma(``lambda**-2``, 1) distributed and, for ``lambda == 0``, ``u`` is
standard normal.

All log-density derivatives are written in terms of ``t = lambda * u`` and
``a = lambda**-2`` through power series that are exact at ``lambda = 0``, so
the density, score and Hessian are continuous across the normal seam without
a separate branch.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np
from scipy import special as sc

from .exceptions import MomentUndefinedError, ParameterDomainError

__all__ = [
    "Theta",
    "GammaDerived",
    "gamma_derived",
    "density",
    "log_density",
    "cdf",
    "sf",
    "quantile",
    "std_quantile",
    "sample",
    "mean_exp",
    "log_mean_exp",
    "score",
    "score_jacobian",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# below this |lambda| (a above 1e4) scipy's incomplete gamma loses accuracy in
# the tails; Temme's uniform expansion is used instead
_TEMME_LAMBDA = 1e-2

# |t| below which the power series are used
_SERIES_T = 1.0
_NTERMS = 26
_FACT = np.array([math.factorial(k) for k in range(_NTERMS + 5)], dtype=float)


@dataclass(frozen=True)
class Theta:
    """Location, scale and shape of LG(mu, sigma, lambda)."""

    mu: float
    sigma: float
    lam: float

    def __post_init__(self):
        for name in ("mu", "sigma", "lam"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterDomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if not self.sigma > 0:
            raise ParameterDomainError(f"sigma must be positive, got {self.sigma!r}")

    def __iter__(self):
        return iter(astuple(self))

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma, self.lam])

    @classmethod
    def from_sequence(cls, values) -> "Theta":
        values = list(values)
        if len(values) != 3:
            raise ParameterDomainError(
                f"expected (mu, sigma, lambda), got {len(values)} values"
            )
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class GammaDerived:
    """Parameters of exp(y) on the generalized gamma scale.

    ``eta`` is ``nan`` when E(exp(y)) diverges.
    """

    alpha: float
    gamma: float
    delta: float
    eta: float


def _as_theta(theta) -> Theta:
    if isinstance(theta, Theta):
        return theta
    return Theta.from_sequence(theta)


# ---------------------------------------------------------------------------
# series helpers in t = lambda * u


def _coeffs(fn, start):
    return np.array([fn(k) / _FACT[k] for k in range(start, start + _NTERMS)])


# (expm1(t) - t) / t**2
_C_E2 = _coeffs(lambda k: 1.0, 2)
# (expm1(t) - t * e**t) / t**2
_C_UL = _coeffs(lambda k: 1.0 - k, 2)
# (2 expm1(t) - 2 t - t expm1(t)) / t**3
_C_G = _coeffs(lambda k: 2.0 - k, 3)
# (4 t expm1(t) - t**2 e**t - 6 expm1(t) + 6 t) / t**4
_C_GG = _coeffs(lambda k: (2.0 - k) * (k - 3.0), 4)


def _tseries(t, coeffs, closed):
    t = np.asarray(t, dtype=float)
    small = np.abs(t) < _SERIES_T
    out = np.polynomial.polynomial.polyval(np.where(small, t, 0.0), coeffs)
    if not np.all(small):
        big = ~small
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.where(big, closed(np.where(big, t, 1.0)), out)
    return out


_C_E1 = _coeffs(lambda k: 1.0, 1)


def _e1(t):
    return _tseries(t, _C_E1, lambda t: np.expm1(t) / t)


def _e2(t):
    return _tseries(t, _C_E2, lambda t: (np.expm1(t) - t) / t**2)


def _ul(t):
    return _tseries(t, _C_UL, lambda t: (np.exp(t) * (1.0 - t) - 1.0) / t**2)


def _g(t):
    return _tseries(t, _C_G, lambda t: (np.exp(t) * (2.0 - t) - 2.0 - t) / t**3)


def _gg(t):
    return _tseries(
        t, _C_GG, lambda t: (np.exp(t) * (4.0 * t - t * t - 6.0) + 2.0 * t + 6.0) / t**4
    )


# ---------------------------------------------------------------------------
# functions of lambda alone


# ((1 + t) log1p(t) - t) / t**2 = sum_{k>=2} (-1)^k t^(k-2) / (k (k-1))
_C_M = np.array([(-1.0) ** k / (k * (k - 1.0)) for k in range(2, 2 + 40)])


def _log1p_m(t: float) -> float:
    if abs(t) < 0.25:
        return float(np.polynomial.polynomial.polyval(t, _C_M))
    return ((1.0 + t) * math.log1p(t) - t) / (t * t)


def _stirlerr(lam: float) -> float:
    """log Gamma(a) - (a - 1/2) log a + a - log sqrt(2 pi) at a = lambda**-2."""
    x = lam * lam
    if x <= 1.0 / 15.0:
        x2 = x * x
        return x * (
            1.0 / 12.0
            + x2
            * (
                -1.0 / 360.0
                + x2
                * (
                    1.0 / 1260.0
                    + x2
                    * (
                        -1.0 / 1680.0
                        + x2 * (1.0 / 1188.0 + x2 * (-691.0 / 360360.0 + x2 / 156.0))
                    )
                )
            )
        )
    a = 1.0 / x
    return sc.gammaln(a) - (a - 0.5) * math.log(a) + a - _LOG_SQRT_2PI


# log(a) - digamma(a) = 1/(2a) + sum_k B_2k / (2k a^2k); in powers of lambda
_S_POW = (1, 5, 9, 13, 17, 21, 25)
_S_COEF = (-1 / 6, 1 / 60, -1 / 126, 1 / 120, -1 / 66, 691 / 16380, -1 / 6)
_S_SMALL = 0.25


def _shape_term(lam: float) -> float:
    """1/lambda - 2 (log a - digamma(a)) / lambda**3, the u-free part of the lambda score."""
    if abs(lam) <= _S_SMALL:
        return sum(c * lam**p for c, p in zip(_S_COEF, _S_POW))
    a = 1.0 / (lam * lam)
    return 1.0 / lam - 2.0 * (math.log(a) - sc.digamma(a)) / lam**3


def _shape_term_deriv(lam: float) -> float:
    if abs(lam) <= _S_SMALL:
        return sum(c * p * lam ** (p - 1) for c, p in zip(_S_COEF, _S_POW))
    a = 1.0 / (lam * lam)
    lg = math.log(a) - sc.digamma(a)
    return -1.0 / lam**2 + 6.0 * lg / lam**4 + 4.0 * (1.0 / a - sc.polygamma(1, a)) / lam**6


# ---------------------------------------------------------------------------
# standardized log density and its derivatives


def _std_logpdf(u, lam: float):
    u = np.asarray(u, dtype=float)
    t = lam * u
    with np.errstate(over="ignore", invalid="ignore"):
        out = -_LOG_SQRT_2PI - _stirlerr(lam) - u * u * _e2(t)
    return np.where(np.isnan(out) & np.isfinite(u), -np.inf, out)


def _std_derivs(u, lam: float):
    """Return h_u, h_uu, h_lam, h_ulam, h_lamlam of log f_lambda(u)."""
    u = np.asarray(u, dtype=float)
    t = lam * u
    with np.errstate(over="ignore", invalid="ignore"):
        h_u = -u * _e1(t)
        h_uu = -np.exp(t)
        u2 = u * u
        h_l = _shape_term(lam) + u2 * u * _g(t)
        h_ul = u2 * _ul(t)
        h_ll = _shape_term_deriv(lam) + u2 * u2 * _gg(t)
    return h_u, h_uu, h_l, h_ul, h_ll


# ---------------------------------------------------------------------------
# public API


def log_density(y, theta):
    """Log density of LG(theta) at ``y``.

    Returns ``-inf`` where the density is zero to working precision (the
    exponential term overflows) rather than ``nan``.
    """
    theta = _as_theta(theta)
    y = np.asarray(y, dtype=float)
    u = (y - theta.mu) / theta.sigma
    out = _std_logpdf(u, theta.lam) - math.log(theta.sigma)
    return out[()] if out.ndim == 0 else out


def density(y, theta):
    """Density of LG(theta) at ``y``."""
    return np.exp(log_density(y, theta))


# Temme coefficients C0(eta), C1(eta) in powers of eta
_C_T0 = np.array([-1 / 3, 1 / 12, -2 / 135, 1 / 864, 1 / 2835, -139 / 777600, 1 / 25515])
_C_T1 = np.array([-1 / 540, -1 / 288, 1 / 378])


def _temme_cdf(u, lam: float, upper: bool):
    """Incomplete gamma through Temme's uniform expansion, written in lambda.

    With ``t = lambda u``, ``eta = t sqrt(2 e2(t))`` and ``z = eta / |lambda|``
    the lower tail for lambda > 0 is ``Phi(z) - R`` with
    ``R = |lambda| phi(z) (C0(eta) + lambda^2 C1(eta))``; lambda < 0 swaps tails.
    """
    t = lam * u
    with np.errstate(over="ignore", invalid="ignore"):
        root = np.sqrt(2.0 * _e2(t))
        eta = t * root
        z = math.copysign(1.0, lam) * u * root
        small = np.abs(eta) < 0.05
        big_eta = np.where(small, 1.0, eta)
        c0 = np.where(
            small,
            np.polynomial.polynomial.polyval(eta, _C_T0),
            1.0 / np.expm1(np.where(small, 1.0, t)) - 1.0 / big_eta,
        )
        c1 = np.polynomial.polynomial.polyval(np.clip(eta, -1.0, 1.0), _C_T1)
        r = abs(lam) * np.exp(-0.5 * z * z - _LOG_SQRT_2PI) * (c0 + lam * lam * c1)
    r = np.where(np.isfinite(r), r, 0.0)
    if (lam > 0) != upper:
        return sc.ndtr(z) - r
    return sc.ndtr(-z) + r


def _std_cdf(u, lam: float, upper: bool = False):
    u = np.asarray(u, dtype=float)
    if lam == 0.0:
        return sc.ndtr(-u) if upper else sc.ndtr(u)
    if abs(lam) < _TEMME_LAMBDA:
        # lambda < 0 flips both the tail and the sign of z inside
        return _temme_cdf(u, lam, upper)
    a = 1.0 / (lam * lam)
    with np.errstate(over="ignore"):
        g = a * np.exp(lam * u)
    # F is increasing in g for lambda > 0 and decreasing for lambda < 0
    if (lam > 0) != upper:
        return sc.gammainc(a, g)
    return sc.gammaincc(a, g)


def cdf(y, theta):
    """Distribution function of LG(theta)."""
    theta = _as_theta(theta)
    u = (np.asarray(y, dtype=float) - theta.mu) / theta.sigma
    out = _std_cdf(u, theta.lam)
    return out[()] if np.ndim(out) == 0 else out


def sf(y, theta):
    """Survival function ``1 - cdf`` computed without cancellation."""
    theta = _as_theta(theta)
    u = (np.asarray(y, dtype=float) - theta.mu) / theta.sigma
    out = _std_cdf(u, theta.lam, upper=True)
    return out[()] if np.ndim(out) == 0 else out


def std_quantile(p, lam: float):
    """Quantile of LG(0, 1, lam)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1) | np.isnan(p)):
        raise ParameterDomainError("probabilities must lie strictly inside (0, 1)")
    lam = float(lam)
    if lam == 0.0:
        return sc.ndtri(p)
    if abs(lam) < _TEMME_LAMBDA:
        # first order Cornish-Fisher start, then Newton on the expansion
        z = sc.ndtri(p)
        u = z - lam * (z * z + 2.0) / 6.0
        for _ in range(3):
            u = _newton(u, p, lam, limit=0.1)
        return u
    a = 1.0 / (lam * lam)
    g = sc.gammaincinv(a, p) if lam > 0 else sc.gammainccinv(a, p)
    with np.errstate(divide="ignore"):
        u = np.log(g / a) / lam
    return _newton(u, p, lam)


def _newton(u, p, lam: float, limit: float = 1e-3):
    """One Newton step on whichever tail is smaller."""
    lo = p <= 0.5
    resid = np.where(lo, _std_cdf(u, lam) - p, (1.0 - p) - _std_cdf(u, lam, upper=True))
    f = np.exp(_std_logpdf(u, lam))
    with np.errstate(divide="ignore", invalid="ignore"):
        step = resid / f
    ok = np.isfinite(step) & (np.abs(step) < limit * (1.0 + np.abs(u)))
    return np.where(ok, u - step, u)


def quantile(p, theta):
    """Quantile function ``mu + sigma * std_quantile(p, lambda)``."""
    theta = _as_theta(theta)
    out = theta.mu + theta.sigma * std_quantile(p, theta.lam)
    return out[()] if np.ndim(out) == 0 else out


def sample(n: int, theta, seed=None) -> np.ndarray:
    """Draw ``n`` i.i.d. values from LG(theta).

    Uses the gamma transform ``u = log(G / a) / lambda`` with
    ``G ~ Gamma(a, 1)``, ``a = lambda**-2``; for ``a < 1`` the gamma variate is
    generated on the log scale as ``log G(a+1) + log(U) / a`` so it cannot
    underflow.
    """
    theta = _as_theta(theta)
    if n < 1:
        raise ParameterDomainError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    lam = theta.lam
    if lam == 0.0:
        u = rng.standard_normal(n)
    else:
        a = 1.0 / (lam * lam)
        if a < 1.0:
            logg = np.log(rng.standard_gamma(a + 1.0, n)) + np.log(rng.random(n)) / a
            u = (logg - math.log(a)) / lam
        else:
            g = rng.standard_gamma(a, n)
            u = np.log1p((g - a) / a) / lam
    return theta.mu + theta.sigma * u


def gamma_derived(theta) -> GammaDerived:
    """alpha, gamma, delta and eta of exp(y) for ``lambda != 0``."""
    theta = _as_theta(theta)
    mu, sigma, lam = theta
    if lam == 0.0:
        raise ParameterDomainError("generalized gamma parameters need lambda != 0")
    alpha = 1.0 / (lam * lam)
    gamma = lam / sigma
    delta = math.exp(mu + 2.0 * math.log(abs(lam)) * sigma / lam)
    try:
        eta = mean_exp(theta)
    except MomentUndefinedError:
        eta = math.nan
    return GammaDerived(alpha, gamma, delta, eta)


def mean_exp(theta) -> float:
    """E(exp(y)) for y ~ LG(theta).

    Raises
    ------
    MomentUndefinedError
        If ``alpha + 1/gamma <= 0``, where the moment diverges.
    """
    theta = _as_theta(theta)
    return math.exp(log_mean_exp(theta))


def log_mean_exp(theta) -> float:
    """``log E(exp(y))``, computed without cancellation as lambda -> 0.

    With ``a = lambda**-2`` and ``t = sigma * lambda`` the log-gamma difference
    is rewritten through Stirling remainders ``R``:
    ``mu + sigma^2 m(t) - log1p(t)/2 + R(a (1 + t)) - R(a)`` where
    ``m(t) = ((1 + t) log1p(t) - t) / t^2``.
    """
    theta = _as_theta(theta)
    mu, sigma, lam = theta
    if lam == 0.0:
        return mu + 0.5 * sigma * sigma
    t = sigma * lam
    if t <= -1.0:
        alpha = 1.0 / (lam * lam)
        raise MomentUndefinedError(
            f"E(exp(y)) diverges: alpha + 1/gamma = {alpha * (1.0 + t):.6g} <= 0"
        )
    # R(a (1 + t)) is the Stirling remainder at shape lambda / sqrt(1 + t)
    rest = _stirlerr(lam / math.sqrt(1.0 + t)) - _stirlerr(lam)
    return mu + sigma * sigma * _log1p_m(t) - 0.5 * math.log1p(t) + rest


def score(y, theta):
    """Gradient of ``log_density`` with respect to (mu, sigma, lambda).

    Returns an array with a trailing axis of length 3.
    """
    theta = _as_theta(theta)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ParameterDomainError("score needs finite observations")
    s = theta.sigma
    u = (y - theta.mu) / s
    h_u, _, h_l, _, _ = _std_derivs(u, theta.lam)
    return np.stack([-h_u / s, (-1.0 - u * h_u) / s, h_l], axis=-1)


def score_jacobian(y, theta):
    """Hessian of ``log_density``; trailing shape (3, 3), symmetric by construction."""
    theta = _as_theta(theta)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ParameterDomainError("score_jacobian needs finite observations")
    s = theta.sigma
    u = (y - theta.mu) / s
    h_u, h_uu, _, h_ul, h_ll = _std_derivs(u, theta.lam)
    s2 = s * s
    mm = h_uu / s2
    ms = (h_u + u * h_uu) / s2
    ss = (1.0 + 2.0 * u * h_u + u * u * h_uu) / s2
    ml = -h_ul / s
    sl = -u * h_ul / s
    out = np.empty(u.shape + (3, 3))
    out[..., 0, 0] = mm
    out[..., 0, 1] = out[..., 1, 0] = ms
    out[..., 1, 1] = ss
    out[..., 0, 2] = out[..., 2, 0] = ml
    out[..., 1, 2] = out[..., 2, 1] = sl
    out[..., 2, 2] = h_ll
    return out
