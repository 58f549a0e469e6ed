"""
Wald-type inference for fitted LG models.

Standard errors come from the inverse of the empirical weighted information
``J_n = -sum_j w_j grad z(y_j; theta_hat)``, with ``z`` the score and ``w``
the fit's weights (all ones for ML). Intervals for E(exp(y)) and for model
quantiles use the delta method.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .control import Control
from .distribution import Theta, log_mean_exp, quantile, std_quantile
from .exceptions import EstimationError, MomentUndefinedError, ParameterDomainError
from .results import FitResult
from .weighted_likelihood import _objective, _weighted_mle, weighted_jacobian, weighted_score, wle_weights

__all__ = [
    "FitSummary",
    "TestResult",
    "weighted_information",
    "summarize",
    "quantile_gradient",
    "weighted_wald_test",
    "constrained_fit_sigma_eq_lambda",
    "weighted_wilks_test",
]

PARAMETERS = ("mu", "sigma", "lambda")
_LABELS = {"mu": "location", "sigma": "scale", "lambda": "shape"}
# the sigma = lambda curve in (mu, s) coordinates
_CURVE = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
_EPS_PROJECT = 1e-3


def _z(conf_level: float) -> float:
    if not 0 < conf_level < 1:
        raise ParameterDomainError(f"conf_level must lie in (0, 1), got {conf_level}")
    return float(stats.norm.ppf(0.5 * (1.0 + conf_level)))


def _g(x) -> str:
    return f"{x:.4g}"


@dataclass
class FitSummary:
    """Point estimates with standard errors and Wald intervals.

    ``quantile_cis`` rows are ``(p, estimate, lower, upper)``; ``quantile_se``
    holds the matching standard errors.
    """

    theta: Theta
    se: np.ndarray
    eta: float
    eta_se: float
    cov: np.ndarray
    quantile_cis: list = field(default_factory=list)
    conf_level: float = 0.95
    quantile_se: np.ndarray = field(default_factory=lambda: np.empty(0))
    method: str = ""

    @classmethod
    def from_se(cls, theta, se, conf_level: float = 0.95, method: str = "") -> "FitSummary":
        """Summary with a diagonal covariance built from given standard errors."""
        theta = theta if isinstance(theta, Theta) else Theta.from_sequence(theta)
        se = np.asarray(se, dtype=float)
        return cls(theta, se, math.nan, math.nan, np.diag(se**2), [], conf_level, np.empty(0), method)

    @property
    def estimate(self) -> np.ndarray:
        return self.theta.as_array()

    def param_cis(self) -> np.ndarray:
        """Rows ``(lower, upper)`` for mu, sigma and lambda."""
        z = _z(self.conf_level)
        est = self.estimate
        return np.column_stack([est - z * self.se, est + z * self.se])

    def eta_ci(self) -> tuple[float, float]:
        z = _z(self.conf_level)
        return self.eta - z * self.eta_se, self.eta + z * self.eta_se

    def to_dict(self) -> dict:
        cis = self.param_cis()
        out = {
            "conf_level": self.conf_level,
            "se": {k: float(v) for k, v in zip(PARAMETERS, self.se)},
            "ci": {k: [float(a), float(b)] for k, (a, b) in zip(PARAMETERS, cis)},
            "cov": self.cov.tolist(),
            "eta": _jfloat(self.eta),
            "eta_se": _jfloat(self.eta_se),
            "eta_ci": [_jfloat(v) for v in self.eta_ci()],
            "quantiles": [
                {"p": p, "estimate": e, "se": float(s), "lower": lo, "upper": hi}
                for (p, e, lo, hi), s in zip(self.quantile_cis, self.quantile_se)
            ],
        }
        return out

    def format(self) -> str:
        pct = f"{100 * self.conf_level:g} percent confidence interval"
        lines = []
        for name, est, s, (lo, hi) in zip(("Location", "Scale", "Shape"), self.estimate, self.se, self.param_cis()):
            lines += [f"{name}:  {_g(est)} s.e.  {_g(s)} ", f"( {_g(lo)} ,  {_g(hi)} ) ", pct, ""]
        if math.isfinite(self.eta):
            lo, hi = self.eta_ci()
            lines += [f"Mean(exp(X)):  {_g(self.eta)} s.e.  {_g(self.eta_se)} ", f"( {_g(lo)} ,  {_g(hi)} ) ", pct, ""]
        for (p, est, lo, hi), s in zip(self.quantile_cis, self.quantile_se):
            lines += ["", f"Quantile of order  {_g(p)} :  {_g(est)} s.e.  {_g(s)} ", f"( {_g(lo)} ,  {_g(hi)} ) ", pct, ""]
        return "\n".join(lines)


@dataclass
class TestResult:
    """Outcome of a weighted Wald or Wilks test."""

    statistic: float
    df: int
    p_value: float
    conf_int: tuple[float, float] | None = None
    null_theta: Theta | None = None
    kind: str = "Wald"
    method: str = ""
    null: dict = field(default_factory=dict)
    estimate: dict = field(default_factory=dict)
    conf_level: float = 0.95

    def to_dict(self) -> dict:
        out = {
            "test": self.kind,
            "method": self.method,
            "statistic": float(self.statistic),
            "df": int(self.df),
            "p_value": float(self.p_value),
            "null": dict(self.null),
            "estimate": dict(self.estimate),
            "conf_level": self.conf_level,
            "conf_int": None if self.conf_int is None else [float(v) for v in self.conf_int],
        }
        if self.null_theta is not None:
            out["null_theta"] = {"mu": self.null_theta.mu, "sigma": self.null_theta.sigma, "lambda": self.null_theta.lam}
        return out

    def format(self) -> str:
        if self.kind == "Wald":
            head, stat = f"\tWeighted Wald Test based on {self.method}", "ww"
        else:
            head, stat = f"\tWeighted Wilks Test based on {self.method}", "wilks"
        lines = [head, "", "data:  ", f"{stat} = {self.statistic:.5g}, df = {self.df}, p-value = {self.p_value:.3g}"]
        if self.kind == "Wald":
            parts = [f"true {_LABELS[k]} is not equal to {v:g}" for k, v in self.null.items()]
            lines.append("alternative hypothesis: " + " and ".join(parts))
        else:
            lines.append("alternative hypothesis: scale is not equal to shape")
        if self.conf_int is not None:
            lines.append(f"{100 * self.conf_level:g} percent confidence interval:")
            lines.append(f" {self.conf_int[0]:.8g} {self.conf_int[1]:.8g}")
        if self.null_theta is not None:
            lines.append("estimates under the null:")
            lines.append(f" mu0 = {self.null_theta.mu:.8g}, sigma0 = lambda0 = {self.null_theta.sigma:.8g}")
        lines.append("sample estimates:")
        lines.append(" " + " ".join(f"{k} = {v:.7g}" for k, v in self.estimate.items()))
        return "\n".join(lines)


def _jfloat(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


# ---------------------------------------------------------------------------
# summaries


def weighted_information(fit: FitResult) -> np.ndarray:
    """``-sum_j w_j grad z(y_j; theta_hat)``."""
    y = np.asarray(fit.data, dtype=float)
    w = np.asarray(fit.weights, dtype=float)
    return -weighted_jacobian(y, w, fit.theta)


def _covariance(J: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(J)):
        raise EstimationError("weighted information is not finite")
    J = 0.5 * (J + J.T)
    evals = np.linalg.eigvalsh(J)
    cond = evals[-1] / evals[0] if evals[0] > 0 else math.inf
    if not (evals[0] > 0 and cond < 1e12):
        raise EstimationError(
            f"weighted information is singular or indefinite (eigenvalues {evals}, condition number {cond:.3g})"
        )
    cov = linalg.inv(J, check_finite=False)
    return 0.5 * (cov + cov.T)


def _lambda_step(lam: float) -> float:
    return 1e-5 * max(1.0, abs(lam))


def quantile_gradient(p, theta) -> np.ndarray:
    """``(1, Q*(p, lambda), sigma dQ*/dlambda)`` per ``p``; shape ``(len(p), 3)``.

    The lambda derivative is a central difference with step ``1e-5 max(1, |lambda|)``.
    """
    theta = theta if isinstance(theta, Theta) else Theta.from_sequence(theta)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    h = _lambda_step(theta.lam)
    dq = (std_quantile(p, theta.lam + h) - std_quantile(p, theta.lam - h)) / (2.0 * h)
    return np.column_stack([np.ones_like(p), std_quantile(p, theta.lam), theta.sigma * dq])


def _eta_gradient(theta: Theta) -> tuple[float, np.ndarray]:
    """eta and its gradient; central differences of log eta in sigma and lambda."""
    try:
        log_eta = log_mean_exp(theta)
        hs = 1e-5 * theta.sigma
        hl = _lambda_step(theta.lam)
        ds = (
            log_mean_exp((theta.mu, theta.sigma + hs, theta.lam)) - log_mean_exp((theta.mu, theta.sigma - hs, theta.lam))
        ) / (2.0 * hs)
        dl = (
            log_mean_exp((theta.mu, theta.sigma, theta.lam + hl)) - log_mean_exp((theta.mu, theta.sigma, theta.lam - hl))
        ) / (2.0 * hl)
    except MomentUndefinedError:
        return math.nan, np.full(3, math.nan)
    eta = math.exp(log_eta) if log_eta < 709.0 else math.inf
    return eta, eta * np.array([1.0, ds, dl])


def summarize(fit: FitResult, probs=(), conf_level: float = 0.95) -> FitSummary:
    """Standard errors and Wald intervals for the parameters, E(exp(y)) and quantiles.

    Parameters
    ----------
    fit : FitResult
        A converged fit; its weights enter the information matrix.
    probs : sequence of float
        Orders of the model quantiles to report.
    conf_level : float
        Coverage of the intervals.

    Raises
    ------
    EstimationError
        If the fit did not converge or the information matrix is singular.
    """
    if not fit.converged:
        raise EstimationError(f"{fit.method} fit did not converge; no summary")
    z = _z(conf_level)
    cov = _covariance(weighted_information(fit))
    se = np.sqrt(np.diag(cov))
    theta = fit.theta

    eta, grad = _eta_gradient(theta)
    eta_se = math.sqrt(grad @ cov @ grad) if np.all(np.isfinite(grad)) else math.nan

    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    if np.any((probs <= 0) | (probs >= 1)):
        raise ParameterDomainError("quantile orders must lie in (0, 1)")
    rows = []
    q_se = np.empty(probs.size)
    if probs.size:
        G = quantile_gradient(probs, theta)
        q_se = np.sqrt(np.einsum("ka,ab,kb->k", G, cov, G))
        est = quantile(probs, theta)
        rows = [(float(p), float(e), float(e - z * s), float(e + z * s)) for p, e, s in zip(probs, est, q_se)]
    return FitSummary(theta, se, eta, eta_se, cov, rows, conf_level, q_se, fit.method)


# ---------------------------------------------------------------------------
# Wald test


def _null_spec(null_spec, kwargs) -> dict:
    nulls = dict(null_spec or {})
    nulls.update({k: v for k, v in kwargs.items() if v is not None})
    if "lam" in nulls:
        nulls["lambda"] = nulls.pop("lam")
    unknown = set(nulls) - set(PARAMETERS)
    if unknown:
        raise ParameterDomainError(f"unknown parameters in the null: {sorted(unknown)}")
    if not nulls:
        raise ParameterDomainError("the null hypothesis must fix at least one of mu, sigma, lambda")
    return {k: float(nulls[k]) for k in PARAMETERS if k in nulls}


def weighted_wald_test(
    fit: FitResult | FitSummary, null_spec: Mapping | None = None, conf_level: float = 0.95, **params
) -> TestResult:
    """Weighted Wald test of fixed values for some of (mu, sigma, lambda).

    The null is given as a mapping and/or keywords ``mu``, ``sigma``,
    ``lambda`` (or ``lam``). With a single restriction the result carries
    the matching Wald interval.
    """
    null = _null_spec(null_spec, params)
    summary = fit if isinstance(fit, FitSummary) else summarize(fit, conf_level=conf_level)
    idx = [PARAMETERS.index(k) for k in null]
    est = summary.estimate[idx]
    diff = est - np.array(list(null.values()))
    cov_r = summary.cov[np.ix_(idx, idx)]
    stat = float(diff @ linalg.solve(cov_r, diff, assume_a="pos"))
    stat = max(stat, 0.0)
    df = len(idx)
    conf_int = None
    if df == 1:
        z = _z(conf_level)
        se = math.sqrt(cov_r[0, 0])
        conf_int = (float(est[0] - z * se), float(est[0] + z * se))
    return TestResult(
        statistic=stat,
        df=df,
        p_value=float(stats.chi2.sf(stat, df)),
        conf_int=conf_int,
        kind="Wald",
        method=summary.method,
        null=null,
        estimate={k: float(v) for k, v in zip(null, est)},
        conf_level=conf_level,
    )


# ---------------------------------------------------------------------------
# the sigma = lambda submodel


_METHOD_ALIASES = {"ML": "ML", "FIWL": "WL", "WL": "WL", "1SWL": "oneWL", "ONEWL": "oneWL"}


def _canonical_method(method: str) -> str:
    try:
        return _METHOD_ALIASES[str(method).upper()]
    except KeyError:
        raise ParameterDomainError(f"the sigma = lambda fit supports ML, FIWL and 1SWL, not {method!r}") from None


def _curve_start(start: Theta) -> np.ndarray:
    # nearest point of the curve when lambda > 0, else sigma projected onto it
    s = 0.5 * (start.sigma + start.lam) if start.lam > 0 else max(start.sigma, _EPS_PROJECT)
    s = max(s, _EPS_PROJECT)
    return np.array([start.mu, s, s])


def _curve_mle(y, w, theta_vec, max_it):
    """Weighted MLE on the curve, after profiling mu at the starting s."""
    theta_vec, _, _ = _weighted_mle(y, w, theta_vec, basis=_CURVE[:, :1], max_it=max_it, tol=1e-10)
    return _weighted_mle(y, w, theta_vec, basis=_CURVE, max_it=max_it, tol=1e-10)


def constrained_fit_sigma_eq_lambda(y, start, method: str = "ML", control: Control | None = None) -> FitResult:
    """Fit of the loggamma submodel ``sigma = lambda = s > 0``.

    ``method`` picks the machinery: ``"ML"``, ``"FIWL"`` (or ``"WL"``) and
    ``"1SWL"`` (or ``"oneWL"``). For 1SWL the weights of the unconstrained
    start are held fixed to locate a starting point on the curve, from which
    one weighted scoring step is taken along the curve.
    """
    control = control or Control()
    kind = _canonical_method(method)
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if y.size < 4 or not np.all(np.isfinite(y)):
        raise ParameterDomainError("need at least 4 finite observations")
    start = start.theta if isinstance(start, FitResult) else start
    start = start if isinstance(start, Theta) else Theta.from_sequence(start)
    vec = _curve_start(start)
    n = y.size

    if kind == "ML":
        w = np.ones(n)
        vec, it, conv = _curve_mle(y, w, vec, control.max_it)
        return FitResult(Theta(*vec), w, it, "ML", y, converged=conv)

    if kind == "WL":
        conv = False
        it = 0
        for it in range(1, control.max_it + 1):
            w = wle_weights(y, vec, control)
            if not np.any(w > 0):
                raise EstimationError("all weights are zero on the sigma = lambda curve")
            new, _, _ = _weighted_mle(y, w, vec, basis=_CURVE, max_it=3, tol=1e-12)
            step = np.max(np.abs(new - vec))
            vec = new
            if step <= control.refine_tol * vec[1]:
                conv = True
                break
        theta = Theta(*vec)
        return FitResult(theta, wle_weights(y, theta, control), it, "WL", y, converged=conv)

    # one-step: weights frozen at the unconstrained start locate the curve start
    w0 = wle_weights(y, start, control)
    vec, _, _ = _curve_mle(y, w0, vec, control.max_it)
    theta0 = Theta(*vec)
    h = control.bw * theta0.sigma
    w = wle_weights(y, theta0, control, bandwidth=h)
    g = _CURVE.T @ (weighted_score(y, w, theta0) / n)
    K = control.nexp
    yk = quantile((np.arange(1, K + 1) - 0.5) / K, theta0)
    wk = wle_weights(y, theta0, control, points=yk, bandwidth=h)
    J = -_CURVE.T @ weighted_jacobian(yk, wk, theta0) @ _CURVE / K
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e12:
        raise EstimationError("weighted information on the sigma = lambda curve is singular")
    new = vec + control.step * (_CURVE @ linalg.solve(J, g, assume_a="sym"))
    if not new[1] > 0:
        raise EstimationError("one-step update left the sigma = lambda curve domain")
    theta = Theta(*new)
    return FitResult(theta, wle_weights(y, theta, control, bandwidth=h), 1, "oneWL", y)


def weighted_wilks_test(
    y, fit: FitResult, control: Control | None = None, weights: str = "unconstrained"
) -> TestResult:
    """Weighted Wilks test of ``sigma = lambda`` referred to chi-squared with 1 df.

    The statistic is ``2 sum_j w_j [l(y_j; theta_hat) - l(y_j; theta_0)]``
    with ``theta_0`` the constrained fit by the same method. ``weights``
    selects whose weights enter: ``"unconstrained"`` (the fit's) or
    ``"constrained"``.
    """
    control = control or Control()
    if weights not in ("unconstrained", "constrained"):
        raise ParameterDomainError("weights must be 'unconstrained' or 'constrained'")
    kind = _canonical_method(fit.method)
    y = np.sort(np.asarray(y, dtype=float).ravel())
    null_fit = constrained_fit_sigma_eq_lambda(y, fit.theta, kind, control)
    if not (fit.converged and null_fit.converged):
        raise EstimationError("the Wilks test needs converged unconstrained and constrained fits")
    w = fit.weights if weights == "unconstrained" else null_fit.weights
    if w.shape != y.shape:
        raise ParameterDomainError("fit weights do not match the data")
    diff = _objective(y, w, fit.theta.as_array()) - _objective(y, w, null_fit.theta.as_array())
    stat = 2.0 * diff
    if not np.isfinite(stat) or stat < -1e-8:
        raise EstimationError(f"negative Wilks statistic {stat:.3g}; the constrained fit beats the unconstrained one")
    stat = max(stat, 0.0)
    return TestResult(
        statistic=float(stat),
        df=1,
        p_value=float(stats.chi2.sf(stat, 1)),
        null_theta=null_fit.theta,
        kind="Wilks",
        method=fit.method,
        null={"sigma": "lambda"},
        estimate={"mu": fit.mu, "sigma": fit.sigma, "lambda": fit.lam},
    )
