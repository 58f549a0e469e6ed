"""Robust fitting of the generalized loggamma distribution LG(mu, sigma, lambda)."""

from __future__ import annotations

from .control import Control, RafKind
from .distribution import (
    Theta,
    cdf,
    density,
    log_density,
    log_mean_exp,
    mean_exp,
    quantile,
    sample,
    score,
    score_jacobian,
    sf,
    std_quantile,
)
from .exceptions import EstimationError, MomentUndefinedError, ParameterDomainError
from .inference import (
    FitSummary,
    TestResult,
    constrained_fit_sigma_eq_lambda,
    summarize,
    weighted_wald_test,
    weighted_wilks_test,
)
from .qtau import qtau_fit, wqtau_fit
from .results import METHODS, FitResult
from .robust_scale import RhoParams, m_scale, tau_scale
from .weighted_likelihood import fiwl_fit, ml_fit, oneswl_fit, wle_weights

__version__ = "0.1.0"

__all__ = [
    "Control",
    "RafKind",
    "Theta",
    "FitResult",
    "FitSummary",
    "TestResult",
    "RhoParams",
    "METHODS",
    "EstimationError",
    "MomentUndefinedError",
    "ParameterDomainError",
    "fit",
    "cdf",
    "density",
    "log_density",
    "log_mean_exp",
    "mean_exp",
    "quantile",
    "sample",
    "score",
    "score_jacobian",
    "sf",
    "std_quantile",
    "m_scale",
    "tau_scale",
    "qtau_fit",
    "wqtau_fit",
    "ml_fit",
    "fiwl_fit",
    "oneswl_fit",
    "wle_weights",
    "summarize",
    "weighted_wald_test",
    "weighted_wilks_test",
    "constrained_fit_sigma_eq_lambda",
]


def fit(y, method: str = "oneWL", start=None, control: Control | None = None, weights=None) -> FitResult:
    """Fit LG(mu, sigma, lambda) to ``y`` by one of :data:`METHODS`.

    Without ``start``, WQTau starts from QTau, and the likelihood-based
    methods (oneWL, WL, ML) start from WQTau computed from QTau.

    Parameters
    ----------
    y : array_like
        Observations (on the log scale for cost-type data).
    method : {"oneWL", "WQTau", "WL", "QTau", "ML"}
    start : Theta or sequence of 3 floats, optional
        Starting value; not accepted by QTau.
    control : Control, optional
    weights : array_like, optional
        Residual multipliers for QTau and WQTau, aligned with the sorted data.
    """
    control = control or Control()
    if method not in METHODS:
        raise ParameterDomainError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if weights is not None and method not in ("QTau", "WQTau"):
        raise ParameterDomainError("weights are only used by QTau and WQTau")
    if start is not None:
        if method == "QTau":
            raise ParameterDomainError("QTau takes no starting value")
        start = start if isinstance(start, Theta) else Theta.from_sequence(start)

    if method == "QTau":
        return qtau_fit(y, control, weights)
    if method == "WQTau":
        return wqtau_fit(y, start, control, weights)
    if start is None:
        start = wqtau_fit(y, qtau_fit(y, control), control).theta
    if method == "oneWL":
        return oneswl_fit(y, start, control)
    if method == "WL":
        return fiwl_fit(y, start, control)
    return ml_fit(y, start, control)
