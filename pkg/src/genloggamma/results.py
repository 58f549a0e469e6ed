"""Fit result container and its JSON form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distribution import Theta, mean_exp
from .exceptions import MomentUndefinedError

__all__ = ["METHODS", "LambdaProfile", "FitResult", "eta_or_nan"]

METHODS = ("QTau", "WQTau", "oneWL", "WL", "ML")


def eta_or_nan(theta: Theta) -> float:
    try:
        return mean_exp(theta)
    except (MomentUndefinedError, OverflowError):
        return math.nan


@dataclass
class LambdaProfile:
    """Per-grid-point output of the tau search."""

    lam: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray

    def to_dict(self) -> dict:
        return {k: _floats(getattr(self, k)) for k in ("lam", "mu", "sigma", "tau")}

    @classmethod
    def from_dict(cls, d: dict) -> "LambdaProfile":
        return cls(*(np.array(d[k], dtype=float) for k in ("lam", "mu", "sigma", "tau")))


@dataclass
class FitResult:
    """Estimate of (mu, sigma, lambda) with per-observation weights.

    ``data`` holds the observations sorted increasingly and ``weights[j]``
    belongs to ``data[j]``.
    """

    theta: Theta
    weights: np.ndarray
    iterations: int
    method: str
    data: np.ndarray
    converged: bool = True
    eta: float = field(default=math.nan)
    tau: float | None = None
    profile: LambdaProfile | None = None
    scales: np.ndarray | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if math.isnan(self.eta):
            self.eta = eta_or_nan(self.theta)

    @property
    def mu(self) -> float:
        return self.theta.mu

    @property
    def sigma(self) -> float:
        return self.theta.sigma

    @property
    def lam(self) -> float:
        return self.theta.lam

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "mu": self.theta.mu,
            "sigma": self.theta.sigma,
            "lambda": self.theta.lam,
            "eta": _float(self.eta),
            "weights": _floats(self.weights),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "data": _floats(self.data),
        }
        if self.tau is not None:
            out["tau"] = _float(self.tau)
        if self.profile is not None:
            out["profile"] = self.profile.to_dict()
        if self.scales is not None:
            out["scales"] = _floats(self.scales)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        profile = d.get("profile")
        scales = d.get("scales")
        return cls(
            theta=Theta(d["mu"], d["sigma"], d["lambda"]),
            weights=np.array(d["weights"], dtype=float),
            iterations=int(d["iterations"]),
            method=d["method"],
            data=np.array(d["data"], dtype=float),
            converged=bool(d.get("converged", True)),
            eta=_unfloat(d.get("eta")),
            tau=None if d.get("tau") is None else _unfloat(d["tau"]),
            profile=None if profile is None else LambdaProfile.from_dict(profile),
            scales=None if scales is None else np.array(scales, dtype=float),
        )


def _float(x):
    x = float(x)
    # JSON has no nan/inf; encode them as strings
    return x if math.isfinite(x) else repr(x)


def _floats(a):
    return [_float(v) for v in np.asarray(a, dtype=float)]


def _unfloat(x):
    if x is None:
        return math.nan
    return float(x)
