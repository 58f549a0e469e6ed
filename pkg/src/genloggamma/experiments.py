"""
Monte Carlo studies behind the acceptance checks.

Each study is a plain function of seeds and sizes returning arrays, so the
scripts in ``scripts/`` and the test-suite share one implementation.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .control import Control
from .distribution import Theta, sample
from .exceptions import EstimationError
from .inference import summarize, weighted_wilks_test
from .qtau import qtau_fit, wqtau_fit
from .weighted_likelihood import fiwl_fit, ml_fit, oneswl_fit

__all__ = [
    "StudyResult",
    "contaminated_sample",
    "contamination_study",
    "efficiency_study",
    "coverage_study",
    "wilks_study",
]

log = logging.getLogger(__name__)

ROBUST_METHODS = ("QTau", "WQTau", "oneWL", "WL")


@dataclass
class StudyResult:
    """Per-replicate output of a study, keyed by method."""

    estimates: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    seconds: float = 0.0

    def add(self, method: str, value) -> None:
        self.estimates.setdefault(method, []).append(value)

    def array(self, method: str) -> np.ndarray:
        return np.asarray(self.estimates.get(method, []), dtype=float)

    def fail(self, method: str) -> None:
        self.failures[method] = self.failures.get(method, 0) + 1


def contaminated_sample(n: int, theta, seed: int, eps: float = 0.0, shift: float = 15.0) -> np.ndarray:
    """``sample(n, theta, seed)`` with the first ``floor(eps n)`` draws shifted by ``shift``."""
    y = sample(n, theta, seed=seed)
    y[: int(np.floor(eps * n))] += shift
    return y


def _chain(y, control):
    q = qtau_fit(y, control)
    w = wqtau_fit(y, q, control)
    return q, w


def contamination_study(seeds, n=500, theta=(0.0, 1.0, 1.0), eps=0.2, shift=15.0, control=None) -> StudyResult:
    """All five estimators on contaminated LG samples."""
    control = control or Control()
    out = StudyResult()
    t0 = time.perf_counter()
    for seed in seeds:
        y = contaminated_sample(n, theta, seed, eps, shift)
        q, w = _chain(y, control)
        out.add("QTau", q.theta.as_array())
        out.add("WQTau", w.theta.as_array())
        for name, fn in (("oneWL", oneswl_fit), ("WL", fiwl_fit), ("ML", ml_fit)):
            try:
                out.add(name, fn(y, w.theta, control).theta.as_array())
            except EstimationError as exc:
                log.warning("seed %d %s failed: %s", seed, name, exc)
                out.add(name, [np.nan] * 3)
                out.fail(name)
    out.seconds = time.perf_counter() - t0
    return out


def efficiency_study(seeds, n=500, theta=(0.0, 1.0, 0.0), control=None) -> StudyResult:
    """1SWL, FIWL and ML on clean samples; ``extra['wl_mean_weight']`` per replicate."""
    control = control or Control()
    out = StudyResult()
    out.extra["wl_mean_weight"] = []
    t0 = time.perf_counter()
    for seed in seeds:
        y = sample(n, theta, seed=seed)
        _, w = _chain(y, control)
        o = oneswl_fit(y, w.theta, control)
        f = fiwl_fit(y, w.theta, control)
        m = ml_fit(y, w.theta, control)
        out.add("oneWL", o.theta.as_array())
        out.add("WL", f.theta.as_array())
        out.add("ML", m.theta.as_array())
        out.extra["wl_mean_weight"].append(float(np.mean(f.weights)))
    out.seconds = time.perf_counter() - t0
    return out


def coverage_study(seeds, n=500, theta=(0.0, 1.0, 0.5), conf_level=0.95, control=None) -> StudyResult:
    """Indicators that the 1SWL Wald intervals cover each true parameter."""
    control = control or Control()
    truth = Theta.from_sequence(theta).as_array()
    out = StudyResult()
    t0 = time.perf_counter()
    for seed in seeds:
        y = sample(n, theta, seed=seed)
        _, w = _chain(y, control)
        try:
            fit = oneswl_fit(y, w.theta, control)
            cis = summarize(fit, conf_level=conf_level).param_cis()
        except EstimationError as exc:
            log.warning("seed %d failed: %s", seed, exc)
            out.fail("oneWL")
            out.add("oneWL", [np.nan] * 3)
            continue
        out.add("oneWL", (cis[:, 0] <= truth) & (truth <= cis[:, 1]))
    out.seconds = time.perf_counter() - t0
    return out


def wilks_study(seeds, n=500, s=0.5, mu=0.0, methods=("ML", "WL"), control=None) -> StudyResult:
    """Wilks p-values of sigma = lambda on loggamma data (``sigma = lambda = s``)."""
    control = control or Control()
    out = StudyResult()
    t0 = time.perf_counter()
    fitters = {"ML": ml_fit, "WL": fiwl_fit, "oneWL": oneswl_fit}
    for seed in seeds:
        y = sample(n, (mu, s, s), seed=seed)
        _, w = _chain(y, control)
        for name in methods:
            try:
                fit = fitters[name](y, w.theta, control)
                out.add(name, weighted_wilks_test(y, fit, control).p_value)
            except EstimationError as exc:
                log.warning("seed %d %s failed: %s", seed, name, exc)
                out.fail(name)
                out.add(name, np.nan)
    out.seconds = time.perf_counter() - t0
    return out
