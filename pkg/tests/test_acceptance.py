"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records a one-line verdict in ``conftest.ACCEPTANCE``; the lines
are printed in the "acceptance criteria" section of the pytest summary.
"""

import csv
import math
import os
import time

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import ACCEPTANCE, DATA
from genloggamma import (
    Control,
    FitSummary,
    cdf,
    density,
    fiwl_fit,
    fit,
    log_density,
    mean_exp,
    ml_fit,
    quantile,
    sample,
    score,
    score_jacobian,
    weighted_wald_test,
    weighted_wilks_test,
)
from genloggamma.experiments import contamination_study, coverage_study, efficiency_study, wilks_study
from genloggamma.robust_scale import rho

pytestmark = pytest.mark.acceptance


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[k] = line
    print(line)
    assert ok, line


def test_criterion_01_distribution():
    t0 = time.perf_counter()
    worst_mass, worst_rt = 0.0, 0.0
    p = np.arange(1, 100) / 100
    for lam in (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0):
        th = (0.0, 1.0, lam)
        mass, _ = integrate.quad(lambda y: density(y, th), -np.inf, np.inf, limit=200)
        worst_mass = max(worst_mass, abs(mass - 1))
        worst_rt = max(worst_rt, float(np.max(np.abs(cdf(quantile(p, th), th) - p))))
    secs = time.perf_counter() - t0
    ok = worst_mass <= 1e-8 and worst_rt < 1e-10 and secs < 10
    record(1, ok, f"max |mass-1| = {worst_mass:.1e}, max roundtrip = {worst_rt:.1e}, {secs:.2f} s")


def test_criterion_02_eta():
    eta = mean_exp((8.04, 0.4944, -0.6437))
    rel = abs(eta / 4381 - 1)
    record(2, rel <= 5e-3, f"eta = {eta:.2f} vs 4381 (rel {rel:.1e})")


def test_criterion_03_wald_arithmetic():
    s = FitSummary.from_se((8.04, 0.4944, -0.6437), (0.09841, math.nan, 0.3005))
    res = weighted_wald_test(s, lam=0.0)
    lo, hi = s.param_cis()[0]
    ok = (
        abs(res.statistic - 4.5876) <= 0.01
        and abs(res.p_value - 0.0322) <= 0.001
        and (round(lo, 3), round(hi, 3)) == (7.847, 8.233)
    )
    record(3, ok, f"ww = {res.statistic:.4f}, p = {res.p_value:.4f}, mu CI = ({lo:.3f}, {hi:.3f})")


def test_criterion_04_calibration():
    # split at +-c where rho has its kinks; the tails contribute P(|Z| > c)
    c = 1.548
    inner, _ = integrate.quad(lambda z: rho(z, c) * stats.norm.pdf(z), -c, c, epsabs=1e-14, epsrel=1e-14)
    e_rho = inner + 2 * stats.norm.sf(c)
    record(4, abs(e_rho - 0.5) <= 1e-6, f"E rho(Z, 1.548) = {e_rho:.8f} (|diff| = {abs(e_rho - 0.5):.1e}, tol 1e-6)")


def test_criterion_05_ml_equivalence():
    ctl = Control(raf="PWD", raf_tau=1.0)
    worst = 0.0
    for seed in range(20):
        y = sample(300, (0.0, 1.0, 0.5), seed=seed)
        ml = ml_fit(y, None, ctl)
        wl = fiwl_fit(y, ml.theta.as_array() + [0.05, 0.05, -0.05], ctl)
        worst = max(worst, float(np.max(np.abs(ml.theta.as_array() - wl.theta.as_array()))))
    record(5, worst <= 1e-6, f"max |FIWL(PWD, tau=1) - ML| over 20 datasets = {worst:.1e}")


def test_criterion_06_robustness():
    t0 = time.perf_counter()
    res = contamination_study(range(50), n=500, theta=(0.0, 1.0, 1.0), eps=0.2, shift=15.0)
    secs = time.perf_counter() - t0
    parts, ok = [], True
    for name in ("QTau", "WQTau", "oneWL", "WL"):
        est = res.array(name)
        dl = float(np.nanmedian(np.abs(est[:, 2] - 1)))
        ds = float(np.nanmedian(np.abs(est[:, 1] - 1)))
        good = dl < 0.5 and ds < 0.3
        ok &= good
        parts.append(f"{name} {dl:.2f}/{ds:.3f}{'' if good else '!'}")
    ml_err = float(np.nanmedian(np.abs(res.array("ML")[:, 1] - 1)))
    ok &= ml_err > 0.5 and secs < 600
    record(6, ok, "median |lam-1|/|sig-1|: " + ", ".join(parts) + f"; ML |sig-1| = {ml_err:.2f}; {secs:.0f} s")


def test_criterion_07_efficiency():
    res = efficiency_study(range(100), n=500, theta=(0.0, 1.0, 0.0))
    v = {m: float(np.var(res.array(m)[:, 0], ddof=1)) for m in ("oneWL", "WL", "ML")}
    r1, r2 = v["oneWL"] / v["ML"], v["WL"] / v["ML"]
    mw = float(np.mean(res.extra["wl_mean_weight"]))
    ok = abs(r1 - 1) <= 0.15 and abs(r2 - 1) <= 0.15 and mw > 0.9
    record(7, ok, f"var(mu) ratio to ML: 1SWL {r1:.3f}, FIWL {r2:.3f}; mean FIWL weight {mw:.4f}")


def test_criterion_08_coverage():
    res = coverage_study(range(200), n=500, theta=(0.0, 1.0, 0.5))
    cov = np.nanmean(res.array("oneWL"), axis=0)
    ok = bool(np.all((cov >= 0.88) & (cov <= 0.99)))
    fails = res.failures.get("oneWL", 0)
    record(8, ok, f"1SWL 95% coverage mu/sigma/lambda = {cov[0]:.3f}/{cov[1]:.3f}/{cov[2]:.3f} ({fails} failed fits)")


def test_criterion_09_wilks_level():
    res = wilks_study(range(200), n=500, s=0.5, methods=("ML", "WL"))
    rates = {m: float(np.nanmean(res.array(m) < 0.05)) for m in ("ML", "WL")}
    ok = all(0.01 <= r <= 0.12 for r in rates.values())
    record(9, ok, f"rejection at 5%: ML {rates['ML']:.3f}, FIWL {rates['WL']:.3f}; failures {res.failures}")


def _fd(fn, th, h=1e-6):
    cols = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        cols.append((fn(th + e) - fn(th - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def test_criterion_10_score_validity():
    rng = np.random.default_rng(2024)
    worst_s, worst_j = 0.0, 0.0
    for _ in range(1000):
        th = np.array([rng.uniform(-2, 2), rng.uniform(0.3, 3), rng.uniform(-2.5, 2.5)])
        y = th[0] + th[1] * rng.uniform(-3, 3)
        s = score(y, th)
        s_fd = _fd(lambda t: log_density(y, t), th)
        j_fd = _fd(lambda t: score(y, t), th)
        worst_s = max(worst_s, float(np.max(np.abs(s - s_fd) / np.maximum(1, np.abs(s_fd)))))
        worst_j = max(worst_j, float(np.max(np.abs(score_jacobian(y, th) - j_fd) / np.maximum(1, np.abs(j_fd)))))
    record(10, worst_s <= 1e-5 and worst_j <= 1e-4, f"max score err {worst_s:.1e} (tol 1e-5), Jacobian {worst_j:.1e} (tol 1e-4)")


def _drg185():
    path = os.environ.get("GENLOGGAMMA_DRG2000", str(DATA / "drg2000.csv"))
    if not os.path.exists(path):
        return None
    with open(path, newline="") as fh:
        cost = [float(r["Cost"]) for r in csv.DictReader(fh) if str(r["APDRG"]).strip() == "185"]
    return np.log(np.sort(cost))


def test_criterion_11_drg185():
    y = _drg185()
    if y is None:
        ACCEPTANCE[11] = "criterion 11: SKIP  drg2000 data not present (set GENLOGGAMMA_DRG2000 to a CSV with APDRG, Cost)"
        pytest.skip("drg2000 data not available")
    res = fit(y, "ML")
    target = np.array([7.989, 0.501, -0.892, 4837.0])
    got = np.array([res.mu, res.sigma, res.lam, res.eta])
    rel = np.abs(got / target - 1)
    wilks = weighted_wilks_test(y, res, Control())
    wrel = abs(wilks.statistic / 45.882 - 1)
    ok = bool(np.all(rel <= 0.01)) and wrel <= 0.02
    record(11, ok, f"ML (mu, sigma, lambda, eta) = {np.round(got, 4).tolist()}; Wilks {wilks.statistic:.3f} vs 45.882")
