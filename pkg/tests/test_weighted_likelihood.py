import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from genloggamma import (
    Control,
    EstimationError,
    ParameterDomainError,
    RafKind,
    Theta,
    density,
    fiwl_fit,
    ml_fit,
    oneswl_fit,
    quantile,
    sample,
    score,
    wle_weights,
)
from genloggamma.weighted_likelihood import (
    expected_weighted_information,
    kde,
    pearson_residuals,
    raf,
    smoothed_model,
    weights_from_residuals,
)

CONTROL = Control()
residuals_st = st.floats(-1.0, 50.0)


def _scipy_nll(p, y):
    # LG(mu, sigma, lambda) through scipy's loggamma: lambda u + log a ~ loggamma(a)
    mu, sigma, lam = p
    if sigma <= 0:
        return np.inf
    a = lam**-2
    u = (y - mu) / sigma
    lp = np.log(abs(lam)) + stats.loggamma.logpdf(lam * u + np.log(a), a) - np.log(sigma)
    return -np.sum(lp)


class TestSmoothing:
    def test_kde_matches_scipy(self):
        y = sample(300, (0, 1, 0.5), seed=1)
        h = 0.3
        ref = stats.gaussian_kde(y, bw_method=h / np.std(y, ddof=1))
        x = np.linspace(y.min(), y.max(), 200)
        assert np.allclose(kde(y, h)(x), ref(x), atol=1e-4)

    def test_kde_vanishes_far_away(self):
        assert kde([0.0, 1.0], 0.1)(np.array([-5.0, 6.0])).tolist() == [0.0, 0.0]

    def test_smoothed_model_is_a_convolution(self):
        th, h = (0, 1, 0.5), 0.3
        model = smoothed_model(th, h, 1000)
        for x in (-2.0, -0.5, 0.4, 1.5):
            conv, _ = integrate.quad(lambda t: density(t, th) * stats.norm.pdf(x, t, h), -np.inf, np.inf)
            assert model(x) == pytest.approx(conv, abs=1e-3)

    def test_residuals_vanish_on_model_quantiles(self):
        th = (0.3, 1.2, -0.4)
        y = quantile((np.arange(1, 101) - 0.5) / 100, th)
        assert np.max(np.abs(pearson_residuals(y, th, CONTROL))) < 1e-3

    def test_bad_arguments(self):
        with pytest.raises(ParameterDomainError):
            kde([1.0], 0.3)
        with pytest.raises(ParameterDomainError):
            kde([1.0, 2.0], 0.0)
        with pytest.raises(ParameterDomainError):
            smoothed_model((0, 1, 0), 0.3, 1)


# disparity generators G with A = (1 + delta) G' - G
GENERATORS = {
    "NED": lambda d: np.exp(-d) - 1 + d,
    "HD": lambda d: 2 * (np.sqrt(d + 1) - 1) ** 2,
    "SCHI2": lambda d: d * d / (d + 2),
}


class TestRaf:
    @pytest.mark.parametrize("kind,tau", [("NED", 1), ("GKL", 0.5), ("PWD", 1), ("PWD", -0.5), ("HD", 1), ("SCHI2", 1)])
    def test_standardized(self, kind, tau):
        h = 1e-6
        assert raf(kind, 0.0, tau) == pytest.approx(0.0, abs=1e-15)
        slope = (raf(kind, h, tau) - raf(kind, -h, tau)) / (2 * h)
        assert slope == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("kind", sorted(GENERATORS))
    def test_disparity_derivation(self, kind):
        G = GENERATORS[kind]
        d = np.linspace(-0.9, 5, 60)
        h = 1e-6
        expected = (1 + d) * (G(d + h) - G(d - h)) / (2 * h) - G(d)
        assert np.allclose(raf(kind, d), expected, atol=1e-7)

    def test_special_cases(self):
        d = np.linspace(-0.5, 4, 10)
        assert np.allclose(raf("PWD", d, 1.0), d)
        assert np.allclose(raf("GKL", d, 0.0), d)
        assert np.allclose(raf("PWD", d, np.inf), np.log1p(d))
        assert np.allclose(raf("HD", d), raf("PWD", d, 2.0))

    def test_domain(self):
        with pytest.raises(ParameterDomainError):
            raf("NED", -1.5)
        with pytest.raises(ParameterDomainError):
            raf("GKL", 1.0, 2.0)
        with pytest.raises(ParameterDomainError):
            raf("bogus", 1.0)
        assert RafKind.parse("schi2") is RafKind.SCHI2

    @given(residuals_st)
    def test_weights_in_unit_interval(self, d):
        for kind in RafKind:
            w = weights_from_residuals([d], CONTROL.with_(raf=kind, raf_tau=0.5 if kind is RafKind.GKL else 1.0))
            assert 0.0 <= w[0] <= 1.0

    def test_minw_zeroes_small_weights(self):
        d = np.array([0.0, 5.0, 9.0])
        w = weights_from_residuals(d, CONTROL.with_(minw=0.0))
        assert np.all(w > 0)
        cut = weights_from_residuals(d, CONTROL.with_(minw=float(w[1]) + 1e-9))
        assert cut[0] == 1.0 and cut[1] == 0.0 and cut[2] == 0.0


class TestWeights:
    def test_outliers_are_rejected(self):
        y = sample(300, (0, 1, 0), seed=2)
        y[:15] += 20
        w = wle_weights(y, (0, 1, 0), CONTROL)
        assert np.all(w[:15] == 0)
        assert np.mean(w[15:]) > 0.9


@pytest.fixture(scope="module")
def data():
    # sorted, like FitResult.data, so weights line up
    return np.sort(sample(300, (0.5, 1.3, -0.6), seed=9))


class TestEstimators:
    def test_ml_against_scipy_oracle(self, data):
        fit = ml_fit(data, (0, 1, -0.3), CONTROL)
        res = optimize.minimize(
            _scipy_nll, [0.4, 1.2, -0.5], args=(data,), method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000, "maxfev": 40000},
        )
        assert fit.converged
        assert np.allclose(fit.theta.as_array(), res.x, atol=1e-5)
        assert np.max(np.abs(score(data, fit.theta).mean(axis=0))) < 1e-6

    @pytest.mark.parametrize("raf_kw", [{"raf": "PWD", "raf_tau": 1.0}, {"raf": "GKL", "raf_tau": 0.0}])
    def test_identity_raf_gives_ml(self, data, raf_kw):
        ctl = CONTROL.with_(**raf_kw)
        ml = ml_fit(data, (0, 1, -0.3), ctl)
        wl = fiwl_fit(data, (0, 1, -0.3), ctl)
        assert np.allclose(wl.theta.as_array(), ml.theta.as_array(), atol=1e-6)
        assert np.all(wl.weights == 1.0)

    def test_fiwl_is_a_fixed_point(self, data):
        fit = fiwl_fit(data, None, CONTROL)
        assert fit.converged
        g = (fit.weights @ score(data, fit.theta)) / data.size
        assert np.max(np.abs(g)) < 1e-6

    def test_fiwl_resists_outliers(self):
        y = sample(400, (0, 1, 0), seed=12)
        y[:40] += 15
        wl = fiwl_fit(y, None, CONTROL)
        ml = ml_fit(y, wl.theta, CONTROL)
        assert np.allclose(wl.theta.as_array(), [0, 1, 0], atol=0.3)
        assert np.linalg.norm(ml.theta.as_array() - [0, 1, 0]) > 1.0

    def test_one_step_with_zero_step_is_the_start(self, data):
        start = Theta(0.45, 1.25, -0.55)
        assert oneswl_fit(data, start, CONTROL.with_(step=0.0)).theta == start

    def test_one_step_moves_towards_fiwl(self, data):
        start = Theta(0.3, 1.4, -0.2)
        one = oneswl_fit(data, start, CONTROL)
        full = fiwl_fit(data, start, CONTROL)
        before = np.linalg.norm(start.as_array() - full.theta.as_array())
        after = np.linalg.norm(one.theta.as_array() - full.theta.as_array())
        assert after < before

    def test_information_is_positive_definite(self, data):
        J = expected_weighted_information((0.5, 1.3, -0.6), data, CONTROL)
        assert np.allclose(J, J.T)
        assert np.all(np.linalg.eigvalsh(J) > 0)

    def test_all_zero_weights(self):
        y = sample(50, (0, 1, 0), seed=1)
        with pytest.raises(EstimationError):
            fiwl_fit(y, (100.0, 0.01, 0.0), CONTROL)
