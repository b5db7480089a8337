import datetime as dt
import math

import numpy as np
import pytest
from scipy import integrate, stats

from fqcast.benchmarks import (
    CorrelationModel,
    EgarchParams,
    MiscalibrationGuard,
    ScaledT,
    ccc_dcc_joint_forecast,
    dcc_fit,
    edf_joint_forecast,
    edf_marginals,
    egarch_fit,
    egarch_loglik,
    expected_abs_t,
    fit_garch_model,
    news_impact,
    simulate_egarch,
)
from fqcast.distbuild import ks_distance
from fqcast.timeseries import Panel

TRUE = EgarchParams(mu=0.0, kappa=-0.1, gamma=0.95, alpha=0.1, xi=-0.05, nu=8.0)


def make_panel(values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    start = dt.date(2010, 1, 1)
    dates = tuple(start + dt.timedelta(days=i) for i in range(values.shape[0]))
    return Panel(dates, tuple(f"v{i}" for i in range(values.shape[1])), values)


@pytest.fixture(scope="module")
def egarch_panel():
    rng = np.random.default_rng(21)
    return make_panel(np.column_stack([simulate_egarch(TRUE, 1000, rng) for _ in range(3)]))


class TestEDF:
    def test_order_statistics(self):
        m = edf_marginals(make_panel(np.tile([1.0, 2.0, 3.0], 4)))[0]
        assert m.inverse_cdf(0.5) == 2.0
        m = edf_marginals(make_panel(np.arange(1.0, 11.0)))[0]
        assert m.cdf(10.0) == 1.0
        assert m.inverse_cdf(0.1) == 1.0 and m.inverse_cdf(0.11) == 2.0

    def test_converges_to_truth(self, rng):
        m = edf_marginals(make_panel(rng.standard_normal(2000)))[0]
        assert ks_distance(m, stats.norm.cdf) < 0.04

    def test_short_window(self, rng):
        with pytest.raises(ValueError):
            edf_marginals(make_panel(rng.standard_normal(9)))

    def test_joint_resamples_history(self, rng):
        x = rng.standard_normal((300, 3))
        j = edf_joint_forecast(make_panel(x), 500, rng)
        assert j.samples.shape == (500, 3)
        for k in range(3):
            assert np.isin(j.samples[:, k], x[:, k]).all()


class TestLikelihood:
    def test_expected_abs_t(self):
        for nu in (3.0, 8.0, 30.0):
            c = math.sqrt((nu - 2) / nu)
            oracle = integrate.quad(lambda z: abs(z) * stats.t.pdf(z / c, nu) / c, -np.inf, np.inf)[0]
            assert expected_abs_t(nu) == pytest.approx(oracle, rel=1e-8)
        assert expected_abs_t(1e6) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-5)

    def test_collapses_to_iid_t(self, rng):
        y = rng.standard_normal(400) * 1.7 + 0.3
        kappa = math.log(y.var())
        p = EgarchParams(0.3, kappa, 0.0, 0.0, 0.0, 6.0)
        scale = math.exp(kappa / 2) * math.sqrt(4.0 / 6.0)
        oracle = stats.t.logpdf(y, 6.0, loc=0.3, scale=scale).sum()
        assert egarch_loglik(p, y) == pytest.approx(oracle, rel=1e-12)

    def test_scale_equivariance(self, rng):
        y = simulate_egarch(TRUE, 1500, rng)
        shift = 2 * math.log(2.0)
        q = EgarchParams(2 * TRUE.mu, TRUE.kappa + (1 - TRUE.gamma) * shift, TRUE.gamma, TRUE.alpha, TRUE.xi, TRUE.nu)
        assert egarch_loglik(q, 2 * y) == pytest.approx(egarch_loglik(TRUE, y) - y.size * math.log(2.0), abs=1e-8)

    def test_truth_beats_perturbations(self):
        y = simulate_egarch(TRUE, 10_000, np.random.default_rng(5))
        base = egarch_loglik(TRUE, y)
        v = TRUE.vector()
        for k in range(1, 5):
            for step in (-0.1, 0.1):
                w = v.copy()
                w[k] += step
                if k == 2 and abs(w[k]) >= 1:
                    continue
                assert egarch_loglik(EgarchParams(*w), y) < base

    def test_reports_non_finite(self):
        y = np.random.default_rng(0).standard_normal(10)
        with pytest.raises(FloatingPointError, match="t=1"):
            egarch_loglik(EgarchParams(0, 1e308, 0.9, 0, 0, 5), y)

    def test_variance_underflow_is_non_finite_not_a_crash(self):
        # exp(h / 2) underflows to zero; the compiled filter must not divide by it
        y = np.random.default_rng(0).standard_normal(10)
        with pytest.raises(FloatingPointError, match="t=1"):
            egarch_loglik(EgarchParams(0, -1e308, 0.9, 0, 0, 5), y)

    def test_invariants(self):
        with pytest.raises(ValueError):
            EgarchParams(0, 0, 1.0, 0, 0, 5)
        with pytest.raises(ValueError):
            EgarchParams(0, 0, 0.5, 0, 0, 2.0)


class TestFit:
    def test_recovery(self):
        g, xi = [], []
        for seed in range(5):
            p = egarch_fit(simulate_egarch(TRUE, 5000, np.random.default_rng(seed))).params
            g.append(p.gamma)
            xi.append(p.xi)
        assert abs(np.mean(g) - TRUE.gamma) < 0.03
        assert np.mean(np.array(xi) < 0) >= 0.8

    def test_gaussian_input_gives_large_nu(self, rng):
        assert egarch_fit(rng.standard_normal(3000)).params.nu >= 20

    def test_degenerate(self):
        with pytest.raises(ValueError):
            egarch_fit(np.ones(1000))
        with pytest.raises(ValueError):
            egarch_fit(np.arange(10.0))

    def test_next_variance_matches_refilter(self, rng):
        y = simulate_egarch(TRUE, 800, rng)
        fit = egarch_fit(y)
        p = fit.params
        h = math.log(y.var())
        for v in y:
            z = (v - p.mu) / math.exp(h / 2)
            h = p.kappa + p.gamma * h + p.alpha * (abs(z) - expected_abs_t(p.nu)) + p.xi * z
        assert fit.next_log_variance == pytest.approx(h, rel=1e-10)


def test_news_impact_asymmetry():
    assert news_impact(TRUE, 0.0, -2.0) > news_impact(TRUE, 0.0, 2.0)
    flipped = EgarchParams(0, -0.1, 0.95, 0.1, 0.05, 8)
    assert news_impact(flipped, 0.0, -2.0) < news_impact(flipped, 0.0, 2.0)


class TestScaledT:
    def test_moments_and_inverse(self):
        m = ScaledT(0.5, 2.0, 5.0)
        x = m.inverse_cdf(np.random.default_rng(0).uniform(size=200_000))
        assert x.mean() == pytest.approx(0.5, abs=0.02)
        assert x.std() == pytest.approx(2.0, rel=0.03)
        u = np.linspace(0.01, 0.99, 9)
        np.testing.assert_allclose(m.cdf(m.inverse_cdf(u)), u, atol=1e-10)

    def test_shift(self):
        m = ScaledT(0.0, 1.0, 5.0).shifted(3.0)
        assert m.inverse_cdf(0.5) == pytest.approx(3.0)


class TestCorrelation:
    def test_ccc_near_identity_on_independent_columns(self, egarch_panel, rng):
        model = fit_garch_model(egarch_panel, "ccc")
        R = model.correlation.forecast(model.residuals)
        assert np.max(np.abs(R - np.eye(3))) < 0.1
        j = model.joint_forecast(2000, rng)
        assert j.samples.shape == (2000, 3)

    def test_ccc_constant_over_days(self, egarch_panel):
        model = fit_garch_model(egarch_panel, "ccc")
        z = model.residuals
        np.testing.assert_array_equal(model.correlation.forecast(z[:-1]), model.correlation.forecast(z))

    def test_dcc_zero_params_equals_ccc(self, rng):
        z = rng.standard_normal((300, 3))
        qbar = np.corrcoef(z, rowvar=False)
        a = CorrelationModel("ccc", qbar).forecast(z)
        b = CorrelationModel("dcc", qbar, 0.0, 0.0).forecast(z)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_dcc_responds_to_last_shock(self, rng):
        z = rng.standard_normal((300, 2))
        m = CorrelationModel("dcc", np.eye(2), 0.05, 0.9)
        up = m.forecast(np.vstack([z, [[2.0, 2.0]]]))[0, 1]
        down = m.forecast(np.vstack([z, [[2.0, -2.0]]]))[0, 1]
        assert up > down

    def test_dcc_fit_recovers_dynamics(self):
        rng = np.random.default_rng(8)
        a, b, T = 0.05, 0.9, 3000
        Q = np.eye(2)
        qbar = np.array([[1, 0.4], [0.4, 1]])
        z = np.empty((T, 2))
        for t in range(T):
            d = np.sqrt(np.diag(Q))
            R = Q / np.outer(d, d)
            z[t] = np.linalg.cholesky(R) @ rng.standard_normal(2)
            Q = (1 - a - b) * qbar + a * np.outer(z[t], z[t]) + b * Q
        m = dcc_fit(z)
        assert m.a == pytest.approx(a, abs=0.03)
        assert m.b == pytest.approx(b, abs=0.06)
        assert m.a + m.b < 1

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            CorrelationModel("dcc", np.eye(2), 0.5, 0.5)
        with pytest.raises(ValueError):
            CorrelationModel("xcc", np.eye(2))

    def test_joint_forecast_wrapper(self, egarch_panel, rng):
        j = ccc_dcc_joint_forecast(egarch_panel, "dcc", 100, rng)
        assert j.samples.shape == (100, 3)

    def test_short_window(self, rng):
        with pytest.raises(ValueError):
            fit_garch_model(make_panel(rng.standard_normal((400, 2))))

    def test_warm_start_close_to_cold(self, egarch_panel):
        cold = fit_garch_model(egarch_panel, "ccc")
        warm = fit_garch_model(egarch_panel, "ccc", previous=cold, starts=1)
        assert all(w.loglik >= c.loglik - 1e-3 for w, c in zip(warm.fits, cold.fits))


class TestGuard:
    def test_rejects_jumps(self):
        g = MiscalibrationGuard(multiple=10, min_history=3)
        v = np.zeros(3)
        for k in range(6):
            assert g.accept(v + 0.01 * k)
        assert not g.accept(v + 5.0)
        assert g.rejections == 1
        assert g.accept(v + 0.06)

    def test_rejects_non_finite(self):
        g = MiscalibrationGuard()
        assert not g.accept(np.array([np.nan]))

    def test_no_rejection_without_history(self):
        g = MiscalibrationGuard(min_history=5)
        assert g.accept(np.zeros(2)) and g.accept(np.ones(2) * 100)
