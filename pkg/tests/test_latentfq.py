import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fqcast.backtest import SyntheticSpec, generate_synthetic
from fqcast.distbuild import build, ks_distance, ks_two_sample
from fqcast.latentfq import (
    asymptotic_law,
    exogenous_fq_marginals,
    fq_ab_marginals,
    fq_al_marginals,
    fq_al_nodes,
    pca,
    psd_repair,
    select_m,
)
from fqcast.qreg import Q9, QuantileFitSet, fit_partition, predict_nodes
from fqcast.timeseries import Panel, demean


def make_panel(values):
    values = np.asarray(values, dtype=float)
    start = dt.date(2010, 1, 1)
    dates = tuple(start + dt.timedelta(days=i) for i in range(values.shape[0]))
    return Panel(dates, tuple(f"v{i}" for i in range(values.shape[1])), values)


@pytest.fixture(scope="module")
def one_factor():
    return generate_synthetic(SyntheticSpec("factor_gaussian", n=8, T=250, seed=3))


class TestPCA:
    def test_diagonal(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal((20_000, 2))
        z = (z - z.mean(0)) / z.std(0, ddof=1)
        # whiten exactly then rescale so the sample covariance is diag(2, 1)
        L = np.linalg.cholesky(np.cov(z, rowvar=False))
        z = z @ np.linalg.inv(L).T @ np.diag([np.sqrt(2), 1.0])
        b = pca(z)
        np.testing.assert_allclose(b.eigenvalues, [2, 1], atol=1e-10)
        np.testing.assert_allclose(np.abs(b.eigenvectors), np.eye(2), atol=1e-8)

    def test_invariants(self, rng):
        x = rng.standard_normal((300, 5)) @ rng.standard_normal((5, 5))
        b = pca(x)
        W = b.eigenvectors
        np.testing.assert_allclose(W.T @ W, np.eye(5), atol=1e-10)
        assert np.all(np.diff(b.eigenvalues) <= 0) and b.eigenvalues[-1] >= 0
        assert b.eigenvalues.sum() == pytest.approx(np.trace(np.cov(x, rowvar=False)), abs=1e-8)
        assert np.all(W[np.argmax(np.abs(W), axis=0), np.arange(5)] > 0)
        y = x[7] - b.means
        np.testing.assert_allclose(W @ (W.T @ y), y, atol=1e-10)
        np.testing.assert_allclose(b.reconstruct(b.components(x - b.means)), x - b.means, atol=1e-10)

    def test_identity_ties_keep_column_order(self):
        x = np.vstack([np.eye(3), -np.eye(3)]) * np.sqrt(5 / 2)
        b = pca(x)
        np.testing.assert_allclose(b.eigenvalues, [1, 1, 1], atol=1e-12)
        np.testing.assert_allclose(b.eigenvectors.T @ b.eigenvectors, np.eye(3), atol=1e-12)

    def test_one_factor_share(self):
        p = generate_synthetic(SyntheticSpec("factor_gaussian", n=8, T=2500, seed=0))
        b = pca(p)
        assert 0.85 <= b.variance_explained[0] <= 0.95
        assert select_m(b, 0.9) == 1

    def test_errors(self, rng):
        with pytest.raises(ValueError, match="T >= n"):
            pca(rng.standard_normal((3, 5)))
        x = rng.standard_normal((50, 3))
        x[:, 1] = 4.0
        with pytest.raises(ValueError, match="zero variance"):
            pca(x)


class TestSelectM:
    def basis(self, lam):
        from fqcast.latentfq import FactorBasis

        n = len(lam)
        return FactorBasis(np.eye(n), np.asarray(lam, float), np.zeros(n))

    def test_examples(self):
        assert select_m(self.basis([2, 1, 1]), 0.5) == 1
        assert select_m(self.basis([2, 1, 1]), 1.0) == 3
        assert select_m(self.basis([2, 1, 1]), 0.75) == 2

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            select_m(self.basis([1, 1]), 0.0)


class TestFQAL:
    def test_noise_component_gives_empirical_quantiles(self):
        # T large enough for the 0.001 node to be estimated from ~10 points
        rng = np.random.default_rng(4)
        f = rng.standard_normal((10_000, 1))
        x = f @ np.ones((1, 4)) + 0.05 * rng.standard_normal((10_000, 4))
        p = make_panel(x)
        nodes = fq_al_nodes(p, 3)
        emp = np.quantile(x, Q9.array, axis=0, method="inverted_cdf").T
        iqr = np.subtract(*np.percentile(x, [75, 25], axis=0))
        assert np.all(np.abs(nodes - emp) < 0.1 * iqr[:, None])

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_iid_median(self, m):
        T = 2000
        p = make_panel(np.random.default_rng(m).standard_normal((T, 4)))
        for d in fq_al_marginals(p, m):
            assert abs(d.inverse_cdf(0.5)) < 3 / np.sqrt(T)

    def test_m_bounds(self, one_factor):
        with pytest.raises(ValueError):
            fq_al_marginals(one_factor, 8)
        with pytest.raises(ValueError):
            fq_al_marginals(one_factor, 0)

    def test_degenerate_column(self, rng):
        x = rng.standard_normal((100, 3))
        x[:, 2] = 1.0
        with pytest.raises(ValueError):
            fq_al_marginals(make_panel(x), 1)

    def test_location_equivariance(self, one_factor):
        shifted = one_factor.values.copy()
        shifted[:, 2] += 3.0
        a = fq_al_nodes(one_factor, 1)
        b = fq_al_nodes(make_panel(shifted), 1)
        np.testing.assert_allclose(b[2], a[2] + 3.0, atol=1e-10)
        np.testing.assert_allclose(np.delete(b, 2, 0), np.delete(a, 2, 0), atol=1e-10)


class TestAsymptoticLaw:
    def fitset(self, coef):
        coef = np.asarray(coef, float)
        n, q, m = coef.shape
        return QuantileFitSet(Q9 if q == 9 else None, np.tile(np.linspace(-1, 1, q), (n, 1)), coef)

    def basis(self, lam):
        from fqcast.latentfq import FactorBasis

        return FactorBasis(np.eye(len(lam)), np.asarray(lam, float), np.zeros(len(lam)))

    def test_zero_slopes(self):
        laws = asymptotic_law(self.fitset(np.zeros((2, 9, 1))), self.basis([3.0, 1.0]), 1)
        assert np.all(laws[0].cov == 0)
        draws = laws[0].draw(5, np.random.default_rng(0))
        np.testing.assert_allclose(draws, np.tile(laws[0].mean, (5, 1)))

    def test_rank_one(self):
        b, lam, T = 0.7, 2.5, 250
        laws = asymptotic_law(self.fitset(np.full((1, 9, 1), b)), self.basis([lam, 1.0]), 1, scale=1 / T)
        np.testing.assert_allclose(laws[0].cov, b**2 * lam / T * np.ones((9, 9)))

    def test_one_factor_entries_positive(self, one_factor):
        c, _ = demean(one_factor)
        basis = pca(c)
        fit = fit_partition(basis.components(c.values)[:, :1], c.values, Q9)
        for law in asymptotic_law(fit, basis, 1):
            assert np.all(law.cov > 0)

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            asymptotic_law(self.fitset(np.zeros((1, 9, 2))), self.basis([1.0, 1.0]), 1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_psd_repair(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((6, 6))
        fixed, repaired = psd_repair(a + a.T)
        assert np.allclose(fixed, fixed.T)
        assert np.linalg.eigvalsh(fixed).min() >= -1e-10
        good = a @ a.T
        same, flag = psd_repair(good)
        assert not flag and np.allclose(same, good)


class TestFQAB:
    def test_degenerate_law_equals_point_build(self, one_factor):
        rng = np.random.default_rng(9)
        (bm, *_) = fq_ab_marginals(one_factor, 1, N=500, B=1, rng=rng, omega_scale=0.0)
        c, means = demean(one_factor)
        basis = pca(c)
        fit = fit_partition(basis.components(c.values)[:, :1], c.values, Q9)
        nodes = np.sort(predict_nodes(fit, [0.0])[0]) + means[0]
        ref = build(Q9.array, nodes)
        rng = np.random.default_rng(9)
        rng.standard_normal((1, 9))  # consumed by the node draw
        u = rng.random((1, 500))
        np.testing.assert_allclose(bm.samples, np.sort(ref.inverse_cdf(u[0])), atol=1e-12)

    def test_pooled_density_integrates_to_one(self, one_factor):
        from scipy import integrate

        bm = fq_ab_marginals(one_factor, 1, N=50, B=7, rng=np.random.default_rng(2))[0]
        lo = min(c.support[0] for c in bm.components)
        hi = max(c.support[1] for c in bm.components)
        pts = np.unique(np.concatenate([c.values for c in bm.components]))
        edges = np.r_[lo, pts[(pts > lo) & (pts < hi)], hi]
        total = sum(integrate.quad(bm.pdf, a, b, limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_bagging_stability(self):
        # At the sampling scale of the node covariance (divided by T) the
        # between-bag location noise is ~3% of the conditional sd, so single
        # seed pairs scatter around the bound; the average is well inside it.
        p = generate_synthetic(SyntheticSpec("factor_gaussian", n=8, T=250, seed=0))
        ks = []
        for s in range(10):
            a = fq_ab_marginals(p, 1, N=1000, B=50, rng=np.random.default_rng(100 + 2 * s), per_T=True)
            b = fq_ab_marginals(p, 1, N=1000, B=50, rng=np.random.default_rng(101 + 2 * s), per_T=True)
            ks += [ks_two_sample(x.samples, y.samples)[0] for x, y in zip(a, b)]
        assert np.mean(ks) < 0.03
        assert np.median(ks) < 0.03

    def test_bagging_noise_vanishes_without_node_uncertainty(self, one_factor):
        a = fq_ab_marginals(one_factor, 1, N=1000, B=50, rng=np.random.default_rng(1), omega_scale=0.0)
        b = fq_ab_marginals(one_factor, 1, N=1000, B=50, rng=np.random.default_rng(2), omega_scale=0.0)
        for x, y in zip(a, b):
            assert ks_two_sample(x.samples, y.samples)[0] < 0.03

    def test_shrinking_omega_converges(self, one_factor):
        point = build(Q9.array, np.sort(fq_ab_marginals(one_factor, 1, N=1, B=1, rng=np.random.default_rng(0), omega_scale=0.0)[0].node_draws[0]))
        d = []
        for s in (1.0, 0.1, 0.01):
            bm = fq_ab_marginals(one_factor, 1, N=400, B=50, rng=np.random.default_rng(5), omega_scale=s)[0]
            d.append(ks_distance(bm, point))
        assert d[0] > d[1] > d[2]

    def test_location_equivariance(self, one_factor):
        shifted = one_factor.values.copy()
        shifted[:, 0] += 2.5
        a = fq_ab_marginals(one_factor, 1, N=30, B=5, rng=np.random.default_rng(3))
        b = fq_ab_marginals(make_panel(shifted), 1, N=30, B=5, rng=np.random.default_rng(3))
        # exact up to rounding in the demeaning step
        np.testing.assert_allclose(b[0].samples, a[0].samples + 2.5, atol=1e-6)
        np.testing.assert_allclose(b[1].samples, a[1].samples, atol=1e-6)

    def test_mixture_variance(self, one_factor):
        bm = fq_ab_marginals(one_factor, 1, N=400, B=40, rng=np.random.default_rng(6))[3]
        rng = np.random.default_rng(7)
        within = np.mean([np.var(c.sample(4000, rng)) for c in bm.components])
        assert np.var(bm.samples) >= within * 0.98

    def test_argument_checks(self, one_factor):
        with pytest.raises(ValueError):
            fq_ab_marginals(one_factor, 0)
        with pytest.raises(ValueError):
            fq_ab_marginals(one_factor, 1, N=0)

    def test_deterministic(self, one_factor):
        a = fq_ab_marginals(one_factor, 2, N=20, B=4, rng=np.random.default_rng(8))
        b = fq_ab_marginals(one_factor, 2, N=20, B=4, rng=np.random.default_rng(8))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.samples, y.samples)


class TestExogenous:
    def test_matches_latent_pipeline(self, one_factor):
        c, means = demean(one_factor)
        basis = pca(c)
        scores = basis.components(c.values)[:, :2]
        fit = fit_partition(scores, c.values, Q9)
        X = Panel(one_factor.dates, ("p1", "p2"), scores)
        margs = exogenous_fq_marginals(c, X, Q9)
        for k, d in enumerate(margs):
            np.testing.assert_allclose(d.inverse_cdf(Q9.array), np.sort(predict_nodes(fit, [0, 0])[k]), atol=1e-12)
        assert len(margs[0].nodes) == 9

    def test_quadratic_factor(self):
        rng = np.random.default_rng(21)
        z = rng.standard_normal(4000)
        y = 2 * z + z**2 + 0.5 * rng.standard_normal(4000)
        Y = make_panel(y[:, None])
        X = make_panel(np.column_stack([z, z**2]))
        for zs in (-1.0, 0.0, 1.5):
            d = exogenous_fq_marginals(Y, X, Q9, x_star=[zs, zs**2])[0]
            assert d.inverse_cdf(0.5) == pytest.approx(2 * zs + zs**2, abs=0.08)

    def test_alignment(self, one_factor):
        X = make_panel(np.ones((one_factor.T - 1, 1)))
        with pytest.raises(ValueError, match="aligned"):
            exogenous_fq_marginals(one_factor, X)
