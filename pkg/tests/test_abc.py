"""Rejection ABC against the conjugate-Gaussian analytic posterior."""

import numpy as np
import pytest
from scipy.stats import wasserstein_distance

from goaldesign.abc import (
    AbcConfig,
    CandidatePool,
    abc_reject,
    build_pool,
    condition,
    cv_select_threshold,
    error_table_rows,
    regression_adjust,
    scaled_distances,
)
from goaldesign.models import Nonlinear1D
from goaldesign.models.base import DomainError, ImplicitModel
from goaldesign.rng import RngStream


class ConjugateGaussian(ImplicitModel):
    """theta ~ N(0, 1), y | theta ~ N(theta, 0.1^2): analytic posterior."""

    name = "conjugate"
    n_theta = 1
    n_y = 1
    n_z = 1
    n_summary = 1
    n_xi = 1
    obs_sd = 0.1

    def sample_prior(self, rng, n):
        return rng.generator().normal(0.0, 1.0, size=(n, 1))

    def simulate(self, thetas, xi, rng):
        thetas = np.atleast_2d(thetas)
        return thetas + rng.generator().normal(0.0, self.obs_sd, thetas.shape)

    def predict(self, thetas, rng):
        return np.atleast_2d(thetas).copy()

    def summarize(self, ys):
        return np.atleast_2d(ys)

    def design_bounds(self):
        return np.array([[0.0, 1.0]])

    def posterior(self, y_obs):
        var = 1.0 / (1.0 + 1.0 / self.obs_sd**2)
        return var * y_obs / self.obs_sd**2, np.sqrt(var)


@pytest.fixture(scope="module")
def gaussian_pool():
    model = ConjugateGaussian()
    return model, build_pool(model, np.array([0.5]), 20000, "observation",
                             RngStream(0))


def _uniform_pool(n=500, seed=1, d_theta=1, d_summary=1):
    gen = RngStream(seed).generator()
    thetas = gen.uniform(0, 1, size=(n, d_theta))
    summaries = thetas[:, :d_summary] + gen.normal(0, 0.05, (n, d_summary))
    scale = np.maximum(summaries.std(axis=0), 1e-12)
    return CandidatePool(thetas=thetas, summaries=summaries,
                         design=np.zeros(1), summary_scale=scale)


def test_config_validation():
    with pytest.raises(ValueError):
        AbcConfig(epsilon=-0.1)
    with pytest.raises(ValueError):
        AbcConfig(adjustment="quadratic")
    with pytest.raises(ValueError):
        AbcConfig(n_pool=10, min_accept=20)
    with pytest.raises(ValueError):
        AbcConfig(adjustment="mlp", mlp_steps=0)


def test_accepted_samples_satisfy_threshold():
    pool = _uniform_pool()
    s_obs = np.array([0.5])
    post = abc_reject(pool, s_obs, epsilon=0.4, min_accept=1)
    d = scaled_distances(pool, s_obs)
    assert np.array_equal(np.sort(post.accepted_idx), np.flatnonzero(d < 0.4))
    assert not post.fallback


def test_acceptance_monotone_in_epsilon():
    pool = _uniform_pool()
    s_obs = np.array([0.5])
    counts = [len(abc_reject(pool, s_obs, eps, min_accept=1))
              for eps in (0.05, 0.1, 0.3, 0.6, 1.2)]
    assert counts == sorted(counts)


def test_nearest_k_fallback_records_effective_epsilon():
    pool = _uniform_pool()
    s_obs = np.array([0.5])
    post = abc_reject(pool, s_obs, epsilon=1e-6, min_accept=30)
    assert post.fallback and len(post) == 30
    d = scaled_distances(pool, s_obs)
    nearest = np.sort(d)[:30]
    assert np.array_equal(np.sort(d[post.accepted_idx]), nearest)
    assert post.epsilon_used >= nearest[-1]


def test_exclude_index_never_accepted():
    pool = _uniform_pool()
    post = abc_reject(pool, pool.summaries[7], epsilon=0.5, min_accept=10,
                      exclude=7)
    assert 7 not in post.accepted_idx


def test_posterior_matches_conjugate_analytic(gaussian_pool):
    model, pool = gaussian_pool
    y_obs = 0.8
    mu, sd = model.posterior(y_obs)
    cfg = AbcConfig(epsilon=0.05, n_pool=len(pool), min_accept=100,
                    adjustment="linear")
    post = condition(pool, np.array([y_obs]), cfg, rng=RngStream(5))
    assert abs(post.thetas.mean() - mu) < 0.03
    assert abs(post.thetas.std() - sd) < 0.03


def test_wasserstein_convergence_in_epsilon(gaussian_pool):
    model, pool = gaussian_pool
    y_obs = 0.4
    mu, sd = model.posterior(y_obs)
    exact = RngStream(9).generator().normal(mu, sd, size=20000)
    dists = []
    for eps in (1.0, 0.4, 0.1):
        post = abc_reject(pool, np.array([y_obs]), eps, min_accept=50)
        dists.append(wasserstein_distance(post.thetas[:, 0], exact))
    assert dists[0] > dists[1] > dists[2]
    assert dists[2] < 0.05


def test_adjustment_identity_when_summaries_constant():
    gen = RngStream(2).generator()
    thetas = gen.uniform(0, 1, size=(40, 1))
    summaries = np.full((40, 1), 0.3)
    pool = CandidatePool(thetas=thetas, summaries=summaries,
                         design=np.zeros(1), summary_scale=np.ones(1))
    post = abc_reject(pool, np.array([0.3]), epsilon=0.5, min_accept=1)
    adj = regression_adjust(post, summaries, np.array([0.3]), "linear")
    # Constant regressors are rank-deficient: adjustment must fall back
    # rather than corrupt the samples.
    assert adj.adjustment_failed
    np.testing.assert_array_equal(adj.thetas, post.thetas)


def test_adjustment_exact_on_linear_relation():
    # theta exactly linear in the summary: adjusted samples collapse to the
    # regression value at s_obs (residuals are zero).
    gen = RngStream(3).generator()
    s = gen.uniform(0, 1, size=(60, 1))
    thetas = 2.0 * s + 0.25
    pool = CandidatePool(thetas=thetas, summaries=s, design=np.zeros(1),
                         summary_scale=np.ones(1))
    post = abc_reject(pool, np.array([0.5]), epsilon=10.0, min_accept=1)
    adj = regression_adjust(post, s[post.accepted_idx], np.array([0.5]),
                            "linear")
    np.testing.assert_allclose(adj.thetas, 2.0 * 0.5 + 0.25, atol=1e-6)


def test_adjustment_improves_posterior_mean(gaussian_pool):
    model, pool = gaussian_pool
    cfg_raw = AbcConfig(epsilon=0.5, n_pool=len(pool), min_accept=50,
                        adjustment="none")
    cfg_adj = AbcConfig(epsilon=0.5, n_pool=len(pool), min_accept=50,
                        adjustment="linear")
    gen = RngStream(7).generator()
    wins = 0
    for trial in range(50):
        y_obs = gen.normal(0.0, 1.0)
        mu, _ = model.posterior(y_obs)
        raw = condition(pool, np.array([y_obs]), cfg_raw)
        adj = condition(pool, np.array([y_obs]), cfg_adj,
                        rng=RngStream(100 + trial))
        if abs(adj.thetas.mean() - mu) < abs(raw.thetas.mean() - mu):
            wins += 1
    assert wins >= 40


def test_adjustment_respects_prior_support():
    pool = _uniform_pool(n=300, seed=4)
    cfg = AbcConfig(epsilon=0.3, n_pool=300, min_accept=50, adjustment="linear")
    post = condition(pool, np.array([0.99]), cfg,
                     support=(np.zeros(1), np.ones(1)))
    assert np.all((post.thetas >= 0) & (post.thetas <= 1))


def test_mlp_adjustment_runs_and_improves_over_nothing(gaussian_pool):
    model, pool = gaussian_pool
    y_obs = 0.6
    mu, _ = model.posterior(y_obs)
    cfg = AbcConfig(epsilon=0.5, n_pool=len(pool), min_accept=100,
                    adjustment="mlp")
    raw = abc_reject(pool, np.array([y_obs]), 0.5, min_accept=100)
    adj = condition(pool, np.array([y_obs]), cfg, rng=RngStream(21))
    assert adj.adjusted
    assert abs(adj.thetas.mean() - mu) < abs(raw.thetas.mean() - mu)


def test_cv_select_threshold_table_shape_and_choice():
    model = Nonlinear1D()
    pool = build_pool(model, np.array([0.5]), 2000, "observation", RngStream(8))
    eps_star, table = cv_select_threshold(pool, [0.1, 0.3, 0.5], n_holdout=40,
                                          mode="linear", rng=RngStream(9))
    assert eps_star in (0.1, 0.3, 0.5)
    assert len(table) == 3  # three thresholds x one parameter
    csv_text = error_table_rows(table)
    assert csv_text.splitlines()[0] == "epsilon,param_index,median_abs_error"
    assert len(csv_text.splitlines()) == 4
    with pytest.raises(ValueError):
        cv_select_threshold(pool, [], n_holdout=10, mode="linear",
                            rng=RngStream(0))
    with pytest.raises(ValueError):
        cv_select_threshold(pool, [-0.1], n_holdout=10, mode="linear",
                            rng=RngStream(0))


def test_build_pool_validation():
    model = Nonlinear1D()
    with pytest.raises(DomainError):
        build_pool(model, np.array([0.5]), 0, "observation", RngStream(0))
    with pytest.raises(ValueError):
        build_pool(model, np.array([0.5]), 10, "latent", RngStream(0))
    pool = build_pool(model, np.array([0.5]), 64, "qoi", RngStream(1))
    assert pool.summaries.shape == (64, 1)
