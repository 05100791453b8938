"""Neuron model: integration oracles, spike summaries, prior distribution."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.stats import kstest, truncnorm

from goaldesign.models import DomainError, StochasticFHN
from goaldesign.models.base import sample_truncated_normal
from goaldesign.models.fhn import (
    DT,
    GAMMA,
    N_RECORD,
    RECORD_INTERVAL,
    RECORD_START,
    SPIKE_THRESHOLD,
    simulate_potential,
    spike_summaries,
)
from goaldesign.rng import RngStream


def _reference_euler(th0, th1, xi, noise=None):
    """Independent scalar reimplementation of the integration scheme."""
    record_every = int(round(RECORD_INTERVAL / DT))
    first = int(round(RECORD_START / DT))
    n_steps = first + record_every * (N_RECORD - 1)
    u = v = 0.0
    out = []
    for k in range(1, n_steps + 1):
        u_new = u + GAMMA * (u - u**3 / 3.0 + v + xi) * DT
        dv = -(u - th0 + th1 * v) / GAMMA * DT
        if noise is not None:
            dv += noise[k - 1]
        v_new = v + dv
        u, v = u_new, v_new
        if (k - first) % record_every == 0 and k >= first:
            out.append(u)
    return np.array(out)


def test_deterministic_matches_independent_reimplementation():
    th = (0.7, 0.2)
    xi = 0.3
    rec = simulate_potential(np.array([th]), xi, RngStream(0),
                             deterministic=True)[0]
    ref = _reference_euler(*th, xi)
    assert rec.shape == (N_RECORD,)
    np.testing.assert_allclose(rec, ref, atol=1e-10)


def test_stochastic_matches_reimplementation_with_same_noise():
    th = (0.4, 0.4)
    xi = 0.5
    stream = RngStream(3)
    rec = simulate_potential(np.array([th]), xi, stream)[0]
    record_every = int(round(RECORD_INTERVAL / DT))
    n_steps = int(round(RECORD_START / DT)) + record_every * (N_RECORD - 1)
    noise = stream.generator().normal(0.0, 1.0, size=(n_steps, 1))[:, 0] * DT
    ref = _reference_euler(*th, xi, noise=noise)
    np.testing.assert_allclose(rec, ref, atol=1e-10)


def test_steady_state_agrees_with_ode_solver():
    # Non-oscillatory regime: the explicit-Euler trajectory should track a
    # high-accuracy ODE solve closely (oscillatory regimes drift in phase).
    th0, th1, xi = 0.4, 0.4, 0.8
    rec = simulate_potential(np.array([[th0, th1]]), xi, RngStream(0),
                             deterministic=True)[0]

    def f(t, s):
        u, v = s
        return [GAMMA * (u - u**3 / 3.0 + v + xi), -(u - th0 + th1 * v) / GAMMA]

    ts = RECORD_START + RECORD_INTERVAL * np.arange(N_RECORD)
    sol = solve_ivp(f, (0.0, ts[-1]), [0.0, 0.0], t_eval=ts, rtol=1e-10,
                    atol=1e-12, max_step=0.05)
    assert np.max(np.abs(sol.y[0] - rec)) < 5e-2
    # Late-time values agree to first order in the step size.
    assert abs(sol.y[0][-1] - rec[-1]) < 1e-2


def test_spike_summaries_square_wave():
    # 10 samples: runs above threshold at [1,2] and [5,6,7] -> 2 spikes,
    # 5 samples above, interval 0.2 -> duration observed 2.0.
    series = np.array([[0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]])
    out = spike_summaries(series, interval=0.2)
    np.testing.assert_allclose(out, [[2 / 2.0, (5 * 0.2) / 2]])


def test_spike_summaries_edge_cases():
    flat = spike_summaries(np.zeros((1, 8)))
    np.testing.assert_array_equal(flat, [[0.0, 0.0]])
    # Starting above threshold counts the initial run.
    leading = spike_summaries(np.array([[1.0, 1.0, 0.0, 0.0]]), interval=0.2)
    np.testing.assert_allclose(leading, [[1 / 0.8, 0.4]])
    # Threshold is strict: exactly 0.5 does not count.
    np.testing.assert_array_equal(
        spike_summaries(np.full((1, 4), SPIKE_THRESHOLD)), [[0.0, 0.0]])
    with pytest.raises(DomainError):
        spike_summaries(np.zeros((1, 1)))


def test_truncated_normal_prior_distribution():
    n = 4000
    draws = sample_truncated_normal(0.4, 0.3, 0.0, 1.0, RngStream(11), size=n)
    assert np.all((draws >= 0) & (draws <= 1))
    a, b = (0.0 - 0.4) / 0.3, (1.0 - 0.4) / 0.3
    stat = kstest(draws, truncnorm(a, b, loc=0.4, scale=0.3).cdf).statistic
    assert stat < 0.02


def test_model_interface():
    model = StochasticFHN(qoi="theta")
    thetas = model.sample_prior(RngStream(0), 30)
    assert thetas.shape == (30, 2)
    assert np.all((thetas >= 0) & (thetas <= 1))
    ys = model.simulate(thetas[:3], np.array([0.4]), RngStream(1))
    assert ys.shape == (3, N_RECORD)
    assert model.summarize(ys).shape == (3, 2)
    np.testing.assert_array_equal(model.predict(thetas, RngStream(2)), thetas)

    spike = StochasticFHN(qoi="spike_rate")
    assert spike.stochastic_qoi is True
    zs = spike.predict(thetas[:3], RngStream(3))
    assert zs.shape == (3, 1)
    assert np.all(zs >= 0)
