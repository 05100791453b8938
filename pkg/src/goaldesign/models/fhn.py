"""Stochastic FitzHugh-Nagumo neuron model.

Euler-Maruyama integration of

    du/dt = gamma (u - u^3/3 + v + xi)
    dv/dt = -(1/gamma)(u - theta0 + theta1 v) + dB/dt

with gamma = 3.0 and u(0) = v(0) = 0.  The perturbation dB/dt is sampled
once per integration step as a standard normal and enters the explicit Euler
update scaled by the step size, giving an effective diffusion of sqrt(dt)
(about 0.1).  This keeps the excitation-block transition near xi = 0.8
visible: with a unit-diffusion Wiener process the noise swamps the
parameter dependence of the spike statistics entirely.
The design xi is the applied membrane current.  The membrane potential u is
recorded at t in [0.1, 200] every 0.2 (1000 points) and reduced to two
summary statistics, spike rate and mean spike duration, with a spike
threshold of 0.5.
"""

from __future__ import annotations

import numpy as np

from ..rng import RngStream
from .base import DomainError, ImplicitModel, SimulationError, sample_truncated_normal

__all__ = ["StochasticFHN", "simulate_potential", "spike_summaries"]

GAMMA = 3.0
DT = 0.01  # internal integration step; recording every 20th step
RECORD_START = 0.1
RECORD_INTERVAL = 0.2
N_RECORD = 1000
SPIKE_THRESHOLD = 0.5


def simulate_potential(thetas: np.ndarray, xi: float, rng: RngStream,
                       deterministic: bool = False) -> np.ndarray:
    """Integrate the FHN system, returning recorded u, shape (n, 1000)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    th0, th1 = thetas[:, 0], thetas[:, 1]
    n = len(thetas)
    record_every = int(round(RECORD_INTERVAL / DT))
    first_record = int(round(RECORD_START / DT))
    n_steps = first_record + record_every * (N_RECORD - 1)
    u = np.zeros(n)
    v = np.zeros(n)
    out = np.empty((n, N_RECORD))
    gen = None if deterministic else rng.generator()
    next_record = first_record
    slot = 0
    for k in range(1, n_steps + 1):
        du = GAMMA * (u - u**3 / 3.0 + v + xi) * DT
        dv = -(u - th0 + th1 * v) / GAMMA * DT
        if not deterministic:
            dv = dv + gen.normal(0.0, 1.0, size=n) * DT
        u = u + du
        v = v + dv
        if k == next_record:
            if not np.all(np.isfinite(u)):
                raise SimulationError(
                    f"FHN state blew up near t={k * DT:.2f}", time=k * DT
                )
            out[:, slot] = u
            slot += 1
            next_record += record_every
    return out


def spike_summaries(series: np.ndarray, interval: float = RECORD_INTERVAL) -> np.ndarray:
    """(spike_rate, mean_spike_duration) per series, shape (n, 2).

    A spike is a maximal contiguous run of samples above the 0.5 threshold;
    a series starting above threshold counts its initial run as a spike.
    The rate divides the run count by the observed duration n * interval.
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if series.shape[1] < 2:
        raise DomainError("series must have at least 2 samples")
    above = series > SPIKE_THRESHOLD
    starts = above & ~np.concatenate(
        [np.zeros((len(series), 1), dtype=bool), above[:, :-1]], axis=1
    )
    n_spikes = starts.sum(axis=1)
    duration_observed = series.shape[1] * interval
    rate = n_spikes / duration_observed
    time_above = above.sum(axis=1) * interval
    with np.errstate(invalid="ignore"):
        mean_duration = np.where(n_spikes > 0, time_above / np.maximum(n_spikes, 1), 0.0)
    return np.stack([rate, mean_duration], axis=1)


class StochasticFHN(ImplicitModel):
    """FHN model observed through u(t) spike summaries, design xi in [0, 0.8].

    Priors: theta0 ~ TruncNormal(0.4, 0.3^2), theta1 ~ TruncNormal(0.4, 0.4^2),
    both on [0, 1].  QoI "theta" is the identity; "spike_rate" reruns the
    simulator at a fixed current of 0.2 and returns the spike rate.
    """

    n_theta = 2
    n_y = N_RECORD
    n_summary = 2
    n_xi = 1
    QOI_CURRENT = 0.2

    def __init__(self, qoi: str = "theta", deterministic: bool = False):
        if qoi not in ("theta", "spike_rate"):
            raise ValueError(f"unknown qoi {qoi!r}")
        self.qoi = qoi
        self.n_z = 2 if qoi == "theta" else 1
        self.deterministic = deterministic
        self.stochastic_qoi = qoi != "theta"
        self.name = "fhn"

    def sample_prior(self, rng: RngStream, n: int) -> np.ndarray:
        th0 = sample_truncated_normal(0.4, 0.3, 0.0, 1.0, rng.child(0), size=n)
        th1 = sample_truncated_normal(0.4, 0.4, 0.0, 1.0, rng.child(1), size=n)
        return np.stack([th0, th1], axis=1)

    def prior_support(self):
        return np.zeros(2), np.ones(2)

    def design_bounds(self) -> np.ndarray:
        return np.array([[0.0, 0.8]])

    def simulate(self, thetas, xi, rng: RngStream) -> np.ndarray:
        xi = self.validate_design(xi)
        return simulate_potential(thetas, float(xi[0]), rng,
                                  deterministic=self.deterministic)

    def predict(self, thetas, rng: RngStream) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.qoi == "theta":
            return thetas.copy()
        series = simulate_potential(thetas, self.QOI_CURRENT, rng,
                                    deterministic=self.deterministic)
        return spike_summaries(series)[:, :1]

    def summarize(self, ys: np.ndarray) -> np.ndarray:
        return spike_summaries(ys)
