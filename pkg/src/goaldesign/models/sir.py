"""Stochastic SIR epidemic model with binomial chain dynamics.

Discrete-time chain on integer states (S, I, R) with fixed step dt = 0.01
from (490, 10, 0): per step, new infections DeltaS ~ Bin(S, beta I / N) and
new recoveries DeltaI ~ Bin(I, gamma).  Note the transition probabilities
are per-step quantities, so beta and gamma are tied to dt = 0.01.
Observation at design xi = t is the (S, I, R) triple at the nearest grid
point; several QoI families are available.
"""

from __future__ import annotations

import numpy as np

from ..rng import RngStream
from .base import DomainError, ImplicitModel

__all__ = ["StochasticSIR", "simulate_chain", "observe", "recovered_sum", "incidence"]

DT = 0.01
POPULATION = 500
INIT_STATE = (490, 10, 0)
RECOVERED_SUM_TIMES = (0.3, 0.4, 0.5)


def simulate_chain(thetas: np.ndarray, t_end: float, rng: RngStream,
                   deterministic: bool = False) -> np.ndarray:
    """Simulate (n, 3, n_steps+1) trajectories on the dt grid up to t_end.

    ``deterministic=True`` replaces binomial draws by their expectations
    (float-valued states); used only by oracle tests.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if np.any(thetas < 0) or np.any(thetas > 0.5):
        raise DomainError("SIR rates must lie in [0, 0.5]")
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    beta, gamma = thetas[:, 0], thetas[:, 1]
    n = len(thetas)
    n_steps = int(round(t_end / DT))
    dtype = float if deterministic else np.int64
    traj = np.empty((n, 3, n_steps + 1), dtype=dtype)
    s = np.full(n, INIT_STATE[0], dtype=dtype)
    i = np.full(n, INIT_STATE[1], dtype=dtype)
    r = np.full(n, INIT_STATE[2], dtype=dtype)
    traj[:, 0, 0], traj[:, 1, 0], traj[:, 2, 0] = s, i, r
    gen = None if deterministic else rng.generator()
    for k in range(1, n_steps + 1):
        p_inf = beta * i / POPULATION
        if deterministic:
            ds = s * p_inf
            di = i * gamma
        else:
            ds = gen.binomial(s, p_inf)
            di = gen.binomial(i, gamma)
        s = s - ds
        i = i + ds - di
        r = r + di
        traj[:, 0, k], traj[:, 1, k], traj[:, 2, k] = s, i, r
    return traj


def observe(traj: np.ndarray, t: float) -> np.ndarray:
    """(S, I, R) at the grid point nearest t, shape (n, 3)."""
    n_steps = traj.shape[2] - 1
    if t < 0 or t > n_steps * DT + DT / 2:
        raise DomainError(f"observation time {t} outside simulated horizon")
    k = min(int(round(t / DT)), n_steps)
    return traj[:, :, k].astype(float)


def recovered_sum(traj: np.ndarray) -> np.ndarray:
    """R(0.3) + R(0.4) + R(0.5) per trajectory."""
    return sum(observe(traj, t)[:, 2] for t in RECOVERED_SUM_TIMES)


def incidence(traj: np.ndarray, beta: np.ndarray, t0: float) -> np.ndarray:
    """Nonlinear incidence rate beta * I(t0) * S(t0) per trajectory."""
    state = observe(traj, t0)
    return np.asarray(beta, dtype=float) * state[:, 1] * state[:, 0]


class StochasticSIR(ImplicitModel):
    """SIR model observed as (S, I, R) at a single design time xi in [0, 3].

    QoI families: "theta" (z = (beta, gamma)), "recovered_sum"
    (z = R(0.3) + R(0.4) + R(0.5)), and "incidence" (z = beta I(t0) S(t0)
    at a configurable t0).  The stochastic QoIs rerun the chain with their
    own noise, matching z = H(theta, noise).
    """

    n_theta = 2
    n_y = 3
    n_summary = 3
    n_xi = 1

    def __init__(self, qoi: str = "theta", incidence_t0: float = 0.1,
                 deterministic: bool = False):
        if qoi not in ("theta", "recovered_sum", "incidence"):
            raise ValueError(f"unknown qoi {qoi!r}")
        if incidence_t0 < 0:
            raise DomainError("incidence_t0 must be nonnegative")
        self.qoi = qoi
        self.incidence_t0 = float(incidence_t0)
        self.n_z = 2 if qoi == "theta" else 1
        self.deterministic = deterministic
        self.stochastic_qoi = qoi != "theta"
        self.name = "sir"

    def sample_prior(self, rng: RngStream, n: int) -> np.ndarray:
        return rng.generator().uniform(0.0, 0.5, size=(n, 2))

    def prior_support(self):
        return np.zeros(2), np.full(2, 0.5)

    def design_bounds(self) -> np.ndarray:
        return np.array([[0.0, 3.0]])

    def simulate(self, thetas, xi, rng: RngStream) -> np.ndarray:
        xi = self.validate_design(xi)
        t_end = max(float(xi[0]), DT)
        traj = simulate_chain(thetas, t_end, rng, deterministic=self.deterministic)
        return observe(traj, float(xi[0]))

    def predict(self, thetas, rng: RngStream) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.qoi == "theta":
            return thetas.copy()
        if self.qoi == "recovered_sum":
            horizon = max(RECOVERED_SUM_TIMES)
            traj = simulate_chain(thetas, horizon, rng, deterministic=self.deterministic)
            return recovered_sum(traj)[:, None]
        horizon = max(self.incidence_t0, DT)
        traj = simulate_chain(thetas, horizon, rng, deterministic=self.deterministic)
        return incidence(traj, thetas[:, 0], self.incidence_t0)[:, None]

    def summarize(self, ys: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(ys, dtype=float))
