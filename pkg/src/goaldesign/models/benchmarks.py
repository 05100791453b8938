"""Nonlinear Gaussian-noise benchmark models.

These benchmarks have tractable likelihoods (observation = deterministic
response + Normal(0, 1e-4) noise), which makes them usable both as implicit
models for the ratio-based estimators and as explicit models for nested
Monte Carlo cross-checks.
"""

from __future__ import annotations

import numpy as np

from ..rng import RngStream
from .base import DomainError, ImplicitModel

__all__ = [
    "NOISE_SD",
    "rosenbrock",
    "Nonlinear1D",
    "Nonlinear2D",
    "NonlinearND",
]

NOISE_SD = 1e-2  # observation noise standard deviation (variance 1e-4)


def rosenbrock(thetas: np.ndarray) -> np.ndarray:
    """Rosenbrock QoI, shape (n,).

    For two parameters this is the classic (1-t1)^2 + 5(t2-t1^2)^2; for
    general dimension it is the symmetrized sum
    sum_i (1-t_i)^2 + sum_{j != i} 5 (t_j - t_i^2)^2.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    n, d = thetas.shape
    if d == 1:
        return (1.0 - thetas[:, 0]) ** 2
    if d == 2:
        t1, t2 = thetas[:, 0], thetas[:, 1]
        return (1.0 - t1) ** 2 + 5.0 * (t2 - t1**2) ** 2
    total = np.sum((1.0 - thetas) ** 2, axis=1)
    # pairwise cross terms 5 (t_j - t_i^2)^2 over j != i
    sq = thetas**2
    for i in range(d):
        diff = thetas - sq[:, i : i + 1]
        total += 5.0 * (np.sum(diff**2, axis=1) - diff[:, i] ** 2)
    return total


class _GaussianBenchmark(ImplicitModel):
    """Shared machinery: uniform prior on [0,1]^d, additive Gaussian noise."""

    noise_sd = NOISE_SD

    def sample_prior(self, rng: RngStream, n: int) -> np.ndarray:
        return rng.generator().uniform(0.0, 1.0, size=(n, self.n_theta))

    def prior_support(self):
        return np.zeros(self.n_theta), np.ones(self.n_theta)

    def simulate(self, thetas, xi, rng: RngStream) -> np.ndarray:
        xi = self.validate_design(xi)
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        mean = self.mean_response(thetas, xi)
        if self.deterministic:
            return mean
        eps = rng.generator().normal(0.0, self.noise_sd, size=mean.shape)
        return mean + eps

    def summarize(self, ys: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(ys, dtype=float))

    def design_bounds(self) -> np.ndarray:
        return np.tile([0.0, 1.0], (self.n_xi, 1))

    def log_likelihood(self, ys, thetas, xi) -> np.ndarray:
        xi = self.validate_design(xi)
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        mean = self.mean_response(thetas, xi)
        resid = (ys - mean) / self.noise_sd
        const = -0.5 * np.log(2.0 * np.pi * self.noise_sd**2)
        return np.sum(const - 0.5 * resid**2, axis=-1)


class Nonlinear1D(_GaussianBenchmark):
    """Scalar benchmark y = t^3 xi^2 + t exp(-|0.2 - xi|) + noise.

    ``qoi`` selects the prediction target: "identity" (z = theta) or
    "offset_square" (z = (theta - 0.5)^2, a non-injective map used to probe
    the data-processing inequality).
    """

    n_theta = 1
    n_y = 1
    n_summary = 1
    n_xi = 1

    def __init__(self, qoi: str = "identity", deterministic: bool = False):
        if qoi not in ("identity", "offset_square"):
            raise ValueError(f"unknown qoi {qoi!r}")
        self.qoi = qoi
        self.n_z = 1
        self.deterministic = deterministic
        self.name = "nl1d"

    def mean_response(self, thetas, xi) -> np.ndarray:
        t = np.atleast_2d(thetas)[:, 0]
        resp = t**3 * xi[0] ** 2 + t * np.exp(-abs(0.2 - xi[0]))
        return resp[:, None]

    def predict(self, thetas, rng: RngStream) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.qoi == "identity":
            return thetas.copy()
        return (thetas[:, :1] - 0.5) ** 2


class NonlinearND(_GaussianBenchmark):
    """N-dimensional extension with cross-coupled response terms.

    Component i of the response is t_i^3 xi_i^2 + sum_{j != i} t_j
    exp(-|0.2 - xi_j|); for a single dimension the self term is kept so the
    model reduces to :class:`Nonlinear1D`.  Default QoI is the Rosenbrock
    function; "identity" is also available.
    """

    def __init__(self, n_dim: int, qoi: str = "rosenbrock", deterministic: bool = False):
        if n_dim < 1:
            raise DomainError("n_dim must be >= 1")
        if qoi not in ("rosenbrock", "identity"):
            raise ValueError(f"unknown qoi {qoi!r}")
        self.n_theta = self.n_y = self.n_summary = self.n_xi = n_dim
        self.qoi = qoi
        self.n_z = 1 if qoi == "rosenbrock" else n_dim
        self.deterministic = deterministic
        self.name = f"nl{n_dim}d" if n_dim <= 2 else f"nlnd{n_dim}"

    def mean_response(self, thetas, xi) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if thetas.shape[1] != self.n_theta:
            raise DomainError(
                f"theta must have {self.n_theta} components, got {thetas.shape[1]}"
            )
        decay = np.exp(-np.abs(0.2 - xi))
        cross = thetas @ decay
        own = thetas * decay
        resp = thetas**3 * xi**2 + cross[:, None] - own
        if self.n_theta == 1:
            resp = resp + own
        return resp

    def predict(self, thetas, rng: RngStream) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.qoi == "identity":
            return thetas.copy()
        return rosenbrock(thetas)[:, None]


class Nonlinear2D(NonlinearND):
    """The symmetric 2D benchmark pair with Rosenbrock QoI by default."""

    def __init__(self, qoi: str = "rosenbrock", deterministic: bool = False):
        super().__init__(2, qoi=qoi, deterministic=deterministic)
        self.name = "nl2d"
