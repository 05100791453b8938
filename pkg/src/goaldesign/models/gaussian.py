"""Linear-Gaussian diagnostic models with closed-form mutual information.

These are not part of the benchmark suite; they exist to validate every
expected-utility estimator against analytic ground truth.  With
theta ~ N(0, 1), y = theta + N(0, sd_y^2) and z = theta (or
z = theta + N(0, sd_z^2) in the stochastic-QoI variant), the mutual
information between y and z is known exactly.
"""

from __future__ import annotations

import numpy as np

from ..rng import RngStream
from .base import ImplicitModel

__all__ = ["LinearGaussian", "IndependentQoI"]

_LOG2PI = np.log(2.0 * np.pi)


def _normal_logpdf(x, mean, sd):
    return -0.5 * _LOG2PI - np.log(sd) - 0.5 * ((x - mean) / sd) ** 2


class LinearGaussian(ImplicitModel):
    """theta ~ N(0,1); y = theta + noise; z = theta (+ optional QoI noise)."""

    n_theta = 1
    n_y = 1
    n_summary = 1
    n_z = 1
    n_xi = 1

    def __init__(self, sd_y: float = 0.5, sd_z: float = 0.0,
                 deterministic: bool = False):
        self.sd_y = float(sd_y)
        self.sd_z = float(sd_z)
        self.noise_sd = self.sd_y
        self.qoi_sd = self.sd_z
        self.stochastic_qoi = sd_z > 0
        self.deterministic = deterministic
        self.name = "lingauss"

    def analytic_mi(self) -> float:
        """Exact mutual information between y and z in nats."""
        var_t = 1.0
        rho2 = var_t**2 / ((var_t + self.sd_y**2) * (var_t + self.sd_z**2))
        return -0.5 * np.log1p(-rho2)

    def sample_prior(self, rng: RngStream, n: int) -> np.ndarray:
        return rng.generator().normal(0.0, 1.0, size=(n, 1))

    def design_bounds(self) -> np.ndarray:
        return np.array([[0.0, 1.0]])

    def mean_response(self, thetas, xi) -> np.ndarray:
        return np.atleast_2d(np.asarray(thetas, dtype=float)).copy()

    def simulate(self, thetas, xi, rng: RngStream) -> np.ndarray:
        self.validate_design(xi)
        mean = self.mean_response(thetas, xi)
        if self.deterministic:
            return mean
        return mean + rng.generator().normal(0.0, self.sd_y, size=mean.shape)

    def predict(self, thetas, rng: RngStream) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.sd_z == 0 or self.deterministic:
            return thetas.copy()
        return thetas + rng.generator().normal(0.0, self.sd_z, size=thetas.shape)

    def summarize(self, ys: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(ys, dtype=float))

    def log_likelihood(self, ys, thetas, xi) -> np.ndarray:
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        mean = self.mean_response(thetas, xi)
        return np.sum(_normal_logpdf(ys, mean, self.sd_y), axis=-1)

    def qoi_mean(self, thetas) -> np.ndarray:
        """Conditional QoI mean given theta, for nested-MC inner sums."""
        return np.atleast_2d(np.asarray(thetas, dtype=float)).copy()

    def log_qoi_density(self, zs, thetas) -> np.ndarray:
        if self.sd_z == 0:
            return super().log_qoi_density(zs, thetas)
        zs = np.atleast_2d(np.asarray(zs, dtype=float))
        mean = self.qoi_mean(thetas)
        return np.sum(_normal_logpdf(zs, mean, self.sd_z), axis=-1)


class IndependentQoI(LinearGaussian):
    """Variant whose QoI ignores theta entirely, so the true EIG is zero."""

    def __init__(self, sd_y: float = 0.5, sd_z: float = 1.0):
        super().__init__(sd_y=sd_y, sd_z=sd_z)
        self.stochastic_qoi = True
        self.name = "independent-qoi"

    def analytic_mi(self) -> float:
        return 0.0

    def predict(self, thetas, rng: RngStream) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return rng.generator().normal(0.0, self.sd_z, size=(len(thetas), 1))

    def qoi_mean(self, thetas) -> np.ndarray:
        return np.zeros_like(np.atleast_2d(np.asarray(thetas, dtype=float)))
