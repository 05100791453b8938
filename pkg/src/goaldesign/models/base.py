"""Model contract and joint sampling.

An implicit model is anything we can simulate from but whose likelihood we
cannot necessarily evaluate: it supplies prior sampling, an observation
simulator p(y | theta, xi), a quantity-of-interest (QoI) map z = H(theta)
or H(theta, noise), and a summary-statistic reduction of observations.
All array arguments are batched along the first axis so that simulators can
vectorize over candidates.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from ..rng import RngStream

__all__ = [
    "DomainError",
    "SimulationError",
    "CapabilityError",
    "ImplicitModel",
    "JointSamples",
    "sample_joint",
    "sample_truncated_normal",
]


class DomainError(ValueError):
    """An argument lies outside the domain declared by the model."""


class SimulationError(RuntimeError):
    """A simulation produced a non-finite state; carries the failure time."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class CapabilityError(RuntimeError):
    """An optional model capability (explicit density) was required but absent."""


class ImplicitModel(abc.ABC):
    """Behavioral contract for simulator-backed statistical models.

    Subclasses must set the dimension attributes and implement the four
    required capabilities.  ``deterministic=True`` zeroes all stochastic
    terms in ``simulate``/``predict``; it exists for oracle tests only.
    Optional explicit-density hooks (``log_likelihood``, ``mean_response``,
    ``log_qoi_density``) raise :class:`CapabilityError` unless overridden.
    """

    name: str = "model"
    n_theta: int
    n_y: int
    n_z: int
    n_summary: int
    deterministic: bool = False
    #: True when z = H(theta, noise) has a nondegenerate density p(z|theta)
    stochastic_qoi: bool = False

    @abc.abstractmethod
    def sample_prior(self, rng: RngStream, n: int) -> np.ndarray:
        """Draw ``n`` parameter vectors from the prior, shape (n, n_theta)."""

    @abc.abstractmethod
    def simulate(self, thetas: np.ndarray, xi: np.ndarray, rng: RngStream) -> np.ndarray:
        """Simulate observations for each row of ``thetas``, shape (n, n_y)."""

    @abc.abstractmethod
    def predict(self, thetas: np.ndarray, rng: RngStream) -> np.ndarray:
        """Map parameters to QoI values, shape (n, n_z)."""

    @abc.abstractmethod
    def summarize(self, ys: np.ndarray) -> np.ndarray:
        """Deterministically reduce observations to summaries, shape (n, n_summary)."""

    @abc.abstractmethod
    def design_bounds(self) -> np.ndarray:
        """Closed per-coordinate design bounds, shape (n_xi, 2)."""

    # -- optional capabilities -------------------------------------------------

    @property
    def has_likelihood(self) -> bool:
        return type(self).log_likelihood is not ImplicitModel.log_likelihood

    @property
    def has_qoi_density(self) -> bool:
        return type(self).log_qoi_density is not ImplicitModel.log_qoi_density

    def log_likelihood(self, ys: np.ndarray, thetas: np.ndarray, xi: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"{self.name} has no explicit likelihood")

    def mean_response(self, thetas: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Noise-free observation mean, for Gaussian explicit models."""
        raise CapabilityError(f"{self.name} has no explicit mean response")

    def log_qoi_density(self, zs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"{self.name} has no explicit QoI density")

    # -- shared plumbing -------------------------------------------------------

    def prior_support(self):
        """(lower, upper) arrays for clipping adjusted posterior samples.

        Returns None for unbounded priors.
        """
        return None

    def theta_within_support(self, thetas: np.ndarray) -> np.ndarray:
        support = self.prior_support()
        if support is None:
            return np.ones(len(thetas), dtype=bool)
        lo, hi = support
        return np.all((thetas >= lo) & (thetas <= hi), axis=1)

    def validate_design(self, xi) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        bounds = self.design_bounds()
        if xi.shape != (len(bounds),):
            raise DomainError(
                f"design for {self.name} must have {len(bounds)} coordinates, got shape {xi.shape}"
            )
        if np.any(xi < bounds[:, 0]) or np.any(xi > bounds[:, 1]):
            raise DomainError(f"design {xi} outside bounds {bounds.tolist()}")
        return xi


@dataclass(frozen=True)
class JointSamples:
    """A batch of draws (theta_i, y_i, z_i) from the prior joint at one design."""

    thetas: np.ndarray
    ys: np.ndarray
    zs: np.ndarray
    design: np.ndarray

    def __len__(self) -> int:
        return len(self.thetas)


def sample_joint(model: ImplicitModel, xi, n: int, rng: RngStream) -> JointSamples:
    """Draw ``n`` joint samples via the chain theta -> y, theta -> z at design xi."""
    if n < 1:
        raise DomainError(f"need at least one joint sample, requested {n}")
    xi = model.validate_design(xi)
    thetas = model.sample_prior(rng.child(0), n)
    ys = model.simulate(thetas, xi, rng.child(1))
    zs = model.predict(thetas, rng.child(2))
    return JointSamples(thetas=thetas, ys=ys, zs=zs, design=xi)


def sample_truncated_normal(mean, sd, lower, upper, rng: RngStream, size: int = 1) -> np.ndarray:
    """Sample Normal(mean, sd^2) conditioned on [lower, upper] by rejection."""
    if not sd > 0:
        raise DomainError("sd must be positive")
    if not lower < upper:
        raise DomainError("need lower < upper")
    gen = rng.generator()
    out = np.empty(size)
    filled = 0
    while filled < size:
        draws = gen.normal(mean, sd, size=2 * (size - filled) + 16)
        keep = draws[(draws >= lower) & (draws <= upper)]
        take = min(len(keep), size - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
    return out
