"""Benchmark simulators and the model contract.

Models are registered by name for CLI lookup: "nl1d", "nl2d", "nlnd",
"sir", "fhn".  Each factory accepts the keyword options of the underlying
class (QoI selection, dimensions, deterministic mode).
"""

from __future__ import annotations

from .base import (
    CapabilityError,
    DomainError,
    ImplicitModel,
    JointSamples,
    SimulationError,
    sample_joint,
    sample_truncated_normal,
)
from .benchmarks import NOISE_SD, Nonlinear1D, Nonlinear2D, NonlinearND, rosenbrock
from .fhn import StochasticFHN, spike_summaries
from .gaussian import IndependentQoI, LinearGaussian
from .sir import StochasticSIR

__all__ = [
    "CapabilityError",
    "DomainError",
    "ImplicitModel",
    "JointSamples",
    "SimulationError",
    "sample_joint",
    "sample_truncated_normal",
    "NOISE_SD",
    "Nonlinear1D",
    "Nonlinear2D",
    "NonlinearND",
    "rosenbrock",
    "StochasticFHN",
    "spike_summaries",
    "StochasticSIR",
    "IndependentQoI",
    "LinearGaussian",
    "MODEL_REGISTRY",
    "get_model",
]

MODEL_REGISTRY = {
    "nl1d": Nonlinear1D,
    "nl2d": Nonlinear2D,
    "nlnd": NonlinearND,
    "sir": StochasticSIR,
    "fhn": StochasticFHN,
}


def get_model(name: str, **options) -> ImplicitModel:
    """Instantiate a registered model by name with keyword options."""
    try:
        factory = MODEL_REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise KeyError(f"unknown model {name!r}; known models: {known}") from None
    return factory(**options)
