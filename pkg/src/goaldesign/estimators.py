"""Expected-utility estimators for goal-oriented design.

All estimators target the expected information gain of the quantity of
interest z at one design xi, in nats.  The two production estimators fit a
density ratio per outer sample:

* dr1: condition in observation-summary space, fit the ratio
  posterior-predictive(z) / prior-predictive(z), average log r(z_i);
* dr2: condition in QoI space, fit the ratio in observation-summary space,
  average log r(S(y_i)).

Nested Monte Carlo estimators (nmc_param for the parameter EIG, nmc_z1 and
nmc_z2 for the two QoI-EIG forms) require explicit densities and serve as
oracles; kde replaces the ratio fit with two kernel density estimates and
is kept as a baseline.  Each estimator is replicated on independent streams
and reported as a mean and standard deviation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from . import abc as abc_
from .abc import AbcConfig, build_pool, condition
from .densratio import CvGrid, RatioFitError, fit_rulsif
from .models.base import (
    CapabilityError,
    DomainError,
    ImplicitModel,
    sample_joint,
)
from .rng import RngStream

__all__ = [
    "EstimationError",
    "EstimatorConfig",
    "UtilityEstimate",
    "ESTIMATOR_KINDS",
    "replicate_aggregate",
    "resolve_ratio_space",
    "estimate_utility",
    "utility_dr1",
    "utility_dr2",
    "utility_nmc_param",
    "utility_nmc_z1",
    "utility_nmc_z2",
    "utility_kde",
]

ESTIMATOR_KINDS = ("dr1", "dr2", "nmc_param", "nmc_z1", "nmc_z2", "kde")


class EstimationError(RuntimeError):
    """Raised when too many outer Monte Carlo points fail to produce a value."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Sample budgets and sub-configurations for one utility evaluation."""

    n_outer: int = 1000
    n_replicates: int = 1
    n_inner: int = 1000  # nested-MC inner marginalization size
    abc: AbcConfig = field(default_factory=AbcConfig)
    ratio_grid: CvGrid = field(default_factory=CvGrid)
    n_basis: int = 100
    alpha: float = 0.0
    ratio_space: str = "auto"  # auto | dr1 | dr2
    n_denominator: Optional[int] = None  # None: 4x the numerator size
    max_failure_frac: float = 0.2

    def __post_init__(self):
        if self.n_outer < 10:
            raise ValueError("n_outer must be at least 10")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be at least 1")
        if self.ratio_space not in ("auto", "dr1", "dr2"):
            raise ValueError(f"unknown ratio_space {self.ratio_space!r}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")


@dataclass(frozen=True)
class UtilityEstimate:
    """Replicate-aggregated utility at one design, with provenance."""

    design: np.ndarray
    mean: float
    std: float
    n_replicates: int
    n_outer: int
    estimator_kind: str
    seed: int
    n_failed: int = 0
    wall_time_s: float = 0.0
    replicate_values: Tuple[float, ...] = ()


def replicate_aggregate(values) -> Tuple[float, float]:
    """Sample mean and (n-1)-denominator standard deviation; std 0 for n=1."""
    values = np.asarray(values, dtype=float)
    if values.size < 1:
        raise ValueError("need at least one replicate value")
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return mean, std


def resolve_ratio_space(model: ImplicitModel, cfg: EstimatorConfig) -> str:
    """Pick dr1 vs dr2: condition on whichever side has fewer dimensions."""
    if cfg.ratio_space != "auto":
        return cfg.ratio_space
    return "dr1" if model.n_summary >= model.n_z else "dr2"


# -- per-replicate cores -------------------------------------------------------

_RECOVERABLE = (RatioFitError, DomainError, np.linalg.LinAlgError)


def _check_failures(n_failed: int, n_outer: int, cfg: EstimatorConfig, kind: str):
    if n_failed > cfg.max_failure_frac * n_outer:
        raise EstimationError(
            f"{kind}: {n_failed}/{n_outer} outer points failed "
            f"(ceiling {cfg.max_failure_frac:.0%})"
        )


def _dr1_replicate(model, xi, cfg: EstimatorConfig, stream: RngStream):
    joints = sample_joint(model, xi, cfg.n_outer, stream.child(0))
    pool = build_pool(model, xi, cfg.abc.n_pool, "observation", stream.child(1),
                     normalize=cfg.abc.normalize_summaries)
    z_pool = model.predict(pool.thetas, stream.child(2))
    s_obs = model.summarize(joints.ys)
    support = model.prior_support()
    gen = stream.child(3).generator()
    vals = []
    n_failed = 0
    for i in range(cfg.n_outer):
        try:
            post = condition(pool, s_obs[i], cfg.abc, support=support,
                             rng=stream.child(4, i))
            z_num = model.predict(post.thetas, stream.child(5, i))
            n_den = min(cfg.n_denominator or 4 * len(z_num), len(z_pool))
            z_den = z_pool[gen.choice(len(z_pool), size=n_den, replace=False)]
            ratio = fit_rulsif(z_num, z_den, alpha=cfg.alpha, grid=cfg.ratio_grid,
                               n_basis=cfg.n_basis, rng=stream.child(6, i))
            vals.append(float(np.log(ratio(joints.zs[i : i + 1])[0])))
        except _RECOVERABLE:
            n_failed += 1
    _check_failures(n_failed, cfg.n_outer, cfg, "dr1")
    return float(np.mean(vals)), n_failed


def _dr2_replicate(model, xi, cfg: EstimatorConfig, stream: RngStream):
    joints = sample_joint(model, xi, cfg.n_outer, stream.child(0))
    pool = build_pool(model, xi, cfg.abc.n_pool, "qoi", stream.child(1),
                     normalize=cfg.abc.normalize_summaries)
    # prior-predictive observation bank for denominator draws
    gen = stream.child(2).generator()
    n_bank = min(len(pool), max(cfg.n_outer, 4 * cfg.abc.min_accept))
    bank_idx = gen.choice(len(pool), size=n_bank, replace=False)
    s_bank = model.summarize(
        model.simulate(pool.thetas[bank_idx], xi, stream.child(3))
    )
    s_obs = model.summarize(joints.ys)
    support = model.prior_support()
    vals = []
    n_failed = 0
    for i in range(cfg.n_outer):
        try:
            post = condition(pool, joints.zs[i], cfg.abc, support=support,
                             rng=stream.child(4, i))
            y_num = model.simulate(post.thetas, xi, stream.child(5, i))
            s_num = model.summarize(y_num)
            n_den = min(cfg.n_denominator or 4 * len(s_num), len(s_bank))
            s_den = s_bank[gen.choice(len(s_bank), size=n_den, replace=False)]
            ratio = fit_rulsif(s_num, s_den, alpha=cfg.alpha, grid=cfg.ratio_grid,
                               n_basis=cfg.n_basis, rng=stream.child(6, i))
            vals.append(float(np.log(ratio(s_obs[i : i + 1])[0])))
        except _RECOVERABLE:
            n_failed += 1
    _check_failures(n_failed, cfg.n_outer, cfg, "dr2")
    return float(np.mean(vals)), n_failed


class _DiagonalKde:
    """Gaussian product-kernel density with Silverman bandwidths per dimension."""

    def __init__(self, samples: np.ndarray):
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        n, d = samples.shape
        sd = np.maximum(samples.std(axis=0, ddof=1) if n > 1 else np.ones(d), 1e-12)
        factor = (4.0 / (d + 2.0)) ** (1.0 / (d + 4.0)) * n ** (-1.0 / (d + 4.0))
        self.bw = factor * sd
        self.samples = samples

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        diff = (x[:, None, :] - self.samples[None, :, :]) / self.bw
        log_kernel = -0.5 * np.sum(diff**2, axis=2) - np.sum(
            np.log(self.bw * np.sqrt(2.0 * np.pi))
        )
        return logsumexp(log_kernel, axis=1) - np.log(len(self.samples))


def _kde_replicate(model, xi, cfg: EstimatorConfig, stream: RngStream):
    joints = sample_joint(model, xi, cfg.n_outer, stream.child(0))
    pool = build_pool(model, xi, cfg.abc.n_pool, "observation", stream.child(1),
                     normalize=cfg.abc.normalize_summaries)
    z_pool = model.predict(pool.thetas, stream.child(2))
    prior_kde = _DiagonalKde(z_pool)
    s_obs = model.summarize(joints.ys)
    support = model.prior_support()
    vals = []
    n_failed = 0
    for i in range(cfg.n_outer):
        try:
            post = condition(pool, s_obs[i], cfg.abc, support=support,
                             rng=stream.child(4, i))
            z_num = model.predict(post.thetas, stream.child(5, i))
            post_kde = _DiagonalKde(z_num)
            z_i = joints.zs[i : i + 1]
            vals.append(float(post_kde.logpdf(z_i)[0] - prior_kde.logpdf(z_i)[0]))
        except _RECOVERABLE:
            n_failed += 1
    _check_failures(n_failed, cfg.n_outer, cfg, "kde")
    return float(np.mean(vals)), n_failed


def _nmc_param_replicate(model, xi, cfg: EstimatorConfig, stream: RngStream):
    if not model.has_likelihood:
        raise CapabilityError("nmc_param requires an explicit likelihood")
    xi = model.validate_design(xi)
    joints = sample_joint(model, xi, cfg.n_outer, stream.child(0))
    thetas_inner = model.sample_prior(stream.child(1), cfg.n_inner)
    loglik_self = model.log_likelihood(joints.ys, joints.thetas, xi)
    mean_inner = model.mean_response(thetas_inner, xi)  # (M, n_y)
    sd = model.noise_sd
    resid = (joints.ys[:, None, :] - mean_inner[None, :, :]) / sd
    const = -0.5 * np.log(2.0 * np.pi * sd**2)
    pairwise = np.sum(const - 0.5 * resid**2, axis=2)  # (N, M)
    log_marginal = logsumexp(pairwise, axis=1) - np.log(cfg.n_inner)
    return float(np.mean(loglik_self - log_marginal)), 0


def _nmc_z1_replicate(model, xi, cfg: EstimatorConfig, stream: RngStream):
    if not model.has_qoi_density:
        raise CapabilityError("nmc_z1 requires an explicit QoI density")
    if not model.stochastic_qoi:
        raise CapabilityError(
            "nmc_z1 refuses deterministic QoI maps (the inner density is a delta)"
        )
    joints = sample_joint(model, xi, cfg.n_outer, stream.child(0))
    pool = build_pool(model, xi, cfg.abc.n_pool, "observation", stream.child(1),
                     normalize=cfg.abc.normalize_summaries)
    theta4 = model.sample_prior(stream.child(2), cfg.n_inner)
    s_obs = model.summarize(joints.ys)
    support = model.prior_support()
    vals = []
    n_failed = 0
    for i in range(cfg.n_outer):
        try:
            z_i = joints.zs[i]
            post = condition(pool, s_obs[i], cfg.abc, support=support,
                             rng=stream.child(4, i))
            num = model.log_qoi_density(
                np.tile(z_i, (len(post), 1)), post.thetas
            )
            den = model.log_qoi_density(np.tile(z_i, (cfg.n_inner, 1)), theta4)
            vals.append(
                float(
                    (logsumexp(num) - np.log(len(num)))
                    - (logsumexp(den) - np.log(cfg.n_inner))
                )
            )
        except _RECOVERABLE:
            n_failed += 1
    _check_failures(n_failed, cfg.n_outer, cfg, "nmc_z1")
    return float(np.mean(vals)), n_failed


def _nmc_z2_replicate(model, xi, cfg: EstimatorConfig, stream: RngStream):
    if not model.has_likelihood:
        raise CapabilityError("nmc_z2 requires an explicit likelihood")
    xi = model.validate_design(xi)
    joints = sample_joint(model, xi, cfg.n_outer, stream.child(0))
    pool = build_pool(model, xi, cfg.abc.n_pool, "qoi", stream.child(1),
                     normalize=cfg.abc.normalize_summaries)
    theta4 = model.sample_prior(stream.child(2), cfg.n_inner)
    support = model.prior_support()
    vals = []
    n_failed = 0
    for i in range(cfg.n_outer):
        try:
            y_i = joints.ys[i]
            post = condition(pool, joints.zs[i], cfg.abc, support=support,
                             rng=stream.child(4, i))
            num = model.log_likelihood(np.tile(y_i, (len(post), 1)), post.thetas, xi)
            den = model.log_likelihood(np.tile(y_i, (cfg.n_inner, 1)), theta4, xi)
            vals.append(
                float(
                    (logsumexp(num) - np.log(len(num)))
                    - (logsumexp(den) - np.log(cfg.n_inner))
                )
            )
        except _RECOVERABLE:
            n_failed += 1
    _check_failures(n_failed, cfg.n_outer, cfg, "nmc_z2")
    return float(np.mean(vals)), n_failed


_REPLICATE_CORES = {
    "dr1": _dr1_replicate,
    "dr2": _dr2_replicate,
    "nmc_param": _nmc_param_replicate,
    "nmc_z1": _nmc_z1_replicate,
    "nmc_z2": _nmc_z2_replicate,
    "kde": _kde_replicate,
}


def estimate_utility(model: ImplicitModel, xi, kind: str, cfg: EstimatorConfig,
                     rng: RngStream) -> UtilityEstimate:
    """Evaluate one estimator at one design over independent replicates."""
    if kind == "auto":
        kind = resolve_ratio_space(model, cfg)
    if kind not in _REPLICATE_CORES:
        raise ValueError(f"unknown estimator kind {kind!r}")
    xi = model.validate_design(xi)
    core = _REPLICATE_CORES[kind]
    start = time.perf_counter()
    values = []
    n_failed = 0
    for r in range(cfg.n_replicates):
        value, failed = core(model, xi, cfg, rng.child(r))
        values.append(value)
        n_failed += failed
    mean, std = replicate_aggregate(values)
    return UtilityEstimate(
        design=xi,
        mean=mean,
        std=std,
        n_replicates=cfg.n_replicates,
        n_outer=cfg.n_outer,
        estimator_kind=kind,
        seed=rng.master_seed,
        n_failed=n_failed,
        wall_time_s=time.perf_counter() - start,
        replicate_values=tuple(values),
    )


def utility_dr1(model, xi, cfg: EstimatorConfig, rng: RngStream) -> UtilityEstimate:
    return estimate_utility(model, xi, "dr1", cfg, rng)


def utility_dr2(model, xi, cfg: EstimatorConfig, rng: RngStream) -> UtilityEstimate:
    return estimate_utility(model, xi, "dr2", cfg, rng)


def utility_nmc_param(model, xi, cfg: EstimatorConfig, rng: RngStream) -> UtilityEstimate:
    return estimate_utility(model, xi, "nmc_param", cfg, rng)


def utility_nmc_z1(model, xi, cfg: EstimatorConfig, rng: RngStream) -> UtilityEstimate:
    return estimate_utility(model, xi, "nmc_z1", cfg, rng)


def utility_nmc_z2(model, xi, cfg: EstimatorConfig, rng: RngStream) -> UtilityEstimate:
    return estimate_utility(model, xi, "nmc_z2", cfg, rng)


def utility_kde(model, xi, cfg: EstimatorConfig, rng: RngStream) -> UtilityEstimate:
    return estimate_utility(model, xi, "kde", cfg, rng)
