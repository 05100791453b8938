"""Likelihood-free posterior sampling by rejection ABC.

A candidate pool of (theta, summary) pairs is simulated once per design and
reused across conditioning points: accepting the candidates whose scaled
Euclidean summary distance falls below a threshold yields approximate
posterior samples, optionally corrected by a regression adjustment
(linear least squares or a small tanh network).  Distances are computed on
summaries standardized by the pool's per-coordinate standard deviation, so
threshold grids like 0.1-0.5 are meaningful regardless of summary units.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .models.base import DomainError, ImplicitModel
from .rng import RngStream

__all__ = [
    "AbcConfig",
    "CandidatePool",
    "AbcPosterior",
    "build_pool",
    "scaled_distances",
    "abc_reject",
    "regression_adjust",
    "condition",
    "cv_select_threshold",
    "error_table_rows",
    "posterior_predictive_z",
    "posterior_predictive_y",
]

SCALE_FLOOR = 1e-12
DEFAULT_EPSILON_GRID = (0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass(frozen=True)
class AbcConfig:
    """Rejection and adjustment settings."""

    epsilon: float = 0.1
    n_pool: int = 10_000
    adjustment: str = "linear"  # none | linear | mlp
    normalize_summaries: bool = True
    min_accept: int = 50
    mlp_hidden: int = 10
    mlp_steps: int = 500
    mlp_lr: float = 1e-2

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.adjustment not in ("none", "linear", "mlp"):
            raise ValueError(f"unknown adjustment {self.adjustment!r}")
        if not self.n_pool >= self.min_accept >= 1:
            raise ValueError("need n_pool >= min_accept >= 1")
        if self.adjustment == "mlp" and self.mlp_steps < 1:
            raise ValueError("mlp adjustment needs at least one training step")


@dataclass(frozen=True)
class CandidatePool:
    """Prior draws with their simulated summaries at one design."""

    thetas: np.ndarray
    summaries: np.ndarray
    design: np.ndarray
    summary_scale: np.ndarray

    def __len__(self) -> int:
        return len(self.thetas)


@dataclass(frozen=True)
class AbcPosterior:
    """Accepted (possibly adjusted) parameter samples for one conditioning point."""

    thetas: np.ndarray
    n_candidates: int
    epsilon_used: float
    conditioned_on: np.ndarray
    accepted_idx: np.ndarray
    fallback: bool = False
    adjusted: bool = False
    adjustment_failed: bool = False

    def __len__(self) -> int:
        return len(self.thetas)


def build_pool(model: ImplicitModel, xi, n_pool: int, condition_space: str,
               rng: RngStream, normalize: bool = True) -> CandidatePool:
    """Simulate a candidate pool in observation-summary or QoI space.

    In "observation" space summaries are S(simulate(theta, xi)); in "qoi"
    space the QoI value itself plays the role of the summary, enabling
    conditioning on z.
    """
    if n_pool < 1:
        raise DomainError("n_pool must be >= 1")
    if condition_space not in ("observation", "qoi"):
        raise ValueError(f"unknown condition_space {condition_space!r}")
    xi = model.validate_design(xi)
    thetas = model.sample_prior(rng.child(0), n_pool)
    if condition_space == "observation":
        summaries = model.summarize(model.simulate(thetas, xi, rng.child(1)))
    else:
        summaries = model.predict(thetas, rng.child(1))
    if normalize:
        scale = np.maximum(summaries.std(axis=0), SCALE_FLOOR)
    else:
        scale = np.ones(summaries.shape[1])
    return CandidatePool(thetas=thetas, summaries=summaries, design=xi,
                         summary_scale=scale)


def scaled_distances(pool: CandidatePool, s_obs: np.ndarray) -> np.ndarray:
    """Scaled Euclidean distance from every pool summary to s_obs."""
    s_obs = np.asarray(s_obs, dtype=float).reshape(-1)
    if s_obs.shape[0] != pool.summaries.shape[1]:
        raise DomainError("observed summary dimension does not match pool")
    diff = (pool.summaries - s_obs) / pool.summary_scale
    return np.sqrt(np.sum(diff**2, axis=1))


def abc_reject(pool: CandidatePool, s_obs, epsilon: float,
               min_accept: int = 1,
               distances: Optional[np.ndarray] = None,
               exclude: Optional[int] = None) -> AbcPosterior:
    """Accept candidates within distance epsilon of the observed summary.

    Falls back to the ``min_accept`` nearest candidates when fewer pass,
    recording the effective threshold.  ``distances`` may carry precomputed
    scaled distances; ``exclude`` drops one pool index (used by
    leave-one-out cross-validation).
    """
    if len(pool) == 0:
        raise DomainError("candidate pool is empty")
    s_obs = np.asarray(s_obs, dtype=float).reshape(-1)
    d = scaled_distances(pool, s_obs) if distances is None else np.asarray(distances, float)
    if exclude is not None:
        d = d.copy()
        d[exclude] = np.inf
    accepted = np.flatnonzero(d < epsilon)
    eps_used = float(epsilon)
    fallback = False
    if len(accepted) < min_accept:
        k = min(min_accept, len(pool) if exclude is None else len(pool) - 1)
        accepted = np.argpartition(d, k - 1)[:k]
        accepted = accepted[np.argsort(d[accepted])]
        eps_used = float(d[accepted[-1]]) * (1 + 1e-12)
        fallback = True
    return AbcPosterior(
        thetas=pool.thetas[accepted].copy(),
        n_candidates=len(pool),
        epsilon_used=eps_used,
        conditioned_on=s_obs,
        accepted_idx=accepted,
        fallback=fallback,
    )


def _fit_linear(summaries: np.ndarray, thetas: np.ndarray, s_obs: np.ndarray):
    x = np.column_stack([np.ones(len(summaries)), summaries])
    coef, _, rank, _ = np.linalg.lstsq(x, thetas, rcond=None)
    if rank < x.shape[1]:
        return None
    fitted = x @ coef
    at_obs = np.concatenate([[1.0], s_obs]) @ coef
    return fitted, at_obs


def _fit_mlp(summaries, thetas, s_obs, hidden, steps, lr, rng: RngStream):
    # One-hidden-layer tanh network trained by full-batch gradient descent
    # on standardized inputs/outputs.
    gen = rng.generator()
    s_mu, s_sd = summaries.mean(axis=0), np.maximum(summaries.std(axis=0), SCALE_FLOOR)
    t_mu, t_sd = thetas.mean(axis=0), np.maximum(thetas.std(axis=0), SCALE_FLOOR)
    xs = (summaries - s_mu) / s_sd
    ts = (thetas - t_mu) / t_sd
    d_in, d_out = xs.shape[1], ts.shape[1]
    w1 = gen.normal(0, 1.0 / np.sqrt(d_in), size=(d_in, hidden))
    b1 = np.zeros(hidden)
    w2 = gen.normal(0, 1.0 / np.sqrt(hidden), size=(hidden, d_out))
    b2 = np.zeros(d_out)
    n = len(xs)
    for _ in range(steps):
        a = np.tanh(xs @ w1 + b1)
        pred = a @ w2 + b2
        grad_out = 2.0 * (pred - ts) / n
        gw2 = a.T @ grad_out
        gb2 = grad_out.sum(axis=0)
        grad_hidden = (grad_out @ w2.T) * (1 - a**2)
        gw1 = xs.T @ grad_hidden
        gb1 = grad_hidden.sum(axis=0)
        w1 -= lr * gw1
        b1 -= lr * gb1
        w2 -= lr * gw2
        b2 -= lr * gb2

    def forward(x):
        return (np.tanh(x @ w1 + b1) @ w2 + b2) * t_sd + t_mu

    fitted = forward(xs)
    at_obs = forward(((s_obs - s_mu) / s_sd)[None, :])[0]
    return fitted, at_obs


def regression_adjust(posterior: AbcPosterior, summaries: np.ndarray, s_obs,
                      mode: str, support=None,
                      rng: Optional[RngStream] = None,
                      config: AbcConfig = AbcConfig()) -> AbcPosterior:
    """Correct accepted samples by regressing theta on summaries.

    Fits theta = g(summary) + residual on the accepted pairs and returns
    g(s_obs) + residuals, clipped to the prior support.  A rank-deficient
    linear system falls back to the unadjusted samples with a warning flag.
    """
    if mode not in ("linear", "mlp"):
        raise ValueError(f"unknown adjustment mode {mode!r}")
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    s_obs = np.asarray(s_obs, dtype=float).reshape(-1)
    n, ds = summaries.shape
    if n < ds + 2:
        raise DomainError(f"adjustment needs at least {ds + 2} accepted samples, got {n}")
    if mode == "linear":
        fit = _fit_linear(summaries, posterior.thetas, s_obs)
        if fit is None:
            return replace(posterior, adjustment_failed=True)
    else:
        fit = _fit_mlp(summaries, posterior.thetas, s_obs, config.mlp_hidden,
                       config.mlp_steps, config.mlp_lr,
                       rng if rng is not None else RngStream(0))
    fitted, at_obs = fit
    adjusted = at_obs + (posterior.thetas - fitted)
    if support is not None:
        lo, hi = support
        adjusted = np.clip(adjusted, lo, hi)
    return replace(posterior, thetas=adjusted, adjusted=True)


def condition(pool: CandidatePool, s_obs, config: AbcConfig, support=None,
              rng: Optional[RngStream] = None,
              distances: Optional[np.ndarray] = None,
              exclude: Optional[int] = None) -> AbcPosterior:
    """Reject-then-adjust convenience used by the utility estimators."""
    post = abc_reject(pool, s_obs, config.epsilon, min_accept=config.min_accept,
                      distances=distances, exclude=exclude)
    if config.adjustment != "none":
        post = regression_adjust(post, pool.summaries[post.accepted_idx], s_obs,
                                 config.adjustment, support=support, rng=rng,
                                 config=config)
    return post


def cv_select_threshold(pool: CandidatePool, epsilon_grid: Sequence[float],
                        n_holdout: int, mode: str, rng: RngStream,
                        min_accept: int = 50,
                        config: AbcConfig = AbcConfig()) -> Tuple[float, list]:
    """Pick the rejection threshold by leave-one-out prediction error.

    Holds out ``n_holdout`` pool candidates; for each, conditions on its
    summary against the remaining pool at every threshold in the grid and
    records the absolute error of the posterior median against the held-out
    parameters.  Returns the threshold minimizing the per-parameter median
    errors summed over parameters, plus the full error table as rows
    (epsilon, param_index, median_abs_error).
    """
    epsilon_grid = list(epsilon_grid)
    if not epsilon_grid:
        raise ValueError("epsilon grid must be nonempty")
    if any(e <= 0 for e in epsilon_grid):
        raise ValueError("thresholds must be positive")
    if n_holdout > len(pool):
        raise ValueError("n_holdout exceeds pool size")
    idx = rng.generator().choice(len(pool), size=n_holdout, replace=False)
    n_params = pool.thetas.shape[1]
    errors = np.empty((len(epsilon_grid), n_holdout, n_params))
    for e_i, eps in enumerate(epsilon_grid):
        cfg = replace(config, epsilon=float(eps), adjustment=mode,
                      min_accept=min_accept)
        for h_i, j in enumerate(idx):
            post = condition(pool, pool.summaries[j], cfg,
                             rng=rng.child(e_i, h_i), exclude=int(j))
            median = np.median(post.thetas, axis=0)
            errors[e_i, h_i] = np.abs(median - pool.thetas[j])
    table = []
    for e_i, eps in enumerate(epsilon_grid):
        for p in range(n_params):
            table.append((float(eps), p, float(np.median(errors[e_i, :, p]))))
    per_eps = np.median(errors, axis=1).sum(axis=1)
    eps_star = float(epsilon_grid[int(np.argmin(per_eps))])
    return eps_star, table


def error_table_rows(table) -> str:
    """Render a cv_select_threshold table as RFC-4180 CSV text."""
    lines = ["epsilon,param_index,median_abs_error"]
    for eps, p, err in table:
        lines.append(f"{eps},{p},{err}")
    return "\n".join(lines) + "\n"


def posterior_predictive_z(model: ImplicitModel, posterior: AbcPosterior,
                           rng: RngStream) -> np.ndarray:
    """One QoI draw per accepted parameter sample."""
    if len(posterior) == 0:
        raise DomainError("posterior is empty")
    return model.predict(posterior.thetas, rng)


def posterior_predictive_y(model: ImplicitModel, posterior: AbcPosterior, xi,
                           rng: RngStream) -> np.ndarray:
    """One simulated observation per accepted parameter sample."""
    if len(posterior) == 0:
        raise DomainError("posterior is empty")
    return model.simulate(posterior.thetas, xi, rng)
