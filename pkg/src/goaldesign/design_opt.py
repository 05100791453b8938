"""Design-space search: grid sweeps and Gaussian-process optimization.

Low-dimensional designs are handled by a dense grid sweep with replicate
statistics; higher-dimensional spaces use Bayesian optimization with a
squared-exponential Gaussian-process surrogate and expected-improvement
acquisition.  Every grid point or proposal owns a child random stream keyed
by its index, so results are independent of evaluation order and worker
count.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize
from scipy.stats import norm, qmc
from sklearn.exceptions import ConvergenceWarning
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import RBF, ConstantKernel, WhiteKernel

from .densratio import RatioFitError
from .estimators import EstimationError, EstimatorConfig, UtilityEstimate, estimate_utility
from .models.base import DomainError, ImplicitModel
from .rng import RngStream

__all__ = [
    "SweepError",
    "DesignGrid",
    "SweepResult",
    "BoState",
    "grid_sweep",
    "bayes_opt",
    "export_curve",
]

EI_JITTER = 0.01
N_ACQ_STARTS = 32


class SweepError(RuntimeError):
    """Raised when too many grid points fail to produce an estimate."""


@dataclass(frozen=True)
class DesignGrid:
    """Cartesian product of per-dimension point lists, row-major order."""

    axes: Tuple[np.ndarray, ...]

    def __init__(self, axes: Sequence[Sequence[float]]):
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        if not axes or any(len(a) == 0 for a in axes):
            raise ValueError("grid axes must be nonempty")
        object.__setattr__(self, "axes", axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    def points(self) -> np.ndarray:
        pts = list(itertools.product(*self.axes))
        return np.asarray(pts, dtype=float)

    def __len__(self) -> int:
        return int(np.prod(self.shape))

    @classmethod
    def linspace(cls, bounds: np.ndarray, n_points: int) -> "DesignGrid":
        return cls([np.linspace(lo, hi, n_points) for lo, hi in bounds])


@dataclass(frozen=True)
class SweepResult:
    """All grid estimates plus the argmax of the replicate means."""

    grid: DesignGrid
    estimates: Tuple[UtilityEstimate, ...]
    argmax: np.ndarray
    max_value: float
    n_failed_points: int = 0

    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.estimates])

    def stds(self) -> np.ndarray:
        return np.array([e.std for e in self.estimates])


def grid_sweep(model: ImplicitModel, estimator_kind: str, grid: DesignGrid,
               cfg: EstimatorConfig, rng: RngStream,
               workers: int = 1) -> SweepResult:
    """Evaluate the chosen estimator at every grid point.

    Points failing with an estimation error are skipped (recorded as NaN)
    as long as no more than 10% of the grid fails.  Ties in the argmax
    break toward the lowest linear grid index.
    """
    points = grid.points()
    bounds = model.design_bounds()
    if np.any(points < bounds[:, 0]) or np.any(points > bounds[:, 1]):
        raise DomainError("grid extends outside the model design bounds")

    def eval_point(idx, xi):
        try:
            return estimate_utility(model, xi, estimator_kind, cfg, rng.child(idx))
        except (EstimationError, RatioFitError, DomainError,
                np.linalg.LinAlgError):
            return None

    results = Parallel(n_jobs=workers, prefer="processes")(
        delayed(eval_point)(idx, xi) for idx, xi in enumerate(points)
    )
    n_failed = sum(r is None for r in results)
    if n_failed > 0.1 * len(points):
        raise SweepError(f"{n_failed}/{len(points)} grid points failed")
    estimates = tuple(
        r
        if r is not None
        else UtilityEstimate(design=points[i], mean=np.nan, std=np.nan,
                             n_replicates=0, n_outer=cfg.n_outer,
                             estimator_kind=estimator_kind, seed=rng.master_seed)
        for i, r in enumerate(results)
    )
    means = np.array([e.mean for e in estimates])
    best = int(np.nanargmax(means))
    return SweepResult(grid=grid, estimates=estimates, argmax=points[best],
                       max_value=float(means[best]), n_failed_points=n_failed)


def export_curve(sweep: SweepResult) -> List[dict]:
    """Rows (xi..., mean, std) in grid order, ready for CSV writing."""
    rows = []
    for est in sweep.estimates:
        row = {f"xi{j}": float(x) for j, x in enumerate(np.atleast_1d(est.design))}
        row["mean"] = est.mean
        row["std"] = est.std
        rows.append(row)
    return rows


@dataclass
class BoState:
    """Evaluated designs, surrogate hyperparameters, and acquisition trace."""

    designs: np.ndarray
    values: np.ndarray
    value_stds: np.ndarray
    best_design: np.ndarray
    best_value: float
    trace: List[dict] = field(default_factory=list)
    surrogate_params: Optional[dict] = None
    fallback_random: bool = False


def _expected_improvement(mu, sd, best):
    sd = np.maximum(sd, 1e-12)
    gap = mu - best - EI_JITTER
    zscore = gap / sd
    return gap * norm.cdf(zscore) + sd * norm.pdf(zscore)


def bayes_opt(model: ImplicitModel, estimator_kind: str, bounds,
              budget_epochs: int, batch: int, cfg: EstimatorConfig,
              rng: RngStream, evaluator=None, ei_tol: float = 0.0) -> BoState:
    """Maximize the expected utility with a GP surrogate and EI acquisition.

    The initial design is a 5 * n_xi point Latin hypercube; each epoch fits
    the surrogate to all (design, utility mean) pairs, feeding replicate
    variances into the observation-noise term, and acquires ``batch`` new
    points by multi-start maximization of expected improvement.  On a
    surrogate fit failure the remaining budget falls back to random search
    (flagged in the returned state).  ``evaluator`` may override the
    utility call; it receives (xi, stream) and returns (mean, std).
    With ``ei_tol`` > 0 the search stops early once the best acquired
    expected improvement in an epoch falls below the tolerance.
    """
    bounds = np.asarray(bounds, dtype=float)
    if budget_epochs < 1:
        raise ValueError("budget_epochs must be >= 1")
    n_dim = len(bounds)
    span = bounds[:, 1] - bounds[:, 0]

    if evaluator is None:
        def evaluator(xi, stream):
            est = estimate_utility(model, xi, estimator_kind, cfg, stream)
            return est.mean, est.std

    n_init = 5 * n_dim
    sampler = qmc.LatinHypercube(d=n_dim, seed=rng.child(0).generator())
    unit = sampler.random(n_init)
    designs = bounds[:, 0] + unit * span
    values, stds = [], []
    trace = []
    eval_counter = 0

    def evaluate(xi, epoch):
        nonlocal eval_counter
        mean, std = evaluator(np.asarray(xi, dtype=float), rng.child(1, eval_counter))
        eval_counter += 1
        best_so_far = max(values + [mean]) if values else mean
        trace.append(
            {"epoch": epoch, **{f"xi{j}": float(x) for j, x in enumerate(xi)},
             "value": float(mean), "best_so_far": float(best_so_far)}
        )
        return mean, std

    for xi in designs:
        mean, std = evaluate(xi, epoch=0)
        values.append(mean)
        stds.append(std)

    fallback = False
    surrogate_params = None
    acq_gen = rng.child(2).generator()
    for epoch in range(1, budget_epochs + 1):
        proposals = None
        epoch_best_ei = np.inf
        if not fallback:
            try:
                unit_x = (designs - bounds[:, 0]) / span
                noise = np.maximum(np.asarray(stds) ** 2, 1e-10)
                kernel = ConstantKernel(1.0, (1e-3, 1e3)) * RBF(
                    0.3, (1e-2, 10.0)
                ) + WhiteKernel(1e-4, (1e-10, 1e1))
                gp = GaussianProcessRegressor(kernel=kernel, alpha=noise,
                                              normalize_y=True)
                import warnings

                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    gp.fit(unit_x, np.asarray(values))
                surrogate_params = {
                    k: (v.tolist() if isinstance(v, np.ndarray) else v)
                    for k, v in gp.kernel_.get_params().items()
                    if isinstance(v, (int, float, np.ndarray))
                }
                best = float(np.max(values))
                starts = acq_gen.uniform(size=(N_ACQ_STARTS, n_dim))
                acquired = []
                epoch_best_ei = -np.inf
                for _ in range(batch):
                    cand_best, cand_val = None, -np.inf
                    for s in starts:
                        res = minimize(
                            lambda u: -_expected_improvement(
                                *gp.predict(u[None, :], return_std=True), best
                            ),
                            s, bounds=[(0.0, 1.0)] * n_dim, method="L-BFGS-B",
                        )
                        if -res.fun > cand_val:
                            cand_best, cand_val = res.x, -res.fun
                    if cand_best is None:
                        raise RuntimeError("acquisition produced no finite value")
                    acquired.append(bounds[:, 0] + cand_best * span)
                    epoch_best_ei = max(epoch_best_ei, cand_val)
                    starts = acq_gen.uniform(size=(N_ACQ_STARTS, n_dim))
                proposals = acquired
            except Exception:
                fallback = True
        if not fallback and ei_tol > 0.0 and epoch_best_ei < ei_tol:
            break
        if proposals is None:
            proposals = bounds[:, 0] + acq_gen.uniform(size=(batch, n_dim)) * span
        for xi in proposals:
            mean, std = evaluate(xi, epoch=epoch)
            designs = np.vstack([designs, xi])
            values.append(mean)
            stds.append(std)

    values_arr = np.asarray(values)
    best_idx = int(np.argmax(values_arr))
    return BoState(
        designs=designs,
        values=values_arr,
        value_stds=np.asarray(stds),
        best_design=designs[best_idx],
        best_value=float(values_arr[best_idx]),
        trace=trace,
        surrogate_params=surrogate_params,
        fallback_random=fallback,
    )
