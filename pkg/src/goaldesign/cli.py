"""Command-line frontend: sweeps, optimization, diagnostics, benchmarks.

All commands are driven by a JSON configuration file plus a few override
flags.  Artifacts (CSV tables, SVG figures, the resolved configuration,
and a run manifest) are written atomically under the configured output
directory.  Exit codes: 0 success, 1 usage or configuration error,
2 partial computational failure, 3 internal error.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import tempfile
import time
import traceback
from typing import Dict, List, Optional

import click
import numpy as np

from . import __version__
from .abc import build_pool, cv_select_threshold, error_table_rows
from .config import ConfigError, RunConfig, load_config
from .densratio import RatioFitError, cross_validate, fit_rulsif
from .design_opt import SweepError, bayes_opt, export_curve, grid_sweep
from .models.base import DomainError
from .rng import RngStream

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_INTERNAL = 3


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows: List[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


class _Run:
    """Shared per-command plumbing: config, output dir, manifest."""

    def __init__(self, config_path: str, seed: Optional[int],
                 workers: Optional[int], out: Optional[str]):
        cfg = load_config(config_path)
        if seed is not None:
            cfg = _replace(cfg, seed=seed)
        if workers is not None:
            cfg = _replace(cfg, workers=workers)
        if out is not None:
            cfg = _replace(cfg, out=out)
        self.cfg = cfg
        self.artifacts: List[str] = []
        self.failure_count = 0
        self.t_start = time.time()

    def path(self, name: str) -> str:
        return os.path.join(self.cfg.out, name)

    def write(self, name: str, data: str) -> str:
        path = self.path(name)
        _atomic_write(path, data)
        self.artifacts.append(name)
        return path

    def finish(self) -> None:
        self.write("resolved_config.json",
                   json.dumps(self.cfg.resolved(), indent=2) + "\n")
        manifest = {
            "config": self.cfg.resolved(),
            "artifacts": sorted(set(self.artifacts)) + ["manifest.json"],
            "wall_time_s": round(time.time() - self.t_start, 3),
            "failure_count": self.failure_count,
            "version": __version__,
        }
        _atomic_write(self.path("manifest.json"),
                      json.dumps(manifest, indent=2) + "\n")


def _replace(cfg: RunConfig, **kw) -> RunConfig:
    import dataclasses

    return dataclasses.replace(cfg, **kw)


def _run_command(body) -> int:
    """Translate exceptions into the stable exit-code contract."""
    try:
        return body() or EXIT_OK
    except (ConfigError, DomainError, ValueError, KeyError,
            FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    except (SweepError, RatioFitError) as exc:
        click.echo(f"computation failed: {exc}", err=True)
        return EXIT_PARTIAL
    except Exception:
        click.echo("internal error:\n" + traceback.format_exc(), err=True)
        return EXIT_INTERNAL


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=True, dir_okay=False),
                      help="JSON run configuration.")(fn)
    fn = click.option("--seed", type=click.IntRange(min=0), default=None,
                      help="Override the master seed.")(fn)
    fn = click.option("--workers", type=click.IntRange(min=1), default=None,
                      help="Override the worker count.")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None,
                      help="Override the output directory.")(fn)
    return fn


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Goal-oriented experimental design for simulator-only models."""


@main.command()
@_common_options
def sweep(config_path, seed, workers, out):
    """Evaluate the expected utility on a design grid; write curve and plot."""

    def body():
        run = _Run(config_path, seed, workers, out)
        cfg = run.cfg
        model = cfg.build_model()
        grid = cfg.build_grid()
        result = grid_sweep(model, cfg.estimator, grid,
                            cfg.build_estimator_config(),
                            RngStream(cfg.seed), workers=cfg.workers)
        run.failure_count = result.n_failed_points
        run.write("curve.csv", _csv_text(export_curve(result)))
        if len(grid.axes) <= 2:
            from .plots import save_sweep_figure

            save_sweep_figure(result, run.path("curve.svg"),
                              title=f"{cfg.model_name} / {cfg.estimator}")
            run.artifacts.append("curve.svg")
        run.finish()
        click.echo(f"argmax {np.round(result.argmax, 4).tolist()} "
                   f"value {result.max_value:.4f} "
                   f"({result.n_failed_points} failed points)")
        return EXIT_OK

    sys.exit(_run_command(body))


@main.command()
@_common_options
def optimize(config_path, seed, workers, out):
    """Search the design space with a Gaussian-process surrogate."""

    def body():
        run = _Run(config_path, seed, workers, out)
        cfg = run.cfg
        model = cfg.build_model()
        bounds = cfg.build_bounds()
        state = bayes_opt(model, cfg.estimator, bounds, cfg.budget_epochs,
                          cfg.batch, cfg.build_estimator_config(),
                          RngStream(cfg.seed))
        run.write("bo_trace.csv", _csv_text(state.trace))
        best = {
            "xi": state.best_design.tolist(),
            "value": state.best_value,
            "epochs": cfg.budget_epochs,
            "n_evaluations": int(len(state.values)),
            "fallback_random": state.fallback_random,
        }
        run.write("best.json", json.dumps(best, indent=2) + "\n")
        run.finish()
        click.echo(f"best {np.round(state.best_design, 4).tolist()} "
                   f"value {state.best_value:.4f}")
        return EXIT_PARTIAL if state.fallback_random else EXIT_OK

    sys.exit(_run_command(body))


@main.command("abc-cv")
@_common_options
def abc_cv(config_path, seed, workers, out):
    """Select the rejection threshold by cross-validation; write error table."""

    def body():
        run = _Run(config_path, seed, workers, out)
        cfg = run.cfg
        model = cfg.build_model()
        if not cfg.grid or len(cfg.grid) != 1 or len(cfg.grid[0]) != 1:
            raise ConfigError(
                "abc-cv requires 'grid' holding the single design point, "
                "e.g. [[0.4]]")
        xi = np.asarray(cfg.grid[0], dtype=float)
        stream = RngStream(cfg.seed)
        abc_cfg = cfg.build_abc_config()
        pool = build_pool(model, xi, abc_cfg.n_pool, "observation",
                          stream.child(0),
                          normalize=abc_cfg.normalize_summaries)
        eps_star, table = cv_select_threshold(
            pool, cfg.epsilon_grid, n_holdout=min(200, abc_cfg.n_pool),
            mode=abc_cfg.adjustment, rng=stream.child(1),
            min_accept=abc_cfg.min_accept, config=abc_cfg)
        run.write("threshold_errors.csv", error_table_rows(table))
        run.write("threshold_selected.json",
                  json.dumps({"epsilon": eps_star}, indent=2) + "\n")
        run.finish()
        click.echo(f"selected epsilon {eps_star}")
        return EXIT_OK

    sys.exit(_run_command(body))


def _load_samples(path: str) -> np.ndarray:
    if path.endswith(".npy"):
        data = np.load(path)
    else:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or len(data) == 0 or not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: expected a finite 2-D numeric array")
    return data


@main.command("ratio-fit")
@_common_options
def ratio_fit(config_path, seed, workers, out):
    """Fit a density-ratio model to two sample files; write model + CV table."""

    def body():
        run = _Run(config_path, seed, workers, out)
        cfg = run.cfg
        if not cfg.samples_p or not cfg.samples_q:
            raise ConfigError("ratio-fit requires 'samples_p' and 'samples_q' paths")
        try:
            xp = _load_samples(cfg.samples_p)
            xq = _load_samples(cfg.samples_q)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        stream = RngStream(cfg.seed)
        est = cfg.estimator_config
        grid = cfg.build_cv_grid()
        _, _, table = cross_validate(xp, xq, grid=grid, n_basis=est["n_basis"],
                                     rng=stream.child(0), alpha=est["alpha"])
        model = fit_rulsif(xp, xq, alpha=est["alpha"], grid=grid,
                           n_basis=est["n_basis"], rng=stream.child(0))
        ratios = model.evaluate(xq)
        diagnostics = {
            "sigma": model.sigma,
            "lambda": model.lam,
            "alpha": model.alpha,
            "mean_ratio_under_q": float(ratios.mean()),
            "heldout_loss": float(min(row[2] for row in table)),
        }
        run.write("ratio_model.json", model.to_json() + "\n")
        run.write("cv_table.csv", _csv_text(
            [{"sigma": s, "lambda": l, "score": v} for s, l, v in table]))
        run.write("diagnostics.json", json.dumps(diagnostics, indent=2) + "\n")
        run.finish()
        click.echo(f"sigma {model.sigma:.4g} lambda {model.lam:.4g} "
                   f"mean ratio {diagnostics['mean_ratio_under_q']:.3f}")
        return EXIT_OK

    sys.exit(_run_command(body))


@main.command()
@click.option("--suite", required=True, help="Suite name (see docs).")
@click.option("--seed", type=click.IntRange(min=0), default=0)
@click.option("--workers", type=click.IntRange(min=1), default=8)
def benchmark(suite, seed, workers):
    """Run a named reproduction suite and print pass/fail per check."""

    def body():
        from .suites import run_suite

        result = run_suite(suite, seed=seed, workers=workers)
        click.echo(result.summary())
        return EXIT_OK if result.passed else EXIT_PARTIAL

    sys.exit(_run_command(body))


if __name__ == "__main__":
    main()
