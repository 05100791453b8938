"""JSON run configuration: strict parsing, defaults, and resolution.

A run is described by a single JSON document.  Unknown keys are rejected,
every omitted field is filled from its documented default, and the fully
resolved configuration is emitted alongside the run artifacts so a rerun
from the resolved file reproduces the same plan bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .abc import DEFAULT_EPSILON_GRID, AbcConfig
from .densratio import CvGrid
from .design_opt import DesignGrid
from .estimators import ESTIMATOR_KINDS, EstimatorConfig
from .models import MODEL_REGISTRY

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


_ABC_DEFAULTS = {
    "epsilon": 0.1,
    "n_pool": 10000,
    "adjustment": "linear",
    "normalize_summaries": True,
    "min_accept": 50,
    "mlp_hidden": 10,
    "mlp_steps": 500,
    "mlp_lr": 1e-2,
}
_CV_DEFAULTS = {"sigmas": None, "lambdas": [1e-3, 1e-2, 1e-1, 1.0], "folds": 5}
_EST_DEFAULTS = {
    "n_outer": 1000,
    "n_replicates": 1,
    "n_inner": 1000,
    "n_basis": 100,
    "alpha": 0.0,
    "ratio_space": "auto",
    "n_denominator": None,
    "max_failure_frac": 0.2,
}
_TOP_DEFAULTS = {
    "estimator": "dr2",
    "grid": None,
    "bounds": None,
    "budget_epochs": 10,
    "batch": 1,
    "epsilon_grid": list(DEFAULT_EPSILON_GRID),
    "seed": 0,
    "out": "run_output",
    "workers": 1,
    "samples_p": None,
    "samples_q": None,
}


def _check_keys(section: Dict[str, Any], allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _merged(section: Optional[Dict[str, Any]], defaults: Dict[str, Any],
            where: str) -> Dict[str, Any]:
    section = dict(section or {})
    _check_keys(section, defaults, where)
    out = dict(defaults)
    out.update(section)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully defaulted description of one run."""

    model_name: str
    model_options: Dict[str, Any] = field(default_factory=dict)
    estimator: str = "dr2"
    grid: Optional[List[List[float]]] = None
    bounds: Optional[List[List[float]]] = None
    budget_epochs: int = 10
    batch: int = 1
    epsilon_grid: List[float] = field(
        default_factory=lambda: list(DEFAULT_EPSILON_GRID))
    seed: int = 0
    out: str = "run_output"
    workers: int = 1
    samples_p: Optional[str] = None
    samples_q: Optional[str] = None
    abc: Dict[str, Any] = field(default_factory=lambda: dict(_ABC_DEFAULTS))
    cv_grid: Dict[str, Any] = field(default_factory=lambda: dict(_CV_DEFAULTS))
    estimator_config: Dict[str, Any] = field(
        default_factory=lambda: dict(_EST_DEFAULTS))

    def build_model(self):
        return MODEL_REGISTRY[self.model_name](**self.model_options)

    def build_abc_config(self) -> AbcConfig:
        return AbcConfig(**self.abc)

    def build_cv_grid(self) -> CvGrid:
        kwargs = dict(self.cv_grid)
        if kwargs.get("sigmas") is not None:
            kwargs["sigmas"] = tuple(kwargs["sigmas"])
        kwargs["lambdas"] = tuple(kwargs["lambdas"])
        return CvGrid(**kwargs)

    def build_estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(abc=self.build_abc_config(),
                               ratio_grid=self.build_cv_grid(),
                               **self.estimator_config)

    def build_grid(self) -> DesignGrid:
        if not self.grid:
            raise ConfigError("this command requires a nonempty 'grid'")
        return DesignGrid(self.grid)

    def build_bounds(self) -> np.ndarray:
        if not self.bounds:
            raise ConfigError("this command requires 'bounds'")
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2 or np.any(
                bounds[:, 0] >= bounds[:, 1]):
            raise ConfigError("'bounds' must be rows of [low, high] with low < high")
        return bounds

    def resolved(self) -> Dict[str, Any]:
        """Every field including filled defaults, as a JSON-ready dict."""
        return {
            "model": {"name": self.model_name, "options": dict(self.model_options)},
            "estimator": self.estimator,
            "grid": self.grid,
            "bounds": self.bounds,
            "budget_epochs": self.budget_epochs,
            "batch": self.batch,
            "epsilon_grid": list(self.epsilon_grid),
            "seed": self.seed,
            "out": self.out,
            "workers": self.workers,
            "samples_p": self.samples_p,
            "samples_q": self.samples_q,
            "abc": dict(self.abc),
            "cv_grid": dict(self.cv_grid),
            "estimator_config": dict(self.estimator_config),
        }


def parse_config(document: Dict[str, Any]) -> RunConfig:
    """Validate a decoded JSON document and fill defaults."""
    if not isinstance(document, dict):
        raise ConfigError("configuration root must be a JSON object")
    allowed_top = set(_TOP_DEFAULTS) | {"model", "abc", "cv_grid",
                                        "estimator_config"}
    _check_keys(document, allowed_top, "configuration root")

    model = document.get("model")
    if not isinstance(model, dict) or "name" not in model:
        raise ConfigError("'model' must be an object with a 'name' key")
    _check_keys(model, ("name", "options"), "'model'")
    if model["name"] not in MODEL_REGISTRY:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise ConfigError(f"unknown model {model['name']!r}; known models: {known}")

    top = _merged({k: v for k, v in document.items()
                   if k in _TOP_DEFAULTS}, _TOP_DEFAULTS, "configuration root")
    if top["estimator"] not in ESTIMATOR_KINDS:
        raise ConfigError(
            f"unknown estimator {top['estimator']!r}; "
            f"known estimators: {', '.join(ESTIMATOR_KINDS)}")
    if not isinstance(top["seed"], int) or top["seed"] < 0:
        raise ConfigError("'seed' must be a nonnegative integer")
    if not isinstance(top["workers"], int) or top["workers"] < 1:
        raise ConfigError("'workers' must be a positive integer")
    eps_grid = top["epsilon_grid"]
    if (not isinstance(eps_grid, list) or not eps_grid
            or any(not isinstance(e, (int, float)) or e <= 0 for e in eps_grid)):
        raise ConfigError("'epsilon_grid' must be a nonempty list of positive numbers")

    cfg = RunConfig(
        model_name=model["name"],
        model_options=dict(model.get("options", {})),
        estimator=top["estimator"],
        grid=top["grid"],
        bounds=top["bounds"],
        budget_epochs=top["budget_epochs"],
        batch=top["batch"],
        epsilon_grid=[float(e) for e in eps_grid],
        seed=top["seed"],
        out=top["out"],
        workers=top["workers"],
        samples_p=top["samples_p"],
        samples_q=top["samples_q"],
        abc=_merged(document.get("abc"), _ABC_DEFAULTS, "'abc'"),
        cv_grid=_merged(document.get("cv_grid"), _CV_DEFAULTS, "'cv_grid'"),
        estimator_config=_merged(document.get("estimator_config"),
                                 _EST_DEFAULTS, "'estimator_config'"),
    )
    # Trigger constructor validation now so errors surface before computation.
    try:
        cfg.build_model()
        cfg.build_abc_config()
        cfg.build_cv_grid()
        cfg.build_estimator_config()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str) -> RunConfig:
    """Read and validate a JSON configuration file.

    Parse failures report the line and column from the JSON decoder.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return parse_config(document)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
