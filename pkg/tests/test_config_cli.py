"""Run configuration parsing and the command-line exit-code contract."""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from goaldesign.cli import main
from goaldesign.config import ConfigError, load_config, parse_config

BASE = {
    "model": {"name": "nl1d"},
    "estimator": "nmc_param",
    "grid": [[0.0, 0.5, 1.0]],
    "seed": 11,
    "workers": 1,
    "estimator_config": {"n_outer": 60, "n_inner": 60},
}


def _write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_parse_fills_defaults_and_round_trips():
    cfg = parse_config(dict(BASE))
    resolved = cfg.resolved()
    assert resolved["abc"]["epsilon"] == 0.1
    assert resolved["estimator_config"]["n_basis"] == 100
    assert resolved["epsilon_grid"] == [0.1, 0.2, 0.3, 0.4, 0.5]
    # Re-ingesting the resolved document reproduces the identical plan.
    doc = {k: v for k, v in resolved.items() if v is not None}
    again = parse_config(doc)
    assert again.resolved() == resolved


def test_unknown_keys_rejected_everywhere():
    for doc in (
        {**BASE, "mystery": 1},
        {**BASE, "abc": {"epsilonn": 0.1}},
        {**BASE, "estimator_config": {"outer": 10}},
        {**BASE, "model": {"name": "nl1d", "extra": 1}},
    ):
        with pytest.raises(ConfigError):
            parse_config(doc)


def test_invalid_values_rejected():
    for doc in (
        {**BASE, "model": {"name": "unknown-model"}},
        {**BASE, "estimator": "nope"},
        {**BASE, "seed": -1},
        {**BASE, "workers": 0},
        {**BASE, "epsilon_grid": []},
        {**BASE, "epsilon_grid": [-0.1]},
        {**BASE, "abc": {"epsilon": -1.0}},
        {"grid": [[0.5]]},
    ):
        with pytest.raises(ConfigError):
            parse_config(doc)


def test_load_config_reports_line_numbers(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "model": {,}\n}\n')
    with pytest.raises(ConfigError, match=r":2:\d+"):
        load_config(str(path))


def test_sweep_writes_artifacts_and_is_rerun_stable(tmp_path):
    runner = CliRunner()
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    cfg_path = _write(tmp_path, {**BASE, "out": out1})
    res = runner.invoke(main, ["sweep", "--config", cfg_path])
    assert res.exit_code == 0, res.output
    for name in ("curve.csv", "curve.svg", "manifest.json",
                 "resolved_config.json"):
        assert os.path.exists(os.path.join(out1, name))
    manifest = json.load(open(os.path.join(out1, "manifest.json")))
    assert manifest["failure_count"] == 0
    assert "curve.csv" in manifest["artifacts"]

    res2 = runner.invoke(main, ["sweep", "--config", cfg_path, "--out", out2])
    assert res2.exit_code == 0
    assert open(os.path.join(out1, "curve.csv"), "rb").read() == \
        open(os.path.join(out2, "curve.csv"), "rb").read()
    assert open(os.path.join(out1, "curve.svg"), "rb").read() == \
        open(os.path.join(out2, "curve.svg"), "rb").read()


def test_sweep_csv_has_row_per_grid_point(tmp_path):
    runner = CliRunner()
    out = str(tmp_path / "r")
    cfg_path = _write(tmp_path, {**BASE, "out": out})
    assert runner.invoke(main, ["sweep", "--config", cfg_path]).exit_code == 0
    lines = open(os.path.join(out, "curve.csv")).read().splitlines()
    assert lines[0] == "xi0,mean,std"
    assert len(lines) == 1 + 3


def test_seed_override_changes_results(tmp_path):
    runner = CliRunner()
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    cfg_path = _write(tmp_path, {**BASE, "out": out1})
    runner.invoke(main, ["sweep", "--config", cfg_path])
    runner.invoke(main, ["sweep", "--config", cfg_path, "--seed", "99",
                         "--out", out2])
    assert open(os.path.join(out1, "curve.csv")).read() != \
        open(os.path.join(out2, "curve.csv")).read()


def test_usage_errors_exit_1(tmp_path):
    runner = CliRunner()
    bad = _write(tmp_path, {**BASE, "grid": None}, "noGrid.json")
    assert runner.invoke(main, ["sweep", "--config", bad]).exit_code == 1
    empty = _write(tmp_path, {**BASE, "grid": [[]]}, "empty.json")
    assert runner.invoke(main, ["sweep", "--config", empty]).exit_code == 1
    unknown = _write(tmp_path, {**BASE, "zzz": 1}, "unknown.json")
    assert runner.invoke(main, ["sweep", "--config", unknown]).exit_code == 1
    assert runner.invoke(main, ["benchmark", "--suite", "no-such-suite"]
                         ).exit_code == 1


def test_abc_cv_table(tmp_path):
    runner = CliRunner()
    out = str(tmp_path / "cv")
    cfg_path = _write(tmp_path, {
        "model": {"name": "nl1d"},
        "grid": [[0.5]],
        "epsilon_grid": [0.2, 0.4],
        "abc": {"n_pool": 400},
        "out": out,
        "seed": 2,
    })
    res = runner.invoke(main, ["abc-cv", "--config", cfg_path])
    assert res.exit_code == 0, res.output
    lines = open(os.path.join(out, "threshold_errors.csv")).read().splitlines()
    assert lines[0] == "epsilon,param_index,median_abs_error"
    assert len(lines) == 1 + 2  # two thresholds x one parameter
    selected = json.load(open(os.path.join(out, "threshold_selected.json")))
    assert selected["epsilon"] in (0.2, 0.4)


def test_abc_cv_rejects_bad_epsilon_grid(tmp_path):
    runner = CliRunner()
    cfg_path = _write(tmp_path, {
        "model": {"name": "nl1d"}, "grid": [[0.5]],
        "epsilon_grid": [0.0], "out": str(tmp_path / "x"),
    })
    assert runner.invoke(main, ["abc-cv", "--config", cfg_path]).exit_code == 1


def test_ratio_fit_outputs_and_malformed_input(tmp_path):
    gen = np.random.default_rng(0)
    p_path, q_path = tmp_path / "p.csv", tmp_path / "q.csv"
    np.savetxt(p_path, gen.normal(0, 1, (400, 1)), delimiter=",")
    np.savetxt(q_path, gen.normal(0, 1, (400, 1)), delimiter=",")
    out = str(tmp_path / "rf")
    cfg_path = _write(tmp_path, {
        "model": {"name": "nl1d"}, "samples_p": str(p_path),
        "samples_q": str(q_path), "out": out, "seed": 4,
    })
    runner = CliRunner()
    res = runner.invoke(main, ["ratio-fit", "--config", cfg_path])
    assert res.exit_code == 0, res.output
    diag = json.load(open(os.path.join(out, "diagnostics.json")))
    assert 0.8 <= diag["mean_ratio_under_q"] <= 1.2
    assert os.path.exists(os.path.join(out, "ratio_model.json"))
    assert os.path.exists(os.path.join(out, "cv_table.csv"))

    bad = tmp_path / "bad.csv"
    bad.write_text("not,numbers\nat,all\n")
    cfg_bad = _write(tmp_path, {
        "model": {"name": "nl1d"}, "samples_p": str(bad),
        "samples_q": str(q_path), "out": str(tmp_path / "rf2"),
    }, "bad_rf.json")
    assert runner.invoke(main, ["ratio-fit", "--config", cfg_bad]).exit_code == 1


def test_optimize_writes_trace_and_best(tmp_path):
    runner = CliRunner()
    out = str(tmp_path / "opt")
    cfg_path = _write(tmp_path, {
        "model": {"name": "nl1d"}, "estimator": "nmc_param",
        "bounds": [[0.0, 1.0]], "budget_epochs": 1, "batch": 1,
        "estimator_config": {"n_outer": 40, "n_inner": 40},
        "out": out, "seed": 6,
    })
    res = runner.invoke(main, ["optimize", "--config", cfg_path])
    assert res.exit_code == 0, res.output
    best = json.load(open(os.path.join(out, "best.json")))
    assert 0.0 <= best["xi"][0] <= 1.0
    trace = open(os.path.join(out, "bo_trace.csv")).read().splitlines()
    assert len(trace) == 1 + 5 + 1  # header + LHS init + one epoch of batch 1

    bad = _write(tmp_path, {
        "model": {"name": "nl1d"}, "bounds": [[1.0, 0.0]],
        "out": str(tmp_path / "o2"),
    }, "badBounds.json")
    assert runner.invoke(main, ["optimize", "--config", bad]).exit_code == 1


def test_outputs_confined_to_out_dir(tmp_path):
    runner = CliRunner()
    out = str(tmp_path / "only")
    cfg_path = _write(tmp_path, {**BASE, "out": out})
    before = set(os.listdir(tmp_path))
    runner.invoke(main, ["sweep", "--config", cfg_path])
    after = set(os.listdir(tmp_path))
    assert after - before == {"only"}
