import json

import pytest
import yaml
from click.testing import CliRunner

from vagreeks.harness.cli import main
from vagreeks.harness.reports import read_csv_rows

SMALL = {
    "seed": 11,
    "replications": 1,
    "sizes": {"input": 200, "representatives": 20, "training": 30, "validation": 40},
    "mc": {"scenario_count": 80},
    "train": {"max_iterations": 800},
    "sensitivity_realizations": 2,
    "methods": [{"name": "nn"}, {"name": "idw", "power": 1}, {"name": "mc"}],
}


@pytest.fixture
def env(tmp_path):
    cfg = tmp_path / "small.yaml"
    cfg.write_text(yaml.safe_dump(SMALL))
    out = tmp_path / "out"
    runner = CliRunner()

    def run(*args, code=0):
        result = runner.invoke(main, ["--config", str(cfg), "--output-dir", str(out), *args])
        assert result.exit_code == code, result.output
        return result

    return run, out


def test_generate_value_train_estimate(env):
    run, out = env
    run("generate")
    assert {p.name for p in out.glob("*.csv")} == {
        "input.csv", "training.csv", "validation.csv", "representatives_rep0.csv"
    }
    assert len(read_csv_rows(out / "input.csv")) == 200
    run("mc-value", str(out / "representatives_rep0.csv"))
    assert len(read_csv_rows(out / "representatives_rep0_mc.csv")) == 20
    result = run("train")
    assert "stopped at iteration" in result.output and (out / "model_rep0.json").exists()
    assert (out / "model_rep0_history.csv").exists()
    run("estimate", str(out / "input.csv"), "--model", str(out / "model_rep0.json"),
        "--per-policy", str(out / "per_policy.csv"))
    assert len(read_csv_rows(out / "per_policy.csv")) == 200
    result = run("estimate", str(out / "input.csv"), "--method", "idw",
                 "--reps", str(out / "representatives_rep0.csv"),
                 "--rep-results", str(out / "representatives_rep0_mc.csv"))
    assert result.output.startswith("portfolio delta")


def test_compare_sensitivity_report(env):
    run, out = env
    result = run("compare")
    assert "NN" in result.output and "IDW(p=1)" in result.output
    rows = read_csv_rows(out / "comparison.csv")
    assert [r["method"] for r in rows] == ["NN", "IDW(p=1)", "MC"]
    assert float(rows[2]["rel_error"]) == 0.0
    run("sensitivity", "--vary", "validation", "--vary", "representatives")
    assert len(read_csv_rows(out / "sensitivity.csv")) == 4
    assert len(read_csv_rows(out / "comparison.csv")) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 11
    result = run("report")
    assert "master seed 11" in result.output and "validation" in result.output


def test_overrides_reach_the_config(env):
    run, out = env
    run("--seed", "5", "--input-size", "60", "generate")
    assert len(read_csv_rows(out / "input.csv")) == 60


def test_errors_are_reported_with_stage(env, tmp_path):
    run, out = env
    result = run("report", code=1)
    assert "error [report]" in result.output
    result = run("estimate", str(tmp_path / "small.yaml"), code=1)
    assert "error [" in result.output
    bad = tmp_path / "bad.yaml"
    bad.write_text("colour: red\n")
    result = CliRunner().invoke(main, ["--config", str(bad), "generate"])
    assert result.exit_code == 1 and "error [config]" in result.output
