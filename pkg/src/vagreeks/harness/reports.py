"""CSV and JSON report emission.

Wall-clock timings go to separate ``*_timing.csv`` files so that the result
CSVs are byte-identical across reruns with the same master seed.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import platform
from importlib import metadata
from pathlib import Path

from ..metamodel import write_history_csv
from .config import ExperimentConfig
from .experiments import ComparisonReport, SensitivityReport
from .seeds import derive_seed

__all__ = [
    "COMPARISON_COLUMNS",
    "SENSITIVITY_COLUMNS",
    "SCATTER_COLUMNS",
    "emit_reports",
    "read_csv_rows",
]

COMPARISON_COLUMNS = ["replication", "method", "delta_estimate", "delta_mc", "rel_error"]
COMPARISON_SUMMARY_COLUMNS = ["method", "mean_rel_error", "std_rel_error", "mean_abs_rel_error"]
COMPARISON_TIMING_COLUMNS = [
    "replication", "method", "portfolio_seconds", "per_policy_seconds", "rep_mc_seconds",
]
SENSITIVITY_COLUMNS = [
    "vary", "r", "t", "v", "realization", "delta_estimate", "delta_mc", "rel_error", "iterations",
]
SENSITIVITY_SUMMARY_COLUMNS = [
    "vary", "r", "t", "v", "realizations", "mean_rel_error", "std_rel_error",
    "mean_iterations", "std_iterations",
]
SENSITIVITY_TIMING_COLUMNS = [
    "vary", "r", "t", "v", "realizations", "mean_seconds", "std_seconds", "mean_estimate_seconds",
]
SCATTER_COLUMNS = ["mc_delta", "nn_delta"]


def _fmt(x):
    return repr(float(x)) if isinstance(x, float) else x


def _write(path: Path, header, rows) -> Path:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror}") from exc
    return path


def read_csv_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "click", "pyyaml", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            pass
    return out


def emit_reports(
    out_dir: str | Path,
    cfg: ExperimentConfig,
    comparison: ComparisonReport | None = None,
    sensitivity: SensitivityReport | None = None,
) -> list[Path]:
    """Write the reports for the results given; returns the written paths.

    A section that is not given keeps its existing files, or gets header-only
    CSVs when none exist yet, so ``compare`` and ``sensitivity`` can share an
    output directory.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def section(files, present: bool):
        for name, header, rows in files:
            path = out / name
            if present or not path.exists():
                written.append(_write(path, header, rows if present else ()))

    comp = comparison or ComparisonReport()
    section(
        [
            ("comparison.csv", COMPARISON_COLUMNS,
             ((r.replication, r.method, r.estimate, r.delta_mc, r.rel_error) for r in comp.rows)),
            ("comparison_summary.csv", COMPARISON_SUMMARY_COLUMNS,
             ((s["method"], s["mean_rel_error"], s["std_rel_error"], s["mean_abs_rel_error"])
              for s in comp.summary())),
            ("comparison_timing.csv", COMPARISON_TIMING_COLUMNS,
             ((r.replication, r.method, r.portfolio_seconds, r.per_policy_seconds, r.rep_mc_seconds)
              for r in comp.rows)),
            ("scatter.csv", SCATTER_COLUMNS, comp.scatter),
        ],
        comparison is not None,
    )
    sens = sensitivity or SensitivityReport()
    section(
        [
            ("sensitivity.csv", SENSITIVITY_COLUMNS,
             ((r.vary, *r.sizes, r.realization, r.estimate, r.delta_mc, r.rel_error, r.iterations)
              for r in sens.rows)),
            ("sensitivity_summary.csv", SENSITIVITY_SUMMARY_COLUMNS,
             ((s["vary"], *s["sizes"], s["realizations"], s["mean_rel_error"], s["std_rel_error"],
               s["mean_iterations"], s["std_iterations"]) for s in sens.summary())),
            ("sensitivity_timing.csv", SENSITIVITY_TIMING_COLUMNS,
             ((s["vary"], *s["sizes"], s["realizations"], s["mean_seconds"], s["std_seconds"],
               s["mean_estimate_seconds"]) for s in sens.summary())),
        ],
        sensitivity is not None,
    )
    comparison = comp
    for rep, state in sorted(comparison.histories.items()):
        path = out / f"history_rep{rep}.csv"
        write_history_csv(state, path)
        written.append(path)
    manifest = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_dict(),
        "seeds": {
            "master": cfg.seed,
            "input": derive_seed(cfg.seed, "input"),
            "mc": derive_seed(cfg.seed, "mc"),
            "training": derive_seed(cfg.seed, "training", 0),
            "validation": derive_seed(cfg.seed, "validation", 0),
            "train": derive_seed(cfg.seed, "train"),
            "representatives": [
                derive_seed(cfg.seed, "representatives", r) for r in range(cfg.replications)
            ],
        },
        "versions": _versions(),
        "mc_seconds": comparison.mc_seconds,
        "files": sorted(p.name for p in out.iterdir() if p.suffix == ".csv"),
    }
    path = out / "manifest.json"
    try:
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror}") from exc
    written.append(path)
    return written
