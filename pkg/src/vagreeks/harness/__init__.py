"""Experiment orchestration and the command-line interface."""

from .config import ExperimentConfig, MethodSpec, Sizes, desk_scale, load_config, full_scale
from .experiments import (
    ComparisonReport,
    SensitivityReport,
    StageError,
    Vary,
    prepare,
    run_comparison,
    run_sensitivity,
)
from .reports import emit_reports
from .seeds import derive_seed

__all__ = [
    "ExperimentConfig",
    "MethodSpec",
    "Sizes",
    "desk_scale",
    "load_config",
    "full_scale",
    "ComparisonReport",
    "SensitivityReport",
    "StageError",
    "Vary",
    "prepare",
    "run_comparison",
    "run_sensitivity",
    "emit_reports",
    "derive_seed",
]
