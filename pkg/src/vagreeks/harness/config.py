"""Experiment configuration, loaded from YAML.

Top-level keys (all optional, missing keys take the desk-scale defaults)::

    seed: 2024                 # master seed, every stage seed derives from it
    replications: 3
    output_dir: out
    sizes: {input: 10000, representatives: 100, training: 200, validation: 250}
    mc: {scenario_count: 1000, risk_free_rate: 0.03, volatility: 0.2,
         time_step_years: 1.0, bump_fraction: 0.01}
    train: {learning_rate: 1.0, batch_size: 20, mu_max: 0.99, record_interval: 50,
            smoothing_window: 10, poly_degree: 6, trend_window: 4,
            rel_err_threshold: 0.005, max_iterations: 20000}
    features: {ratio_quantiles: [0.05, 0.95]}   # null: generation-space extremes
    gamma: 1.0
    mortality: null            # CSV gender,age,qx; null uses Gompertz-Makeham
    workers: 1
    size_factor: 0.3333333333333333
    sensitivity_realizations: 5
    methods:
      - {name: nn}
      - {name: idw, power: 1}
      - {name: kriging, variogram: spherical}
      - {name: rbf, epsilon: 1}
    spaces: {input: ..., representatives: ..., training: ...}
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..mc_engine import McConfig
from ..metamodel import TrainConfig
from ..portfolio import (
    INPUT_SPACE,
    REPRESENTATIVE_GRID,
    TRAINING_GRID,
    ConfigurationError,
    GenerationSpace,
)

__all__ = [
    "METHOD_KINDS",
    "MethodSpec",
    "Sizes",
    "ExperimentConfig",
    "desk_scale",
    "full_scale",
    "load_config",
]

METHOD_KINDS = ("mc", "nn", "idw", "kriging", "rbf")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    power: float = 1.0
    variogram: str = "spherical"
    epsilon: float = 1.0

    def __post_init__(self):
        if self.name not in METHOD_KINDS:
            raise ConfigurationError(f"unknown method {self.name!r}; choose from {METHOD_KINDS}")
        if self.variogram not in ("spherical", "exponential"):
            raise ConfigurationError(f"unknown variogram {self.variogram!r}")

    @property
    def label(self) -> str:
        if self.name == "idw":
            return f"IDW(p={self.power:g})"
        if self.name == "kriging":
            return "Kriging(Sph)" if self.variogram == "spherical" else "Kriging(Exp)"
        if self.name == "rbf":
            return f"RBF(eps={self.epsilon:g})"
        return self.name.upper()

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"name": self.name}
        if self.name == "idw":
            out["power"] = self.power
        elif self.name == "kriging":
            out["variogram"] = self.variogram
        elif self.name == "rbf":
            out["epsilon"] = self.epsilon
        return out


@dataclass(frozen=True)
class Sizes:
    input: int = 10_000
    representatives: int = 100
    training: int = 200
    validation: int = 250

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 1:
                raise ConfigurationError(f"size {f.name} must be positive")
        if self.validation > self.input:
            raise ConfigurationError("validation portfolio cannot exceed the input portfolio")


DEFAULT_METHODS = (
    MethodSpec("nn"),
    MethodSpec("idw", power=1.0),
    MethodSpec("idw", power=100.0),
    MethodSpec("kriging", variogram="spherical"),
    MethodSpec("kriging", variogram="exponential"),
    MethodSpec("rbf", epsilon=1.0),
)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 2024
    replications: int = 3
    output_dir: str = "out"
    sizes: Sizes = field(default_factory=Sizes)
    mc: McConfig = field(default_factory=lambda: McConfig(scenario_count=1000))
    train: TrainConfig = field(default_factory=TrainConfig)
    ratio_quantiles: tuple[float, float] | None = (0.05, 0.95)
    gamma: float = 1.0
    mortality: str | None = None
    workers: int = 1
    size_factor: float = 1.0 / 3.0
    sensitivity_realizations: int = 5
    methods: tuple[MethodSpec, ...] = DEFAULT_METHODS
    input_space: GenerationSpace = INPUT_SPACE
    representative_space: GenerationSpace = REPRESENTATIVE_GRID
    training_space: GenerationSpace = TRAINING_GRID

    def __post_init__(self):
        if not self.methods:
            raise ConfigurationError("method list is empty")
        if self.replications < 1 or self.sensitivity_realizations < 1:
            raise ConfigurationError("replication counts must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if not self.size_factor > 0:
            raise ConfigurationError("size_factor must be positive")
        if not self.representative_space.is_grid() or not self.training_space.is_grid():
            raise ConfigurationError("representative and training spaces must be grids")

    def to_dict(self) -> dict:
        mc = dataclasses.asdict(self.mc)
        mc.pop("seed")
        tr = dataclasses.asdict(self.train)
        for k in ("seed", "early_stopping"):
            tr.pop(k)
        return {
            "seed": self.seed,
            "replications": self.replications,
            "output_dir": self.output_dir,
            "sizes": dataclasses.asdict(self.sizes),
            "mc": mc,
            "train": tr,
            "features": {"ratio_quantiles": list(self.ratio_quantiles) if self.ratio_quantiles else None},
            "gamma": self.gamma,
            "mortality": self.mortality,
            "workers": self.workers,
            "size_factor": self.size_factor,
            "sensitivity_realizations": self.sensitivity_realizations,
            "methods": [m.to_dict() for m in self.methods],
            "spaces": {
                "input": self.input_space.to_dict(),
                "representatives": self.representative_space.to_dict(),
                "training": self.training_space.to_dict(),
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        base = base or cls()
        known = {
            "seed", "replications", "output_dir", "sizes", "mc", "train", "features", "gamma",
            "mortality", "workers", "size_factor", "sensitivity_realizations", "methods", "spaces",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kw: dict[str, Any] = {}
        for key in ("seed", "replications", "workers", "sensitivity_realizations"):
            if key in data:
                kw[key] = int(data[key])
        for key in ("gamma", "size_factor"):
            if key in data:
                kw[key] = float(data[key])
        for key in ("output_dir", "mortality"):
            if key in data:
                kw[key] = None if data[key] is None else str(data[key])
        try:
            if "sizes" in data:
                kw["sizes"] = dataclasses.replace(base.sizes, **{k: int(v) for k, v in data["sizes"].items()})
            if "mc" in data:
                kw["mc"] = dataclasses.replace(base.mc, **data["mc"])
            if "train" in data:
                kw["train"] = dataclasses.replace(base.train, **data["train"])
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc
        if "features" in data:
            q = (data["features"] or {}).get("ratio_quantiles")
            kw["ratio_quantiles"] = None if q is None else (float(q[0]), float(q[1]))
        if "methods" in data:
            try:
                kw["methods"] = tuple(MethodSpec(**m) for m in data["methods"])
            except TypeError as exc:
                raise ConfigurationError(f"bad method entry: {exc}") from exc
        spaces = data.get("spaces") or {}
        for key, attr in (
            ("input", "input_space"),
            ("representatives", "representative_space"),
            ("training", "training_space"),
        ):
            if key in spaces:
                kw[attr] = GenerationSpace.from_dict(spaces[key])
        return dataclasses.replace(base, **kw)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Apply ``section.key`` (or top-level ``key``) overrides; ``None`` values are skipped."""
        data: dict[str, Any] = {}
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.partition(".")
            if name:
                data.setdefault(section, {})[name] = value
            else:
                data[key] = value
        return ExperimentConfig.from_dict(data, base=self) if data else self

    def digest(self, *sections: str) -> str:
        """Stable hash of selected config sections (all when none given)."""
        d = self.to_dict()
        payload = {k: d[k] for k in sections} if sections else d
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def desk_scale() -> ExperimentConfig:
    return ExperimentConfig()


def full_scale() -> ExperimentConfig:
    return ExperimentConfig(
        replications=6,
        sizes=Sizes(input=100_000, representatives=300, training=200, validation=250),
        mc=McConfig(scenario_count=10_000),
        size_factor=1.0,
    )


def load_config(path: str | Path | None, preset: str = "desk") -> ExperimentConfig:
    presets = {"desk": desk_scale, "full": full_scale}
    if preset not in presets:
        raise ConfigurationError(f"unknown preset {preset!r}")
    base = presets[preset]()
    if path is None:
        return base
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return ExperimentConfig.from_dict(data, base=base)
