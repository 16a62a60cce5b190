"""Mini-batch Nesterov training of the metamodel."""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..portfolio import VaContract
from .features import FeatureConfig
from .network import Metamodel, estimate_from_features, gradient_from_features
from .stopping import detect_stopping, relative_error

__all__ = [
    "TrainConfig",
    "StopReason",
    "TrainState",
    "TrainRecord",
    "TrainingDiverged",
    "momentum_coeff",
    "nag_step",
    "train",
    "write_history_csv",
]

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1.0
    batch_size: int = 20
    mu_max: float = 0.99
    record_interval: int = 50
    smoothing_window: int = 10
    poly_degree: int = 6
    trend_window: int = 4
    rel_err_threshold: float = 0.005
    max_iterations: int = 20_000
    seed: int = 0
    early_stopping: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.record_interval < 1:
            raise ValueError("learning_rate, batch_size and record_interval must be positive")
        if not 0.0 <= self.mu_max <= 1.0:
            raise ValueError("mu_max must lie in [0, 1]")
        if self.smoothing_window < 1 or self.trend_window < 2:
            raise ValueError("smoothing_window must be >= 1 and trend_window >= 2")
        if self.poly_degree < 2 or self.poly_degree % 2:
            raise ValueError("poly_degree must be even and >= 2")
        if not self.rel_err_threshold > 0:
            raise ValueError("rel_err_threshold must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


class StopReason(enum.Enum):
    NONE = "none"
    TREND_U_SHAPE = "trend_u_shape"
    REL_ERR_BELOW_DELTA = "rel_err_below_delta"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class TrainRecord:
    iteration: int
    train_mse: float
    val_mse: float
    mu: float
    rel_err: float


@dataclass
class TrainState:
    theta: np.ndarray
    velocity: np.ndarray
    iteration: int = 0
    records: list[TrainRecord] = field(default_factory=list)
    trend: np.ndarray = field(default_factory=lambda: np.zeros(0))
    event_seen: bool = False
    stop_reason: StopReason = StopReason.NONE

    @classmethod
    def start(cls, theta: np.ndarray) -> "TrainState":
        theta = np.asarray(theta, dtype=float).copy()
        return cls(theta=theta, velocity=np.zeros_like(theta))


def momentum_coeff(t: int, mu_max: float) -> float:
    """``min(1 - 2^(-1 - log2(floor(t/50) + 1)), mu_max)``."""
    if t < 1:
        raise ValueError("iteration counter starts at 1")
    return min(1.0 - 2.0 ** (-1.0 - math.log2(t // 50 + 1)), mu_max)


def nag_step(
    state: TrainState, cfg: TrainConfig, grad_at: Callable[[np.ndarray], np.ndarray]
) -> TrainState:
    """One Nesterov update; the gradient is taken at the look-ahead point."""
    t = state.iteration + 1
    mu = momentum_coeff(t, cfg.mu_max)
    g = grad_at(state.theta + mu * state.velocity)
    state.velocity = mu * state.velocity - cfg.learning_rate * g
    state.theta = state.theta + state.velocity
    state.iteration = t
    return state


@dataclass
class _Prepared:
    feats: np.ndarray
    targets: np.ndarray


def _prepare(model: Metamodel, data: Sequence[tuple[VaContract, float]]) -> _Prepared:
    contracts = [c for c, _ in data]
    targets = np.array([y for _, y in data], dtype=float) / model.scale
    return _Prepared(model.features(contracts), targets)


def _mse(model_w, model_b, prep: _Prepared, rep_y) -> float:
    yhat, _ = estimate_from_features(model_w, model_b, prep.feats, rep_y)
    return float(np.mean((yhat - prep.targets) ** 2))


def train(
    reps: Sequence[VaContract],
    rep_deltas,
    training: Sequence[tuple[VaContract, float]],
    validation: Sequence[tuple[VaContract, float]],
    cfg: TrainConfig,
    feature_config: FeatureConfig,
    warm_start: Metamodel | None = None,
    monitor: str = "validation",
) -> tuple[Metamodel, TrainState]:
    """Fit the metamodel weights.

    Stops once a u-shape has been detected in the validation trend *and* the
    relative error of the validation mean is below the threshold, or after
    ``max_iterations``.  Fully deterministic for a given ``cfg.seed``.
    """
    model = Metamodel.zeros(reps, rep_deltas, feature_config, seed=cfg.seed)
    if warm_start is not None:
        if warm_start.weights.shape != model.weights.shape:
            raise ValueError("warm-start model does not match the representative set")
        model.weights = warm_start.weights.copy()
        model.biases = warm_start.biases.copy()
    if not training:
        raise ValueError("training portfolio is empty")
    if not validation:
        raise ValueError("validation portfolio is empty")

    rep_y = model.normalised_deltas
    train_prep = _prepare(model, training)
    val_prep = _prepare(model, validation)
    n, f = model.weights.shape
    k = n * f
    batch = min(cfg.batch_size, len(training))
    rng = np.random.default_rng(cfg.seed)

    def grad_at(theta, idx):
        w = theta[:k].reshape(n, f)
        gw, gb = gradient_from_features(w, theta[k:], train_prep.feats[idx], rep_y, train_prep.targets[idx])
        return np.concatenate([gw.ravel(), gb])

    state = TrainState.start(model.parameters())
    stamps: list[int] = []
    series: list[float] = []

    def record():
        w = state.theta[:k].reshape(n, f)
        b = state.theta[k:]
        val_yhat, _ = estimate_from_features(w, b, val_prep.feats, rep_y)
        val_mse = float(np.mean((val_yhat - val_prep.targets) ** 2))
        train_mse = _mse(w, b, train_prep, rep_y)
        if not (math.isfinite(val_mse) and math.isfinite(train_mse)):
            raise TrainingDiverged(
                f"non-finite error at iteration {state.iteration} "
                f"(learning rate {cfg.learning_rate} likely too large)"
            )
        mu = momentum_coeff(max(state.iteration, 1), cfg.mu_max)
        rel = relative_error(val_yhat, val_prep.targets)
        state.records.append(TrainRecord(state.iteration, train_mse, val_mse, mu, rel))
        stamps.append(state.iteration)
        series.append(train_mse if monitor == "training" else val_mse)
        return rel

    record()
    while state.iteration < cfg.max_iterations:
        idx = rng.choice(len(training), size=batch, replace=False)
        nag_step(state, cfg, lambda th: grad_at(th, idx))
        if not np.all(np.isfinite(state.theta)):
            raise TrainingDiverged(
                f"non-finite parameters at iteration {state.iteration} "
                f"(learning rate {cfg.learning_rate} likely too large)"
            )
        if state.iteration % cfg.record_interval:
            continue
        rel = record()
        if not cfg.early_stopping:
            continue
        event, trend = detect_stopping(
            stamps, series, cfg.smoothing_window, cfg.poly_degree, cfg.trend_window
        )
        state.trend = trend
        newly_seen = event and not state.event_seen
        state.event_seen = state.event_seen or event
        if cfg.early_stopping and state.event_seen and rel < cfg.rel_err_threshold:
            state.stop_reason = (
                StopReason.TREND_U_SHAPE if newly_seen else StopReason.REL_ERR_BELOW_DELTA
            )
            break
    else:
        state.stop_reason = StopReason.MAX_ITERATIONS

    model.set_parameters(state.theta)
    log.debug("training stopped at %d: %s", state.iteration, state.stop_reason.value)
    return model, state


HISTORY_COLUMNS = ["iteration", "train_mse", "val_mse", "mu_t"]


def write_history_csv(state: TrainState, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for r in state.records:
            writer.writerow([r.iteration, repr(r.train_mse), repr(r.val_mse), repr(r.mu)])
