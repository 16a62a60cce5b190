"""Softmax-weighted neural metamodel for portfolio Greeks."""

from .autotune import ProbeSeries, TuneError, TuneResult, auto_tune, count_extrema, is_stable, nn_probe
from .features import CATEGORICAL, TRANSFORMS, FeatureConfig, build_features, feature_tensor
from .network import Metamodel, batch_loss, forward, gradient, softmax
from .stopping import detect_stopping, fit_trend, moving_average, rel_err_stop, relative_error
from .training import (
    StopReason,
    TrainConfig,
    TrainingDiverged,
    TrainRecord,
    TrainState,
    momentum_coeff,
    nag_step,
    train,
    write_history_csv,
)

__all__ = [
    "CATEGORICAL",
    "TRANSFORMS",
    "FeatureConfig",
    "build_features",
    "feature_tensor",
    "Metamodel",
    "batch_loss",
    "forward",
    "gradient",
    "softmax",
    "detect_stopping",
    "fit_trend",
    "moving_average",
    "rel_err_stop",
    "relative_error",
    "StopReason",
    "TrainConfig",
    "TrainingDiverged",
    "TrainRecord",
    "TrainState",
    "momentum_coeff",
    "nag_step",
    "train",
    "write_history_csv",
    "ProbeSeries",
    "TuneError",
    "TuneResult",
    "auto_tune",
    "count_extrema",
    "is_stable",
    "nn_probe",
]
