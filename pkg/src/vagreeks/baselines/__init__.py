"""Classical spatial interpolators: kriging, IDW and Gaussian RBF."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ..portfolio import VaContract
from .distance import IdwDistance, KrigingDistance, idw_distance, kriging_distance
from .idw import IdwInterpolator, idw_estimate, idw_weights
from .kriging import (
    KrigingError,
    OrdinaryKriging,
    VariogramKind,
    VariogramModel,
    empirical_semivariogram,
    fit_semivariogram,
    fit_variogram,
    kriging_estimate,
)
from .rbf import GaussianRbf, rbf_estimate

__all__ = [
    "Estimator",
    "PortfolioEstimate",
    "KrigingInterpolator",
    "portfolio_estimate",
    "IdwDistance",
    "KrigingDistance",
    "idw_distance",
    "kriging_distance",
    "IdwInterpolator",
    "idw_estimate",
    "idw_weights",
    "KrigingError",
    "OrdinaryKriging",
    "VariogramKind",
    "VariogramModel",
    "empirical_semivariogram",
    "fit_semivariogram",
    "fit_variogram",
    "kriging_estimate",
    "GaussianRbf",
    "rbf_estimate",
]


class Estimator(Protocol):
    def fit(self, reps: Sequence[VaContract], deltas) -> "Estimator": ...

    def predict(self, contracts: Sequence[VaContract]) -> np.ndarray: ...

    def total(self, contracts: Sequence[VaContract]) -> float: ...


class KrigingInterpolator:
    """Fits the variogram on the representatives, then krige."""

    def __init__(self, kind: VariogramKind, distance: KrigingDistance):
        self.kind = VariogramKind(kind)
        self.distance = distance

    def fit(self, reps, deltas) -> "KrigingInterpolator":
        self.model = fit_variogram(reps, deltas, self.kind, self.distance)
        self._ok = OrdinaryKriging(self.model, self.distance).fit(reps, deltas)
        return self

    def predict(self, contracts) -> np.ndarray:
        return self._ok.predict(contracts)

    def total(self, contracts) -> float:
        return self._ok.total(contracts)


@dataclass
class PortfolioEstimate:
    total: float
    per_policy: np.ndarray | None
    fit_seconds: float
    estimate_seconds: float

    @property
    def seconds(self) -> float:
        return self.fit_seconds + self.estimate_seconds


def portfolio_estimate(
    estimator: Estimator,
    reps: Sequence[VaContract],
    deltas,
    portfolio: Sequence[VaContract],
    per_policy: bool = False,
) -> PortfolioEstimate:
    """Fit on the representatives and estimate the portfolio delta.

    In per-policy mode every contract gets its own estimate and the total is
    their sum; otherwise the estimator's (possibly cheaper) aggregate is used.
    """
    t0 = time.perf_counter()
    estimator.fit(reps, deltas)
    t1 = time.perf_counter()
    if per_policy:
        values = np.asarray(estimator.predict(portfolio), dtype=float)
        total = math.fsum(values)
    else:
        values = None
        total = float(estimator.total(portfolio))
    t2 = time.perf_counter()
    return PortfolioEstimate(total, values, t1 - t0, t2 - t1)
