"""Ordinary kriging with spherical and exponential variograms.

Variogram parameters are fitted by bounded least squares to an empirical
semivariogram built from all representative pairs (15 equal-width lag bins).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from ..portfolio import VaContract, contract_arrays
from .distance import KrigingDistance

__all__ = [
    "VariogramKind",
    "VariogramModel",
    "KrigingError",
    "empirical_semivariogram",
    "fit_semivariogram",
    "fit_variogram",
    "OrdinaryKriging",
    "kriging_estimate",
]

JITTER = 1e-10


class KrigingError(RuntimeError):
    pass


class VariogramKind(enum.Enum):
    SPHERICAL = "spherical"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class VariogramModel:
    kind: VariogramKind
    nugget: float
    sill: float
    range: float

    def __post_init__(self):
        if self.nugget < 0 or self.sill < self.nugget or not self.range > 0:
            raise ValueError(f"invalid variogram parameters {self}")

    def __call__(self, h) -> np.ndarray:
        """Semivariance at lag ``h``; zero at ``h == 0`` (nugget discontinuity)."""
        h = np.asarray(h, dtype=float)
        psill = self.sill - self.nugget
        if self.kind is VariogramKind.SPHERICAL:
            x = np.minimum(h / self.range, 1.0)
            g = self.nugget + psill * (1.5 * x - 0.5 * x**3)
        else:
            g = self.nugget + psill * (1.0 - np.exp(-3.0 * h / self.range))
        return np.where(h > 0, g, 0.0)


def empirical_semivariogram(distances: np.ndarray, values: np.ndarray, n_bins: int = 15):
    """Binned semivariogram from a square distance matrix.

    Returns ``(lags, semivariance, pair_counts)`` for non-empty bins, where
    each lag is the mean pair distance in its bin.  Bin centres would bias the
    fitted nugget upward wherever the variogram is steep near the origin.
    """
    values = np.asarray(values, dtype=float)
    iu = np.triu_indices(len(values), k=1)
    d = distances[iu]
    sv = 0.5 * (values[iu[0]] - values[iu[1]]) ** 2
    dmax = d.max() if d.size else 0.0
    if not dmax > 0:
        raise KrigingError("all representatives coincide; no spatial structure to fit")
    edges = np.linspace(0.0, dmax, n_bins + 1)
    which = np.clip(np.digitize(d, edges[1:-1], right=True), 0, n_bins - 1)
    counts = np.bincount(which, minlength=n_bins)
    sums = np.bincount(which, weights=sv, minlength=n_bins)
    lag_sums = np.bincount(which, weights=d, minlength=n_bins)
    keep = counts > 0
    return lag_sums[keep] / counts[keep], sums[keep] / counts[keep], counts[keep]


def fit_semivariogram(lags, semivariance, kind: VariogramKind) -> VariogramModel:
    """Least-squares fit of (nugget, partial sill, range) with nonnegativity bounds."""
    lags = np.asarray(lags, dtype=float)
    gamma = np.asarray(semivariance, dtype=float)
    kind = VariogramKind(kind)
    scale = max(float(gamma.max()), 0.0)
    if scale == 0.0:
        return VariogramModel(kind, 0.0, 0.0, float(lags.max()))
    max_lag = float(lags.max())

    def residual(p):
        nugget, psill, rng = p
        model = VariogramModel(kind, nugget * scale, (nugget + psill) * scale, rng)
        return (model(lags) - gamma) / scale

    x0 = [min(float(gamma.min()) / scale, 0.5), 1.0 - min(float(gamma.min()) / scale, 0.5), 0.5 * max_lag]
    res = optimize.least_squares(
        residual,
        x0,
        bounds=([0.0, 0.0, 1e-6 * max_lag], [1.0, 2.0, 10.0 * max_lag]),
        method="trf",
        x_scale=[1.0, 1.0, max_lag],
    )
    nugget, psill, rng = res.x
    return VariogramModel(kind, nugget * scale, (nugget + psill) * scale, float(rng))


def fit_variogram(
    reps: Sequence[VaContract],
    deltas,
    kind: VariogramKind,
    distance: KrigingDistance,
    n_bins: int = 15,
) -> VariogramModel:
    if len(reps) < 10:
        raise KrigingError(f"need at least 10 representatives to fit a variogram, got {len(reps)}")
    arrays = contract_arrays(reps)
    d = distance.matrix(arrays, arrays)
    lags, sv, _ = empirical_semivariogram(d, np.asarray(deltas, dtype=float), n_bins)
    return fit_semivariogram(lags, sv, kind)


class OrdinaryKriging:
    """Ordinary kriging over a fixed representative set.

    The augmented system ``[[G, 1], [1^T, 0]] [w; lambda] = [g(q); 1]`` is
    factorised once; a whole portfolio's aggregate needs one extra solve
    because the estimate is linear in the right-hand side.
    """

    def __init__(self, model: VariogramModel, distance: KrigingDistance):
        self.model = model
        self.distance = distance

    def fit(self, reps: Sequence[VaContract], deltas) -> "OrdinaryKriging":
        self.reps = contract_arrays(reps)
        self.deltas = np.asarray(deltas, dtype=float)
        n = len(self.deltas)
        g = self.model(self.distance.matrix(self.reps, self.reps))
        # scale the variogram block to O(1) so the bordered system is balanced;
        # the weights are unaffected, only the multiplier is rescaled
        self._scale = max(float(np.abs(g).max()), 1e-300)
        a = np.ones((n + 1, n + 1))
        a[:n, :n] = g / self._scale
        a[n, n] = 0.0
        self._lu = self._factor(a, n)
        return self

    @staticmethod
    def _factor(a: np.ndarray, n: int):
        lu, piv = linalg.lu_factor(a, check_finite=True)
        if _is_singular(lu):
            a = a.copy()
            a[np.arange(n), np.arange(n)] += JITTER
            lu, piv = linalg.lu_factor(a)
            if _is_singular(lu):
                raise KrigingError("kriging system is singular even after diagonal jitter")
        return lu, piv

    def _rhs(self, contracts) -> np.ndarray:
        g = self.model(self.distance.matrix(self.reps, contract_arrays(contracts))) / self._scale
        return np.vstack([g, np.ones((1, g.shape[1]))])

    def weights(self, contracts: Sequence[VaContract]) -> np.ndarray:
        """Kriging weights, shape ``(len(contracts), n)``."""
        sol = linalg.lu_solve(self._lu, self._rhs(contracts))
        return sol[:-1].T

    def predict(self, contracts: Sequence[VaContract], chunk: int = 2000) -> np.ndarray:
        out = [self.weights(contracts[i : i + chunk]) @ self.deltas for i in range(0, len(contracts), chunk)]
        return np.concatenate(out) if out else np.zeros(0)

    def total(self, contracts: Sequence[VaContract], chunk: int = 2000) -> float:
        rhs = sum(self._rhs(contracts[i : i + chunk]).sum(axis=1) for i in range(0, len(contracts), chunk))
        sol = linalg.lu_solve(self._lu, rhs)
        return float(sol[:-1] @ self.deltas)


def _is_singular(lu: np.ndarray) -> bool:
    diag = np.abs(np.diag(lu))
    return not np.all(np.isfinite(lu)) or diag.min() <= 1e-14 * max(diag.max(), 1e-300)


def kriging_estimate(
    reps: Sequence[VaContract],
    deltas,
    query: VaContract,
    model: VariogramModel,
    distance: KrigingDistance,
) -> float:
    return float(OrdinaryKriging(model, distance).fit(reps, deltas).predict([query])[0])
