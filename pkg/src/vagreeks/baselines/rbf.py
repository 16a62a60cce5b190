"""Gaussian radial basis function interpolation."""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np
from scipy import linalg

from ..portfolio import VaContract, contract_arrays
from .distance import KrigingDistance

__all__ = ["GaussianRbf", "rbf_estimate"]

JITTER = 1e-10


class GaussianRbf:
    """Interpolant ``s(q) = sum_i lambda_i exp(-(eps * D(q, z_i))^2)``."""

    def __init__(self, epsilon: float, distance: KrigingDistance):
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        self.epsilon = epsilon
        self.distance = distance
        self.jittered = False

    def kernel(self, d: np.ndarray) -> np.ndarray:
        return np.exp(-((self.epsilon * d) ** 2))

    def fit(self, reps: Sequence[VaContract], deltas) -> "GaussianRbf":
        self.reps = contract_arrays(reps)
        y = np.asarray(deltas, dtype=float)
        d = self.distance.matrix(self.reps, self.reps)
        off_diag = d[~np.eye(len(y), dtype=bool)]
        if np.any(off_diag == 0.0):
            i, j = np.argwhere((d == 0.0) & ~np.eye(len(y), dtype=bool))[0]
            raise ValueError(
                f"duplicate representatives at positions {i} and {j} (ids "
                f"{self.reps['id'][i]}, {self.reps['id'][j]})"
            )
        phi = self.kernel(d)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", linalg.LinAlgWarning)
                self.coef = linalg.solve(phi, y, assume_a="pos")
        except (linalg.LinAlgError, linalg.LinAlgWarning):
            self.jittered = True
            phi[np.diag_indices_from(phi)] += JITTER
            self.coef = linalg.solve(phi, y, assume_a="sym")
        return self

    def predict(self, contracts: Sequence[VaContract], chunk: int = 2000) -> np.ndarray:
        out = [
            self.kernel(self.distance.matrix(contract_arrays(contracts[i : i + chunk]), self.reps)) @ self.coef
            for i in range(0, len(contracts), chunk)
        ]
        return np.concatenate(out) if out else np.zeros(0)

    def total(self, contracts: Sequence[VaContract]) -> float:
        return float(self.predict(contracts).sum())


def rbf_estimate(
    reps: Sequence[VaContract],
    deltas,
    query: VaContract,
    epsilon: float,
    distance: KrigingDistance,
) -> float:
    return float(GaussianRbf(epsilon, distance).fit(reps, deltas).predict([query])[0])
