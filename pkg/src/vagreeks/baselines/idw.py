"""Inverse distance weighting."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..portfolio import VaContract, contract_arrays
from .distance import IdwDistance

__all__ = ["idw_weights", "idw_estimate", "IdwInterpolator"]


def idw_weights(distances: np.ndarray, power: float) -> np.ndarray:
    """Row-normalised weights ``d^-p`` for a ``(queries, reps)`` distance matrix.

    Rows with zero distances put equal weight on the coincident reps only.
    Weights are formed in log space so large powers do not overflow.
    """
    d = np.atleast_2d(np.asarray(distances, dtype=float))
    exact = d == 0.0
    with np.errstate(divide="ignore"):
        logw = -power * np.log(d)
    logw[exact] = -np.inf
    has_exact = exact.any(axis=1)
    logw[has_exact] = np.where(exact[has_exact], 0.0, -np.inf)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return w / w.sum(axis=1, keepdims=True)


def idw_estimate(
    reps: Sequence[VaContract],
    deltas: Sequence[float],
    query: VaContract,
    power: float,
    distance: IdwDistance | None = None,
) -> float:
    if not reps:
        raise ValueError("at least one representative is required")
    distance = distance or IdwDistance(max_age=max(c.age for c in reps))
    w = idw_weights(distance.matrix([query], list(reps)), power)
    return float(w[0] @ np.asarray(deltas, dtype=float))


class IdwInterpolator:
    def __init__(self, power: float, distance: IdwDistance):
        if power <= 0:
            raise ValueError("power must be positive")
        self.power = power
        self.distance = distance

    def fit(self, reps: Sequence[VaContract], deltas) -> "IdwInterpolator":
        self.reps = contract_arrays(reps)
        self.deltas = np.asarray(deltas, dtype=float)
        return self

    def predict(self, contracts: Sequence[VaContract], chunk: int = 2000) -> np.ndarray:
        out = []
        for i in range(0, len(contracts), chunk):
            d = self.distance.matrix(contract_arrays(contracts[i : i + chunk]), self.reps)
            out.append(idw_weights(d, self.power) @ self.deltas)
        return np.concatenate(out) if out else np.zeros(0)

    def total(self, contracts: Sequence[VaContract]) -> float:
        return float(self.predict(contracts).sum())
