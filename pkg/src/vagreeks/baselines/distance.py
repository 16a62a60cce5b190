"""Contract distance functions used by the classical interpolators.

Both distances act on the column arrays produced by
:func:`vagreeks.portfolio.contract_arrays`, so that full distance matrices
can be built without Python loops.  Scalar helpers taking two contracts are
provided for readability in tests and small scripts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..portfolio import ConfigurationError, GenerationSpace, VaContract, contract_arrays

__all__ = [
    "NUMERIC_ATTRIBUTES",
    "CATEGORICAL_ATTRIBUTES",
    "KrigingDistance",
    "IdwDistance",
    "kriging_distance",
    "idw_distance",
]

NUMERIC_ATTRIBUTES = ("account_value", "gd_value", "gw_value", "maturity", "age", "withdrawal_rate")
CATEGORICAL_ATTRIBUTES = ("female", "gmwb")


def _as_arrays(contracts) -> dict[str, np.ndarray]:
    if isinstance(contracts, Mapping):
        return contracts
    if isinstance(contracts, VaContract):
        contracts = [contracts]
    return contract_arrays(contracts)


def _mismatches(a: Mapping, b: Mapping) -> np.ndarray:
    out = np.zeros((len(a["id"]), len(b["id"])))
    for name in CATEGORICAL_ATTRIBUTES:
        out += a[name][:, None] != b[name][None, :]
    return out


@dataclass(frozen=True)
class KrigingDistance:
    """Range-normalised Euclidean distance plus gamma-weighted category mismatches."""

    ranges: Mapping[str, float]
    gamma: float = 1.0

    def __post_init__(self):
        for name in NUMERIC_ATTRIBUTES:
            r = self.ranges.get(name)
            if r is None or not r > 0:
                raise ConfigurationError(f"attribute range for {name} must be positive, got {r}")

    @classmethod
    def from_space(cls, space: GenerationSpace, gamma: float = 1.0) -> "KrigingDistance":
        bounds = space.numeric_bounds()
        return cls({k: hi - lo for k, (lo, hi) in bounds.items()}, gamma)

    def _scaled(self, arrays: Mapping) -> np.ndarray:
        return np.column_stack([arrays[n] / self.ranges[n] for n in NUMERIC_ATTRIBUTES])

    def matrix(self, a, b) -> np.ndarray:
        a, b = _as_arrays(a), _as_arrays(b)
        xa, xb = self._scaled(a), self._scaled(b)
        # explicit differences keep D(x, x) exactly zero
        sq = self.gamma * _mismatches(a, b)
        for j in range(xa.shape[1]):
            sq += (xa[:, j, None] - xb[None, :, j]) ** 2
        return np.sqrt(sq)

    def __call__(self, x: VaContract, y: VaContract) -> float:
        total = sum(
            ((getattr(x, n) - getattr(y, n)) / self.ranges[n]) ** 2 for n in NUMERIC_ATTRIBUTES
        )
        total += self.gamma * ((x.gender != y.gender) + (x.rider != y.rider))
        return float(np.sqrt(total))


@dataclass(frozen=True)
class IdwDistance:
    """Distance with age- and moneyness-dependent scaling.

    With ``r = AV / GD`` and ``e = exp(-r)`` (``e = 0`` when ``GD = 0``),
    ``g_h = (e_x x_h - e_y y_h)^2`` for maturity, withdrawal rate and age; the
    age term is further weighted by ``exp((age_x + age_y) / 2 - max_age)``.
    """

    max_age: float
    gamma: float = 1.0

    @staticmethod
    def _moneyness_factor(arrays: Mapping) -> np.ndarray:
        av, gd = arrays["account_value"], arrays["gd_value"]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(gd > 0, av / np.where(gd > 0, gd, 1.0), np.inf)
        return np.exp(-r)

    def matrix(self, a, b) -> np.ndarray:
        a, b = _as_arrays(a), _as_arrays(b)
        ea, eb = self._moneyness_factor(a), self._moneyness_factor(b)
        total = self.gamma * _mismatches(a, b)
        for name in ("maturity", "withdrawal_rate"):
            total += (ea[:, None] * a[name][:, None] - eb[None, :] * b[name][None, :]) ** 2
        g_age = (ea[:, None] * a["age"][:, None] - eb[None, :] * b["age"][None, :]) ** 2
        f_age = np.exp(0.5 * (a["age"][:, None] + b["age"][None, :]) - self.max_age)
        total += f_age * g_age
        return np.sqrt(total)

    def __call__(self, x: VaContract, y: VaContract) -> float:
        return float(self.matrix([x], [y])[0, 0])


def kriging_distance(x: VaContract, y: VaContract, gamma: float, ranges: Mapping[str, float]) -> float:
    return KrigingDistance(ranges, gamma)(x, y)


def idw_distance(x: VaContract, y: VaContract, gamma: float, max_age: float) -> float:
    return IdwDistance(max_age, gamma)(x, y)


def max_age(contracts: Sequence[VaContract]) -> float:
    return float(max(c.age for c in contracts))
