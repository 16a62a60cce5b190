"""Variable-annuity contracts and the portfolios built from them.

Four portfolios take part in an experiment:

- the *input* portfolio, drawn uniformly from a continuous/discrete space;
- the *representative* contracts, drawn without replacement from a grid;
- the *training* portfolio, drawn from a second, deliberately different grid;
- the *validation* portfolio, a uniform subsample of the input portfolio.

All generators are pure functions of a seed.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ConfigurationError",
    "Rider",
    "Gender",
    "VaContract",
    "Choice",
    "Interval",
    "GenerationSpace",
    "PortfolioSet",
    "INPUT_SPACE",
    "REPRESENTATIVE_GRID",
    "TRAINING_GRID",
    "generate_input_portfolio",
    "sample_from_grid",
    "sample_validation",
    "contract_arrays",
    "write_portfolio_csv",
    "read_portfolio_csv",
]


class ConfigurationError(ValueError):
    """Raised for invalid generation spaces or sampling requests."""


class Rider(enum.Enum):
    GMDB = "GMDB"
    GMDB_GMWB = "GMDB_GMWB"


class Gender(enum.Enum):
    MALE = "M"
    FEMALE = "F"


@dataclass(frozen=True)
class VaContract:
    id: int
    rider: Rider
    gender: Gender
    age: int
    account_value: float
    gd_value: float
    gw_value: float
    withdrawal_rate: float
    maturity: int

    @property
    def has_gmwb(self) -> bool:
        return self.rider is Rider.GMDB_GMWB


@dataclass(frozen=True)
class Choice:
    """A finite set of admissible values, sampled uniformly."""

    values: tuple

    def __init__(self, values: Iterable):
        object.__setattr__(self, "values", tuple(values))
        if not self.values:
            raise ConfigurationError("empty value set")

    def bounds(self) -> tuple[float, float]:
        return min(self.values), max(self.values)

    def draw(self, rng: np.random.Generator, count: int) -> list:
        idx = rng.integers(0, len(self.values), size=count)
        return [self.values[i] for i in idx]


@dataclass(frozen=True)
class Interval:
    """A closed real interval, sampled uniformly."""

    low: float
    high: float

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)) or self.high < self.low:
            raise ConfigurationError(f"empty interval [{self.low}, {self.high}]")

    def bounds(self) -> tuple[float, float]:
        return float(self.low), float(self.high)

    def draw(self, rng: np.random.Generator, count: int) -> list:
        return list(rng.uniform(self.low, self.high, size=count))


_ATTRIBUTES = (
    "rider",
    "gender",
    "age",
    "account_value",
    "guarantee_value",
    "withdrawal_rate",
    "maturity",
)


@dataclass(frozen=True)
class GenerationSpace:
    """Admissible attribute values for generated contracts.

    ``guarantee_value`` becomes GD for every contract and also GW for
    contracts carrying the withdrawal rider.
    """

    rider: Choice
    gender: Choice
    age: Choice | Interval
    account_value: Choice | Interval
    guarantee_value: Choice | Interval
    withdrawal_rate: Choice | Interval
    maturity: Choice | Interval

    def __post_init__(self):
        for name in ("age", "maturity"):
            if not isinstance(getattr(self, name), Choice):
                raise ConfigurationError(f"{name} must be a finite set of integers")
        for r in self.rider.values:
            if not isinstance(r, Rider):
                raise ConfigurationError(f"unknown rider {r!r}")
        for g in self.gender.values:
            if not isinstance(g, Gender):
                raise ConfigurationError(f"unknown gender {g!r}")

    def attribute(self, name: str):
        return getattr(self, name)

    def is_grid(self) -> bool:
        return all(isinstance(self.attribute(a), Choice) for a in _ATTRIBUTES)

    def grid_size(self) -> int:
        if not self.is_grid():
            raise ConfigurationError("space has continuous attributes; it is not a grid")
        return math.prod(len(self.attribute(a).values) for a in _ATTRIBUTES)

    def numeric_bounds(self) -> dict[str, tuple[float, float]]:
        """Per-attribute (min, max) of the numeric contract fields."""
        lo_g, hi_g = self.guarantee_value.bounds()
        gw_lo = lo_g if Rider.GMDB not in self.rider.values else 0.0
        gw_hi = hi_g if Rider.GMDB_GMWB in self.rider.values else 0.0
        return {
            "account_value": self.account_value.bounds(),
            "gd_value": (lo_g, hi_g),
            "gw_value": (gw_lo, gw_hi),
            "maturity": self.maturity.bounds(),
            "age": self.age.bounds(),
            "withdrawal_rate": self.withdrawal_rate.bounds(),
        }

    def to_dict(self) -> dict:
        out = {}
        for name in _ATTRIBUTES:
            spec = self.attribute(name)
            if isinstance(spec, Interval):
                out[name] = {"low": spec.low, "high": spec.high}
            else:
                out[name] = [v.value if isinstance(v, enum.Enum) else v for v in spec.values]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationSpace":
        missing = [a for a in _ATTRIBUTES if a not in data]
        if missing:
            raise ConfigurationError(f"generation space missing attributes: {missing}")
        kwargs = {}
        for name in _ATTRIBUTES:
            spec = data[name]
            if isinstance(spec, dict):
                kwargs[name] = Interval(float(spec["low"]), float(spec["high"]))
            elif name == "rider":
                kwargs[name] = Choice(Rider(v) for v in spec)
            elif name == "gender":
                kwargs[name] = Choice(Gender(v) for v in spec)
            elif name in ("age", "maturity"):
                kwargs[name] = Choice(int(v) for v in spec)
            else:
                kwargs[name] = Choice(float(v) for v in spec)
        return cls(**kwargs)


_RIDERS = Choice([Rider.GMDB, Rider.GMDB_GMWB])
_GENDERS = Choice([Gender.MALE, Gender.FEMALE])

INPUT_SPACE = GenerationSpace(
    rider=_RIDERS,
    gender=_GENDERS,
    age=Choice(range(20, 61)),
    account_value=Interval(1e4, 5e5),
    guarantee_value=Interval(0.5e4, 6e5),
    withdrawal_rate=Choice([0.04, 0.05, 0.06, 0.07, 0.08]),
    maturity=Choice(range(10, 26)),
)

REPRESENTATIVE_GRID = GenerationSpace(
    rider=_RIDERS,
    gender=_GENDERS,
    age=Choice([20, 30, 40, 50, 60]),
    account_value=Choice([1e4, 1e5, 2e5, 3e5, 4e5, 5e5]),
    guarantee_value=Choice([0.5e4, 1e5, 2e5, 3e5, 4e5, 5e5, 6e5]),
    withdrawal_rate=Choice([0.04, 0.08]),
    maturity=Choice([10, 15, 20, 25]),
)

TRAINING_GRID = GenerationSpace(
    rider=_RIDERS,
    gender=_GENDERS,
    age=Choice([23, 27, 33, 37, 43, 47, 53, 57]),
    account_value=Choice([0.2e5, 1.5e5, 2.5e5, 3.5e5, 4.5e5]),
    guarantee_value=Choice([0.5e5, 1.5e5, 2.5e5, 3.5e5, 4.5e5, 5.5e5]),
    withdrawal_rate=Choice([0.05, 0.06, 0.07]),
    maturity=Choice([12, 13, 17, 18, 22, 23]),
)


@dataclass
class PortfolioSet:
    input: list[VaContract]
    representatives: list[VaContract]
    training: list[VaContract]
    validation: list[VaContract]
    seeds: dict[str, int] = field(default_factory=dict)


def _make_contract(cid, rider, gender, age, av, guarantee, rate, maturity) -> VaContract:
    gmwb = rider is Rider.GMDB_GMWB
    return VaContract(
        id=int(cid),
        rider=rider,
        gender=gender,
        age=int(age),
        account_value=float(av),
        gd_value=float(guarantee),
        gw_value=float(guarantee) if gmwb else 0.0,
        withdrawal_rate=float(rate),
        maturity=int(maturity),
    )


def generate_input_portfolio(
    space: GenerationSpace, count: int, seed: int, id_offset: int = 0
) -> list[VaContract]:
    """Draw ``count`` contracts with every attribute independent and uniform."""
    if count < 1:
        raise ConfigurationError(f"count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    columns = [space.attribute(name).draw(rng, count) for name in _ATTRIBUTES]
    return [
        _make_contract(id_offset + k, *values) for k, values in enumerate(zip(*columns))
    ]


def sample_from_grid(
    space: GenerationSpace, count: int, seed: int, id_offset: int = 0
) -> list[VaContract]:
    """Sample ``count`` distinct grid points uniformly without replacement.

    The grid is never materialised; flat indices are decoded in mixed radix.
    """
    size = space.grid_size()
    if count < 1:
        raise ConfigurationError(f"count must be positive, got {count}")
    if count > size:
        raise ConfigurationError(f"requested {count} contracts from a grid of {size}")
    rng = np.random.default_rng(seed)
    flat = rng.choice(size, size=count, replace=False)
    sets = [space.attribute(name).values for name in _ATTRIBUTES]
    radices = [len(s) for s in sets]
    contracts = []
    for k, index in enumerate(flat):
        index = int(index)
        values = []
        for values_set, radix in zip(reversed(sets), reversed(radices)):
            index, digit = divmod(index, radix)
            values.append(values_set[digit])
        contracts.append(_make_contract(id_offset + k, *reversed(values)))
    return contracts


def grid_contracts(space: GenerationSpace, id_offset: int = 0) -> list[VaContract]:
    """Every contract of a (small) grid, in flat-index order."""
    sets = [space.attribute(name).values for name in _ATTRIBUTES]
    return [
        _make_contract(id_offset + k, *values)
        for k, values in enumerate(itertools.product(*sets))
    ]


def sample_validation(
    contracts: Sequence[VaContract], count: int, seed: int
) -> list[VaContract]:
    if count < 1:
        raise ConfigurationError(f"count must be positive, got {count}")
    if count > len(contracts):
        raise ConfigurationError(
            f"cannot draw {count} validation contracts from {len(contracts)}"
        )
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(contracts))[:count]
    return [contracts[i] for i in idx]


def reindex(contracts: Sequence[VaContract], id_offset: int = 0) -> list[VaContract]:
    return [replace(c, id=id_offset + k) for k, c in enumerate(contracts)]


def contract_arrays(contracts: Sequence[VaContract]) -> dict[str, np.ndarray]:
    """Column view of a contract list, used by the vectorised code paths."""
    return {
        "id": np.array([c.id for c in contracts], dtype=np.int64),
        "gmwb": np.array([c.has_gmwb for c in contracts], dtype=bool),
        "female": np.array([c.gender is Gender.FEMALE for c in contracts], dtype=bool),
        "age": np.array([c.age for c in contracts], dtype=float),
        "account_value": np.array([c.account_value for c in contracts], dtype=float),
        "gd_value": np.array([c.gd_value for c in contracts], dtype=float),
        "gw_value": np.array([c.gw_value for c in contracts], dtype=float),
        "withdrawal_rate": np.array([c.withdrawal_rate for c in contracts], dtype=float),
        "maturity": np.array([c.maturity for c in contracts], dtype=float),
    }


PORTFOLIO_COLUMNS = [
    "id",
    "rider",
    "gender",
    "age",
    "account_value",
    "gd_value",
    "gw_value",
    "withdrawal_rate",
    "maturity",
]


def write_portfolio_csv(contracts: Iterable[VaContract], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PORTFOLIO_COLUMNS)
        for c in contracts:
            writer.writerow(
                [
                    c.id,
                    c.rider.value,
                    c.gender.value,
                    c.age,
                    repr(c.account_value),
                    repr(c.gd_value),
                    repr(c.gw_value),
                    repr(c.withdrawal_rate),
                    c.maturity,
                ]
            )


def read_portfolio_csv(path: str | Path) -> list[VaContract]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != PORTFOLIO_COLUMNS:
            raise ConfigurationError(
                f"{path}: expected header {','.join(PORTFOLIO_COLUMNS)}, got {reader.fieldnames}"
            )
        return [
            VaContract(
                id=int(row["id"]),
                rider=Rider(row["rider"]),
                gender=Gender(row["gender"]),
                age=int(row["age"]),
                account_value=float(row["account_value"]),
                gd_value=float(row["gd_value"]),
                gw_value=float(row["gw_value"]),
                withdrawal_rate=float(row["withdrawal_rate"]),
                maturity=int(row["maturity"]),
            )
            for row in reader
        ]
