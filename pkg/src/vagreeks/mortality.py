"""Annual mortality tables keyed by gender and integer age."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .portfolio import Gender

__all__ = ["MortalityError", "MortalityTable", "gompertz_makeham_table"]

# Gompertz-Makeham force of mortality mu(x) = A + B * c**x, parameters of the
# textbook "standard ultimate survival model"; females use a 3-year setback.
GM_A = 0.00022
GM_B = 2.7e-6
GM_C = 1.124
FEMALE_SETBACK = 3
MAX_AGE = 120


class MortalityError(KeyError):
    """Raised when a table does not cover a requested age."""

    def __str__(self):
        return str(self.args[0]) if self.args else "mortality lookup failed"


class MortalityTable:
    """Map ``(gender, age) -> q_x``, the one-year death probability."""

    def __init__(self, rates: dict[Gender, dict[int, float]], name: str = "custom"):
        self.name = name
        self._rates: dict[Gender, dict[int, float]] = {}
        for gender, by_age in rates.items():
            clean = {}
            for age, q in by_age.items():
                q = float(q)
                if not 0.0 <= q <= 1.0:
                    raise ValueError(f"q_{age} = {q} for {gender.value} outside [0, 1]")
                clean[int(age)] = q
            self._rates[gender] = clean

    def qx(self, gender: Gender, age: int) -> float:
        try:
            return self._rates[gender][int(age)]
        except KeyError:
            raise MortalityError(
                f"mortality table {self.name!r} has no rate for gender {gender.value} age {age}"
            ) from None

    def rates(self, gender: Gender, start_age: int, years: int) -> np.ndarray:
        return np.array([self.qx(gender, start_age + k) for k in range(years)])

    def death_probabilities(self, gender: Gender, age: int, years: int) -> np.ndarray:
        """P(death in year t | alive at 0) for t = 1..years (curtate)."""
        q = self.rates(gender, age, years)
        alive = np.concatenate(([1.0], np.cumprod(1.0 - q)[:-1]))
        return alive * q

    def covers(self, gender: Gender, ages) -> bool:
        table = self._rates.get(gender, {})
        return all(int(a) in table for a in ages)

    @classmethod
    def constant(cls, q: float, ages=range(0, MAX_AGE + 1)) -> "MortalityTable":
        by_age = {a: q for a in ages}
        return cls({Gender.MALE: by_age, Gender.FEMALE: dict(by_age)}, name=f"constant-{q}")

    @classmethod
    def from_csv(cls, path: str | Path) -> "MortalityTable":
        """Load ``gender,age,qx`` rows (gender is ``M`` or ``F``)."""
        rates: dict[Gender, dict[int, float]] = {Gender.MALE: {}, Gender.FEMALE: {}}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
                "gender",
                "age",
                "qx",
            ]:
                raise ValueError(f"{path}: expected header gender,age,qx")
            for row in reader:
                rates[Gender(row["gender"].strip())][int(row["age"])] = float(row["qx"])
        return cls(rates, name=str(path))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["gender", "age", "qx"])
            for gender in (Gender.MALE, Gender.FEMALE):
                for age in sorted(self._rates.get(gender, {})):
                    writer.writerow([gender.value, age, repr(self._rates[gender][age])])


def _gm_qx(age: float) -> float:
    integral = GM_A + GM_B * GM_C**age * (GM_C - 1.0) / math.log(GM_C)
    return 1.0 - math.exp(-integral)


def gompertz_makeham_table() -> MortalityTable:
    """Fallback table used when no mortality file is configured."""
    male = {a: _gm_qx(a) for a in range(MAX_AGE)}
    female = {a: _gm_qx(max(a - FEMALE_SETBACK, 0)) for a in range(MAX_AGE)}
    male[MAX_AGE] = female[MAX_AGE] = 1.0
    return MortalityTable({Gender.MALE: male, Gender.FEMALE: female}, name="gompertz-makeham")
