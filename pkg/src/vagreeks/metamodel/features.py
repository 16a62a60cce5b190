"""Per-representative input features of the network.

For an input contract ``z`` and representative ``z_i`` the feature vector is::

    [ category mismatches | [t(z_i) - t(z)]^+ / R_t | [t(z) - t(z_i)]^+ / R_t ]

with one ``t`` per configured numeric transform and ``R_t`` its range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..portfolio import ConfigurationError, GenerationSpace, VaContract, contract_arrays

__all__ = [
    "CATEGORICAL",
    "TRANSFORMS",
    "FeatureConfig",
    "build_features",
    "feature_tensor",
]


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


CATEGORICAL: dict[str, str] = {"rider": "gmwb", "gender": "female"}

TRANSFORMS: dict[str, Callable[[Mapping[str, np.ndarray]], np.ndarray]] = {
    "maturity": lambda a: a["maturity"],
    "age": lambda a: a["age"],
    "account_value": lambda a: a["account_value"],
    "gd_over_av": lambda a: _ratio(a["gd_value"], a["account_value"]),
    "gw_over_av": lambda a: _ratio(a["gw_value"], a["account_value"]),
    "withdrawal_rate": lambda a: a["withdrawal_rate"],
}

DEFAULT_TRANSFORMS = ("maturity", "age", "account_value", "gd_over_av", "gw_over_av", "withdrawal_rate")


@dataclass(frozen=True)
class FeatureConfig:
    categorical: tuple[str, ...] = ("rider", "gender")
    transforms: tuple[str, ...] = DEFAULT_TRANSFORMS
    ranges: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in self.categorical:
            if name not in CATEGORICAL:
                raise ConfigurationError(f"unknown categorical attribute {name!r}")
        for name in self.transforms:
            if name not in TRANSFORMS:
                raise ConfigurationError(f"unknown transform {name!r}")
            r = self.ranges.get(name)
            if r is None or not r > 0:
                raise ConfigurationError(f"range of transform {name!r} must be positive, got {r}")

    @property
    def size(self) -> int:
        return len(self.categorical) + 2 * len(self.transforms)

    def names(self) -> list[str]:
        return (
            [f"c:{c}" for c in self.categorical]
            + [f"minus:{t}" for t in self.transforms]
            + [f"plus:{t}" for t in self.transforms]
        )

    @classmethod
    def from_space(
        cls,
        space: GenerationSpace,
        categorical: Sequence[str] = ("rider", "gender"),
        transforms: Sequence[str] = DEFAULT_TRANSFORMS,
        contracts: Sequence[VaContract] | None = None,
        ratio_quantiles: tuple[float, float] | None = None,
    ) -> "FeatureConfig":
        """Ranges from the extremes of the generation space.

        By default ratio ranges use the extreme quotients of the guarantee and
        account value bounds.  Those extremes are far apart (a small account
        with a large guarantee), which squeezes typical ratios into a sliver
        of ``[0, 1]``.  With ``ratio_quantiles=(lo, hi)`` the ratio ranges are
        instead the spread between those quantiles over ``contracts``.
        """
        b = space.numeric_bounds()
        av_lo, av_hi = b["account_value"]
        if av_lo <= 0:
            raise ConfigurationError("ratio features need a strictly positive account value range")
        bounds = {
            "maturity": b["maturity"],
            "age": b["age"],
            "account_value": b["account_value"],
            "gd_over_av": (b["gd_value"][0] / av_hi, b["gd_value"][1] / av_lo),
            "gw_over_av": (b["gw_value"][0] / av_hi, b["gw_value"][1] / av_lo),
            "withdrawal_rate": b["withdrawal_rate"],
        }
        if ratio_quantiles is not None:
            if not contracts:
                raise ConfigurationError("quantile ratio ranges need a non-empty portfolio")
            lo, hi = ratio_quantiles
            if not 0.0 <= lo < hi <= 1.0:
                raise ConfigurationError(f"invalid ratio quantiles {ratio_quantiles}")
            arrays = contract_arrays(contracts)
            for name in ("gd_over_av", "gw_over_av"):
                bounds[name] = tuple(np.quantile(TRANSFORMS[name](arrays), [lo, hi]))
        ranges = {t: float(bounds[t][1] - bounds[t][0]) for t in transforms}
        return cls(tuple(categorical), tuple(transforms), ranges)

    def to_dict(self) -> dict:
        return {
            "categorical": list(self.categorical),
            "transforms": list(self.transforms),
            "ranges": {k: float(v) for k, v in self.ranges.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FeatureConfig":
        return cls(tuple(data["categorical"]), tuple(data["transforms"]), dict(data["ranges"]))


def _columns(arrays: Mapping[str, np.ndarray], cfg: FeatureConfig):
    cats = np.column_stack([arrays[CATEGORICAL[c]] for c in cfg.categorical]) if cfg.categorical else None
    nums = np.column_stack([TRANSFORMS[t](arrays) / cfg.ranges[t] for t in cfg.transforms])
    return cats, nums


def feature_tensor(queries, reps, cfg: FeatureConfig) -> np.ndarray:
    """Features for every (query, representative) pair, shape ``(Q, n, F)``."""
    qa = queries if isinstance(queries, Mapping) else contract_arrays(queries)
    ra = reps if isinstance(reps, Mapping) else contract_arrays(reps)
    qc, qn = _columns(qa, cfg)
    rc, rn = _columns(ra, cfg)
    diff = qn[:, None, :] - rn[None, :, :]
    parts = []
    if qc is not None:
        parts.append((qc[:, None, :] != rc[None, :, :]).astype(float))
    parts.append(np.maximum(-diff, 0.0))
    parts.append(np.maximum(diff, 0.0))
    return np.concatenate(parts, axis=2)


def build_features(query: VaContract, rep: VaContract, cfg: FeatureConfig) -> np.ndarray:
    return feature_tensor([query], [rep], cfg)[0, 0]
