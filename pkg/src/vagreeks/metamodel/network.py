"""Softmax-weighted interpolation network.

The estimate for a contract ``z`` is a convex combination of representative
deltas::

    a_i = w_i . f(z, z_i) + b_i
    o   = softmax(a)
    y(z) = sum_i o_i y_i

Weights act as per-direction inverse bandwidths around each representative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..portfolio import Gender, Rider, VaContract, contract_arrays
from .features import FeatureConfig, feature_tensor

__all__ = [
    "SCHEMA_VERSION",
    "Metamodel",
    "softmax",
    "estimate_from_features",
    "loss_from_features",
    "gradient_from_features",
    "forward",
    "batch_loss",
    "gradient",
]

SCHEMA_VERSION = 1


def softmax(a: np.ndarray) -> np.ndarray:
    z = a - a.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def estimate_from_features(weights, biases, feats, rep_y):
    """``(estimates, outputs)`` for a feature tensor of shape ``(Q, n, F)``."""
    a = np.einsum("qnf,nf->qn", feats, weights) + biases
    o = softmax(a)
    return o @ rep_y, o


def loss_from_features(weights, biases, feats, rep_y, targets) -> float:
    yhat, _ = estimate_from_features(weights, biases, feats, rep_y)
    return float(0.5 * np.mean((yhat - targets) ** 2))


def gradient_from_features(weights, biases, feats, rep_y, targets):
    """Analytic gradient of ``1/(2B) sum_k (yhat_k - y_k)^2``.

    ``dE/da_ki = (yhat_k - y_k) o_ki (y_i - yhat_k) / B``.
    """
    yhat, o = estimate_from_features(weights, biases, feats, rep_y)
    resid = yhat - targets
    d_act = (resid[:, None] * o * (rep_y[None, :] - yhat[:, None])) / len(targets)
    return np.einsum("qn,qnf->nf", d_act, feats), d_act.sum(axis=0)


@dataclass
class Metamodel:
    reps: list[VaContract]
    rep_deltas: np.ndarray
    weights: np.ndarray
    biases: np.ndarray
    feature_config: FeatureConfig
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.rep_deltas = np.asarray(self.rep_deltas, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        n = len(self.reps)
        if self.rep_deltas.shape != (n,) or self.biases.shape != (n,):
            raise ValueError("one delta and one bias per representative required")
        if self.weights.shape != (n, self.feature_config.size):
            raise ValueError(
                f"weights must have shape ({n}, {self.feature_config.size}), got {self.weights.shape}"
            )
        if not self.scale > 0:
            raise ValueError("normalisation scale must be positive")
        self._rep_arrays = contract_arrays(self.reps)

    @classmethod
    def zeros(cls, reps, rep_deltas, feature_config: FeatureConfig, seed: int = 0) -> "Metamodel":
        rep_deltas = np.asarray(rep_deltas, dtype=float)
        peak = float(np.max(np.abs(rep_deltas))) if len(rep_deltas) else 0.0
        return cls(
            list(reps),
            rep_deltas,
            np.zeros((len(reps), feature_config.size)),
            np.zeros(len(reps)),
            feature_config,
            scale=peak if peak > 0 else 1.0,
            seed=seed,
        )

    @property
    def n(self) -> int:
        return len(self.reps)

    @property
    def normalised_deltas(self) -> np.ndarray:
        return self.rep_deltas / self.scale

    def features(self, contracts) -> np.ndarray:
        return feature_tensor(contracts, self._rep_arrays, self.feature_config)

    def parameters(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.biases])

    def set_parameters(self, theta: np.ndarray) -> None:
        k = self.weights.size
        self.weights = theta[:k].reshape(self.weights.shape).copy()
        self.biases = theta[k:].copy()

    def predict(self, contracts: Sequence[VaContract], chunk: int = 1000) -> np.ndarray:
        out = []
        for i in range(0, len(contracts), chunk):
            yhat, _ = estimate_from_features(
                self.weights, self.biases, self.features(contracts[i : i + chunk]), self.rep_deltas
            )
            out.append(yhat)
        return np.concatenate(out) if out else np.zeros(0)

    def total(self, contracts: Sequence[VaContract]) -> float:
        return float(self.predict(contracts).sum())

    # persistence

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "feature_config": self.feature_config.to_dict(),
            "normalisation": self.scale,
            "seed": self.seed,
            "representatives": [
                {
                    "id": c.id,
                    "rider": c.rider.value,
                    "gender": c.gender.value,
                    "age": c.age,
                    "account_value": c.account_value,
                    "gd_value": c.gd_value,
                    "gw_value": c.gw_value,
                    "withdrawal_rate": c.withdrawal_rate,
                    "maturity": c.maturity,
                    "delta": float(d),
                }
                for c, d in zip(self.reps, self.rep_deltas)
            ],
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Metamodel":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema version {data.get('schema_version')!r}")
        reps = [
            VaContract(
                id=int(r["id"]),
                rider=Rider(r["rider"]),
                gender=Gender(r["gender"]),
                age=int(r["age"]),
                account_value=float(r["account_value"]),
                gd_value=float(r["gd_value"]),
                gw_value=float(r["gw_value"]),
                withdrawal_rate=float(r["withdrawal_rate"]),
                maturity=int(r["maturity"]),
            )
            for r in data["representatives"]
        ]
        fc = FeatureConfig.from_dict(data["feature_config"])
        return cls(
            reps,
            np.array([r["delta"] for r in data["representatives"]], dtype=float),
            np.array(data["weights"], dtype=float).reshape(len(reps), fc.size),
            np.array(data["biases"], dtype=float),
            fc,
            scale=float(data["normalisation"]),
            seed=int(data["seed"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "Metamodel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _batch_arrays(model: Metamodel, batch):
    contracts = [c for c, _ in batch]
    targets = np.array([y for _, y in batch], dtype=float) / model.scale
    return model.features(contracts), targets


def forward(model: Metamodel, query: VaContract) -> tuple[float, np.ndarray]:
    yhat, o = estimate_from_features(model.weights, model.biases, model.features([query]), model.rep_deltas)
    return float(yhat[0]), o[0]


def batch_loss(model: Metamodel, batch: Sequence[tuple[VaContract, float]]) -> float:
    """Mini-batch error in normalised delta units."""
    if not batch:
        raise ValueError("empty batch")
    feats, targets = _batch_arrays(model, batch)
    return loss_from_features(model.weights, model.biases, feats, model.normalised_deltas, targets)


def gradient(model: Metamodel, batch: Sequence[tuple[VaContract, float]]):
    """``(dE/dW, dE/db)`` of :func:`batch_loss`."""
    if not batch:
        raise ValueError("empty batch")
    feats, targets = _batch_arrays(model, batch)
    return gradient_from_features(model.weights, model.biases, feats, model.normalised_deltas, targets)
