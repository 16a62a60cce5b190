"""Heuristic selection of learning rate, batch size and record interval.

Each candidate is judged from a short probe run.  A probe is any callable
``probe(learning_rate, batch_size, record_interval, iterations)`` returning a
:class:`ProbeSeries`, so the search logic can be exercised on toy problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .features import FeatureConfig
from .stopping import moving_average
from .training import TrainConfig, TrainingDiverged, train

__all__ = [
    "DEFAULTS",
    "ProbeSeries",
    "ProbeRecord",
    "TuneResult",
    "TuneError",
    "is_stable",
    "count_extrema",
    "auto_tune",
    "nn_probe",
]

DEFAULTS = (1.0, 20, 50)


class TuneError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProbeSeries:
    train_mse: np.ndarray
    val_mse: np.ndarray


Probe = Callable[[float, int, int, int], ProbeSeries]


@dataclass(frozen=True)
class ProbeRecord:
    parameter: str
    learning_rate: float
    batch_size: int
    record_interval: int
    stable: bool
    extrema: int = -1


@dataclass
class TuneResult:
    learning_rate: float
    batch_size: int
    record_interval: int
    probes: list[ProbeRecord] = field(default_factory=list)


def is_stable(series, window: int = 10, jump: float = 0.5, max_jumps: int = 2) -> bool:
    """Stable iff finite, smoothed trend decreasing overall, and few big jumps.

    A big jump is a smoothed-MSE increase of more than ``jump`` (relative)
    between consecutive records.
    """
    v = np.asarray(series, dtype=float)
    if len(v) < 2 or not np.all(np.isfinite(v)):
        return False
    _, s = moving_average(v, min(window, len(v)))
    if not s[-1] < s[0]:
        return False
    with np.errstate(divide="ignore", invalid="ignore"):
        rise = np.where(s[:-1] > 0, s[1:] / s[:-1] - 1.0, np.inf * (s[1:] > s[:-1]))
    return int(np.sum(rise > jump)) <= max_jumps


def count_extrema(series, window: int = 10, tolerance: float = 0.1) -> int:
    """Number of major peaks and valleys of the smoothed series.

    A turning point counts only when the series has since moved away from it
    by more than ``tolerance`` of its total range (zig-zag filter).
    """
    v = np.asarray(series, dtype=float)
    if len(v) < 3 or not np.all(np.isfinite(v)):
        return 0
    _, s = moving_average(v, min(window, len(v)))
    span = float(s.max() - s.min())
    if span == 0.0:
        return 0
    thresh = tolerance * span
    count = 0
    direction = 0
    pivot = s[0]
    for x in s[1:]:
        if direction == 0:
            if abs(x - pivot) > thresh:
                direction, pivot = (1 if x > pivot else -1), x
        elif direction * (x - pivot) > 0:
            pivot = x
        elif direction * (pivot - x) > thresh:
            count += 1
            direction, pivot = -direction, x
    return count


def auto_tune(
    probe: Probe,
    budget: int,
    iterations: int = 3000,
    interval_iterations: int = 4000,
    refine_steps: int = 2,
    training_size: int | None = None,
    max_batch: int = 1 << 16,
    max_interval: int = 200,
    window: int = 10,
    jump: float = 0.5,
    max_jumps: int = 2,
    extrema_kept: float = 0.75,
) -> TuneResult:
    """Probe-driven choice of ``(learning_rate, batch_size, record_interval)``.

    ``budget`` caps the total number of probe runs.  With a budget of zero
    the defaults ``(1, 20, 50)`` are returned untouched.
    """
    lr, bs, interval = DEFAULTS
    result = TuneResult(lr, bs, interval)
    if budget <= 0:
        return result
    used = 0

    def stable(name, rate, size, every) -> bool | None:
        nonlocal used
        if training_size is not None:
            size = min(size, training_size)
        if name == "batch_size" and training_size is not None and size == training_size:
            ok = True  # the full-batch gradient is exact
        else:
            if used >= budget:
                return None
            used += 1
            ok = is_stable(probe(rate, size, every, iterations).train_mse, window, jump, max_jumps)
        result.probes.append(ProbeRecord(name, rate, size, every, ok))
        return ok

    # learning rate: double while stable, halve while unstable
    first = stable("learning_rate", lr, bs, interval)
    if first is None:
        return result
    good, bad = (lr, None) if first else (None, lr)
    while good is None or bad is None:
        trial = good * 2 if good is not None else bad / 2
        if trial < 1e-12:
            break
        ok = stable("learning_rate", trial, bs, interval)
        if ok is None:
            break
        if ok:
            good = trial
        else:
            bad = trial
    if good is None:
        raise TuneError(
            "no stable learning rate within budget; probed "
            + ", ".join(f"{p.learning_rate:g}" for p in result.probes)
        )
    if bad is not None:
        lo, hi = good, bad
        for _ in range(refine_steps):
            mid = 0.5 * (lo + hi)
            ok = stable("learning_rate", mid, bs, interval)
            if ok is None:
                break
            lo, hi = (mid, hi) if ok else (lo, mid)
        good = lo
    result.learning_rate = lr = good

    # batch size: double from 5 until stable, then narrow down
    size, last_bad = 5, None
    if training_size is not None:
        size = min(size, training_size)
    chosen, out_of_budget = None, False
    while size <= max_batch:
        ok = stable("batch_size", lr, size, interval)
        if ok is None:
            out_of_budget = True
            break
        if ok:
            chosen = size
            break
        last_bad = size
        size *= 2
        if training_size is not None:
            size = min(size, training_size)
    if chosen is not None:
        lo, hi = last_bad, chosen
        for _ in range(refine_steps if lo is not None else 0):
            mid = (lo + hi) // 2
            if mid in (lo, hi):
                break
            ok = stable("batch_size", lr, mid, interval)
            if ok is None:
                break
            lo, hi = (lo, mid) if ok else (mid, hi)
        result.batch_size = bs = hi
    elif not out_of_budget:
        raise TuneError(
            "no stable batch size up to the limit; probed "
            + ", ".join(str(p.batch_size) for p in result.probes if p.parameter == "batch_size")
        )

    # record interval: double from 10 while the major trend is preserved
    def extrema(every) -> int | None:
        nonlocal used
        if used >= budget:
            return None
        used += 1
        n = count_extrema(probe(lr, bs, every, interval_iterations).val_mse, window)
        result.probes.append(ProbeRecord("record_interval", lr, bs, every, True, n))
        return n

    every = 10
    prev = extrema(every)
    if prev is not None:
        while every * 2 <= max_interval:
            nxt = extrema(every * 2)
            if nxt is None or nxt < math.ceil(extrema_kept * prev):
                break
            every *= 2
            prev = nxt
        result.record_interval = every
    return result


def nn_probe(
    reps: Sequence,
    rep_deltas,
    training: Sequence,
    validation: Sequence,
    feature_config: FeatureConfig,
    seed: int = 0,
    mu_max: float = 0.99,
) -> Probe:
    """Probe that trains the metamodel for a fixed number of iterations."""

    def run(learning_rate: float, batch_size: int, record_interval: int, iterations: int) -> ProbeSeries:
        cfg = TrainConfig(
            learning_rate=learning_rate,
            batch_size=batch_size,
            mu_max=mu_max,
            record_interval=record_interval,
            max_iterations=iterations,
            seed=seed,
            early_stopping=False,
        )
        try:
            _, state = train(reps, rep_deltas, training, validation, cfg, feature_config)
        except TrainingDiverged:
            nan = np.array([np.nan])
            return ProbeSeries(nan, nan)
        return ProbeSeries(
            np.array([r.train_mse for r in state.records]),
            np.array([r.val_mse for r in state.records]),
        )

    return run
