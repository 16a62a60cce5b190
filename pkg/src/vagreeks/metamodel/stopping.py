"""Stopping machinery: u-shape detection on the validation error trend and
the relative-error criterion on the validation mean."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

__all__ = ["moving_average", "fit_trend", "detect_stopping", "relative_error", "rel_err_stop"]


def moving_average(values: Sequence[float], window: int) -> tuple[np.ndarray, np.ndarray]:
    """Centred simple moving average, truncated at both ends.

    Returns ``(positions, averages)`` where each position is the mean index of
    the records in its window, so truncated edge windows do not shift the
    trend in time.
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    if window < 1:
        raise ValueError("window must be >= 1")
    csum = np.concatenate(([0.0], np.cumsum(v)))
    i = np.arange(n)
    lo = np.maximum(0, i - window // 2)
    hi = np.minimum(n, i + window - window // 2)
    return 0.5 * (lo + hi - 1), (csum[hi] - csum[lo]) / (hi - lo)


def fit_trend(
    stamps: Sequence[float], values: Sequence[float], window: int, degree: int
) -> np.ndarray:
    """Smoothed, polynomial-fitted trend evaluated at every record stamp."""
    stamps = np.asarray(stamps, dtype=float)
    pos, smooth = moving_average(values, window)
    x = np.interp(pos, np.arange(len(stamps)), stamps)
    deg = min(degree, len(smooth) - 1)
    poly = Polynomial.fit(x, smooth, deg)
    return poly(stamps)


def detect_stopping(
    stamps: Sequence[float],
    values: Sequence[float],
    smoothing_window: int = 10,
    degree: int = 6,
    trend_window: int = 4,
) -> tuple[bool, np.ndarray]:
    """Detect a minimum followed by ``trend_window - 1`` non-decreasing trend values.

    Returns ``(event, trend)``.  With fewer than
    ``smoothing_window + trend_window`` records no event is reported and the
    trend is empty.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < smoothing_window + trend_window or len(values) < 2:
        return False, np.zeros(0)
    trend = fit_trend(stamps, values, smoothing_window, degree)
    tail = trend[-trend_window:]
    rising = bool(np.all(np.diff(tail) >= 0.0) and tail[-1] > tail[0])
    min_before_tail = int(np.argmin(trend)) <= len(trend) - trend_window
    return rising and min_before_tail, trend


def relative_error(estimates, targets) -> float:
    """``|mean(estimates) - mean(targets)| / |mean(targets)|``."""
    ref = float(np.mean(targets))
    if ref == 0.0:
        raise ZeroDivisionError("mean validation delta is zero; relative error undefined")
    return abs(float(np.mean(estimates)) - ref) / abs(ref)


def rel_err_stop(model, validation, threshold: float) -> bool:
    """True when the model's mean validation delta is within ``threshold`` (relative)."""
    contracts = [c for c, _ in validation]
    targets = np.array([y for _, y in validation], dtype=float)
    return relative_error(model.predict(contracts), targets) < threshold
