"""Turns raw period counters into agent observations and normalized rewards.

Each interaction period contributes one collision-probability sample to a
fixed-length history; the agent observes that history summarized as a short
time series of (mean, std) pairs over sliding windows, and is rewarded with
throughput normalized against a deterministic reference maximum.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .medium import ConfigurationError, PeriodCounters

HISTORY_LENGTH = 300
#: Sliding-window summary: window = h/2, stride = h/4 -> 3 windows of 2 stats.
OBSERVATION_SHAPE = (3, 2)


class HistoryBuffer:
    """Ring buffer of the last ``capacity`` collision probabilities.

    Starts filled with zeroes, so observations are well defined before any
    real measurement arrives.
    """

    def __init__(self, capacity: int = HISTORY_LENGTH):
        if capacity < 4:
            raise ConfigurationError("history capacity must be >= 4")
        self.capacity = capacity
        self._values = deque([0.0] * capacity, maxlen=capacity)

    def push(self, p_col: float) -> None:
        if not 0.0 <= p_col <= 1.0:
            raise ValueError(f"collision probability out of range: {p_col}")
        self._values.append(float(p_col))

    def values(self) -> np.ndarray:
        """History snapshot, oldest first."""
        return np.array(self._values, dtype=float)

    def __len__(self) -> int:
        return self.capacity


def record_period(buf: HistoryBuffer, counters: PeriodCounters) -> float:
    """Push the period's collision probability and return it.

    A period without any attempt pushes 0 (no evidence of collisions),
    matching the zero-initialized buffer.
    """
    p_col = counters.collision_probability
    buf.push(p_col)
    return p_col


def preprocess(buf: HistoryBuffer) -> np.ndarray:
    """Summarize the history as windowed (mean, population std) pairs.

    Windows of length capacity/2 slide by capacity/4, oldest to newest; for
    the default 300-entry history this yields a 3x2 matrix. Pure function of
    the buffer contents.
    """
    values = buf.values()
    window = buf.capacity // 2
    stride = buf.capacity // 4
    n_windows = (buf.capacity - window) // stride + 1
    out = np.empty((n_windows, 2), dtype=float)
    for i in range(n_windows):
        chunk = values[i * stride: i * stride + window]
        # shifted two-pass moments: a constant window gives std exactly 0
        shifted = chunk - chunk[0]
        center = shifted.mean()
        out[i, 0] = chunk[0] + center
        out[i, 1] = np.sqrt(np.mean((shifted - center) ** 2))  # population std
    return out


def normalize_reward(throughput_bps: float, max_throughput_bps: float) -> float:
    """Scale throughput into [0, 1] against the expected maximum."""
    if max_throughput_bps <= 0:
        raise ConfigurationError("max_throughput_bps must be positive")
    return min(max(throughput_bps / max_throughput_bps, 0.0), 1.0)


__all__ = [
    "HISTORY_LENGTH",
    "HistoryBuffer",
    "OBSERVATION_SHAPE",
    "normalize_reward",
    "preprocess",
    "record_period",
]
