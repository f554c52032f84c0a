"""Per-WI PID demand prediction unit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit

DEFAULT_WEIGHTS = (0.66, 0.13, 0.2041)


@dataclass(frozen=True)
class Weights:
    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.kp, self.ki, self.kd)):
            raise ValueError("weights must be finite")
        if self.kp < 0 or self.ki < 0:
            raise ValueError("kp and ki must be non-negative")

    def as_tuple(self):
        return (self.kp, self.ki, self.kd)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def raw_prediction(w: Weights, current: float, average: float, previous: float) -> float:
    return w.kp * current + w.ki * average + w.kd * (current - previous)


@dataclass
class PredictionUnit:
    """Register state of one WI's prediction unit.

    ``true_mean=True`` swaps the half-averaging register for the arithmetic
    mean of all completed epochs before the current one.
    """
    epoch_counter: int = 0
    demand_counter: int = 0
    demand_averager: float = 0.0
    demand_previous: int = 0
    demand_self: int = 0
    true_mean: bool = False
    _history_sum: float = 0.0
    _history_len: int = 0

    def on_flit_to_wireless(self, n: int = 1) -> None:
        self.demand_counter += n

    def end_of_epoch(self, w: Weights) -> int:
        raw = raw_prediction(w, self.demand_counter, self.demand_averager, self.demand_previous)
        prediction = max(0, round_half_up(raw))
        if self.true_mean:
            self._history_sum += self.demand_counter
            self._history_len += 1
            # read back one epoch later, when it spans epochs 0..j-2
            self.demand_averager = self._history_sum / self._history_len
        else:
            self.demand_averager = (self.demand_counter + self.demand_averager) / 2.0
        self.demand_previous = self.demand_counter
        self.demand_self = prediction
        self.demand_counter = 0
        return prediction


@njit(cache=True)
def replay_features(demand):
    """Regressors of every prediction the register pipeline makes over a series.

    Row r holds (current, averager, current - previous) at the end of epoch
    k = r + 1; its target is ``demand[k + 1]``. Epoch 0 only primes the
    registers, so there are ``len(demand) - 2`` rows.
    """
    m = demand.shape[0]
    rows = max(m - 2, 0)
    x = np.zeros((rows, 3))
    y = np.zeros(rows)
    avg = 0.0
    prev = 0.0
    for k in range(m - 1):
        cur = demand[k]
        if k >= 1:
            r = k - 1
            x[r, 0] = cur
            x[r, 1] = avg
            x[r, 2] = cur - prev
            y[r] = demand[k + 1]
        avg = 0.5 * (cur + avg)
        prev = cur
    return x, y


def predict_series(w: Weights, demand) -> np.ndarray:
    """Unclamped, unrounded predictions aligned with ``replay_features`` targets."""
    x, _ = replay_features(np.asarray(demand, dtype=np.float64))
    return x @ np.array(w.as_tuple())
