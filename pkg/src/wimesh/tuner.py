"""Offline PID weight tuning by two-step gradient descent on the squared prediction error."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ._accel import njit
from .predictor import Weights, replay_features

log = logging.getLogger(__name__)

WEIGHT_BOUNDS = (0.0, 2.0)


class TuningError(RuntimeError):
    pass


@dataclass
class TrainingSet:
    samples: np.ndarray
    epoch_cycles: int = 100
    source: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or len(self.samples) < 3:
            raise ValueError("a training set needs at least 3 samples")
        if not np.all(np.isfinite(self.samples)) or np.any(self.samples < 0):
            raise ValueError("training samples must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.samples)


class Quadratic:
    """J(w) = w'Gw - 2b'w + c, the mean squared one-step prediction error."""

    def __init__(self, ts: TrainingSet):
        x, y = replay_features(ts.samples)
        m = len(y)
        self.x, self.y, self.m = x, y, m
        with np.errstate(over="ignore", invalid="ignore"):
            # overflow surfaces as a non-finite cost, reported by the optimiser
            self.gram = x.T @ x / m
            self.lin = x.T @ y / m
            self.const = float(y @ y / m)

    def cost(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        r = self.x @ w - self.y
        return float(r @ r / self.m)

    def grad(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        return 2.0 * (self.x.T @ (self.x @ w - self.y)) / self.m


def cost(w: Weights, ts: TrainingSet) -> float:
    """Mean squared error of the continuous (unclamped) predictor over ``ts``."""
    return Quadratic(ts).cost(w.as_tuple())


@njit(cache=True)
def _descend(gram, lin, const, w0, free, lo, hi, tol, max_iters, trace):
    """Projected steepest descent with halving backtracking on a quadratic.

    ``free`` masks the coordinates being optimised. Returns the final point and
    the number of accepted iterations; costs are written into ``trace``.
    """
    w = w0.copy()
    n = w.shape[0]
    g = np.zeros(n)
    step = 1.0
    j = w @ gram @ w - 2.0 * lin @ w + const
    trace[0] = j
    it = 0
    while it < max_iters:
        full = 2.0 * (gram @ w - lin)
        gnorm = 0.0
        for i in range(n):
            g[i] = full[i] if free[i] else 0.0
            # a gradient pushing against an active bound is not a descent direction
            if free[i] and ((w[i] <= lo and g[i] > 0.0) or (w[i] >= hi and g[i] < 0.0)):
                g[i] = 0.0
            gnorm += g[i] * g[i]
        if math.sqrt(gnorm) < tol:
            break
        step = min(step * 2.0, 1e6)
        accepted = False
        while step > 1e-300:
            cand = w - step * g
            for i in range(n):
                cand[i] = min(max(cand[i], lo), hi)
            jc = cand @ gram @ cand - 2.0 * lin @ cand + const
            if jc <= j - 1e-4 * step * gnorm or (jc <= j and step < 1e-12):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        moved = 0.0
        for i in range(n):
            moved = max(moved, abs(cand[i] - w[i]))
        stalled = jc >= j
        w = cand
        j = jc
        it += 1
        trace[it] = j
        # at floating-point resolution the cost stops decreasing before the
        # gradient reaches tol
        if moved == 0.0 or stalled:
            break
    return w, it


@dataclass
class TuneResult:
    weights: Weights
    cost: float
    rmse: float
    trace: List[float] = field(default_factory=list)
    rounds: int = 0
    warnings: List[str] = field(default_factory=list)


def two_step_optimize(ts: TrainingSet, tol: float = 1e-10, max_iters: int = 200_000,
                      rounds: int = 1000, round_tol: float = 1e-9) -> TuneResult:
    """Step 1 fits (kp, ki) with kd held; step 2 fits kd with (kp, ki) held.

    ``rounds=1`` is the plain two-step procedure, which stops short of the
    joint optimum whenever kd is correlated with (kp, ki). Further rounds
    repeat the pair of steps from the previous result (block coordinate
    descent) until the weights move less than ``round_tol``. ``tol`` bounds the
    projected gradient norm relative to the largest linear coefficient.
    """
    q = Quadratic(ts)
    warnings: List[str] = []
    if np.ptp(ts.samples) == 0:
        msg = "training set is constant; the kd gradient is identically zero"
        log.warning(msg)
        warnings.append(msg)
    lo, hi = WEIGHT_BOUNDS
    # gradient tolerance relative to the size of the data
    scale = max(1.0, float(np.max(np.abs(q.lin))))
    w = np.zeros(3)
    trace: List[float] = []
    buf = np.zeros(max_iters + 1)
    done = 0
    for done in range(1, rounds + 1):
        before = w.copy()
        for free in (np.array([True, True, False]), np.array([False, False, True])):
            w, n = _descend(q.gram, q.lin, q.const, w, free, lo, hi, tol * scale, max_iters, buf)
            seg = buf[: n + 1].tolist()
            if not all(math.isfinite(v) for v in seg):
                raise TuningError("cost became non-finite during descent")
            trace.extend(seg if not trace else seg[1:])
        if np.max(np.abs(w - before)) < round_tol:
            break
    j = q.cost(w)
    if not math.isfinite(j):
        raise TuningError("cost is non-finite at the returned weights")
    return TuneResult(Weights(*map(float, w)), j, math.sqrt(j), trace, done, warnings)


def planted_series(w: Weights, m: int, start: Sequence[float] = (400.0, 100.0)) -> np.ndarray:
    """A series that the register pipeline with weights ``w`` predicts exactly."""
    d = np.zeros(m)
    d[0], d[1] = start
    avg = 0.5 * d[0]
    for k in range(1, m - 1):
        d[k + 1] = w.kp * d[k] + w.ki * avg + w.kd * (d[k] - d[k - 1])
        avg = 0.5 * (d[k] + avg)
    return d


def collect_training_set(cfg, epochs: int = 5000, epoch_cycles: int = 100,
                         warmup_epochs: int = 10) -> TrainingSet:
    """Per-epoch flits routed to each WI's wireless port; returns the most variable WI.

    ``cfg`` is an ``ExperimentConfig``; the run is forced to the token MAC at
    full load with uniform self-similar traffic.
    """
    from .sim import simulate

    run_cfg = cfg.replace(scheme="tmac", pattern="uniform", temporal="self_similar",
                          injection_load=1.0, warmup_cycles=0,
                          measure_cycles=(epochs + warmup_epochs) * epoch_cycles)
    res = simulate(run_cfg, hist_epoch=epoch_cycles)
    hist = res.net.hist[:, warmup_epochs:warmup_epochs + epochs].astype(np.float64)
    var = hist.var(axis=1)
    w = int(np.argmax(var))
    return TrainingSet(hist[w], epoch_cycles, source=f"{run_cfg.config_hash()}:seed{run_cfg.seed}:wi{w}")
