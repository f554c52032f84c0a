from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wimesh.predictor import Weights
from wimesh.tuner import (Quadratic, TrainingSet, TuningError, cost, planted_series,
                          two_step_optimize)


def sheet_cost(w, series):
    """Row-by-row evaluation of the mean squared one-step error, as a spreadsheet would."""
    kp, ki, kd = w
    avg = 0.5 * series[0]          # register state after epoch 0
    total, m = 0.0, 0
    for k in range(1, len(series) - 1):
        pred = kp * series[k] + ki * avg + kd * (series[k] - series[k - 1])
        total += (pred - series[k + 1]) ** 2
        m += 1
        avg = 0.5 * (series[k] + avg)
    return total / m


def test_cost_of_two_predictions():
    # preds (3, 5) against actuals (1, 9) give (4 + 16) / 2 = 10.
    # Series [0, 2, 1, 9]: epoch 1 sees cur 2, avg 0, prev 0; epoch 2 sees cur 1, avg 1, prev 2,
    # so kp*2 + kd*2 = 3 and kp + ki - kd = 5, met by (1, 4.5, 0.5).
    s = [0.0, 2.0, 1.0, 9.0]
    w = Weights(1.0, 4.5, 0.5)
    assert sheet_cost(w.as_tuple(), s) == pytest.approx(10.0, abs=1e-12)
    assert cost(w, TrainingSet(s)) == pytest.approx(10.0, abs=1e-9)


def test_perfect_predictor_costs_zero():
    w = Weights(0.5, 0.3, 0.1)
    assert cost(w, TrainingSet(planted_series(w, 50))) == pytest.approx(0.0, abs=1e-18)


@settings(max_examples=40, deadline=None)
@given(series=st.lists(st.integers(0, 300), min_size=3, max_size=80),
       kp=st.floats(0, 2), ki=st.floats(0, 2), kd=st.floats(0, 2))
def test_cost_matches_sheet_oracle(series, kp, ki, kd):
    got = cost(Weights(kp, ki, kd), TrainingSet(series))
    ref = sheet_cost((kp, ki, kd), [float(x) for x in series])
    assert abs(got - ref) <= 1e-9 * max(1.0, abs(ref))


def test_last_value_identity():
    rng = np.random.default_rng(0)
    s = rng.integers(0, 50, 200).astype(float)
    mse = float(np.mean((s[1:-1] - s[2:]) ** 2))
    assert cost(Weights(1, 0, 0), TrainingSet(s)) == pytest.approx(mse)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    q = Quadratic(TrainingSet(rng.integers(0, 100, 300)))
    w = rng.uniform(0, 2, 3)
    g = q.grad(w)
    for i in range(3):
        h = 1e-4
        e = np.zeros(3)
        e[i] = h
        fd = (q.cost(w + e) - q.cost(w - e)) / (2 * h)
        assert abs(g[i] - fd) <= 1e-6 * max(1.0, abs(fd))


@pytest.mark.parametrize("seed", range(5))
def test_hessian_is_positive_semidefinite(seed):
    rng = np.random.default_rng(seed)
    q = Quadratic(TrainingSet(rng.integers(0, 100, 100)))
    assert np.linalg.eigvalsh(q.gram[:2, :2]).min() >= -1e-9


@pytest.mark.parametrize("planted", [(0.5, 0.3, 0.1), (0.66, 0.13, 0.2041), (0.4, 0.5, 0.05)])
def test_planted_weights_recovered(planted):
    w = Weights(*planted)
    res = two_step_optimize(TrainingSet(planted_series(w, 400)))
    for got, want in zip(res.weights.as_tuple(), planted):
        assert abs(got - want) <= 1e-3


def test_cost_trace_is_monotone():
    rng = np.random.default_rng(3)
    res = two_step_optimize(TrainingSet(rng.integers(0, 64, 2000)))
    t = np.array(res.trace)
    assert len(t) > 2
    assert np.all(np.diff(t) <= 1e-12 * max(1.0, t[0]))


def test_single_round_is_plain_two_step():
    rng = np.random.default_rng(4)
    ts = TrainingSet(rng.integers(0, 64, 500))
    one = two_step_optimize(ts, rounds=1)
    many = two_step_optimize(ts)
    assert one.rounds == 1
    assert many.cost <= one.cost + 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_optimum_beats_random_probes(seed):
    rng = np.random.default_rng(seed)
    ts = TrainingSet(rng.integers(0, 80, 800) + 25)      # shifted series
    res = two_step_optimize(ts)
    q = Quadratic(ts)
    for _ in range(200):
        probe = rng.uniform(0, 2, 3)
        assert res.cost <= q.cost(probe) + 1e-9


def test_constant_series_warns_and_keeps_kd_zero():
    res = two_step_optimize(TrainingSet([7.0] * 50))
    assert res.weights.kd == 0.0
    assert res.warnings


def test_weights_stay_in_bounds():
    rng = np.random.default_rng(5)
    res = two_step_optimize(TrainingSet(rng.integers(0, 1000, 300)))
    assert all(0.0 <= v <= 2.0 for v in res.weights.as_tuple())
    assert res.rmse == pytest.approx(math.sqrt(res.cost))


def test_training_set_validation():
    with pytest.raises(ValueError):
        TrainingSet([1, 2])
    with pytest.raises(ValueError):
        TrainingSet([1, -2, 3])


def test_overflow_is_reported():
    with pytest.raises(TuningError):
        two_step_optimize(TrainingSet([1e300, 0.0, 1e300, 0.0]))
