from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wimesh.traffic import (BROADCAST, InjectionProcess, TraceError, TrafficSpec, Workload,
                            generate_workload, hurst_aggregated_variance, injection_mask,
                            load_trace, next_destination, trunc_pareto_mean, write_trace)


def test_full_load_always_injects():
    for temporal in ("bernoulli", "self_similar"):
        assert injection_mask(TrafficSpec(injection_load=1.0, temporal=temporal), 3, 500).all()


@pytest.mark.parametrize("load", [0.05, 0.3])
def test_bernoulli_rate(load):
    m = np.mean([injection_mask(TrafficSpec(injection_load=load, temporal="bernoulli", seed=s), 0,
                                100_000).mean() for s in range(3)])
    assert m == pytest.approx(load, rel=0.03)


@pytest.mark.parametrize("load", [0.01, 0.1, 0.5])
def test_self_similar_long_run_mean(load):
    # heavy tails converge slowly; pool cores and seeds
    rates = [injection_mask(TrafficSpec(injection_load=load, seed=s), c, 400_000).mean()
             for s in range(4) for c in range(16)]
    assert np.mean(rates) == pytest.approx(load, rel=0.15)


def test_self_similar_is_long_range_dependent():
    x = injection_mask(TrafficSpec(injection_load=0.1, seed=7), 0, 1_000_000).astype(float)
    assert hurst_aggregated_variance(x) > 0.5


def test_hurst_of_white_noise_is_one_half():
    x = np.random.default_rng(0).random(1_000_000)
    assert hurst_aggregated_variance(x) == pytest.approx(0.5, abs=0.05)


def test_truncated_pareto_mean_matches_sampling():
    rng = np.random.default_rng(1)
    shape, scale, cap = 1.5, 8.0, 1000.0
    u = rng.random(2_000_000)
    tail = (scale / cap) ** shape
    draws = scale * (1.0 - u * (1.0 - tail)) ** (-1.0 / shape)
    assert draws.max() <= cap
    assert draws.mean() == pytest.approx(trunc_pareto_mean(shape, scale, cap), rel=0.01)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), core=st.integers(0, 63),
       load=st.sampled_from([0.001, 0.02, 0.2, 0.7]))
def test_scalar_process_matches_vector_mask(seed, core, load):
    spec = TrafficSpec(injection_load=load, seed=seed)
    n = 3000
    proc = InjectionProcess(spec, core)
    assert [proc.should_inject(i) for i in range(n)] == injection_mask(spec, core, n).tolist()


def test_process_requires_consecutive_cycles():
    proc = InjectionProcess(TrafficSpec(injection_load=0.5), 0)
    proc.should_inject(0)
    with pytest.raises(ValueError):
        proc.should_inject(5)


def test_bit_complement_destination():
    rng = np.random.default_rng(0)
    spec = TrafficSpec(pattern="bit_complement")
    assert [next_destination(spec, s, 64, rng) for s in (0, 1, 63)] == [63, 62, 0]


def test_uniform_never_targets_self_and_covers_all():
    rng = np.random.default_rng(0)
    spec = TrafficSpec()
    got = [next_destination(spec, 5, 16, rng) for _ in range(5000)]
    assert 5 not in got
    assert set(got) == set(range(16)) - {5}


def test_hotspot_fraction():
    rng = np.random.default_rng(0)
    spec = TrafficSpec(pattern="hotspot", hotspot_fraction=0.1, hotspot_core=9)
    got = np.array([next_destination(spec, 2, 64, rng) for _ in range(50_000)])
    assert np.mean(got == 9) == pytest.approx(0.1, abs=0.01)
    assert 2 not in got


def test_broadcast_fraction():
    rng = np.random.default_rng(0)
    spec = TrafficSpec(pattern="broadcast_mix", broadcast_fraction=0.2)
    got = np.array([next_destination(spec, 2, 64, rng) for _ in range(50_000)])
    assert np.mean(got == BROADCAST) == pytest.approx(0.2, abs=0.01)


def test_workload_deterministic_and_sorted():
    spec = TrafficSpec(injection_load=0.2, seed=11)
    a = generate_workload(spec, 16, 5000)
    b = generate_workload(spec, 16, 5000)
    assert np.array_equal(a.cycle, b.cycle) and np.array_equal(a.dst, b.dst)
    assert np.all(np.diff(a.cycle) >= 0)
    c = generate_workload(TrafficSpec(injection_load=0.2, seed=12), 16, 5000)
    assert not np.array_equal(a.cycle, c.cycle)


def test_packet_born_when_last_flit_generated():
    spec = TrafficSpec(injection_load=1.0)
    w = generate_workload(spec, 2, 200, packet_size=64)
    assert sorted(set(w.cycle.tolist())) == [63, 127, 191]


def test_trace_round_trip(tmp_path):
    w = Workload(np.array([0, 3, 3]), np.array([1, 0, 2]), np.array([2, BROADCAST, 0]),
                 np.array([64, 8, 64]))
    p = tmp_path / "t.trace"
    write_trace(p, w)
    r = load_trace(p)
    for f in ("cycle", "src", "dst", "size"):
        assert np.array_equal(getattr(r, f), getattr(w, f))


@pytest.mark.parametrize("text", ["0 1 2\n", "0 1 x 64\n", "5 1 2 64\n3 1 2 64\n", "0 1 2 0\n"])
def test_bad_traces_rejected(tmp_path, text):
    p = tmp_path / "bad.trace"
    p.write_text(text)
    with pytest.raises(TraceError):
        load_trace(p)


def test_trace_comments_and_blank_lines(tmp_path):
    p = tmp_path / "c.trace"
    p.write_text("# header\n\n10 0 1 4  # one packet\n")
    assert len(load_trace(p)) == 1


@pytest.mark.parametrize("kw", [dict(pattern="zigzag"), dict(injection_load=0.0),
                                dict(on_shape=1.0), dict(min_burst=5.0, max_burst=5.0)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        TrafficSpec(**kw)
