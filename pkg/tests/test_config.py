from __future__ import annotations

import pytest

from wimesh.config import ConfigError, ExperimentConfig, load_config, parse_config_text


def test_defaults_describe_the_64_core_baseline():
    c = ExperimentConfig()
    assert (c.rows, c.cols, c.subnet_size) == (8, 8, 8)
    assert c.n_cores // c.subnet_size == 8
    assert (c.flit_bits, c.packet_size, c.clock_ghz) == (32, 64, 2.5)
    assert (c.warmup_cycles, c.total_cycles) == (1000, 10_000)
    assert c.airtime_cycles == 5
    assert (c.wired_vcs, c.wired_depth, c.wi_vcs, c.wi_depth) == (4, 2, 8, 16)


def test_tmac_uses_deeper_wi_buffers():
    assert ExperimentConfig(scheme="tmac").wi_buffer_depth == 64
    assert ExperimentConfig(scheme="dsam").wi_buffer_depth == 16


@pytest.mark.parametrize("bits, cycles", [(32, 5), (64, 10), (128, 20), (16, 3)])
def test_airtime_rounds_up(bits, cycles):
    assert ExperimentConfig(flit_bits=bits).airtime_cycles == cycles


def test_mac_config_carries_scheme_parameters():
    m = ExperimentConfig(scheme="psam", kp=0.1, ki=0.2, kd=0.3, max_tuples=4).mac()
    assert m.scheme == "psam" and m.max_tuples == 4
    assert (m.weights.kp, m.weights.ki, m.weights.kd) == (0.1, 0.2, 0.3)
    assert m.mac_delay_cycles == 1


def test_round_trip_through_text():
    c = ExperimentConfig(scheme="racm", injection_load=0.125, true_mean=True, trace_path="x.csv")
    assert parse_config_text(c.to_text()) == c


def test_parse_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# small run\nrows = 4\ncols = 4  # trailing comment\n\nsubnet_size = 4\n"
                 "scheme = dsam\ntrue_mean = yes\ninjection_load = 0.02\n")
    c = load_config(p)
    assert (c.rows, c.cols, c.subnet_size, c.true_mean, c.injection_load) == (4, 4, 4, True, 0.02)


@pytest.mark.parametrize("text", [
    "rows 4",                    # no '='
    "colour = red",              # unknown key
    "rows = four",               # bad int
    "true_mean = maybe",         # bad bool
    "subnet_size = 5",           # does not tile 64 cores
    "scheme = aloha",
    "injection_load = 0",
    "rows = 16\ncols = 16\nsubnet_size = 8",   # 32 WIs do not fit the 4-bit field
    "scheme = tmac\ntmac_wi_depth = 16",
    "rows = 16\ncols = 16\nsubnet_size = 16\nbroadcast_fraction = 0.05",  # no ID left
])
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_hash_ignores_seed_only():
    a = ExperimentConfig(seed=1)
    assert a.config_hash() == a.replace(seed=99).config_hash()
    assert a.config_hash() != a.replace(injection_load=0.5).config_hash()


def test_sixteen_wis_allowed_without_broadcast():
    c = parse_config_text("rows = 16\ncols = 16\nsubnet_size = 16\n")
    assert c.n_cores // c.subnet_size == 16
