"""Experiment configuration and its ``key = value`` file format.

Example file::

    # 64-core WiMesh, D-SAM
    rows = 8
    cols = 8
    subnet_size = 8
    scheme = dsam
    pattern = uniform
    injection_load = 0.02
    measure_cycles = 9000

Blank lines and ``#`` comments are ignored. Keys are the field names of
``ExperimentConfig``; unknown keys are an error.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional

from .energy import EnergyParams
from .mac import SCHEMES, MacConfig
from .predictor import DEFAULT_WEIGHTS, Weights
from .traffic import PATTERNS, TEMPORALS, TrafficSpec

ALL_SCHEMES = ("none",) + SCHEMES


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # topology
    rows: int = 8
    cols: int = 8
    die_edge_mm: float = 20.0
    subnet_size: int = 8
    # mac
    scheme: str = "dsam"
    kp: float = DEFAULT_WEIGHTS[0]
    ki: float = DEFAULT_WEIGHTS[1]
    kd: float = DEFAULT_WEIGHTS[2]
    true_mean: bool = False
    epoch_flits: int = 0
    max_tuples: int = 6
    starvation_floor: int = 1
    mac_delay_ns: float = 0.14
    demand_mode: str = "backlog"
    slot_cap: int = -1
    # traffic
    pattern: str = "uniform"
    injection_load: float = 0.01
    temporal: str = "self_similar"
    hotspot_fraction: float = 0.1
    hotspot_core: int = -1          # -1: the first WI's core
    broadcast_fraction: float = 0.0
    trace_path: str = ""
    # datapath
    flit_bits: int = 32
    packet_size: int = 64
    wired_vcs: int = 4
    wired_depth: int = 2
    wi_vcs: int = 8
    wi_depth: int = 16
    tmac_wi_depth: int = 64
    pipeline: int = 3
    clock_ghz: float = 2.5
    data_rate_gbps: float = 16.0
    wireless_hop_weight: float = 1.0
    # run
    warmup_cycles: int = 1000
    measure_cycles: int = 9000
    seed: int = 0
    # energy
    e_switch_per_flit: float = EnergyParams.e_switch_per_flit
    e_wire_per_bit_per_mm: float = EnergyParams.e_wire_per_bit_per_mm
    e_wireless_per_bit: float = EnergyParams.e_wireless_per_bit
    p_tx_on: float = EnergyParams.p_tx_on
    p_rx_on: float = EnergyParams.p_rx_on
    p_leak_switch: float = EnergyParams.p_leak_switch
    include_idle_listening: bool = True

    def __post_init__(self):
        errs = []
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols < 2:
            errs.append("need at least two cores")
        if self.scheme not in ALL_SCHEMES:
            errs.append(f"scheme must be one of {ALL_SCHEMES}")
        if self.scheme != "none":
            if self.subnet_size < 1:
                errs.append("wireless schemes need subnet_size >= 1")
            elif (self.rows * self.cols) % self.subnet_size:
                errs.append(f"subnet_size {self.subnet_size} does not divide {self.rows * self.cols} cores")
            elif self.rows * self.cols // self.subnet_size > 16:
                errs.append("at most 16 WIs fit the 4-bit slot-info destination field")
            elif self.rows * self.cols // self.subnet_size == 16 and self.broadcast_fraction > 0:
                errs.append("with 16 WIs no destination ID is left for broadcast")
        if self.pattern not in PATTERNS:
            errs.append(f"pattern must be one of {PATTERNS}")
        if self.temporal not in TEMPORALS:
            errs.append(f"temporal must be one of {TEMPORALS}")
        if not 0 < self.injection_load <= 1:
            errs.append("injection_load must be in (0, 1]")
        for name in ("flit_bits", "packet_size", "wired_vcs", "wired_depth", "wi_vcs",
                     "wi_depth", "tmac_wi_depth", "measure_cycles"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be positive")
        if self.warmup_cycles < 0 or self.pipeline < 0:
            errs.append("warmup_cycles and pipeline must be non-negative")
        if self.clock_ghz <= 0 or self.data_rate_gbps <= 0:
            errs.append("clock and data rate must be positive")
        if self.scheme == "tmac" and self.tmac_wi_depth < self.packet_size:
            errs.append("T-MAC needs WI buffers that hold a whole packet")
        if self.packet_size >= 1024:
            errs.append("packet_size must be below 1024 flits")
        if errs:
            raise ConfigError("; ".join(errs))

    # ------------------------------------------------------------ derived
    @property
    def n_cores(self) -> int:
        return self.rows * self.cols

    @property
    def wireless(self) -> bool:
        return self.scheme != "none"

    @property
    def airtime_cycles(self) -> int:
        return math.ceil(self.flit_bits * self.clock_ghz / self.data_rate_gbps - 1e-12)

    @property
    def total_cycles(self) -> int:
        return self.warmup_cycles + self.measure_cycles

    @property
    def wi_buffer_depth(self) -> int:
        return self.tmac_wi_depth if self.scheme == "tmac" else self.wi_depth

    def weights(self) -> Weights:
        return Weights(self.kp, self.ki, self.kd)

    def traffic(self, hotspot_core: Optional[int] = None) -> TrafficSpec:
        hot = self.hotspot_core if hotspot_core is None else hotspot_core
        return TrafficSpec(pattern=self.pattern, injection_load=self.injection_load,
                           temporal=self.temporal, hotspot_fraction=self.hotspot_fraction,
                           hotspot_core=max(hot, 0),
                           broadcast_fraction=self.broadcast_fraction, seed=self.seed)

    def mac(self) -> MacConfig:
        return MacConfig(scheme=self.scheme, packet_size=self.packet_size,
                         airtime=self.airtime_cycles, epoch_flits=self.epoch_flits,
                         max_tuples=self.max_tuples, floor=self.starvation_floor,
                         weights=self.weights(), true_mean=self.true_mean,
                         mac_delay_cycles=math.ceil(self.mac_delay_ns * self.clock_ghz - 1e-12),
                         flit_bits=self.flit_bits, demand_mode=self.demand_mode,
                         slot_cap=self.slot_cap)

    def energy(self) -> EnergyParams:
        return EnergyParams(e_switch_per_flit=self.e_switch_per_flit,
                            e_wire_per_bit_per_mm=self.e_wire_per_bit_per_mm,
                            e_wireless_per_bit=self.e_wireless_per_bit,
                            p_tx_on=self.p_tx_on, p_rx_on=self.p_rx_on,
                            p_leak_switch=self.p_leak_switch, clock_ghz=self.clock_ghz,
                            include_idle_listening=self.include_idle_listening)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_fmt(getattr(self, f.name))}\n" for f in fields(self))

    def config_hash(self) -> str:
        """Hash of every field except the seed."""
        body = "".join(f"{f.name}={_fmt(getattr(self, f.name))};"
                       for f in fields(self) if f.name != "seed")
        return hashlib.sha256(body.encode()).hexdigest()[:12]


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(name: str, kind: Any, raw: str) -> Any:
    kind = kind if isinstance(kind, type) else {"int": int, "float": float, "bool": bool,
                                                "str": str}.get(str(kind), str)
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, types[key], val)
    return (base or ExperimentConfig()).replace(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())
