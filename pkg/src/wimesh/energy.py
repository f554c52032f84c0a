"""Energy ledger and run metrics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional

import numpy as np

UNDEFINED = float("nan")

COMPONENTS = ("switch", "wire", "wireless", "tx_on", "rx_on", "mac_unit", "leakage")


@dataclass(frozen=True)
class EnergyParams:
    """Unit energies (J) and powers (W).

    Only ``e_wireless_per_bit`` and the two MAC-unit powers are measured
    figures; everything else is a placeholder held fixed across schemes so
    relative comparisons stay meaningful.
    """
    e_switch_per_flit: float = 1.0e-12
    e_wire_per_bit_per_mm: float = 0.1e-12
    e_wireless_per_bit: float = 2.06e-12
    p_tx_on: float = 0.0
    p_rx_on: float = 10.0e-3
    p_mac_psam: float = 0.373e-3
    p_mac_dsam: float = 0.286e-3
    p_leak_switch: float = 0.5e-3
    clock_ghz: float = 2.5
    include_idle_listening: bool = True

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and (v < 0 or not math.isfinite(v)):
                raise ValueError(f"{f.name} must be finite and non-negative")
        if self.clock_ghz <= 0:
            raise ValueError("clock must be positive")

    @property
    def cycle_s(self) -> float:
        return 1e-9 / self.clock_ghz

    def mac_power(self, scheme: str) -> float:
        if scheme == "dsam":
            return self.p_mac_dsam
        if scheme in ("psam", "racm"):
            return self.p_mac_psam
        return 0.0


@dataclass
class EventCounts:
    """Raw event counts from one measurement window."""
    cycles: int = 0
    n_switches: int = 0
    n_wi: int = 0
    switch_traversals: int = 0
    wire_flit_mm: float = 0.0
    wireless_flits: int = 0
    tx_on_cycles: int = 0
    rx_on_cycles: int = 0


@dataclass
class MetricsLedger:
    flit_bits: int = 32
    scheme: str = "none"
    cycles: int = 0
    delivered_flits: int = 0
    latencies: List[int] = field(default_factory=list)             # head injection -> tail ejection
    creation_latencies: List[int] = field(default_factory=list)    # packet creation -> tail ejection
    energy: Dict[str, float] = field(default_factory=lambda: {c: 0.0 for c in COMPONENTS})
    allocated_slot_flits: int = 0
    used_slot_flits: int = 0
    undelivered: int = 0

    @property
    def delivered_bits(self) -> int:
        return self.delivered_flits * self.flit_bits

    @property
    def total_energy(self) -> float:
        return math.fsum(self.energy.values())

    def record(self, kind: str, amount: float) -> None:
        if kind not in self.energy:
            raise KeyError(f"unknown energy component {kind!r}")
        self.energy[kind] += amount

    def charge(self, ev: EventCounts, p: EnergyParams) -> None:
        """Convert event counts into energy by component class."""
        b = self.flit_bits
        self.record("switch", ev.switch_traversals * p.e_switch_per_flit)
        self.record("wire", ev.wire_flit_mm * b * p.e_wire_per_bit_per_mm)
        self.record("wireless", ev.wireless_flits * b * p.e_wireless_per_bit)
        self.record("tx_on", ev.tx_on_cycles * p.p_tx_on * p.cycle_s)
        if p.include_idle_listening:
            self.record("rx_on", ev.rx_on_cycles * p.p_rx_on * p.cycle_s)
        self.record("mac_unit", ev.n_wi * ev.cycles * p.mac_power(self.scheme) * p.cycle_s)
        self.record("leakage", ev.n_switches * ev.cycles * p.p_leak_switch * p.cycle_s)


@dataclass
class Summary:
    bandwidth_per_core: float         # bits per second
    avg_latency: float                # cycles, NaN when nothing was delivered
    packet_energy: float              # J per delivered packet, NaN when nothing was delivered
    wasted_slot_fraction: float       # NaN without a wireless MAC
    delivered_packets: int
    total_energy: float
    avg_creation_latency: float = UNDEFINED


    def as_dict(self) -> dict:
        return asdict(self)


def summarize(ledger: MetricsLedger, n_cores: int, clock_ghz: float) -> Summary:
    cyc = ledger.cycles
    bw = ledger.delivered_bits * clock_ghz * 1e9 / (cyc * n_cores) if cyc > 0 else 0.0
    n = len(ledger.latencies)
    lat = float(np.mean(ledger.latencies)) if n else UNDEFINED
    pe = ledger.total_energy / n if n else UNDEFINED
    if ledger.allocated_slot_flits > 0:
        wasted = (ledger.allocated_slot_flits - ledger.used_slot_flits) / ledger.allocated_slot_flits
    else:
        wasted = UNDEFINED
    clat = float(np.mean(ledger.creation_latencies)) if ledger.creation_latencies else UNDEFINED
    return Summary(bw, lat, pe, wasted, n, ledger.total_energy, clat)


SUMMARY_COLUMNS = ("config_hash", "seed", "scheme", "load", "bandwidth_per_core_gbps",
                   "avg_latency_cycles", "packet_energy_pj", "wasted_slot_fraction",
                   "delivered_packets", "avg_creation_latency_cycles")


def summary_row(s: Summary, config_hash: str, seed: int, scheme: str, load: float) -> dict:
    def fmt(x: float, scale: float = 1.0) -> str:
        return "undefined" if math.isnan(x) else repr(x * scale)
    return {
        "config_hash": config_hash,
        "seed": seed,
        "scheme": scheme,
        "load": load,
        "bandwidth_per_core_gbps": fmt(s.bandwidth_per_core, 1e-9),
        "avg_latency_cycles": fmt(s.avg_latency),
        "packet_energy_pj": fmt(s.packet_energy, 1e12),
        "wasted_slot_fraction": fmt(s.wasted_slot_fraction),
        "delivered_packets": s.delivered_packets,
        "avg_creation_latency_cycles": fmt(s.avg_creation_latency),
    }


def rows_to_csv(rows: List[dict], columns=SUMMARY_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
