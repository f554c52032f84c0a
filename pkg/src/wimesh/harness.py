"""Experiment orchestration: single runs, load sweeps with saturation
detection, subnet-size sweeps and scheme comparisons."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .energy import Summary, rows_to_csv, summary_row
from .mac import SCHEME_LABELS
from .sim import simulate

log = logging.getLogger(__name__)

LATENCY_FACTOR = 5.0
PLATEAU_GAIN = 0.01
DEFAULT_LOADS = (0.0005, 0.001, 0.002, 0.004, 0.008, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)


@dataclass
class RunReport:
    config: ExperimentConfig
    summary: Summary

    def row(self) -> dict:
        c = self.config
        return summary_row(self.summary, c.config_hash(), c.seed, c.scheme, c.injection_load)


def run(cfg: ExperimentConfig) -> RunReport:
    return RunReport(cfg, simulate(cfg).summary)


def run_many(cfgs: Sequence[ExperimentConfig], jobs: int = 1) -> List[RunReport]:
    """Independent runs; results come back in input order whatever ``jobs`` is."""
    if jobs <= 1 or len(cfgs) <= 1:
        return [run(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(run, cfgs))


@dataclass
class LoadSweep:
    config: ExperimentConfig
    loads: List[float]
    reports: List[RunReport]
    zero_load_latency: float
    saturation_index: Optional[int]     # first saturated point, None if never

    @property
    def bandwidth(self) -> List[float]:
        return [r.summary.bandwidth_per_core for r in self.reports]

    @property
    def latency(self) -> List[float]:
        return [r.summary.avg_latency for r in self.reports]

    @property
    def peak_bandwidth(self) -> float:
        """Accepted bandwidth at the last point before saturation."""
        i = self.saturation_index
        if i is None:
            return self.bandwidth[-1]
        return self.bandwidth[max(i - 1, 0)]

    @property
    def saturation_load(self) -> Optional[float]:
        return None if self.saturation_index is None else self.loads[self.saturation_index]


def zero_load_reference(latency: Sequence[float]) -> float:
    """Latency at the lightest load that delivered anything."""
    for lat in latency:
        if not math.isnan(lat):
            return lat
    return math.nan


def find_saturation(bandwidth: Sequence[float], latency: Sequence[float],
                    zero_load_latency: float) -> Optional[int]:
    """First point whose latency exceeds 5x zero-load or whose throughput gain is < 1%.

    Leading points that delivered nothing are too sparse to measure, not
    saturated; a gap after the first delivery counts as saturation.
    """
    started = False
    for i in range(len(bandwidth)):
        lat = latency[i]
        if math.isnan(lat):
            if started:
                return i
            continue
        if lat > LATENCY_FACTOR * zero_load_latency:
            return i
        if started and bandwidth[i] < bandwidth[i - 1] * (1.0 + PLATEAU_GAIN):
            return i
        started = True
    return None


def sweep_load(cfg: ExperimentConfig, loads: Iterable[float] = DEFAULT_LOADS,
               jobs: int = 1) -> LoadSweep:
    loads = [float(x) for x in loads]
    if loads != sorted(loads):
        raise ValueError("loads must be sorted ascending")
    reports = run_many([cfg.replace(injection_load=x) for x in loads], jobs)
    # the architecture's own lightest-load latency is its zero-load reference
    zero = zero_load_reference([r.summary.avg_latency for r in reports])
    sat = find_saturation([r.summary.bandwidth_per_core for r in reports],
                          [r.summary.avg_latency for r in reports], zero)
    return LoadSweep(cfg, loads, reports, zero, sat)


@dataclass
class SubnetSweep:
    sizes: List[int]
    sweeps: List[LoadSweep]

    @property
    def peaks(self) -> List[float]:
        return [s.peak_bandwidth for s in self.sweeps]

    @property
    def best_size(self) -> int:
        return self.sizes[int(np.argmax(self.peaks))]

    def table(self) -> str:
        lines = ["subnet_size,n_wi,peak_bandwidth_per_core_gbps,saturation_load"]
        for size, sw in zip(self.sizes, self.sweeps):
            n_wi = sw.config.rows * sw.config.cols // size
            lines.append(f"{size},{n_wi},{sw.peak_bandwidth * 1e-9!r},{sw.saturation_load}")
        return "\n".join(lines) + "\n"


def sweep_subnet(cfg: ExperimentConfig, sizes: Iterable[int], loads: Iterable[float] = DEFAULT_LOADS,
                 scheme: str = "tmac", jobs: int = 1) -> SubnetSweep:
    sizes = list(sizes)
    loads = list(loads)
    sweeps = [sweep_load(cfg.replace(subnet_size=s, scheme=scheme), loads, jobs) for s in sizes]
    return SubnetSweep(sizes, sweeps)


@dataclass
class Comparison:
    baseline: str
    sweeps: Dict[str, LoadSweep]

    def gain(self, scheme: str, metric: str = "peak_bandwidth") -> float:
        """Percentage change of ``metric`` relative to the baseline scheme."""
        base = getattr(self.sweeps[self.baseline], metric)
        val = getattr(self.sweeps[scheme], metric)
        if scheme == self.baseline:
            return 0.0
        if base == 0:
            return math.nan
        return 100.0 * (val - base) / base

    def report(self) -> str:
        lines = ["scheme,label,peak_bandwidth_per_core_gbps,saturation_load,"
                 "zero_load_latency,delta_peak_pct"]
        for s, sw in self.sweeps.items():
            lines.append(f"{s},{SCHEME_LABELS.get(s, 'wired mesh')},{sw.peak_bandwidth * 1e-9!r},"
                         f"{sw.saturation_load},{sw.zero_load_latency!r},{self.gain(s)!r}")
        return "\n".join(lines) + "\n"

    def rows(self) -> List[dict]:
        return [r.row() for sw in self.sweeps.values() for r in sw.reports]


def compare_schemes(cfg: ExperimentConfig, schemes: Iterable[str], baseline: Optional[str] = None,
                    loads: Iterable[float] = DEFAULT_LOADS, jobs: int = 1) -> Comparison:
    schemes = list(dict.fromkeys(schemes))
    baseline = baseline or schemes[0]
    if baseline not in schemes:
        schemes.insert(0, baseline)
    loads = list(loads)
    sweeps = {s: sweep_load(cfg.replace(scheme=s), loads, jobs) for s in schemes}
    return Comparison(baseline, sweeps)


# ------------------------------------------------------------------ output
def write_csv(path, rows: List[dict]) -> None:
    Path(path).write_text(rows_to_csv(rows))


def plot_latency_curves(path, sweeps: Dict[str, LoadSweep]) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, sw in sweeps.items():
        ax.plot(sw.loads, sw.latency, marker="o", label=SCHEME_LABELS.get(name, "wired mesh"))
    ax.set_xscale("log")
    ax.set_xlabel("injection load (flits/core/cycle)")
    ax.set_ylabel("average packet latency (cycles)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_peak_bars(path, sweeps: Dict[str, LoadSweep]) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(sweeps)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([SCHEME_LABELS.get(n, "wired mesh") for n in names],
           [sweeps[n].peak_bandwidth * 1e-9 for n in names])
    ax.set_ylabel("peak bandwidth per core (Gbps)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
