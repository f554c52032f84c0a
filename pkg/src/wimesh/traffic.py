"""Synthetic workloads and trace replay.

Spatial patterns pick destinations; a temporal process decides in which
cycles a core generates flits. A packet enters the source queue in the cycle
its last flit is generated, so the long-run flit injection rate equals the
configured load while latency is measured from packet creation.

Core IDs are 0-based; ``BROADCAST`` (-1) marks a packet for every other core.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

BROADCAST = -1

PATTERNS = ("uniform", "hotspot", "bit_complement", "broadcast_mix")
TEMPORALS = ("bernoulli", "self_similar")


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TrafficSpec:
    pattern: str = "uniform"
    injection_load: float = 0.1
    temporal: str = "self_similar"
    hotspot_fraction: float = 0.1
    hotspot_core: int = 0
    broadcast_fraction: float = 0.0
    on_shape: float = 1.9
    off_shape: float = 1.25
    min_burst: float = 8.0
    max_burst: float = 10_000.0
    seed: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown traffic pattern {self.pattern!r}")
        if self.temporal not in TEMPORALS:
            raise ValueError(f"unknown temporal process {self.temporal!r}")
        if not 0.0 < self.injection_load <= 1.0:
            raise ValueError("injection load must be in (0, 1]")
        if not 0.0 <= self.hotspot_fraction <= 1.0:
            raise ValueError("hotspot fraction must be in [0, 1]")
        if not 0.0 <= self.broadcast_fraction <= 1.0:
            raise ValueError("broadcast fraction must be in [0, 1]")
        if self.on_shape <= 1.0 or self.off_shape <= 1.0:
            raise ValueError("Pareto shapes must exceed 1 for a finite mean")
        if not 0 < self.min_burst < self.max_burst:
            raise ValueError("need 0 < min_burst < max_burst")


@dataclass
class Workload:
    """Time-sorted packet creation events."""
    cycle: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    size: np.ndarray

    def __len__(self) -> int:
        return len(self.cycle)

    @classmethod
    def empty(cls) -> "Workload":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), z.copy())


def _stream(seed: int, core: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([seed, core, purpose])


def next_destination(spec: TrafficSpec, source: int, n_cores: int, rng: np.random.Generator) -> int:
    if spec.pattern == "bit_complement":
        # (N - i + 1) with 1-based IDs
        return n_cores - 1 - source
    if spec.pattern == "broadcast_mix":
        if rng.random() < spec.broadcast_fraction:
            return BROADCAST
        return _uniform_other(source, n_cores, rng)
    if spec.pattern == "hotspot":
        hot = spec.hotspot_core
        if source != hot:
            if rng.random() < spec.hotspot_fraction:
                return hot
            return _uniform_excluding(source, hot, n_cores, rng)
    return _uniform_other(source, n_cores, rng)


def _uniform_other(source: int, n_cores: int, rng: np.random.Generator) -> int:
    d = int(rng.integers(n_cores - 1))
    return d + 1 if d >= source else d


def _uniform_excluding(a: int, b: int, n_cores: int, rng: np.random.Generator) -> int:
    lo, hi = min(a, b), max(a, b)
    d = int(rng.integers(n_cores - 2))
    if d >= lo:
        d += 1
    if d >= hi:
        d += 1
    return d


def _trunc_pareto(u, shape: float, scale: float, cap: float):
    """Inverse CDF of Pareto(shape, scale) truncated at ``cap``; u in [0, 1)."""
    tail = (scale / np.asarray(cap, dtype=np.float64)) ** shape   # 0 for an infinite cap
    return scale * (1.0 - u * (1.0 - tail)) ** (-1.0 / shape)


def trunc_pareto_mean(shape: float, scale: float, cap: float) -> float:
    if np.isinf(cap):
        return shape * scale / (shape - 1.0)
    if scale >= cap:
        return cap
    tail = (scale / cap) ** shape
    return (shape * scale ** shape / (shape - 1.0)
            * (scale ** (1.0 - shape) - cap ** (1.0 - shape)) / (1.0 - tail))


def _pareto_scales(spec: TrafficSpec):
    load = spec.injection_load
    cap = spec.max_burst
    on_mean = trunc_pareto_mean(spec.on_shape, spec.min_burst, cap)
    target = on_mean * (1.0 - load) / load
    # very light loads need OFF periods beyond max_burst; stretch the OFF cap
    # so the mean stays reachable while the tail stays heavy
    off_cap = max(cap, 100.0 * target)
    # the truncated mean is increasing in the scale; bisect for the OFF scale
    lo, hi = 1e-12, target
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if trunc_pareto_mean(spec.off_shape, mid, off_cap) < target:
            lo = mid
        else:
            hi = mid
    return spec.min_burst, 0.5 * (lo + hi), off_cap


def _burn_in(spec: TrafficSpec) -> float:
    # start the renewal process this far in the past so cycle 0 sees a
    # (near-)stationary phase rather than a fresh renewal
    return 10.0 * min(spec.max_burst, 1e4)


class InjectionProcess:
    """Per-core flit generation process, queried once per cycle in order."""

    def __init__(self, spec: TrafficSpec, core: int):
        self.spec = spec
        self.rng = _stream(spec.seed, core, 0)
        self._cycle = -1
        self._always = spec.injection_load >= 1.0
        if spec.temporal == "self_similar" and not self._always:
            self._on_scale, self._off_scale, self._off_cap = _pareto_scales(spec)
            self._on = self.rng.random() < spec.injection_load
            self._edge = -_burn_in(spec) + self._draw(self._on)

    def _draw(self, on: bool) -> float:
        u = self.rng.random()
        if on:
            return float(_trunc_pareto(u, self.spec.on_shape, self._on_scale, self.spec.max_burst))
        return float(_trunc_pareto(u, self.spec.off_shape, self._off_scale, self._off_cap))

    def should_inject(self, cycle: int) -> bool:
        if cycle != self._cycle + 1:
            raise ValueError("should_inject must be called for consecutive cycles")
        self._cycle = cycle
        if self._always:
            return True
        if self.spec.temporal == "bernoulli":
            return bool(self.rng.random() < self.spec.injection_load)
        while cycle >= self._edge:
            self._on = not self._on
            self._edge += self._draw(self._on)
        return self._on


def injection_mask(spec: TrafficSpec, core: int, n_cycles: int) -> np.ndarray:
    """Vectorised equivalent of calling ``should_inject`` for cycles 0..n-1."""
    if spec.injection_load >= 1.0:
        return np.ones(n_cycles, dtype=bool)
    rng = _stream(spec.seed, core, 0)
    if spec.temporal == "bernoulli":
        return rng.random(n_cycles) < spec.injection_load
    on_scale, off_scale, off_cap = _pareto_scales(spec)
    start_on = rng.random() < spec.injection_load
    shape = np.array([spec.on_shape, spec.off_shape])
    scale = np.array([on_scale, off_scale])
    cap = np.array([spec.max_burst, off_cap])
    # phase index 0 = ON, 1 = OFF; boundaries[k] ends interval k
    phase0 = 0 if start_on else 1
    edges: List[np.ndarray] = []
    total = -_burn_in(spec)
    chunk = 256
    while total <= n_cycles:
        u = rng.random(chunk)
        ph = (phase0 + np.arange(chunk)) % 2
        d = _trunc_pareto(u, shape[ph], scale[ph], cap[ph])
        c = total + np.cumsum(d)
        edges.append(c)
        total = c[-1]
        # chunk is even, so every chunk starts in the initial phase
    boundaries = np.concatenate(edges)
    t = np.arange(n_cycles, dtype=np.float64)
    k = np.searchsorted(boundaries, t, side="right")
    return (k % 2 == 0) == start_on


def generate_workload(spec: TrafficSpec, n_cores: int, n_cycles: int,
                      packet_size: int = 64) -> Workload:
    cycles: List[np.ndarray] = []
    srcs: List[np.ndarray] = []
    dsts: List[np.ndarray] = []
    for core in range(n_cores):
        mask = injection_mask(spec, core, n_cycles)
        flit_cycles = np.flatnonzero(mask)
        births = flit_cycles[packet_size - 1::packet_size]
        rng = _stream(spec.seed, core, 1)
        d = np.array([next_destination(spec, core, n_cores, rng) for _ in range(len(births))],
                     dtype=np.int64)
        cycles.append(births.astype(np.int64))
        srcs.append(np.full(len(births), core, dtype=np.int64))
        dsts.append(d)
    cyc = np.concatenate(cycles) if cycles else np.zeros(0, np.int64)
    src = np.concatenate(srcs) if srcs else np.zeros(0, np.int64)
    dst = np.concatenate(dsts) if dsts else np.zeros(0, np.int64)
    order = np.lexsort((src, cyc))
    size = np.full(len(cyc), packet_size, dtype=np.int64)
    return Workload(cyc[order], src[order], dst[order], size)


def load_trace(path) -> Workload:
    """Parse ``cycle source dest size`` lines; ``dest = -1`` is broadcast."""
    rows = []
    last = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise TraceError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            cycle, src, dst, size = (int(p) for p in parts)
        except ValueError:
            raise TraceError(f"line {lineno}: non-integer field in {line!r}") from None
        if cycle < 0 or src < 0 or size < 1 or dst < BROADCAST:
            raise TraceError(f"line {lineno}: out-of-range value in {line!r}")
        if last is not None and cycle < last:
            raise TraceError(f"line {lineno}: cycle {cycle} goes backwards (previous {last})")
        last = cycle
        rows.append((cycle, src, dst, size))
    if not rows:
        return Workload.empty()
    a = np.array(rows, dtype=np.int64)
    return Workload(a[:, 0].copy(), a[:, 1].copy(), a[:, 2].copy(), a[:, 3].copy())


def write_trace(path, workload: Workload) -> None:
    with open(path, "w") as fh:
        for c, s, d, z in zip(workload.cycle, workload.src, workload.dst, workload.size):
            fh.write(f"{c} {s} {d} {z}\n")


def hurst_aggregated_variance(series: np.ndarray, block_sizes: Optional[Iterable[int]] = None) -> float:
    """Hurst exponent from the slope of log Var(block mean) vs log block size."""
    x = np.asarray(series, dtype=np.float64)
    if block_sizes is None:
        block_sizes = np.unique(np.logspace(1, np.log10(len(x) // 20), 20).astype(int))
    ms, vs = [], []
    for m in block_sizes:
        k = len(x) // m
        if k < 10:
            continue
        means = x[: k * m].reshape(k, m).mean(axis=1)
        v = means.var()
        if v > 0:
            ms.append(np.log(m))
            vs.append(np.log(v))
    slope = np.polyfit(ms, vs, 1)[0]
    return 1.0 + slope / 2.0
