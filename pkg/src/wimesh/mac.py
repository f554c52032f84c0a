"""Wireless medium access: slot allocation schemes, slot-information packets,
receiver sleep/wake windows and the runtime slot/epoch controller.

Schemes:

* ``tmac``  token passing, one whole packet per token, fixed slot length;
* ``psam``  fixed epoch split in proportion to predicted demand;
* ``dsam``  slot equals predicted demand, the epoch is their sum;
* ``racm``  fixed epoch split in proportion to last epoch's usage (simplified).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .predictor import DEFAULT_WEIGHTS, PredictionUnit, Weights
from .switch_core import EV_WL_RX, EV_WL_TX, SEQ_BITS, SEQ_MASK, MacFault, Network
from .traffic import BROADCAST

SCHEMES = ("tmac", "psam", "dsam", "racm")
SCHEME_LABELS = {"tmac": "T-MAC", "psam": "P-SAM", "dsam": "D-SAM", "racm": "RACM (simplified)"}

BROADCAST_WI = 0xF
INFO_TYPE = 0xA
TUPLE_DEST_BITS, TUPLE_PID_BITS, TUPLE_NUM_BITS = 4, 5, 7
DEMAND_BITS = 14
MAX_TUPLE_FLITS = (1 << TUPLE_NUM_BITS) - 1

# "arrivals": flits routed to the wireless port during the epoch.
# "backlog":  those plus the flits already queued when the epoch began, i.e.
#             everything the WI needed to send during the epoch.
DEMAND_MODES = ("arrivals", "backlog")


class AllocationError(ValueError):
    pass


# --------------------------------------------------------------------- allocation
def largest_remainder(weights: Sequence[float], total: int) -> List[int]:
    """Integer shares of ``total`` proportional to ``weights``; ties go to the lower index."""
    w = [float(x) for x in weights]
    s = sum(w)
    n = len(w)
    if n == 0:
        return []
    if s <= 0:
        w = [1.0] * n
        s = float(n)
    exact = [x * total / s for x in w]
    base = [int(math.floor(e)) for e in exact]
    left = total - sum(base)
    order = sorted(range(n), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def apply_floor(slots: List[int], queues: Sequence[int], floor: int = 1) -> List[int]:
    """Give every WI with queued flits at least ``floor`` slot-flits, keeping the sum.

    Each unit is taken from the currently largest allocation (lowest ID on ties).
    """
    slots = list(slots)
    need = [i for i, q in enumerate(queues) if q > 0]
    if floor <= 0 or not need:
        return slots
    if sum(slots) < floor * len(need):
        raise AllocationError(
            f"{sum(slots)} slot-flits cannot give {len(need)} busy WIs a floor of {floor}")
    for i in need:
        while slots[i] < floor:
            donor = max(range(len(slots)),
                        key=lambda j: (slots[j] - (floor if j in need else 0), -j))
            slots[donor] -= 1
            slots[i] += 1
    return slots


def allocate_tmac(n_wi: int, packet_size: int) -> List[int]:
    return [packet_size] * n_wi


def allocate_psam(demands: Sequence[int], epoch_flits: int, queues: Sequence[int],
                  floor: int = 1) -> List[int]:
    if epoch_flits <= 0:
        raise AllocationError("epoch length must be positive")
    if any(d < 0 for d in demands):
        raise AllocationError("demands must be non-negative")
    return apply_floor(largest_remainder(demands, epoch_flits), queues, floor)


def allocate_dsam(demands: Sequence[int], queues: Sequence[int],
                  floor: int = 1) -> Tuple[List[int], int]:
    if any(d < 0 for d in demands):
        raise AllocationError("demands must be non-negative")
    slots = [int(d) for d in demands]
    for i, q in enumerate(queues):
        if q > 0 and slots[i] < floor:
            slots[i] = floor
    return slots, sum(slots)


def allocate_racm(prev_usage: Sequence[int], prev_slots: Sequence[int], epoch_flits: int,
                  queues: Sequence[int], floor: int = 1) -> List[int]:
    if sum(prev_slots) != epoch_flits:
        raise AllocationError("previous slots must sum to the epoch length")
    if any(u < 0 or u > s for u, s in zip(prev_usage, prev_slots)):
        raise AllocationError("usage must lie within the previous slot")
    # each WI keeps its usage; the reclaimed remainder follows usage proportionally,
    # which together is a usage-proportional split of the whole epoch
    return apply_floor(largest_remainder(prev_usage, epoch_flits), queues, floor)


# --------------------------------------------------------------------- slot info packet
@dataclass(frozen=True)
class SlotTuple:
    dest_wi: int          # BROADCAST_WI for broadcast
    pkt_id: int
    num_flits: int


@dataclass
class SlotInfoPacket:
    src_wi: int
    demand: int
    tuples: List[SlotTuple] = field(default_factory=list)

    @property
    def size(self) -> int:
        return 1 + (len(self.tuples) + 1) // 2

    @property
    def data_flits(self) -> int:
        return sum(t.num_flits for t in self.tuples)


def encode_slot_info(pkt: SlotInfoPacket) -> List[int]:
    """32-bit flit words, most significant field first."""
    if not 0 <= pkt.src_wi < 32:
        raise ValueError("src_wi needs 5 bits")
    if pkt.size > 7:
        raise ValueError("slot info packets are limited to 7 flits")
    demand = min(max(pkt.demand, 0), (1 << DEMAND_BITS) - 1)
    words = [(INFO_TYPE << 28) | (pkt.size << 25) | (pkt.src_wi << 20) | (demand << 6)]
    halves = []
    for t in pkt.tuples:
        if not (0 <= t.dest_wi < 16 and 0 < t.num_flits <= MAX_TUPLE_FLITS):
            raise ValueError(f"tuple {t} does not fit the 16-bit layout")
        halves.append((t.dest_wi << 12) | ((t.pkt_id & 0x1F) << 7) | t.num_flits)
    for i in range(0, len(halves), 2):
        hi = halves[i]
        lo = halves[i + 1] if i + 1 < len(halves) else 0
        words.append((hi << 16) | lo)
    return words


def decode_slot_info(words: Sequence[int]) -> SlotInfoPacket:
    if not words:
        raise ValueError("empty slot info packet")
    w0 = words[0]
    if (w0 >> 28) & 0xF != INFO_TYPE:
        raise ValueError("not a slot info packet")
    size = (w0 >> 25) & 0x7
    if size != len(words):
        raise ValueError(f"size field {size} but {len(words)} flits")
    src = (w0 >> 20) & 0x1F
    demand = (w0 >> 6) & ((1 << DEMAND_BITS) - 1)
    tuples = []
    for w in words[1:]:
        for half in ((w >> 16) & 0xFFFF, w & 0xFFFF):
            if half & 0x7F == 0:      # num_flits 0 marks an unused half
                continue
            tuples.append(SlotTuple(half >> 12, (half >> 7) & 0x1F, half & 0x7F))
    return SlotInfoPacket(src, demand, tuples)


# --------------------------------------------------------------------- sleep / wake
@dataclass(frozen=True)
class SleepWake:
    initial_sleep: int
    wake: int
    post_wake: int


def compute_sleep_wake(pkt: SlotInfoPacket, my_id: int,
                       broadcast_id: int = BROADCAST_WI) -> SleepWake:
    """Receiver windows for ``my_id``; ``broadcast_id`` -1 disables broadcast tuples."""
    total = pkt.data_flits
    first = last = None
    pos = 0
    for t in pkt.tuples:
        if t.dest_wi == my_id or t.dest_wi == broadcast_id:
            if first is None:
                first = pos
            last = pos + t.num_flits
        pos += t.num_flits
    if first is None:
        return SleepWake(total, 0, 0)
    return SleepWake(first, last - first, total - last)


def advance_ring(current_owner: int, n_wi: int) -> int:
    return (current_owner + 1) % n_wi


@dataclass
class AllocationUnit:
    id_self: int
    n_wi: int
    scheme: str
    reg_demand: List[int] = field(default_factory=list)
    slot_counter: int = 0

    def __post_init__(self):
        if not self.reg_demand:
            self.reg_demand = [0] * self.n_wi


# --------------------------------------------------------------------- runtime
@dataclass
class MacConfig:
    scheme: str = "dsam"
    packet_size: int = 64
    airtime: int = 5                  # cycles per flit on the medium
    epoch_flits: int = 0              # 0 -> n_wi * packet_size
    max_tuples: int = 6
    floor: int = 1
    weights: Weights = Weights(*DEFAULT_WEIGHTS)
    true_mean: bool = False
    mac_delay_cycles: int = 1         # allocation/prediction logic latency
    flit_bits: int = 32
    demand_mode: str = "backlog"      # "arrivals": only flits routed in this epoch
    slot_cap: int = -1                # announced demand ceiling; -1 -> max_tuples x WI VC depth, 0 -> none

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown MAC scheme {self.scheme!r}")
        if self.airtime < 1 or self.packet_size < 1:
            raise ValueError("airtime and packet size must be positive")
        if self.demand_mode not in DEMAND_MODES:
            raise ValueError(f"demand_mode must be one of {DEMAND_MODES}")
        if not 1 <= self.max_tuples <= 12:
            raise ValueError("max_tuples must be in 1..12 (7-flit packet limit)")


@dataclass
class SlotRecord:
    epoch: int
    owner: int
    start: int
    allocated: int
    used: int
    info_flits: int


@dataclass
class MacCounters:
    """Event counts inside the measurement window (energy and slot statistics)."""
    wireless_flits: int = 0        # data + control flits put on the medium
    control_flits: int = 0
    tx_on_cycles: int = 0
    rx_on_cycles: int = 0
    allocated: int = 0
    used: int = 0
    slots: int = 0


class InvariantLog:
    """Counts protocol invariant violations observed at runtime."""

    def __init__(self):
        self.counts: Dict[str, int] = {}
        self.checked: Dict[str, int] = {}
        self.first: Dict[str, str] = {}

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checked[name] = self.checked.get(name, 0) + 1
        if not ok:
            self.counts[name] = self.counts.get(name, 0) + 1
            self.first.setdefault(name, detail)

    def violations(self) -> int:
        return sum(self.counts.values())


class WirelessMac:
    """Drives the shared medium for one run.

    Slot timeline for the owner starting at cycle ``t`` with an ``i``-flit
    control packet: control on air for ``i * A`` cycles, then data flit ``k``
    occupies ``[t + (i + k) A, t + (i + k + 1) A)`` and lands in the receive
    VC at the end of that interval. T-MAC's control packet is the one-flit token.
    """

    def __init__(self, net: Network, cfg: MacConfig, invariants: Optional[InvariantLog] = None,
                 record_slots: bool = False):
        self.net = net
        self.cfg = cfg
        self.n = net.n_wi
        if self.n == 0:
            raise ValueError("a wireless MAC needs at least one WI")
        if self.n > 16:
            raise ValueError("the 4-bit destination field addresses at most 16 WIs")
        # with 16 WIs the all-ones ID is WI 15 and broadcast tuples cannot be expressed
        self.bcast_id = BROADCAST_WI if self.n < 16 else -1
        self.scheme = cfg.scheme
        self.ef = cfg.epoch_flits or self.n * cfg.packet_size
        if self.scheme in ("psam", "racm") and self.ef < self.n:
            raise ValueError("epoch too short to give every WI a slot")
        self.units = [AllocationUnit(w, self.n, self.scheme) for w in range(self.n)]
        self.pus = [PredictionUnit(true_mean=cfg.true_mean) for _ in range(self.n)]
        self.reg_demand = [0] * self.n
        if self.scheme == "tmac":
            self.slots = allocate_tmac(self.n, cfg.packet_size)
        elif self.scheme == "dsam":
            self.slots = [0] * self.n
        else:
            self.slots = largest_remainder([1] * self.n, self.ef)
        self.usage = [0] * self.n
        self.epoch = 0
        self.owner = 0
        self.slot_end = 0
        self.pending: List[tuple] = []     # (time, w_tx, vc, pid, [(w_rx, rx_vc)])
        self.pi = 0
        self.inv = invariants
        self.counters = MacCounters()
        self.records: List[SlotRecord] = [] if record_slots else None
        self.epoch_log: List[tuple] = []
        self.tx_busy_until = 0
        self.stall_cycles = 0
        self.started = False
        self.backlog = [0] * self.n
        self.members = set(range(self.n))
        wi_pos = {s: w for w, s in enumerate(net.wis)}
        med = net.ft.medium_members
        self.tree_members = {wi_pos[s] for s in med}
        self.tree_target = net.ft.wl_target
        if cfg.slot_cap < 0:
            # one slot-info packet can never schedule more than this
            self.cap = cfg.max_tuples * int(net.depth[net.tx_node(0), 0])
        else:
            self.cap = cfg.slot_cap

    # ------------------------------------------------------------ event loop glue
    def next_event(self) -> int:
        if not self.started:
            return 0
        if self.pi < len(self.pending):
            return min(self.pending[self.pi][0], self.slot_end)
        return self.slot_end

    def process(self, t: int) -> None:
        if not self.started:
            self.started = True
            self._start_slot(t)
            return
        while self.pi < len(self.pending) and self.pending[self.pi][0] == t:
            self._deliver(*self.pending[self.pi])
            self.pi += 1
        if t == self.slot_end:
            if self.pi < len(self.pending):
                raise MacFault("slot ended with undelivered flits")
            self.owner = advance_ring(self.owner, self.n)
            if self.owner == 0:
                t = self._end_epoch(t)
            self._start_slot(t)

    def _in_window(self, t: int) -> bool:
        return self.net.warmup <= t < self.net.end

    # ------------------------------------------------------------ epochs
    def queues(self) -> List[int]:
        return [self.net.tx_occupancy(w) for w in range(self.n)]

    def _end_epoch(self, t: int) -> int:
        w8 = self.cfg.weights
        net = self.net
        actual = []
        for w in range(self.n):
            pu = self.pus[w]
            pu.demand_counter = int(net.wi_demand[w])
            if self.cfg.demand_mode == "backlog":
                pu.demand_counter += self.backlog[w]
            actual.append(pu.demand_counter)
            net.wi_demand[w] = 0
            pu.end_of_epoch(w8)
        q = self.queues()
        self.backlog = list(q)
        prev = list(self.slots)
        if self.scheme == "psam":
            self.slots = allocate_psam(self.reg_demand, self.ef, q, self.cfg.floor)
        elif self.scheme == "dsam":
            self.slots, _ = allocate_dsam(self.reg_demand, q, self.cfg.floor)
        elif self.scheme == "racm":
            self.slots = allocate_racm(self.usage, prev, self.ef, q, self.cfg.floor)
        if self.inv is not None and self.scheme != "tmac":
            starving = [w for w in range(self.n) if q[w] > 0 and self.slots[w] < 1]
            self.inv.check("no_starvation", self.cfg.floor < 1 or not starving,
                           f"epoch {self.epoch}: WIs {starving} queued but unallocated")
            if self.scheme in ("psam", "racm"):
                self.inv.check("epoch_conservation", sum(self.slots) == self.ef,
                               f"epoch {self.epoch}: sum {sum(self.slots)} != {self.ef}")
        self.epoch_log.append((self.epoch, t, tuple(actual), tuple(self.reg_demand), tuple(prev),
                               tuple(self.usage)))
        self.usage = [0] * self.n
        self.epoch += 1
        # allocation logic runs while the last slot is on air; only the part
        # longer than one flit airtime would hold the medium
        stall = max(0, self.cfg.mac_delay_cycles - self.cfg.airtime)
        self.stall_cycles += stall
        return t + stall

    # ------------------------------------------------------------ slots
    def _start_slot(self, t: int) -> None:
        if t > self.slot_end:
            self.slot_end = t
        w = self.owner
        cfg = self.cfg
        a = cfg.airtime
        slot_len = self.slots[w]
        self.pending = []
        self.pi = 0
        if self.scheme == "tmac":
            plan = self._plan_whole_packet(w, t)
            info = 1
            pkt = None
        else:
            demand = self.pus[w].demand_self
            if self.cap > 0:
                demand = min(demand, self.cap)
            self.reg_demand[w] = demand
            plan = self._plan_partial(w, t, slot_len)
            pkt = SlotInfoPacket(w, demand,
                                 [SlotTuple(d, pid, k) for (_, pid, d, k, _) in plan])
            info = pkt.size
        used = sum(p[3] for p in plan)
        # D-SAM epochs are demand-determined: the medium passes on once the
        # announced flits are out. The other schemes run fixed-length slots.
        slot_flits = used if self.scheme == "dsam" else slot_len
        end = t + (info + slot_flits) * a
        k = 0
        for vc, pid, dest, n, targets in plan:
            for _ in range(n):
                self.pending.append((t + (info + k + 1) * a, w, vc, pid, targets))
                k += 1
        self.usage[w] += used
        if self.inv is not None:
            self.inv.check("wireless_exclusivity", t >= self.tx_busy_until,
                           f"WI {w} starts at {t} while medium busy until {self.tx_busy_until}")
            self.inv.check("slot_bound", used <= slot_len, f"WI {w} sends {used} > slot {slot_len}")
        self.tx_busy_until = t + (info + used) * a
        if self._in_window(t):
            c = self.counters
            c.slots += 1
            c.allocated += slot_len
            c.used += used
            c.wireless_flits += info + used
            c.control_flits += info
            c.tx_on_cycles += (info + used) * a
            if pkt is None:
                # token-passing receivers never sleep
                c.rx_on_cycles += (self.n - 1) * (info + slot_flits) * a
            else:
                for r in range(self.n):
                    if r == w:
                        continue
                    sw = compute_sleep_wake(pkt, r, self.bcast_id)
                    c.rx_on_cycles += (info + sw.wake) * a
                    if self.inv is not None:
                        self.inv.check("sleep_wake_partition",
                                       sw.initial_sleep + sw.wake + sw.post_wake == used,
                                       f"WI {r} slot of {w}: {sw} vs {used}")
        if self.records is not None:
            self.records.append(SlotRecord(self.epoch, w, t, slot_len, used, info))
        self.net.log_event(t, EV_WL_TX, self.net.wis[w], -1, info)
        self.slot_end = end

    def _targets(self, w: int, pid: int) -> List[int]:
        dst = int(self.net.pkt_dst[pid])
        if dst == BROADCAST:
            return sorted(self.tree_members - {w})
        s = self.net.wis[w]
        rx_switch = int(self.tree_target[s, dst])
        return [self.net.wis.index(rx_switch)]

    def _dest_field(self, pid: int, targets: List[int]) -> int:
        if self.net.pkt_dst[pid] == BROADCAST or len(targets) != 1:
            if self.bcast_id < 0:
                raise MacFault("broadcast needs a free destination ID (at most 15 WIs)")
            return self.bcast_id
        return targets[0]

    def _candidate_vcs(self, w: int) -> List[int]:
        net = self.net
        node = net.tx_node(w)
        vcs = [v for v in range(int(net.n_vc[node, 0])) if net.cnt[node, 0, v] > 0]
        # oldest packet first
        return sorted(vcs, key=lambda v: (int(net.buf[node, 0, v, net.head[node, 0, v]]) >> SEQ_BITS, v))

    def _reserve(self, targets: List[int], pid: int) -> Optional[List[Tuple[int, int, int]]]:
        """Map (or reserve) a receive VC at every target; None if any has no VC."""
        net = self.net
        got = []
        for r in targets:
            vc = net.rx_vc_for(r, pid, reserve=False)
            if vc < 0:
                vc = net.rx_vc_for(r, pid, reserve=True)
                if vc < 0:
                    # undo reservations made for this tuple
                    for r2, v2, fresh in got:
                        if fresh:
                            net.vc_pkt[net.wis[r2], 5, v2] = -1
                    return None
                got.append((r, vc, True))
            else:
                got.append((r, vc, False))
        return got

    def _plan_partial(self, w: int, t: int, slot_len: int):
        net = self.net
        node = net.tx_node(w)
        plan = []
        left = slot_len
        for vc in self._candidate_vcs(w):
            if left <= 0 or len(plan) >= self.cfg.max_tuples:
                break
            ready = net.front_run(node, 0, vc, t)
            if ready == 0:
                continue
            code = int(net.buf[node, 0, vc, net.head[node, 0, vc]])
            pid = code >> SEQ_BITS
            targets = self._targets(w, pid)
            res = self._reserve(targets, pid)
            if res is None:
                continue
            space = min(net.rx_space(r, v) for r, v, _ in res)
            n = min(left, ready, space, MAX_TUPLE_FLITS)
            if n <= 0:
                for r, v, fresh in res:
                    if fresh:
                        net.vc_pkt[net.wis[r], 5, v] = -1
                continue
            dest = self._dest_field(pid, targets)
            plan.append((vc, pid, dest, n, [(r, v) for r, v, _ in res]))
            left -= n
        return plan

    def _plan_whole_packet(self, w: int, t: int):
        net = self.net
        node = net.tx_node(w)
        size = self.cfg.packet_size
        for vc in self._candidate_vcs(w):
            code = int(net.buf[node, 0, vc, net.head[node, 0, vc]])
            pid, seq = code >> SEQ_BITS, code & SEQ_MASK
            need = int(net.pkt_size[pid])
            if seq != 0 or need > size or net.front_run(node, 0, vc, t) < need:
                continue
            targets = self._targets(w, pid)
            res = self._reserve(targets, pid)
            if res is None:
                continue
            if min(net.rx_space(r, v) for r, v, _ in res) < need:
                for r, v, fresh in res:
                    if fresh:
                        net.vc_pkt[net.wis[r], 5, v] = -1
                continue
            dest = self._dest_field(pid, targets)
            return [(vc, pid, dest, need, [(r, v) for r, v, _ in res])]
        return []

    def _deliver(self, t: int, w: int, vc: int, pid: int, targets) -> None:
        net = self.net
        code = net.pop_tx(w, vc, pid)
        if self.inv is not None:
            self.inv.check("announced_equals_transmitted", code >> SEQ_BITS == pid)
        for r, rv in targets:
            net.push_rx(r, rv, code, t)
            net.log_event(t, EV_WL_RX, net.wis[r], pid, code & SEQ_MASK)
