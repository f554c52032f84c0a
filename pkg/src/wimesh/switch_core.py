"""Cycle-accurate wormhole datapath.

All network state lives in flat numpy arrays so the per-cycle kernel can be
compiled by numba. Node indices ``0..N-1`` are switches; ``N..N+W-1`` are the
WI transmit queues (the "output VCs" behind each wireless port). The transmit
queues are sinks for the kernel; the MAC drains them onto the medium.

Timing, per flit (P = pipeline depth, default 3):

* a flit that traverses a crossbar + link in cycle ``c`` is in the next
  buffer from cycle ``c + 1``;
* a head flit then spends P cycles in route computation, VC allocation and
  switch allocation, so it may traverse again in cycle ``c + 1 + P``;
* body and tail flits follow the head's reservation and may traverse in the
  cycle they arrive;
* credits for a freed buffer slot become visible the cycle after the flit
  leaves (two-phase update, so switch evaluation order never matters);
* ejection is one flit per cycle into an infinite sink.

With empty buffers a packet of S flits crossing h inter-switch links from
its creation cycle is fully ejected after ``4h + S + 4`` cycles (P = 3).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ._accel import njit
from .routing import LOCAL, N_PORTS, WIRELESS, ForwardingTable
from .topology import Topology
from .traffic import BROADCAST, Workload

SEQ_BITS = 10
SEQ_MASK = (1 << SEQ_BITS) - 1
MAX_PACKET = 1 << SEQ_BITS

# stats slots
ST_INJECTED = 0
ST_EJECTED = 1
ST_EJECTED_WIN = 2
ST_SWITCH_WIN = 3
ST_ORDER_ERR = 4
ST_WRONG_DEST = 5
ST_TX_IN = 6
ST_TX_IN_WIN = 7
ST_MAX_STALL = 8
N_STATS = 9

# event kinds for the debug log
EV_INJECT, EV_HOP, EV_EJECT, EV_TX_ENQUEUE, EV_WL_TX, EV_WL_RX = range(6)
EVENT_NAMES = ("inject", "hop", "eject", "tx_enqueue", "wl_tx", "wl_rx")


class MacFault(RuntimeError):
    """The MAC announced something the datapath cannot honour."""


@dataclass
class FlitView:
    packet_id: int
    seq: int
    kind: str
    ready: int


def flit_kind(seq: int, size: int) -> str:
    if size == 1:
        return "head_tail"
    if seq == 0:
        return "head"
    return "tail" if seq == size - 1 else "body"


@njit(cache=True)
def run_cycles(t0, t1, warmup, end, pipeline,
               n_switch, n_vc, depth, buf, head, cnt, rdy,
               vc_pkt, vc_mask, vc_pend, vc_out, freed, release,
               nbr_node, nbr_port, link_mm,
               next_port, bcast_mask, wi_of_node,
               pkt_src, pkt_dst, pkt_size, pkt_birth, pkt_base, pkt_copies, pkt_done, pkt_finish,
               pkt_progress, pkt_inject, eject_next,
               core_pk, core_off, core_ptr, core_seq, core_vc,
               rr_in, rr_out, stats, acc, wi_demand, hist, hist_epoch,
               ev, ev_n, verbose, touched):
    n_ports = n_vc.shape[1]
    max_vc = n_vc.shape[2] if n_vc.ndim == 3 else buf.shape[2]
    dmax = buf.shape[3]
    req_vc = np.empty(n_ports, np.int64)
    req_mask = np.empty(n_ports, np.int64)
    for now in range(t0, t1):
        in_win = now >= warmup and now < end
        nt = 0
        # ---- injection from the source queues into local input VCs
        for core in range(n_switch):
            ptr = core_ptr[core]
            if ptr >= core_off[core + 1]:
                continue
            pid = core_pk[ptr]
            if pkt_birth[pid] > now:
                continue
            seq = core_seq[core]
            if seq == 0:
                v = -1
                for k in range(n_vc[core, LOCAL]):
                    if vc_pkt[core, LOCAL, k] < 0 and cnt[core, LOCAL, k] == 0:
                        v = k
                        break
                if v < 0:
                    continue
                vc_pkt[core, LOCAL, v] = pid
                vc_pend[core, LOCAL, v] = -1
                core_vc[core] = v
            v = core_vc[core]
            if cnt[core, LOCAL, v] >= depth[core, LOCAL]:
                continue
            slot = (head[core, LOCAL, v] + cnt[core, LOCAL, v]) % dmax
            buf[core, LOCAL, v, slot] = (pid << 10) | seq
            rdy[core, LOCAL, v, slot] = now + 1 + (pipeline if seq == 0 else 0)
            cnt[core, LOCAL, v] += 1
            stats[0] += 1
            if seq == 0:
                pkt_inject[pid] = now
            if seq > 0 and now - pkt_progress[pid] > stats[8]:
                stats[8] = now - pkt_progress[pid]
            pkt_progress[pid] = now
            if verbose and ev_n[0] < ev.shape[0]:
                e = ev_n[0]
                ev[e, 0] = now; ev[e, 1] = 0; ev[e, 2] = core; ev[e, 3] = pid; ev[e, 4] = seq
                ev_n[0] += 1
            seq += 1
            if seq == pkt_size[pid]:
                core_seq[core] = 0
                core_ptr[core] = ptr + 1
            else:
                core_seq[core] = seq

        # ---- switch allocation and traversal
        for s in range(n_switch):
            # input stage: one VC per input port
            for p in range(n_ports):
                req_vc[p] = -1
                req_mask[p] = 0
                nv = n_vc[s, p]
                if nv == 0:
                    continue
                start = rr_in[s, p]
                for i in range(nv):
                    v = (start + i) % nv
                    if cnt[s, p, v] - freed[s, p, v] <= 0:
                        continue
                    h = head[s, p, v]
                    if rdy[s, p, v, h] > now:
                        continue
                    code = buf[s, p, v, h]
                    pid = code >> 10
                    seq = code & 1023
                    pend = vc_pend[s, p, v]
                    if pend < 0:
                        if seq == 0:
                            d = pkt_dst[pid]
                            if d < 0:
                                m = bcast_mask[s, p]
                            else:
                                m = 1 << next_port[s, d]
                            vc_mask[s, p, v] = m
                        pend = vc_mask[s, p, v]
                        vc_pend[s, p, v] = pend
                    grant = 0
                    for o in range(n_ports):
                        if not (pend >> o) & 1:
                            continue
                        if o == LOCAL:
                            grant |= 1 << o
                            continue
                        dn = nbr_node[s, o]
                        dp = nbr_port[s, o]
                        dv = vc_out[s, p, v, o]
                        if dv < 0:
                            if seq != 0:
                                continue
                            for k in range(n_vc[dn, dp]):
                                if vc_pkt[dn, dp, k] < 0 and cnt[dn, dp, k] == 0:
                                    grant |= 1 << o
                                    break
                        elif cnt[dn, dp, dv] < depth[dn, dp]:
                            grant |= 1 << o
                    if grant != 0:
                        req_vc[p] = v
                        req_mask[p] = grant
                        break
            # output stage: one input per output port
            for o in range(n_ports):
                winner = -1
                start = rr_out[s, o]
                for i in range(n_ports):
                    p = (start + i) % n_ports
                    if req_vc[p] >= 0 and (req_mask[p] >> o) & 1:
                        winner = p
                        break
                if winner < 0:
                    continue
                p = winner
                v = req_vc[p]
                rr_out[s, o] = (p + 1) % n_ports
                h = head[s, p, v]
                code = buf[s, p, v, h]
                pid = code >> 10
                seq = code & 1023
                size = pkt_size[pid]
                is_tail = seq == size - 1
                if now - pkt_progress[pid] > stats[8]:
                    stats[8] = now - pkt_progress[pid]
                pkt_progress[pid] = now
                if in_win:
                    stats[3] += 1
                if o == LOCAL:
                    idx = pkt_base[pid]
                    if pkt_dst[pid] < 0:
                        idx += s
                        if s == pkt_src[pid]:
                            stats[5] += 1
                    elif pkt_dst[pid] != s:
                        stats[5] += 1
                    if eject_next[idx] != seq:
                        stats[4] += 1
                    eject_next[idx] = seq + 1
                    stats[1] += 1
                    if in_win:
                        stats[2] += 1
                    if is_tail:
                        pkt_done[pid] += 1
                        if pkt_done[pid] == pkt_copies[pid]:
                            pkt_finish[pid] = now + 1
                    if verbose and ev_n[0] < ev.shape[0]:
                        e = ev_n[0]
                        ev[e, 0] = now; ev[e, 1] = 2; ev[e, 2] = s; ev[e, 3] = pid; ev[e, 4] = seq
                        ev_n[0] += 1
                else:
                    dn = nbr_node[s, o]
                    dp = nbr_port[s, o]
                    dv = vc_out[s, p, v, o]
                    if dv < 0:
                        for k in range(n_vc[dn, dp]):
                            if vc_pkt[dn, dp, k] < 0 and cnt[dn, dp, k] == 0:
                                dv = k
                                break
                        vc_pkt[dn, dp, dv] = pid
                        vc_pend[dn, dp, dv] = -1
                        vc_out[s, p, v, o] = dv
                    # head may already have advanced this cycle while cnt waits for commit
                    slot = (head[dn, dp, dv] + cnt[dn, dp, dv] - freed[dn, dp, dv]) % dmax
                    buf[dn, dp, dv, slot] = code
                    w = wi_of_node[dn]
                    if w >= 0:
                        # into a WI transmit queue: counted as wireless demand
                        rdy[dn, dp, dv, slot] = now + 1
                        wi_demand[w] += 1
                        stats[6] += 1
                        if in_win:
                            stats[7] += 1
                        if hist.shape[1] > 0:
                            he = now // hist_epoch
                            if he < hist.shape[1]:
                                hist[w, he] += 1
                        kind = 3
                    else:
                        rdy[dn, dp, dv, slot] = now + 1 + (pipeline if seq == 0 else 0)
                        if in_win:
                            acc[0] += link_mm[s, o]
                        kind = 1
                    cnt[dn, dp, dv] += 1
                    if is_tail:
                        vc_out[s, p, v, o] = -1
                    if verbose and ev_n[0] < ev.shape[0]:
                        e = ev_n[0]
                        ev[e, 0] = now; ev[e, 1] = kind; ev[e, 2] = s; ev[e, 3] = pid; ev[e, 4] = seq
                        ev_n[0] += 1
                pend = vc_pend[s, p, v] & ~(1 << o)
                vc_pend[s, p, v] = pend
                if pend == 0:
                    head[s, p, v] = (h + 1) % dmax
                    freed[s, p, v] += 1
                    vc_pend[s, p, v] = -1
                    if is_tail:
                        release[s, p, v] = 1
                    touched[nt, 0] = s
                    touched[nt, 1] = p
                    touched[nt, 2] = v
                    nt += 1
                    rr_in[s, p] = (v + 1) % n_vc[s, p]

        # ---- commit credits and VC releases
        for i in range(nt):
            s = touched[i, 0]
            p = touched[i, 1]
            v = touched[i, 2]
            if freed[s, p, v] > 0:
                cnt[s, p, v] -= freed[s, p, v]
                freed[s, p, v] = 0
            if release[s, p, v]:
                release[s, p, v] = 0
                vc_pkt[s, p, v] = -1
                vc_mask[s, p, v] = 0


class Network:
    """Datapath state for one simulation run."""

    def __init__(self, topo: Topology, ft: ForwardingTable, workload: Workload, *,
                 wired_vcs: int = 4, wired_depth: int = 2,
                 wi_vcs: int = 8, wi_depth: int = 16,
                 pipeline: int = 3, warmup: int = 0, end: int = 1 << 62,
                 hist_epoch: int = 0, hist_len: int = 0, verbose: bool = False):
        n = topo.n_switches
        wis = topo.wis
        self.topo, self.ft = topo, ft
        self.n_switch = n
        self.wis = wis
        self.n_wi = len(wis)
        self.pipeline = pipeline
        self.warmup, self.end = warmup, end
        n_nodes = n + self.n_wi
        vmax = max(wired_vcs, wi_vcs if self.n_wi else 0)
        dmax = max(wired_depth, wi_depth if self.n_wi else 0)
        self.n_vc = np.zeros((n_nodes, N_PORTS), dtype=np.int64)
        self.depth = np.zeros((n_nodes, N_PORTS), dtype=np.int64)
        self.nbr_node = np.full((n_nodes, N_PORTS), -1, dtype=np.int64)
        self.nbr_port = np.full((n_nodes, N_PORTS), -1, dtype=np.int64)
        self.link_mm = np.zeros((n_nodes, N_PORTS))
        opposite = (2, 3, 0, 1)
        for s in range(n):
            for p in range(4):
                nb = int(ft.neighbor[s, p])
                if nb >= 0:
                    self.n_vc[s, p] = wired_vcs
                    self.depth[s, p] = wired_depth
                    self.nbr_node[s, p] = nb
                    self.nbr_port[s, p] = opposite[p]
                    self.link_mm[s, p] = topo.link_length(s, nb)
            self.n_vc[s, LOCAL] = wired_vcs
            self.depth[s, LOCAL] = wired_depth
        self.wi_of_node = np.full(n_nodes, -1, dtype=np.int64)
        self.wi_of_switch = np.full(n, -1, dtype=np.int64)
        for w, s in enumerate(wis):
            tx = n + w
            self.wi_of_node[tx] = w
            self.wi_of_switch[s] = w
            self.n_vc[s, WIRELESS] = wi_vcs   # receive side
            self.depth[s, WIRELESS] = wi_depth
            self.n_vc[tx, 0] = wi_vcs         # transmit queue
            self.depth[tx, 0] = wi_depth
            self.nbr_node[s, WIRELESS] = tx
            self.nbr_port[s, WIRELESS] = 0
        shape = (n_nodes, N_PORTS, vmax)
        self.buf = np.zeros(shape + (dmax,), dtype=np.int64)
        self.rdy = np.zeros(shape + (dmax,), dtype=np.int64)
        self.head = np.zeros(shape, dtype=np.int64)
        self.cnt = np.zeros(shape, dtype=np.int64)
        self.vc_pkt = np.full(shape, -1, dtype=np.int64)
        self.vc_mask = np.zeros(shape, dtype=np.int64)
        self.vc_pend = np.full(shape, -1, dtype=np.int64)
        self.vc_out = np.full(shape + (N_PORTS,), -1, dtype=np.int64)
        self.freed = np.zeros(shape, dtype=np.int64)
        self.release = np.zeros(shape, dtype=np.int64)
        self.touched = np.zeros((n_nodes * N_PORTS * vmax + 1, 3), dtype=np.int64)
        self.rr_in = np.zeros((n_nodes, N_PORTS), dtype=np.int64)
        self.rr_out = np.zeros((n_nodes, N_PORTS), dtype=np.int64)
        self.next_port = ft.next_port.astype(np.int64)
        self.bcast_mask = ft.bcast_mask.astype(np.int64)

        self._load_workload(workload)
        self.stats = np.zeros(N_STATS, dtype=np.int64)
        self.acc = np.zeros(2)
        self.wi_demand = np.zeros(max(self.n_wi, 1), dtype=np.int64)
        self.hist_epoch = max(hist_epoch, 1)
        self.hist = np.zeros((max(self.n_wi, 1), hist_len if hist_epoch else 0), dtype=np.int64)
        self.verbose = verbose
        self.ev = np.zeros((n_nodes * N_PORTS * 2 + 64 if verbose else 1, 5), dtype=np.int64)
        self.ev_n = np.zeros(1, dtype=np.int64)
        self.events: List[tuple] = []
        self.now = 0

    def _load_workload(self, wl: Workload) -> None:
        n = self.n_switch
        m = len(wl)
        if m and (wl.src.max() >= n or wl.dst.max() >= n):
            raise ValueError("workload addresses a core outside the topology")
        if m and wl.size.max() >= MAX_PACKET:
            raise ValueError(f"packets are limited to {MAX_PACKET - 1} flits")
        if m and np.any(wl.src == wl.dst):
            raise ValueError("workload contains self-addressed packets")
        self.pkt_src = wl.src.astype(np.int64).copy()
        self.pkt_dst = wl.dst.astype(np.int64).copy()
        self.pkt_size = wl.size.astype(np.int64).copy()
        self.pkt_birth = wl.cycle.astype(np.int64).copy()
        bc = self.pkt_dst == BROADCAST
        self.pkt_copies = np.where(bc, n - 1, 1).astype(np.int64)
        width = np.where(bc, n, 1)
        self.pkt_base = (np.cumsum(width) - width).astype(np.int64)
        self.eject_next = np.zeros(int(width.sum()) + 1, dtype=np.int64)
        self.pkt_done = np.zeros(m, dtype=np.int64)
        self.pkt_finish = np.full(m, -1, dtype=np.int64)
        self.pkt_progress = self.pkt_birth.copy()
        self.pkt_inject = np.full(m, -1, dtype=np.int64)
        order = np.argsort(self.pkt_src, kind="stable")
        self.core_pk = order.astype(np.int64)
        counts = np.bincount(self.pkt_src, minlength=n) if m else np.zeros(n, dtype=np.int64)
        self.core_off = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.core_ptr = self.core_off[:-1].copy()
        self.core_seq = np.zeros(n, dtype=np.int64)
        self.core_vc = np.zeros(n, dtype=np.int64)

    # ------------------------------------------------------------------ stepping
    def advance(self, until: int) -> None:
        """Simulate cycles ``self.now .. until-1``."""
        if until <= self.now:
            return
        run_cycles(self.now, until, self.warmup, self.end, self.pipeline,
                   self.n_switch, self.n_vc, self.depth, self.buf, self.head, self.cnt, self.rdy,
                   self.vc_pkt, self.vc_mask, self.vc_pend, self.vc_out, self.freed, self.release,
                   self.nbr_node, self.nbr_port, self.link_mm,
                   self.next_port, self.bcast_mask, self.wi_of_node,
                   self.pkt_src, self.pkt_dst, self.pkt_size, self.pkt_birth, self.pkt_base,
                   self.pkt_copies, self.pkt_done, self.pkt_finish, self.pkt_progress, self.pkt_inject,
                   self.eject_next,
                   self.core_pk, self.core_off, self.core_ptr, self.core_seq, self.core_vc,
                   self.rr_in, self.rr_out, self.stats, self.acc, self.wi_demand,
                   self.hist, self.hist_epoch, self.ev, self.ev_n, self.verbose, self.touched)
        self.now = until
        if self.verbose:
            self._drain_events()

    def step(self) -> None:
        self.advance(self.now + 1)

    def _drain_events(self) -> None:
        k = int(self.ev_n[0])
        for row in self.ev[:k]:
            self.events.append(tuple(int(x) for x in row))
        self.ev_n[0] = 0

    def log_event(self, cycle: int, kind: int, where: int, pid: int, seq: int) -> None:
        if self.verbose:
            self.events.append((cycle, kind, where, pid, seq))

    # ------------------------------------------------------------------ inspection
    def tx_node(self, w: int) -> int:
        return self.n_switch + w

    def vc_flits(self, node: int, port: int, vc: int) -> List[FlitView]:
        out = []
        dmax = self.buf.shape[3]
        for i in range(int(self.cnt[node, port, vc])):
            slot = (self.head[node, port, vc] + i) % dmax
            code = int(self.buf[node, port, vc, slot])
            pid, seq = code >> SEQ_BITS, code & SEQ_MASK
            out.append(FlitView(pid, seq, flit_kind(seq, int(self.pkt_size[pid])),
                                int(self.rdy[node, port, vc, slot])))
        return out

    def tx_occupancy(self, w: int) -> int:
        return int(self.cnt[self.tx_node(w), 0].sum())

    def buffered_flits(self) -> int:
        return int(self.cnt.sum())

    def in_flight_packets(self) -> np.ndarray:
        """IDs of packets with a flit injected but not fully delivered."""
        started = np.zeros(len(self.pkt_src), dtype=bool)
        for core in range(self.n_switch):
            lo, ptr = self.core_off[core], self.core_ptr[core]
            started[self.core_pk[lo:ptr]] = True
            if self.core_seq[core] > 0:
                started[self.core_pk[ptr]] = True
        return np.flatnonzero(started & (self.pkt_finish < 0))

    def max_blocked_cycles(self) -> int:
        """Longest time any injected packet went without moving a flit."""
        worst = int(self.stats[ST_MAX_STALL])
        ids = self.in_flight_packets()
        if len(ids):
            worst = max(worst, int(self.now - self.pkt_progress[ids].min()))
        return worst

    # ------------------------------------------------------------------ wireless side
    def front_run(self, node: int, port: int, vc: int, now: int) -> int:
        """Number of consecutive ready flits at the front of a VC."""
        dmax = self.buf.shape[3]
        n = 0
        for i in range(int(self.cnt[node, port, vc])):
            slot = (self.head[node, port, vc] + i) % dmax
            if self.rdy[node, port, vc, slot] > now:
                break
            n += 1
        return n

    def pop_tx(self, w: int, vc: int, expect_pid: int):
        """Remove the front flit of a WI transmit VC (MAC side)."""
        node = self.tx_node(w)
        if self.cnt[node, 0, vc] <= 0:
            raise MacFault(f"WI {w} VC {vc} is empty but a flit was announced")
        h = int(self.head[node, 0, vc])
        code = int(self.buf[node, 0, vc, h])
        pid, seq = code >> SEQ_BITS, code & SEQ_MASK
        if pid != expect_pid:
            raise MacFault(f"WI {w} VC {vc} holds packet {pid}, announced {expect_pid}")
        self.head[node, 0, vc] = (h + 1) % self.buf.shape[3]
        self.cnt[node, 0, vc] -= 1
        if seq == self.pkt_size[pid] - 1:
            self.vc_pkt[node, 0, vc] = -1
        self._progress(pid, self.now)
        return code

    def rx_vc_for(self, w: int, pid: int, reserve: bool) -> int:
        """Receive VC mapped to ``pid`` at WI ``w``; optionally reserve a free one."""
        s = self.wis[w]
        nv = int(self.n_vc[s, WIRELESS])
        for k in range(nv):
            if self.vc_pkt[s, WIRELESS, k] == pid:
                return k
        if not reserve:
            return -1
        for k in range(nv):
            if self.vc_pkt[s, WIRELESS, k] < 0 and self.cnt[s, WIRELESS, k] == 0:
                self.vc_pkt[s, WIRELESS, k] = pid
                self.vc_pend[s, WIRELESS, k] = -1
                return k
        return -1

    def rx_space(self, w: int, vc: int) -> int:
        s = self.wis[w]
        return int(self.depth[s, WIRELESS] - self.cnt[s, WIRELESS, vc])

    def push_rx(self, w: int, vc: int, code: int, arrival: int) -> None:
        s = self.wis[w]
        c = int(self.cnt[s, WIRELESS, vc])
        if c >= self.depth[s, WIRELESS]:
            raise MacFault(f"WI {w} receive VC {vc} overflow")
        pid, seq = code >> SEQ_BITS, code & SEQ_MASK
        if self.vc_pkt[s, WIRELESS, vc] != pid:
            raise MacFault(f"WI {w} receive VC {vc} is not mapped to packet {pid}")
        slot = (int(self.head[s, WIRELESS, vc]) + c) % self.buf.shape[3]
        self.buf[s, WIRELESS, vc, slot] = code
        self.rdy[s, WIRELESS, vc, slot] = arrival + (self.pipeline if seq == 0 else 0)
        self.cnt[s, WIRELESS, vc] = c + 1
        self._progress(pid, arrival)

    def _progress(self, pid: int, t: int) -> None:
        gap = t - int(self.pkt_progress[pid])
        if gap > self.stats[ST_MAX_STALL]:
            self.stats[ST_MAX_STALL] = gap
        self.pkt_progress[pid] = t
