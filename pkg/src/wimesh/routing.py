"""Shortest-path-tree routing over the hybrid wired/wireless graph.

The shared wireless medium is represented by one virtual node joined to every
WI with half the wireless hop weight, which reproduces the WI clique's
pairwise distances exactly while keeping the routing structure a tree. A
tree path that passes through the medium node is a single wireless hop.
"""
from __future__ import annotations

import csv
import heapq
import io
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Set

import numpy as np

from .topology import Topology

NORTH, EAST, SOUTH, WEST, LOCAL, WIRELESS = range(6)
N_PORTS = 6
PORT_NAMES = ("N", "E", "S", "W", "L", "WL")


class RoutingError(ValueError):
    pass


@dataclass
class ForwardingTable:
    n_switches: int
    root: int
    medium: Optional[int]          # index of the virtual medium node, None for wired-only
    parent: np.ndarray             # tree parent per node (root -> -1), length N(+1)
    dist: np.ndarray               # weighted distance from root
    next_port: np.ndarray          # [N, N] int8
    wl_target: np.ndarray          # [N, N] int32: receiving WI when next_port is WIRELESS
    bcast_mask: np.ndarray         # [N, N_PORTS] uint8: output ports for a broadcast by arrival port
    neighbor: np.ndarray           # [N, 4] int32: switch in each cardinal direction or -1
    medium_members: tuple          # WIs adjacent to the medium in the tree

    def next_hop(self, here: int, dest: int) -> int:
        return int(self.next_port[here, dest])

    def broadcast_ports(self, here: int, arrival_port: int) -> Set[int]:
        m = int(self.bcast_mask[here, arrival_port])
        return {p for p in range(N_PORTS) if m >> p & 1}

    def path(self, src: int, dest: int) -> List[int]:
        """Switch sequence from src to dest (the medium node is omitted)."""
        out = [src]
        here = src
        while here != dest:
            port = self.next_port[here, dest]
            here = int(self.wl_target[here, dest]) if port == WIRELESS else int(self.neighbor[here, port])
            out.append(here)
            if len(out) > self.n_switches + 1:
                raise RoutingError("routing loop")
        return out

    def hops(self, src: int, dest: int) -> tuple:
        """(wired hops, wireless hops) on the tree path."""
        p = self.path(src, dest)
        wired = wireless = 0
        for a, b in zip(p, p[1:]):
            if self.next_port[a, dest] == WIRELESS:
                wireless += 1
            else:
                wired += 1
        return wired, wireless

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["switch", "dest", "port"])
        for s in range(self.n_switches):
            for d in range(self.n_switches):
                w.writerow([s, d, PORT_NAMES[self.next_port[s, d]]])
        return buf.getvalue()


def mesh_neighbors(t: Topology) -> np.ndarray:
    nb = np.full((t.n_switches, 4), -1, dtype=np.int32)
    for s in t.switches:
        r, c = t.coords(s)
        if r > 0:
            nb[s, NORTH] = s - t.cols
        if c + 1 < t.cols:
            nb[s, EAST] = s + 1
        if r + 1 < t.rows:
            nb[s, SOUTH] = s + t.cols
        if c > 0:
            nb[s, WEST] = s - 1
    return nb


def hybrid_adjacency(t: Topology, wireless_hop_weight: float = 1.0) -> Dict[int, Dict[int, float]]:
    """Weighted adjacency: unit wired hops plus the medium star (if any WIs)."""
    adj: Dict[int, Dict[int, float]] = {s: {} for s in t.switches}
    for a, b, _ in t.wired_links:
        adj[a][b] = 1.0
        adj[b][a] = 1.0
    if t.wi_set:
        m = t.n_switches
        adj[m] = {}
        half = wireless_hop_weight / 2.0
        for w in sorted(t.wi_set):
            adj[m][w] = half
            adj[w][m] = half
    return adj


def shortest_path_tree(adj: Dict[int, Dict[int, float]], root: int):
    """Dijkstra; on equal cost the lower-ID parent wins."""
    nodes = sorted(adj)
    dist = {v: float("inf") for v in nodes}
    parent = {v: -1 for v in nodes}
    dist[root] = 0.0
    done: Set[int] = set()
    heap = [(0.0, root)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v in sorted(adj[u]):
            if v in done:
                continue
            nd = d + adj[u][v]
            if nd < dist[v] or (nd == dist[v] and u < parent[v]):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    if len(done) != len(nodes):
        raise RoutingError("topology is disconnected")
    return dist, parent


def build_spanning_tree(t: Topology, wireless_hop_weight: float = 1.0,
                        seed: int = 0, root: Optional[int] = None) -> ForwardingTable:
    if wireless_hop_weight <= 0:
        raise RoutingError("wireless hop weight must be positive")
    adj = hybrid_adjacency(t, wireless_hop_weight)
    if root is None:
        root = random.Random(seed).randrange(t.n_switches)
    dist_d, parent_d = shortest_path_tree(adj, root)
    n = t.n_switches
    medium = n if t.wi_set else None
    n_nodes = len(adj)
    parent = np.array([parent_d[v] for v in range(n_nodes)], dtype=np.int32)
    dist = np.array([dist_d[v] for v in range(n_nodes)], dtype=np.float64)

    children: List[List[int]] = [[] for _ in range(n_nodes)]
    for v in range(n_nodes):
        if parent[v] >= 0:
            children[parent[v]].append(v)

    # Euler-tour intervals answer "is d below v" in O(1)
    tin = np.zeros(n_nodes, dtype=np.int64)
    tout = np.zeros(n_nodes, dtype=np.int64)
    clock = 0
    stack = [(root, 0)]
    while stack:
        v, i = stack.pop()
        if i == 0:
            tin[v] = clock
            clock += 1
        if i < len(children[v]):
            stack.append((v, i + 1))
            stack.append((children[v][i], 0))
        else:
            tout[v] = clock

    def below(v: int, d: int) -> bool:
        return tin[v] <= tin[d] < tout[v]

    def next_node(here: int, d: int) -> int:
        for c in children[here]:
            if below(c, d):
                return c
        return int(parent[here])

    nb = mesh_neighbors(t)
    port_of: Dict[tuple, int] = {}
    for s in range(n):
        for p in range(4):
            if nb[s, p] >= 0:
                port_of[(s, int(nb[s, p]))] = p
        if medium is not None and s in t.wi_set:
            port_of[(s, medium)] = WIRELESS

    next_port = np.full((n, n), LOCAL, dtype=np.int8)
    wl_target = np.full((n, n), -1, dtype=np.int32)
    for s in range(n):
        for d in range(n):
            if s == d:
                continue
            nxt = next_node(s, d)
            next_port[s, d] = port_of[(s, nxt)]
            if nxt == medium:
                wl_target[s, d] = next_node(medium, d)

    bcast = np.zeros((n, N_PORTS), dtype=np.uint8)
    for s in range(n):
        tree_ports = [port_of[(s, c)] for c in children[s]]
        if parent[s] >= 0:
            tree_ports.append(port_of[(s, int(parent[s]))])
        for arrival in range(N_PORTS):
            mask = 0
            for p in tree_ports:
                if p != arrival:
                    mask |= 1 << p
            if arrival != LOCAL:
                mask |= 1 << LOCAL
            bcast[s, arrival] = mask

    members: tuple = ()
    if medium is not None:
        m_adj = list(children[medium])
        if parent[medium] >= 0:
            m_adj.append(int(parent[medium]))
        members = tuple(sorted(m_adj))

    return ForwardingTable(n, root, medium, parent, dist, next_port, wl_target, bcast, nb, members)


def all_pairs_distances(t: Topology, wireless_hop_weight: float = 1.0) -> np.ndarray:
    """Graph (not tree) shortest distances between switches."""
    adj = hybrid_adjacency(t, wireless_hop_weight)
    n = t.n_switches
    out = np.zeros((n, n))
    for s in range(n):
        d, _ = shortest_path_tree(adj, s)
        out[s] = [d[v] for v in range(n)]
    return out
