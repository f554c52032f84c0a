from __future__ import annotations

import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wimesh.routing import (LOCAL, WIRELESS, RoutingError, all_pairs_distances,
                            build_spanning_tree)
from wimesh.topology import build_mesh, build_wimesh


def oracle_graph(t, w):
    """Hybrid graph with the WIs joined as an explicit clique."""
    g = nx.Graph()
    g.add_nodes_from(t.switches)
    for a, b, _ in t.wired_links:
        g.add_edge(a, b, weight=1.0)
    for a, b in itertools.combinations(sorted(t.wi_set), 2):
        if not g.has_edge(a, b) or g[a][b]["weight"] > w:
            g.add_edge(a, b, weight=w)
    return g


def test_two_by_two_tree():
    t = build_mesh(2, 2)
    ft = build_spanning_tree(t, seed=0)
    assert int(np.sum(ft.parent >= 0)) == 3
    assert len(ft.path(0, 3)) - 1 == 2


def test_far_wis_are_one_wireless_hop_apart():
    t = build_wimesh(8, 8, 20.0, 8)
    d = all_pairs_distances(t, 1.0)
    wis = t.wis
    assert d[wis[0], wis[-1]] == 1.0


@pytest.mark.parametrize("rows,cols,size,w", [(4, 4, 4, 1.0), (4, 4, 8, 2.0), (4, 4, None, 1.0),
                                              (3, 4, 4, 1.5)])
def test_graph_distances_match_networkx(rows, cols, size, w):
    t = build_wimesh(rows, cols, 20.0, size)
    ours = all_pairs_distances(t, w)
    ref = dict(nx.all_pairs_dijkstra_path_length(oracle_graph(t, w)))
    for s in t.switches:
        for d in t.switches:
            assert ours[s, d] == pytest.approx(ref[s][d])


@pytest.mark.parametrize("seed", range(6))
def test_root_distances_optimal_and_start_independent(seed):
    t = build_wimesh(4, 4, 20.0, 4)
    ft = build_spanning_tree(t, 1.0, seed=seed)
    ref = nx.single_source_dijkstra_path_length(oracle_graph(t, 1.0), ft.root)
    for v in t.switches:
        assert ft.dist[v] == pytest.approx(ref[v])
    # graph distances do not depend on which root the tree used
    assert np.array_equal(all_pairs_distances(t, 1.0), all_pairs_distances(t, 1.0))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), size=st.sampled_from([4, 8, 16]))
def test_every_route_terminates_without_repeats(seed, size):
    t = build_wimesh(8, 8, 20.0, size)
    ft = build_spanning_tree(t, 1.0, seed=seed)
    for s in t.switches:
        assert ft.next_hop(s, s) == LOCAL
        for d in t.switches:
            p = ft.path(s, d)
            assert p[0] == s and p[-1] == d
            assert len(set(p)) == len(p)


def test_tree_edges_form_a_tree():
    t = build_wimesh(8, 8, 20.0, 8)
    ft = build_spanning_tree(t, 1.0, seed=3)
    g = nx.Graph()
    for v, p in enumerate(ft.parent):
        if p >= 0:
            g.add_edge(v, int(p))
    assert nx.is_tree(g)
    assert g.number_of_nodes() == t.n_switches + 1      # switches plus the medium


def test_wireless_port_used_between_far_subnets():
    t = build_wimesh(8, 8, 20.0, 8)
    ft = build_spanning_tree(t, 1.0, seed=0)
    members = set(ft.medium_members)
    a, b = t.wis[0], t.wis[-1]
    assert a in members and b in members
    assert ft.next_hop(a, b) == WIRELESS
    assert ft.wl_target[a, b] == b
    assert ft.hops(a, b) == (0, 1)


def test_non_wi_switch_walks_wired_toward_its_wi():
    t = build_wimesh(8, 8, 20.0, 8)
    ft = build_spanning_tree(t, 1.0, seed=0)
    src, dst = 0, 63
    p = ft.path(src, dst)
    first_wireless = next(i for i, (a, _) in enumerate(zip(p, p[1:]))
                          if ft.next_hop(a, dst) == WIRELESS)
    assert p[first_wireless] in t.wi_set
    assert all(ft.next_hop(a, dst) != WIRELESS for a in p[:first_wireless])


def test_broadcast_reaches_every_core_once():
    for size in (4, 8, None):
        t = build_wimesh(8, 8, 20.0, size)
        ft = build_spanning_tree(t, 1.0, seed=1)
        nbr = ft.neighbor
        for src in (0, 27, 63):
            seen = {}
            # flood the tree; wireless reaches every medium member except the sender
            frontier = [(src, LOCAL)]
            while frontier:
                here, arrival = frontier.pop()
                for p in ft.broadcast_ports(here, arrival):
                    if p == LOCAL:
                        seen[here] = seen.get(here, 0) + 1
                    elif p == WIRELESS:
                        for m in ft.medium_members:
                            if m != here:
                                frontier.append((m, WIRELESS))
                    else:
                        frontier.append((int(nbr[here, p]), (p + 2) % 4))
            cores = {c for c in t.switches if c != src}
            assert {c for c in seen if c != src} == cores
            assert all(seen[c] == 1 for c in cores)


def test_leaf_broadcast_is_local_only():
    t = build_mesh(4, 4)
    ft = build_spanning_tree(t, seed=0)
    leaf = next(v for v in t.switches if not any(ft.parent[u] == v for u in t.switches))
    p = int(ft.parent[leaf])
    arrival = next(q for q in range(4) if ft.neighbor[leaf, q] == p)
    assert ft.broadcast_ports(leaf, arrival) == {LOCAL}


def test_invalid_weight_rejected():
    with pytest.raises(RoutingError):
        build_spanning_tree(build_mesh(2, 2), 0.0)


def test_csv_dump_shape():
    t = build_mesh(2, 2)
    rows = build_spanning_tree(t, seed=0).to_csv().strip().splitlines()
    assert rows[0] == "switch,dest,port"
    assert len(rows) == 1 + 16
