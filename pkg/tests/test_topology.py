from __future__ import annotations

import pytest

from wimesh.topology import (TopologyError, build_mesh, build_wimesh, partition_and_place_wis,
                             tile_shape_for)


def test_mesh_link_count_and_lengths():
    t = build_mesh(8, 8, 20.0)
    assert t.n_switches == 64
    assert len(t.wired_links) == 2 * 8 * 7
    assert all(length == pytest.approx(2.5) for _, _, length in t.wired_links)


def test_mesh_rejects_degenerate():
    with pytest.raises(TopologyError):
        build_mesh(1, 4)
    with pytest.raises(TopologyError):
        build_mesh(4, 4, 0.0)


def test_default_wimesh_has_eight_central_wis():
    t = build_wimesh(8, 8, 20.0, 8)
    assert t.tile_shape == (4, 2)
    assert len(t.wis) == 8
    # one WI per subnet, each inside its own subnet
    assert sorted(t.subnet_of[w] for w in t.wis) == list(range(8))
    for w in t.wis:
        r, c = t.coords(w)
        tr, tc = t.tile_shape
        assert (r % tr, c % tc) == (1, 0)


@pytest.mark.parametrize("size,n_wi", [(4, 16), (8, 8), (16, 4), (32, 2)])
def test_subnet_sizes_tile_the_mesh(size, n_wi):
    t = build_wimesh(8, 8, 20.0, size)
    assert len(t.wis) == n_wi
    counts = {}
    for s in t.switches:
        counts[t.subnet_of[s]] = counts.get(t.subnet_of[s], 0) + 1
    assert set(counts.values()) == {size}


def test_indivisible_subnet_rejected():
    with pytest.raises(TopologyError):
        partition_and_place_wis(build_mesh(8, 8), 7)
    with pytest.raises(TopologyError):
        tile_shape_for(6, 6, 5)


def test_wired_mesh_has_no_wis():
    t = build_wimesh(4, 4, 20.0, None)
    assert t.wis == ()


def test_link_length_rejects_non_neighbours():
    t = build_mesh(4, 4)
    with pytest.raises(TopologyError):
        t.link_length(0, 5)


def test_describe_is_stable():
    a = build_wimesh(4, 4, 20.0, 4).describe()
    b = build_wimesh(4, 4, 20.0, 4).describe()
    assert a == b
    assert a.startswith("mesh 4x4 die 20mm\nswitches 16\n")
    assert a.count("\nwi ") == 4
