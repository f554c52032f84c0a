"""Wired mesh construction, subnet tiling and wireless-interface placement."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Tuple


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    rows: int
    cols: int
    die_edge_mm: float
    wired_links: Tuple[Tuple[int, int, float], ...]
    wi_set: FrozenSet[int] = frozenset()
    subnet_of: Dict[int, int] = field(default_factory=dict)
    tile_shape: Tuple[int, int] = (0, 0)

    @property
    def n_switches(self) -> int:
        return self.rows * self.cols

    @property
    def switches(self) -> range:
        return range(self.n_switches)

    @property
    def n_subnets(self) -> int:
        return len(set(self.subnet_of.values()))

    @property
    def wis(self) -> Tuple[int, ...]:
        """WI-hosting switches ordered by subnet index (= ring order)."""
        by_subnet = sorted((self.subnet_of[s], s) for s in self.wi_set)
        return tuple(s for _, s in by_subnet)

    def coords(self, switch: int) -> Tuple[int, int]:
        return divmod(switch, self.cols)

    def switch_at(self, row: int, col: int) -> int:
        return row * self.cols + col

    def link_length(self, a: int, b: int) -> float:
        ra, ca = self.coords(a)
        rb, cb = self.coords(b)
        if ra == rb and abs(ca - cb) == 1:
            return self.die_edge_mm / self.cols
        if ca == cb and abs(ra - rb) == 1:
            return self.die_edge_mm / self.rows
        raise TopologyError(f"switches {a} and {b} are not mesh neighbours")

    def describe(self) -> str:
        """Human-readable dump used for golden-file comparisons."""
        lines = [
            f"mesh {self.rows}x{self.cols} die {self.die_edge_mm:g}mm",
            f"switches {self.n_switches}",
        ]
        for a, b, length in self.wired_links:
            lines.append(f"link {a} {b} {length:.6g}")
        for w in self.wis:
            lines.append(f"wi {w} subnet {self.subnet_of[w]}")
        return "\n".join(lines) + "\n"


def build_mesh(rows: int, cols: int, die_edge_mm: float = 20.0) -> Topology:
    if rows < 2 or cols < 2:
        raise TopologyError(f"mesh needs at least 2x2 switches, got {rows}x{cols}")
    if die_edge_mm <= 0:
        raise TopologyError("die edge must be positive")
    h_len = die_edge_mm / cols
    v_len = die_edge_mm / rows
    links = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if c + 1 < cols:
                links.append((s, s + 1, h_len))
            if r + 1 < rows:
                links.append((s, s + cols, v_len))
    return Topology(rows, cols, float(die_edge_mm), tuple(links))


def tile_shape_for(rows: int, cols: int, subnet_size: int) -> Tuple[int, int]:
    """Near-square (tile_rows, tile_cols) tiling the mesh; taller wins ties."""
    best = None
    for tr in range(1, subnet_size + 1):
        if subnet_size % tr:
            continue
        tc = subnet_size // tr
        if rows % tr or cols % tc:
            continue
        key = (abs(tr - tc), -tr)
        if best is None or key < best[0]:
            best = (key, (tr, tc))
    if best is None:
        raise TopologyError(f"subnet size {subnet_size} cannot tile a {rows}x{cols} mesh")
    return best[1]


def _central_offset(tr: int, tc: int) -> Tuple[int, int]:
    # min over candidates of max Manhattan distance inside the tile; row-major order
    # makes the first minimiser the lowest switch ID in every translated copy.
    best = None
    for r in range(tr):
        for c in range(tc):
            worst = max(abs(r - r2) + abs(c - c2) for r2 in range(tr) for c2 in range(tc))
            if best is None or worst < best[0]:
                best = (worst, (r, c))
    return best[1]


def partition_and_place_wis(t: Topology, subnet_size: int) -> Topology:
    n = t.n_switches
    if subnet_size < 1 or n % subnet_size:
        raise TopologyError(f"{n} switches are not divisible into subnets of {subnet_size}")
    tr, tc = tile_shape_for(t.rows, t.cols, subnet_size)
    tiles_per_row = t.cols // tc
    off_r, off_c = _central_offset(tr, tc)
    subnet_of: Dict[int, int] = {}
    wis = set()
    for s in range(n):
        r, c = divmod(s, t.cols)
        subnet_of[s] = (r // tr) * tiles_per_row + (c // tc)
    for br in range(t.rows // tr):
        for bc in range(tiles_per_row):
            wis.add((br * tr + off_r) * t.cols + bc * tc + off_c)
    return replace(t, wi_set=frozenset(wis), subnet_of=subnet_of, tile_shape=(tr, tc))


def build_wimesh(rows: int, cols: int, die_edge_mm: float, subnet_size: int | None) -> Topology:
    """Mesh plus WI placement; ``subnet_size=None`` gives the plain wired mesh."""
    t = build_mesh(rows, cols, die_edge_mm)
    if subnet_size is None:
        return t
    return partition_and_place_wis(t, subnet_size)
