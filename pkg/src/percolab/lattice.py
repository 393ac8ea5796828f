"""Square-lattice geometry and the deterministic edge-weight field.

Sites are integer pairs ``(x, y)`` with the sup-norm ``|x| = max(|x1|,|x2|)``.
Every nearest-neighbour bond has a canonical representation: a horizontal
edge <(x,y),(x+1,y)> and a vertical edge <(x,y),(x,y+1)> are both keyed by
their left/bottom endpoint ``(x, y)``.  The dual lattice lives on the
(1/2, 1/2)-shifted sites; a dual site is stored through the primal site it
shifts from, so all coordinates stay integral.

Edge weights come from a counter-based 64-bit mixing function of
``(seed, x, y, orientation)``.  The lattice is therefore lazy and infinite:
any edge's weight can be queried at any time and is bit-identical across
queries, processes and array/scalar code paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Union

import numpy as np

from .errors import CoordinateRangeError, InvalidEdgeError, InvalidRegionError

Site = tuple[int, int]

HORIZONTAL = 0
VERTICAL = 1

# Coordinates are packed into 31 bits (offset binary); beyond this the
# weight keys would collide, so it is an error rather than a wraparound.
COORD_BOUND = 1 << 30

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Bit 63 of a weight key is 0 for edges and 1 for derived-seed counters,
# keeping the two domains disjoint.
_SEED_DOMAIN_BIT = 1 << 63


def site_norm(site: Site, center: Site = (0, 0)) -> int:
    """Sup-norm distance |site - center|."""
    return max(abs(site[0] - center[0]), abs(site[1] - center[1]))


def check_coord(x: int, y: int) -> None:
    if abs(x) >= COORD_BOUND or abs(y) >= COORD_BOUND:
        raise CoordinateRangeError(f"site ({x},{y}) outside |coord| < 2**30")


class Edge(NamedTuple):
    """Canonical lattice bond: base site plus orientation.

    The tuple ordering (x, y, o) is also the canonical edge order used to
    break weight ties deterministically.
    """

    x: int
    y: int
    o: int

    @property
    def base(self) -> Site:
        return (self.x, self.y)

    @property
    def endpoints(self) -> tuple[Site, Site]:
        """(e_x, e_y): left/right for horizontal, bottom/top for vertical."""
        if self.o == HORIZONTAL:
            return (self.x, self.y), (self.x + 1, self.y)
        return (self.x, self.y), (self.x, self.y + 1)

    @property
    def dual(self) -> "DualEdge":
        """The dual bond e*, sharing this edge's weight."""
        if self.o == HORIZONTAL:
            return DualEdge(self.x, self.y - 1, VERTICAL)
        return DualEdge(self.x - 1, self.y, HORIZONTAL)


class DualEdge(NamedTuple):
    """Bond of the dual lattice in shifted coordinates.

    Base ``(x, y)`` stands for the dual site (x + 1/2, y + 1/2); the
    orientation is the dual edge's own direction.
    """

    x: int
    y: int
    o: int

    @property
    def primal(self) -> Edge:
        if self.o == VERTICAL:
            return Edge(self.x, self.y + 1, HORIZONTAL)
        return Edge(self.x + 1, self.y, VERTICAL)

    @property
    def endpoints(self) -> tuple[Site, Site]:
        """Dual endpoints (e*_x, e*_y) in shifted (base) coordinates."""
        if self.o == HORIZONTAL:
            return (self.x, self.y), (self.x + 1, self.y)
        return (self.x, self.y), (self.x, self.y + 1)


def canonical_edge(a: Site, b: Site) -> Edge:
    """Canonical Edge for the unordered nearest-neighbour pair {a, b}."""
    check_coord(*a)
    check_coord(*b)
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    if abs(dx) + abs(dy) != 1:
        raise InvalidEdgeError(f"{a} and {b} are not nearest neighbours")
    if dx == 1:
        return Edge(a[0], a[1], HORIZONTAL)
    if dx == -1:
        return Edge(b[0], b[1], HORIZONTAL)
    if dy == 1:
        return Edge(a[0], a[1], VERTICAL)
    return Edge(b[0], b[1], VERTICAL)


@dataclass(frozen=True)
class BoxRegion:
    """B(center, radius) = {y : |y - center| <= radius}."""

    center: Site = (0, 0)
    radius: int = 0

    def __post_init__(self):
        if self.radius < 0:
            raise InvalidRegionError(f"negative box radius {self.radius}")
        check_coord(self.center[0] - self.radius, self.center[1] - self.radius)
        check_coord(self.center[0] + self.radius, self.center[1] + self.radius)

    def contains(self, site: Site) -> bool:
        return site_norm(site, self.center) <= self.radius

    def sites(self) -> Iterator[Site]:
        cx, cy = self.center
        n = self.radius
        for y in range(cy - n, cy + n + 1):
            for x in range(cx - n, cx + n + 1):
                yield (x, y)

    def boundary_sites(self) -> Iterator[Site]:
        for s in self.sites():
            if site_norm(s, self.center) == self.radius:
                yield s


@dataclass(frozen=True)
class AnnulusRegion:
    """Ann(center; inner, outer) = B(outer) \\ B(inner)."""

    center: Site
    inner: int
    outer: int

    def __post_init__(self):
        if self.inner < 0 or self.inner >= self.outer:
            raise InvalidRegionError(
                f"annulus needs 0 <= inner < outer, got ({self.inner},{self.outer})"
            )
        check_coord(self.center[0] - self.outer, self.center[1] - self.outer)
        check_coord(self.center[0] + self.outer, self.center[1] + self.outer)

    def contains(self, site: Site) -> bool:
        return self.inner < site_norm(site, self.center) <= self.outer

    def sites(self) -> Iterator[Site]:
        cx, cy = self.center
        n = self.outer
        for y in range(cy - n, cy + n + 1):
            for x in range(cx - n, cx + n + 1):
                if self.contains((x, y)):
                    yield (x, y)


Region = Union[BoxRegion, AnnulusRegion]


def edges_in(region: Region) -> list[Edge]:
    """Every canonical edge with both endpoints in the region.

    Deterministic order: row-major over base sites, horizontal before
    vertical at each base.
    """
    if not isinstance(region, (BoxRegion, AnnulusRegion)):
        raise InvalidRegionError(f"unsupported region {region!r}")
    out = []
    for (x, y) in region.sites():
        if region.contains((x + 1, y)):
            out.append(Edge(x, y, HORIZONTAL))
        if region.contains((x, y + 1)):
            out.append(Edge(x, y, VERTICAL))
    return out


def mix64(z: int) -> int:
    """SplitMix64 finalizer; full-avalanche 64-bit mixing."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def edge_key(x: int, y: int, o: int) -> int:
    """Pack an edge into a 63-bit key whose numeric order is (x, y, o) order."""
    return ((x + COORD_BOUND) << 32) | ((y + COORD_BOUND) << 1) | o


def derive_seed(master: int, index: int, domain: int) -> int:
    """Per-trial seed from (master, trial index) with a domain tag.

    Uses the same mixer as edge weights but on the counter side of the
    key space (bit 63 set), so no trial's field can echo edge weights.
    """
    key = _SEED_DOMAIN_BIT | ((domain & 0x7FFF) << 48) | (index & ((1 << 48) - 1))
    return mix64(mix64(master & _MASK64) ^ key)


@dataclass(frozen=True)
class WeightField:
    """Deterministic uniform weights on every lattice edge.

    Immutable; safe to share across threads.  ``weight`` is a pure
    function of (seed, canonical edge), so any region can be generated
    lazily and replayed exactly.
    """

    seed: int

    @property
    def mixed_seed(self) -> int:
        return mix64(self.seed & _MASK64)

    def weight(self, e: Edge | DualEdge) -> float:
        """tau_e in [0, 1); a dual edge returns its primal edge's weight."""
        if isinstance(e, DualEdge):
            e = e.primal
        check_coord(e.x, e.y)
        h = mix64(self.mixed_seed ^ edge_key(e.x, e.y, e.o))
        return (h >> 11) * 2.0**-53

    def box_weights(self, center: Site, n: int) -> tuple[np.ndarray, np.ndarray]:
        """All edge weights of B(center, n) as two arrays.

        Returns ``(hw, vw)`` with ``hw[j, i]`` the weight of the horizontal
        edge based at (x0+i, y0+j) and ``vw[j, i]`` the vertical one, where
        (x0, y0) is the box's lower-left corner.  Shapes (2n+1, 2n) and
        (2n, 2n+1).
        """
        x0 = center[0] - n
        y0 = center[1] - n
        w = 2 * n + 1
        check_coord(x0, y0)
        check_coord(x0 + w - 1, y0 + w - 1)
        hw = self.grid_weights(x0, y0, w - 1, w, HORIZONTAL)
        vw = self.grid_weights(x0, y0, w, w - 1, VERTICAL)
        return hw, vw

    def grid_weights(self, x0: int, y0: int, nx: int, ny: int, o: int) -> np.ndarray:
        """Weights of the (ny, nx) grid of edges based at (x0+i, y0+j)."""
        xs = (np.arange(x0, x0 + nx, dtype=np.int64) + COORD_BOUND).astype(np.uint64)
        ys = (np.arange(y0, y0 + ny, dtype=np.int64) + COORD_BOUND).astype(np.uint64)
        keys = (xs[None, :] << np.uint64(32)) | (ys[:, None] << np.uint64(1))
        if o:
            keys |= np.uint64(1)
        z = keys ^ np.uint64(self.mixed_seed)
        z += np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
        return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
