"""Torus geometry: vertices, oriented links, plaquettes, cuts and regions.

Vertices of the L x L periodic square lattice are indexed v = y*L + x.
Each vertex owns two outgoing links, so link id = 2*v + d with d = 0 for
the +x link and d = 1 for the +y link; horizontal links point +x and
vertical links point +y.  Incidence tables are also built explicitly and
tested against this formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class GeometryError(ValueError):
    """Invalid lattice size or region geometry."""


@dataclass(frozen=True)
class TorusLattice:
    L: int
    link_tail: np.ndarray  # (2L^2,) vertex at the link's tail
    link_head: np.ndarray  # (2L^2,) vertex at the link's head
    # plq_plus/plq_minus: plaquettes to the left/right of each oriented link;
    # a plaquette-spin field theta induces the divergence-free flow
    # theta[plq_plus] - theta[plq_minus].
    plq_plus: np.ndarray  # (2L^2,)
    plq_minus: np.ndarray  # (2L^2,)
    plaq_links: np.ndarray  # (L^2, 4) counter-clockwise boundary links
    plaq_signs: np.ndarray  # (L^2, 4) orientation of each boundary link
    cut1: np.ndarray  # (L,) horizontal links crossed by the dual cycle at column 0
    cut2: np.ndarray  # (L,) vertical links crossed by the dual cycle at row 0
    cut1_mask: np.ndarray = field(repr=False, default=None)  # (2L^2,) int8
    cut2_mask: np.ndarray = field(repr=False, default=None)  # (2L^2,) int8

    @property
    def vertex_count(self) -> int:
        return self.L * self.L

    @property
    def plaquette_count(self) -> int:
        return self.L * self.L

    @property
    def link_count(self) -> int:
        return 2 * self.L * self.L

    def vertex_xy(self, v: int) -> tuple[int, int]:
        return v % self.L, v // self.L

    def vertex_id(self, x: int, y: int) -> int:
        return (y % self.L) * self.L + (x % self.L)

    def chebyshev(self, v: int, w: int) -> int:
        """Chebyshev (L-infinity) distance on the torus."""
        L = self.L
        dx = abs(v % L - w % L)
        dy = abs(v // L - w // L)
        return max(min(dx, L - dx), min(dy, L - dy))


def build_lattice(L: int) -> TorusLattice:
    """Build all incidence tables for the L x L torus.

    Raises GeometryError for L < 2.
    """
    if not isinstance(L, (int, np.integer)) or L < 2:
        raise GeometryError(f"lattice size must be an integer >= 2, got {L!r}")
    L = int(L)
    V = L * L
    nl = 2 * V
    link_tail = np.empty(nl, dtype=np.int64)
    link_head = np.empty(nl, dtype=np.int64)
    plq_plus = np.empty(nl, dtype=np.int64)
    plq_minus = np.empty(nl, dtype=np.int64)
    for y in range(L):
        for x in range(L):
            v = y * L + x
            xe = (x + 1) % L
            yn = (y + 1) % L
            ys = (y - 1) % L
            xw = (x - 1) % L
            # horizontal link v -> v+x
            link_tail[2 * v] = v
            link_head[2 * v] = y * L + xe
            plq_plus[2 * v] = y * L + x  # plaquette above (base vertex (x, y))
            plq_minus[2 * v] = ys * L + x  # plaquette below
            # vertical link v -> v+y
            link_tail[2 * v + 1] = v
            link_head[2 * v + 1] = yn * L + x
            plq_plus[2 * v + 1] = y * L + xw  # plaquette to the left
            plq_minus[2 * v + 1] = y * L + x  # plaquette to the right
    plaq_links = np.empty((V, 4), dtype=np.int64)
    plaq_signs = np.empty((V, 4), dtype=np.int64)
    for y in range(L):
        for x in range(L):
            p = y * L + x
            xe = (x + 1) % L
            yn = (y + 1) % L
            # counter-clockwise from the base vertex (x, y)
            plaq_links[p] = (
                2 * (y * L + x),  # bottom, traversed +x
                2 * (y * L + xe) + 1,  # right, traversed +y
                2 * (yn * L + x),  # top, traversed -x
                2 * (y * L + x) + 1,  # left, traversed -y
            )
            plaq_signs[p] = (1, 1, -1, -1)
    cut1 = np.array([2 * (y * L + 0) for y in range(L)], dtype=np.int64)
    cut2 = np.array([2 * (0 * L + x) + 1 for x in range(L)], dtype=np.int64)
    if np.intersect1d(cut1, cut2).size != 0:
        raise GeometryError("canonical cuts must be disjoint")
    c1 = np.zeros(nl, dtype=np.int8)
    c1[cut1] = 1
    c2 = np.zeros(nl, dtype=np.int8)
    c2[cut2] = 1
    return TorusLattice(
        L=L,
        link_tail=link_tail,
        link_head=link_head,
        plq_plus=plq_plus,
        plq_minus=plq_minus,
        plaq_links=plaq_links,
        plaq_signs=plaq_signs,
        cut1=cut1,
        cut2=cut2,
        cut1_mask=c1,
        cut2_mask=c2,
    )


@lru_cache(maxsize=None)
def cached_lattice(L: int) -> TorusLattice:
    return build_lattice(L)


def incidence_matrix(lat: TorusLattice) -> np.ndarray:
    """Divergence matrix D with D[v, mu] = +1 at the tail, -1 at the head."""
    D = np.zeros((lat.vertex_count, lat.link_count), dtype=np.int64)
    for mu in range(lat.link_count):
        D[lat.link_tail[mu], mu] += 1
        D[lat.link_head[mu], mu] -= 1
    return D


@dataclass(frozen=True)
class Region:
    """Concentric square (Chebyshev-metric) region on the torus.

    A disc of radius r has interior {d <= r-1} and boundary {d = r}; an
    annulus (r_in, r_out) has interior {r_in+1 <= d <= r_out-1} and boundary
    {d = r_in} union {d = r_out}.  Interior, boundary and exterior partition
    the vertex set.
    """

    kind: str  # "disc" | "annulus"
    center: int
    r_inner: int  # 0 for a disc
    r_outer: int
    interior: np.ndarray
    boundary: np.ndarray
    exterior: np.ndarray

    def link_set(self, lat: TorusLattice) -> np.ndarray:
        """Links with both endpoints inside the closed region."""
        closed = np.zeros(lat.vertex_count, dtype=bool)
        closed[self.interior] = True
        closed[self.boundary] = True
        mask = closed[lat.link_tail] & closed[lat.link_head]
        return np.nonzero(mask)[0]


def _distances(lat: TorusLattice, center: int) -> np.ndarray:
    v = np.arange(lat.vertex_count)
    L = lat.L
    dx = np.abs(v % L - center % L)
    dy = np.abs(v // L - center // L)
    return np.maximum(np.minimum(dx, L - dx), np.minimum(dy, L - dy))


def _make_region(lat: TorusLattice, center: int, kind: str, r_in: int, r_out: int) -> Region:
    d = _distances(lat, center)
    if kind == "disc":
        interior = d <= r_out - 1
        boundary = d == r_out
    else:
        interior = (d >= r_in + 1) & (d <= r_out - 1)
        boundary = (d == r_in) | (d == r_out)
    exterior = ~(interior | boundary)
    return Region(
        kind=kind,
        center=center,
        r_inner=r_in,
        r_outer=r_out,
        interior=np.nonzero(interior)[0],
        boundary=np.nonzero(boundary)[0],
        exterior=np.nonzero(exterior)[0],
    )


def disc_interior(lat: TorusLattice, center: int, r: int) -> np.ndarray:
    """Vertices with Chebyshev distance <= r-1 from the center."""
    d = _distances(lat, center)
    return np.nonzero(d <= r - 1)[0]


def annulus_interior(lat: TorusLattice, center: int, r_in: int, r_out: int) -> np.ndarray:
    """Vertices with r_in+1 <= distance <= r_out-1."""
    d = _distances(lat, center)
    return np.nonzero((d >= r_in + 1) & (d <= r_out - 1))[0]


def annular_regions(
    lat: TorusLattice, r_A: int, r_B: int, r_C: int, center: int | None = None
) -> tuple[Region, Region, Region]:
    """Concentric disc A and annuli B, C used by the conditional-mutual-
    information geometry.  Radii must satisfy 0 < r_A < r_B < r_C <= L//2.
    """
    for r in (r_A, r_B, r_C):
        if not isinstance(r, (int, np.integer)):
            raise GeometryError(f"radii must be integers, got {r!r}")
    if not (0 < r_A < r_B < r_C):
        raise GeometryError(f"radii must be strictly increasing, got {(r_A, r_B, r_C)}")
    if r_C > lat.L // 2:
        raise GeometryError(f"outer radius {r_C} exceeds half the lattice size {lat.L // 2}")
    if center is None:
        center = (lat.L // 2) * lat.L + lat.L // 2
    A = _make_region(lat, center, "disc", 0, r_A)
    B = _make_region(lat, center, "annulus", r_A, r_B)
    C = _make_region(lat, center, "annulus", r_B, r_C)
    for first, second in ((A, B), (B, C), (A, C)):
        if np.intersect1d(first.interior, second.interior).size:
            raise GeometryError("region interiors must be disjoint")
    return A, B, C
