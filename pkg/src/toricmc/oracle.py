"""Exact enumeration ground truth for tiny systems.

Fiber sums over all divergence-free fluctuations are organized by homology
sector: every flow with the syndrome of k' is k' + curl(theta) + winding
loops, with one plaquette spin gauge-fixed.  The same machinery yields
defect-insertion ratios.  Syndrome-marginal entropies are computed by a
transfer construction over links instead, so they reach slightly larger
regions than the fiber enumeration would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .channel import ChannelParams
from .lattice import Region, TorusLattice
from .flows import FlowField, loop_flow_x, loop_flow_y, path_flow

_FIBER_CAP = 10**8


class CapacityError(Exception):
    """Requested enumeration exceeds the configured size cap."""


@dataclass(frozen=True)
class ExactSpectrum:
    """Sector-resolved fiber weights for one fixed disorder realization.

    ``sector_weights[a1, a2]`` is the absolute weight Z[e, a]; summed over all
    syndromes and sectors these weights form a probability distribution, so
    ``total_weight`` is the probability of the syndrome itself.
    """

    N: int
    L: int
    sector_weights: np.ndarray
    total_weight: float

    @property
    def sector_probabilities(self) -> np.ndarray:
        return self.sector_weights / self.total_weight


@njit(cache=True)
def _kahan_sum(flat):
    total = 0.0
    comp = 0.0
    for i in range(flat.size):
        y = flat[i] - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


@njit(cache=True)
def _neg_entropy(flat):
    """-sum p ln p with compensated accumulation; zero terms contribute 0."""
    total = 0.0
    comp = 0.0
    for i in range(flat.size):
        p = flat[i]
        if p > 0.0:
            y = -p * np.log(p) - comp
            t = total + y
            comp = (t - total) - y
            total = t
    return total


@njit(cache=True)
def _fiber_sector_sums(p, f0, lx, ly, plaq_links, plaq_signs, N):
    """Sum of prod p over the fiber of f0, resolved by winding sector.

    For each sector the plaquette-spin odometer visits all N^(V-1) gauge
    classes once; each digit change touches the four boundary links of one
    plaquette, so the running weight is updated by four probability ratios.
    """
    V = plaq_links.shape[0]
    E = f0.shape[0]
    Z = np.zeros((N, N))
    f = np.empty(E, dtype=np.int64)
    digits = np.empty(V - 1, dtype=np.int64)
    for a1 in range(N):
        for a2 in range(N):
            for mu in range(E):
                f[mu] = (f0[mu] + a1 * lx[mu] + a2 * ly[mu]) % N
            w = 1.0
            for mu in range(E):
                w *= p[f[mu]]
            for i in range(V - 1):
                digits[i] = 0
            total = 0.0
            comp = 0.0
            while True:
                y = w - comp
                t = total + y
                comp = (t - total) - y
                total = t
                i = 0
                while i < V - 1:
                    pq = i + 1
                    for j in range(4):
                        mu = plaq_links[pq, j]
                        old = f[mu]
                        new = old + plaq_signs[pq, j]
                        if new >= N:
                            new -= N
                        elif new < 0:
                            new += N
                        w *= p[new] / p[old]
                        f[mu] = new
                    if digits[i] < N - 1:
                        digits[i] += 1
                        break
                    digits[i] = 0
                    i += 1
                if i == V - 1:
                    break
            Z[a1, a2] = total
    return Z


def _check_fiber_cap(N: int, V: int) -> None:
    if N ** (V - 1) * N**2 > _FIBER_CAP:
        raise CapacityError(
            f"fiber enumeration needs {N}^{V - 1}*{N}^2 weight evaluations,"
            f" above the cap of {_FIBER_CAP:.0e}"
        )


def exact_spectrum(kprime: FlowField, ch: ChannelParams) -> ExactSpectrum:
    """Enumerate the full fiber of kprime's syndrome, resolved by sector."""
    lat = kprime.lat
    N = ch.N
    if kprime.N != N:
        raise ValueError("flow and channel have different moduli")
    if np.any(ch.p == 0.0):
        raise ValueError("fiber enumeration requires strictly positive probabilities")
    _check_fiber_cap(N, lat.vertex_count)
    lx = loop_flow_x(lat, N).values
    ly = loop_flow_y(lat, N).values
    Z = _fiber_sector_sums(
        ch.p, kprime.values % N, lx, ly, lat.plaq_links, lat.plaq_signs, N
    )
    return ExactSpectrum(N=N, L=lat.L, sector_weights=Z, total_weight=float(Z.sum()))


def enumerate_sector_weights(kprime: FlowField, ch: ChannelParams) -> np.ndarray:
    """Exact P[a|e] as an (N, N) array indexed by (a1, a2)."""
    return exact_spectrum(kprime, ch).sector_probabilities


def enumerate_defect_ratio(
    kprime: FlowField, ch: ChannelParams, x: int, y: int, q: int = 1
) -> float:
    """Exact Z[e + e_xy] / Z[e] for charge insertions +q at y and -q at x.

    The inserted syndrome is realized by adding a charge-q path from y to x
    to the reference flow; the ratio of fiber totals is path-independent.
    """
    if x == y:
        raise ValueError("defect insertions need two distinct vertices")
    if not 1 <= q <= ch.N - 1:
        raise ValueError(f"charge must lie in 1..{ch.N - 1}, got {q}")
    base = exact_spectrum(kprime, ch)
    shifted = kprime.copy()
    shifted.values = (shifted.values + path_flow(kprime.lat, ch.N, y, x, q).values) % ch.N
    inserted = exact_spectrum(shifted, ch)
    return inserted.total_weight / base.total_weight


def enumerate_marginal_entropy(
    ch: ChannelParams,
    lat: TorusLattice,
    vertices,
    aggregate=None,
    max_elements: int = 1 << 25,
) -> float:
    """Shannon entropy of the syndrome restricted to `vertices`, optionally
    joint with the total charge of the disjoint `aggregate` vertex set.

    The distribution is built by convolving one link at a time: a link's
    charge k adds +k at its tail axis and -k at its head axis, and shifts the
    aggregate axis by its net contribution.  Links touching neither set are
    already marginalized and are skipped.
    """
    N = ch.N
    vertices = [int(v) for v in np.atleast_1d(np.asarray(vertices, dtype=np.int64))]
    if len(set(vertices)) != len(vertices):
        raise ValueError("tracked vertices must be distinct")
    axis_of = {v: i for i, v in enumerate(vertices)}
    m = len(vertices)
    agg_axis = None
    agg_set: set[int] = set()
    if aggregate is not None:
        agg_set = {int(v) for v in np.atleast_1d(np.asarray(aggregate, dtype=np.int64))}
        if agg_set & set(vertices):
            raise ValueError("aggregate set must be disjoint from tracked vertices")
        agg_axis = m
        m += 1
    if m == 0:
        return 0.0
    if N**m > max_elements:
        raise CapacityError(
            f"marginal needs {N}^{m} table entries, above the cap of {max_elements}"
        )
    if m > 32:
        raise CapacityError("marginal needs more than 32 array axes")

    dist = np.zeros((N,) * m)
    dist[(0,) * m] = 1.0
    for mu in range(lat.link_count):
        tail = int(lat.link_tail[mu])
        head = int(lat.link_head[mu])
        coeff: dict[int, int] = {}
        if tail in axis_of:
            coeff[axis_of[tail]] = coeff.get(axis_of[tail], 0) + 1
        if head in axis_of:
            coeff[axis_of[head]] = coeff.get(axis_of[head], 0) - 1
        agg_c = (1 if tail in agg_set else 0) - (1 if head in agg_set else 0)
        if agg_c:
            coeff[agg_axis] = agg_c
        coeff = {ax: c for ax, c in coeff.items() if c % N}
        if not coeff:
            continue
        new = ch.p[0] * dist
        for k in range(1, N):
            shifted = dist
            for ax, c in coeff.items():
                shifted = np.roll(shifted, (c * k) % N, axis=ax)
            new += ch.p[k] * shifted
        dist = new
    flat = dist.ravel()
    norm = _kahan_sum(flat)
    if abs(norm - 1.0) > 1e-9:
        raise RuntimeError(f"marginal distribution sums to {norm!r}, expected 1")
    return float(_neg_entropy(flat))


def _composite_interiors(lat: TorusLattice, A: Region, B: Region, C: Region):
    """Interior vertex sets of the composite regions AB, B, BC, ABC.

    Composites are re-derived from the radii: the interior of the union disc
    includes the shared boundary circles that the component interiors omit.
    """
    if A.kind != "disc" or B.kind != "annulus" or C.kind != "annulus":
        raise ValueError("expected a disc A and annuli B, C")
    if not (A.center == B.center == C.center):
        raise ValueError("regions must be concentric")
    if A.r_outer != B.r_inner or B.r_outer != C.r_inner:
        raise ValueError("regions must share boundary circles")
    d = np.array([lat.chebyshev(v, A.center) for v in range(lat.vertex_count)])
    r_a, r_b, r_c = A.r_outer, B.r_outer, C.r_outer
    int_ab = np.flatnonzero(d <= r_b - 1)
    int_b = np.flatnonzero((d >= r_a + 1) & (d <= r_b - 1))
    int_bc = np.flatnonzero((d >= r_a + 1) & (d <= r_c - 1))
    int_abc = np.flatnonzero(d <= r_c - 1)
    return int_ab, int_b, int_bc, int_abc


def enumerate_cmi(
    ch: ChannelParams,
    lat: TorusLattice,
    A: Region,
    B: Region,
    C: Region,
    max_elements: int = 1 << 25,
) -> float:
    """Exact conditional mutual information I(A:C|B) of the syndrome field.

    I = H(e_AB) + H(e_BC, E_A) - H(e_B, E_A) - H(e_ABC), with E_A the total
    charge inside A.  The combination is nonnegative because (e_B, E_A) is a
    function of e_AB; tiny negative values are floating-point roundoff.
    """
    int_ab, int_b, int_bc, int_abc = _composite_interiors(lat, A, B, C)
    h_ab = enumerate_marginal_entropy(ch, lat, int_ab, max_elements=max_elements)
    h_bc = enumerate_marginal_entropy(
        ch, lat, int_bc, aggregate=A.interior, max_elements=max_elements
    )
    h_b = enumerate_marginal_entropy(
        ch, lat, int_b, aggregate=A.interior, max_elements=max_elements
    )
    h_abc = enumerate_marginal_entropy(ch, lat, int_abc, max_elements=max_elements)
    return h_ab + h_bc - h_b - h_abc
