"""Worm-algorithm sampler over divergence-free fluctuations on a quenched
background flow.

The chain runs in an extended ensemble: closed configurations carry the
physical weight, open configurations (worm head/tail defect pair) carry an
extra factor eta = 5 / (V (N-1)).  With that factor, opening at a uniformly
drawn (vertex, charge) and closing when head meets tail are both accepted
with probability one, and the five open-state proposals (four head moves,
one close attempt) are drawn uniformly.  Head moves are Metropolis steps on
the single-link weight ratio.  Detailed balance fixes every estimator
normalization used below.

Winding sectors are tallied on closed configurations; defect (two-point)
statistics are tallied on open configurations with a selected tail and
charge.  Both are measured after every elementary move.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from . import streams
from .channel import ChannelParams
from .flows import FlowField
from .lattice import TorusLattice, cached_lattice


class EstimationError(Exception):
    """An estimator could not be formed from the collected statistics."""


@dataclass
class WormState:
    """Resumable sampler state.  head/tail are -1 when the worm is closed."""

    kprime: FlowField
    l: np.ndarray
    head: int
    tail: int
    charge: int
    rng_state: np.ndarray
    sweeps_done: int = 0

    @property
    def closed(self) -> bool:
        return self.head < 0

    def total_flow(self) -> FlowField:
        return FlowField(
            values=(self.kprime.values + self.l) % self.kprime.N,
            N=self.kprime.N,
            lat=self.kprime.lat,
        )


@dataclass
class WormRun:
    """Raw tallies from one kernel invocation."""

    hist: np.ndarray            # (blocks, N, N) closed-configuration sector tallies
    closed_counts: np.ndarray   # (blocks,)
    endpoint_counts: np.ndarray | None  # (blocks, V) tallies at the selected tail/charge
    accepted: int
    proposed: int
    steps: int
    log: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    id_counts: np.ndarray | None = None  # closed-configuration tallies, tiny systems

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else 1.0


@dataclass
class SectorEstimate:
    """Normalized winding-sector distribution with blocking information."""

    counts: np.ndarray          # (N, N) total closed tallies per sector
    total_closed: int
    probabilities: np.ndarray   # (N, N)
    block_counts: np.ndarray    # (blocks, N, N)
    block_closed: np.ndarray    # (blocks,)
    acceptance: float
    sweeps: int
    warnings: list[str] = field(default_factory=list)


@dataclass
class DefectEstimate:
    ratio: float
    open_count: int
    closed_count: int
    acceptance: float


@dataclass
class DefectProfile:
    """Partition-function ratios for one tail against every head vertex.

    ratios[y] estimates Z[e + e_xy]/Z[e]; the entry at the tail itself is a
    closed-fiber ratio and carries no defect insertion.
    """

    tail: int
    charge: int
    ratios: np.ndarray
    counts: np.ndarray
    closed_count: int
    acceptance: float


@lru_cache(maxsize=32)
def _move_tables(L: int):
    """(vertex, direction) -> crossed link, orientation sign, neighbor vertex.

    sign +1 means the current head is the tail of the crossed link.  On L=2
    the two directions along an axis reach the same neighbor through the two
    distinct parallel links, which is exactly the multigraph the torus is.
    """
    lat = cached_lattice(L)
    V = lat.vertex_count
    nbr_link = np.empty((V, 4), dtype=np.int64)
    nbr_sign = np.empty((V, 4), dtype=np.int64)
    nbr_vert = np.empty((V, 4), dtype=np.int64)
    for v in range(V):
        x, y = v % L, v // L
        east, west = (x + 1) % L, (x - 1) % L
        north, south = (y + 1) % L, (y - 1) % L
        nbr_link[v] = (
            2 * (y * L + x),
            2 * (y * L + west),
            2 * (y * L + x) + 1,
            2 * (south * L + x) + 1,
        )
        nbr_sign[v] = (1, -1, 1, -1)
        nbr_vert[v] = (y * L + east, y * L + west, north * L + x, south * L + x)
    return nbr_link, nbr_sign, nbr_vert


@njit(cache=True)
def _worm_kernel(
    kp,
    l,
    head,
    tail,
    charge,
    s1,
    s2,
    state,
    steps,
    measure_from,
    block_steps,
    ratio,
    nbr_link,
    nbr_sign,
    nbr_vert,
    cut1_mask,
    cut2_mask,
    N,
    hist,
    closed_counts,
    endpoint_counts,
    t0,
    q0,
    id_counts,
    id_pows,
    log_types,
    log_a,
    log_b,
):
    V = nbr_link.shape[0]
    accepted = 0
    proposed = 0
    logging = log_types.size > 0
    tracking = id_counts.size > 0
    cur_id = 0
    if tracking:
        for mu in range(l.size):
            cur_id += l[mu] * id_pows[mu]
    for step in range(steps):
        if head < 0:
            v = streams.randbelow(state, V)
            q = 1 + streams.randbelow(state, N - 1)
            head = v
            tail = v
            charge = q
            if logging:
                log_types[step] = 1
                log_a[step] = v
                log_b[step] = q
        else:
            r = streams.randbelow(state, 5)
            if r == 4:
                if head == tail:
                    if logging:
                        log_types[step] = 3
                        log_a[step] = head
                        log_b[step] = charge
                    head = -1
                    tail = -1
                    charge = 0
                elif logging:
                    log_types[step] = 0
            else:
                mu = nbr_link[head, r]
                sgn = nbr_sign[head, r]
                old_l = l[mu]
                new_l = (old_l - sgn * charge) % N
                old_v = (kp[mu] + old_l) % N
                new_v = (kp[mu] + new_l) % N
                a = ratio[new_v, old_v]
                proposed += 1
                if a >= 1.0 or streams.uniform(state) < a:
                    accepted += 1
                    delta = new_l - old_l
                    l[mu] = new_l
                    s1 += delta * cut1_mask[mu]
                    s2 += delta * cut2_mask[mu]
                    if tracking:
                        cur_id += delta * id_pows[mu]
                    head = nbr_vert[head, r]
                    if logging:
                        log_types[step] = 2
                        log_a[step] = mu
                        log_b[step] = delta
                elif logging:
                    log_types[step] = 0
        if step >= measure_from:
            blk = (step - measure_from) // block_steps
            if head < 0:
                closed_counts[blk] += 1
                hist[blk, s1 % N, s2 % N] += 1
                if tracking:
                    id_counts[cur_id] += 1
            elif t0 >= 0 and tail == t0 and charge == q0:
                endpoint_counts[blk, head] += 1
    return head, tail, charge, s1, s2, accepted, proposed


@njit(cache=True)
def _replay_kernel(l, head, tail, charge, s1, s2, N, cut1_mask, cut2_mask,
                   link_tail, link_head, log_types, log_a, log_b, inverse):
    """Deterministic re-application of a move log, forward or reversed.

    A head move only records the crossed link: the landing vertex is always
    the link endpoint the head is not currently on, in either direction.
    """
    n = log_types.size
    for i in range(n):
        step = n - 1 - i if inverse else i
        t = log_types[step]
        if t == 0:
            continue
        if t == 1:  # open (inverse: close)
            if inverse:
                head, tail, charge = -1, -1, 0
            else:
                head = log_a[step]
                tail = log_a[step]
                charge = log_b[step]
        elif t == 3:  # close (inverse: reopen)
            if inverse:
                head = log_a[step]
                tail = log_a[step]
                charge = log_b[step]
            else:
                head, tail, charge = -1, -1, 0
        else:  # head move across link log_a by residue delta log_b
            mu = log_a[step]
            delta = -log_b[step] if inverse else log_b[step]
            l[mu] = (l[mu] + delta) % N
            s1 += delta * cut1_mask[mu]
            s2 += delta * cut2_mask[mu]
            head = link_tail[mu] + link_head[mu] - head
    return head, tail, charge, s1, s2


def make_worm_state(kprime: FlowField, seed: int) -> WormState:
    """Closed state with zero fluctuation and a fresh stream."""
    return WormState(
        kprime=kprime,
        l=np.zeros(kprime.lat.link_count, dtype=np.int64),
        head=-1,
        tail=-1,
        charge=0,
        rng_state=streams.init_state(seed),
        sweeps_done=0,
    )


def run_worm(
    state: WormState,
    ch: ChannelParams,
    sweeps: int,
    burn_in: int = 0,
    blocks: int = 16,
    endpoint: tuple[int, int] | None = None,
    log_moves: bool = False,
    track_ids: bool = False,
) -> WormRun:
    """Advance the chain by (burn_in + sweeps) sweeps, measuring after each
    elementary move of the measured span.  One sweep is link_count moves.
    """
    lat = state.kprime.lat
    N = ch.N
    if state.kprime.N != N:
        raise ValueError("background flow and channel have different moduli")
    if sweeps < 1:
        raise ValueError("need at least one measured sweep")
    mps = lat.link_count
    steps = (burn_in + sweeps) * mps
    measure_from = burn_in * mps
    measured = steps - measure_from
    blocks = max(1, min(blocks, measured))
    block_steps = -(-measured // blocks)

    nbr_link, nbr_sign, nbr_vert = _move_tables(lat.L)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = ch.p[:, None] / ch.p[None, :]
    ratio = np.nan_to_num(ratio, nan=0.0, posinf=np.inf)

    hist = np.zeros((blocks, N, N), dtype=np.int64)
    closed_counts = np.zeros(blocks, dtype=np.int64)
    if endpoint is not None:
        t0, q0 = int(endpoint[0]), int(endpoint[1])
        if not 0 <= t0 < lat.vertex_count:
            raise ValueError(f"tail vertex {t0} outside the lattice")
        if not 1 <= q0 <= N - 1:
            raise ValueError(f"worm charge must lie in 1..{N - 1}, got {q0}")
        endpoint_counts = np.zeros((blocks, lat.vertex_count), dtype=np.int64)
    else:
        t0, q0 = -1, 0
        endpoint_counts = np.zeros((blocks, 0), dtype=np.int64)
    if track_ids:
        if N**mps > 10**8:
            raise ValueError("configuration tracking only fits tiny systems")
        id_pows = N ** np.arange(mps, dtype=np.int64)
        id_counts = np.zeros(N**mps, dtype=np.int64)
    else:
        id_pows = np.zeros(0, dtype=np.int64)
        id_counts = np.zeros(0, dtype=np.int64)
    if log_moves:
        log_types = np.zeros(steps, dtype=np.int8)
        log_a = np.zeros(steps, dtype=np.int64)
        log_b = np.zeros(steps, dtype=np.int64)
    else:
        log_types = np.zeros(0, dtype=np.int8)
        log_a = np.zeros(0, dtype=np.int64)
        log_b = np.zeros(0, dtype=np.int64)

    s1 = int((state.l[lat.cut1]).sum())
    s2 = int((state.l[lat.cut2]).sum())
    head, tail, charge, s1, s2, accepted, proposed = _worm_kernel(
        state.kprime.values,
        state.l,
        state.head,
        state.tail,
        state.charge,
        s1,
        s2,
        state.rng_state,
        steps,
        measure_from,
        block_steps,
        ratio,
        nbr_link,
        nbr_sign,
        nbr_vert,
        lat.cut1_mask.astype(np.int64),
        lat.cut2_mask.astype(np.int64),
        N,
        hist,
        closed_counts,
        endpoint_counts,
        t0,
        q0,
        id_counts,
        id_pows,
        log_types,
        log_a,
        log_b,
    )
    state.head, state.tail, state.charge = int(head), int(tail), int(charge)
    state.sweeps_done += burn_in + sweeps
    run = WormRun(
        hist=hist,
        closed_counts=closed_counts,
        endpoint_counts=endpoint_counts if endpoint is not None else None,
        accepted=int(accepted),
        proposed=int(proposed),
        steps=steps,
    )
    if log_moves:
        run.log = (log_types, log_a, log_b)
    if track_ids:
        run.id_counts = id_counts
    return run


def estimate_sector_distribution(
    kprime: FlowField,
    ch: ChannelParams,
    sweeps: int,
    burn_in: int | None = None,
    seed: int = 0,
    blocks: int = 16,
    ergodicity_floor: float = 1.0,
    restarts: int = 3,
) -> SectorEstimate:
    """P[a|e] from closed-configuration winding tallies.

    Sector labels are relative to kprime, so they index the fluctuation's
    homology class.  A sector with zero visits is only suspicious when the
    channel is hot enough that every sector carries real weight; below the
    floor the zeros are physical suppression, not an ergodicity failure.

    A rare chain traps its head in a disorder valley and never revisits a
    closed configuration; such a run yields no tallies at all and is retried
    from scratch with a derived stream, up to `restarts` times.
    """
    if burn_in is None:
        burn_in = sweeps // 10
    warnings = []
    for attempt in range(restarts + 1):
        chain_seed = seed if attempt == 0 else streams.stream_seed(seed, "restart", attempt)
        state = make_worm_state(kprime, chain_seed)
        run = run_worm(state, ch, sweeps, burn_in=burn_in, blocks=blocks)
        counts = run.hist.sum(axis=0)
        total = int(counts.sum())
        if total > 0:
            break
    if total == 0:
        raise EstimationError(
            f"no closed configurations were visited in {restarts + 1} chains"
        )
    if attempt:
        warnings.append(f"open-trapped chain restarted {attempt} time(s)")
    if ch.T is not None and ch.T >= ergodicity_floor and np.any(counts == 0):
        warnings.append(
            f"{int((counts == 0).sum())} of {ch.N**2} sectors unvisited at"
            f" T={ch.T:g}; chain may not have mixed across sectors"
        )
    return SectorEstimate(
        counts=counts,
        total_closed=total,
        probabilities=counts / total,
        block_counts=run.hist,
        block_closed=run.closed_counts,
        acceptance=run.acceptance,
        sweeps=sweeps,
        warnings=warnings,
    )


def _open_weight_factor(lat: TorusLattice, N: int) -> float:
    """1/eta: converts open/closed tally ratios to partition-function ratios."""
    return lat.vertex_count * (N - 1) / 5.0


def estimate_defect_profile(
    kprime: FlowField,
    ch: ChannelParams,
    x: int,
    q: int,
    sweeps: int,
    burn_in: int | None = None,
    seed: int = 0,
) -> DefectProfile:
    """Z[e + e_xy]/Z[e] for tail x against every head y in one chain."""
    if burn_in is None:
        burn_in = sweeps // 10
    state = make_worm_state(kprime, seed)
    run = run_worm(state, ch, sweeps, burn_in=burn_in, blocks=1, endpoint=(x, q))
    closed = int(run.closed_counts.sum())
    if closed == 0:
        raise EstimationError("no closed configurations; cannot normalize the ratio")
    counts = run.endpoint_counts.sum(axis=0)
    factor = _open_weight_factor(kprime.lat, ch.N)
    return DefectProfile(
        tail=x,
        charge=q,
        ratios=counts * factor / closed,
        counts=counts,
        closed_count=closed,
        acceptance=run.acceptance,
    )


def estimate_defect_ratio(
    kprime: FlowField,
    ch: ChannelParams,
    x: int,
    y: int,
    q: int,
    sweeps: int,
    burn_in: int | None = None,
    seed: int = 0,
) -> DefectEstimate:
    """Z[e + e_xy]/Z[e] for charge insertions +q at y and -q at x."""
    if x == y:
        raise ValueError("defect insertions need two distinct vertices")
    profile = estimate_defect_profile(
        kprime, ch, x, q, sweeps, burn_in=burn_in, seed=seed
    )
    return DefectEstimate(
        ratio=float(profile.ratios[y]),
        open_count=int(profile.counts[y]),
        closed_count=profile.closed_count,
        acceptance=profile.acceptance,
    )


def replay_moves(state: WormState, log, inverse: bool = False) -> WormState:
    """Apply a recorded move sequence (or its inverse) to a copy of state.

    Used to verify that the chain's elementary moves are exactly reversible.
    """
    log_types, log_a, log_b = log
    lat = state.kprime.lat
    l = state.l.copy()
    s1 = int(l[lat.cut1].sum())
    s2 = int(l[lat.cut2].sum())
    head, tail, charge, s1, s2 = _replay_kernel(
        l,
        state.head,
        state.tail,
        state.charge,
        s1,
        s2,
        state.kprime.N,
        lat.cut1_mask.astype(np.int64),
        lat.cut2_mask.astype(np.int64),
        lat.link_tail,
        lat.link_head,
        log_types,
        log_a,
        log_b,
        inverse,
    )
    return WormState(
        kprime=state.kprime,
        l=l,
        head=int(head),
        tail=int(tail),
        charge=int(charge),
        rng_state=state.rng_state.copy(),
        sweeps_done=state.sweeps_done,
    )
