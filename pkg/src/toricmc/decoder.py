"""Hybrid decoder: exact minimum-|k| integer flow, then worm refinement.

The syndrome is lifted to signed integer supplies, balanced, and routed by
successive shortest augmenting paths with potentials; the per-link cost |k|
is convex, so residual arc costs are always +1 or -1 and optimality is
certified by checking every residual arc against the final potentials.  The
worm stage then estimates the sector posterior on the reduced correction
background and picks the maximum-likelihood homology class.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment

from . import streams, worm
from .channel import ChannelParams
from .flows import (
    FlowField,
    IntFlow,
    SyndromeConfig,
    divergence,
    integer_divergence,
    lift_residues,
    sample_reference_flow,
    symmetric_lift,
    winding,
)
from .lattice import TorusLattice


@dataclass
class DecoderResult:
    k_mcf: IntFlow
    posterior: np.ndarray       # (N, N) sector probabilities on the MCF background
    a_star: tuple[int, int]
    success: bool
    mcf_cost: int
    sweeps: int
    warnings: list[str] = field(default_factory=list)
    timing: dict = field(default_factory=dict)


def balanced_supplies(e: SyndromeConfig) -> np.ndarray:
    """Symmetric lift of the syndrome with the multiple-of-N imbalance fixed.

    The lift can overshoot zero by c*N; re-lifting the |c| largest entries of
    the majority sign to their alternate representative restores balance with
    the least added magnitude.  Ties resolve toward smaller vertex id.
    """
    if int(e.values.sum()) % e.N != 0:
        raise ValueError("syndrome charges must sum to zero mod N")
    b = symmetric_lift(e)
    c = int(b.sum()) // e.N
    if c == 0:
        return b
    sign = 1 if c > 0 else -1
    candidates = np.flatnonzero(sign * b > 0)
    order = candidates[np.lexsort((candidates, -sign * b[candidates]))]
    flip = order[: abs(c)]
    b = b.copy()
    b[flip] -= sign * e.N
    if int(b.sum()) != 0:
        raise RuntimeError("imbalance fix failed to zero the supply sum")
    return b


@njit(cache=True)
def _heap_push(keys, size, key):
    i = size
    keys[i] = key
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, size):
    top = keys[0]
    size -= 1
    keys[0] = keys[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        child = left
        right = left + 1
        if right < size and keys[right] < keys[left]:
            child = right
        if keys[i] <= keys[child]:
            break
        keys[i], keys[child] = keys[child], keys[i]
        i = child
    return top, size


@njit(cache=True)
def _mcf_kernel(supplies, nbr_link, nbr_sign, nbr_vert):
    """Min sum |k| integer flow meeting the supplies; returns (k, potentials).

    Multi-source Dijkstra from all remaining excess vertices to the nearest
    deficit, one unit per augmentation.  Keys pack (distance, vertex) into a
    single int64 so the heap stays a flat array.
    """
    V = supplies.size
    E = 2 * V
    INF = np.int64(1 << 60)
    k = np.zeros(E, dtype=np.int64)
    excess = supplies.copy()
    pi = np.zeros(V, dtype=np.int64)
    dist = np.empty(V, dtype=np.int64)
    final = np.empty(V, dtype=np.bool_)
    prev_vert = np.empty(V, dtype=np.int64)
    prev_dir = np.empty(V, dtype=np.int64)
    heap = np.empty(16 * E + 64, dtype=np.int64)
    remaining = np.int64(0)
    for v in range(V):
        if excess[v] > 0:
            remaining += excess[v]
    while remaining > 0:
        for v in range(V):
            dist[v] = INF
            final[v] = False
            prev_vert[v] = -1
            prev_dir[v] = -1
        hsize = 0
        for v in range(V):
            if excess[v] > 0:
                dist[v] = 0
                hsize = _heap_push(heap, hsize, np.int64(v))
        target = np.int64(-1)
        target_dist = INF
        while hsize > 0:
            key, hsize = _heap_pop(heap, hsize)
            d = key >> 20
            v = key & ((1 << 20) - 1)
            if final[v] or d > dist[v]:
                continue
            final[v] = True
            if excess[v] < 0:
                target = v
                target_dist = d
                break
            for direction in range(4):
                mu = nbr_link[v, direction]
                delta = nbr_sign[v, direction]
                w = nbr_vert[v, direction]
                if final[w]:
                    continue
                cost = 1 if k[mu] * delta >= 0 else -1
                nd = d + cost + pi[v] - pi[w]
                if nd < dist[w]:
                    dist[w] = nd
                    prev_vert[w] = v
                    prev_dir[w] = direction
                    hsize = _heap_push(heap, hsize, (nd << 20) | w)
        if target < 0:
            raise RuntimeError("no augmenting path despite remaining excess")
        for v in range(V):
            pi[v] += dist[v] if dist[v] < target_dist else target_dist
        v = target
        while prev_vert[v] >= 0:
            u = prev_vert[v]
            direction = prev_dir[v]
            mu = nbr_link[u, direction]
            k[mu] += nbr_sign[u, direction]
            v = u
        excess[v] -= 1
        excess[target] += 1
        remaining -= 1
    return k, pi


@njit(cache=True)
def _certify_optimal(k, pi, link_tail, link_head):
    """True iff no residual arc has negative reduced cost under pi."""
    for mu in range(k.size):
        t = link_tail[mu]
        h = link_head[mu]
        fwd = 1 if k[mu] >= 0 else -1
        if fwd + pi[t] - pi[h] < 0:
            return False
        bwd = 1 if k[mu] <= 0 else -1
        if bwd + pi[h] - pi[t] < 0:
            return False
    return True


def min_cost_flow_correction(e: SyndromeConfig, lat: TorusLattice | None = None) -> IntFlow:
    """Integer flow with divergence = balanced lifted supplies, minimal sum |k|."""
    lat = lat if lat is not None else e.lat
    supplies = balanced_supplies(e)
    nbr_link, nbr_sign, nbr_vert = worm._move_tables(lat.L)
    k, pi = _mcf_kernel(supplies, nbr_link, nbr_sign, nbr_vert)
    if not _certify_optimal(k, pi, lat.link_tail, lat.link_head):
        raise RuntimeError("flow solver terminated without an optimality certificate")
    flow = IntFlow(values=k, lat=lat)
    if not np.array_equal(integer_divergence(flow), supplies):
        raise RuntimeError("flow solver violated the supply constraints")
    return flow


def mcf_cost(flow: IntFlow) -> int:
    return int(np.abs(flow.values).sum())


def torus_distance(lat: TorusLattice, v: int, w: int) -> int:
    """Graph distance on the torus (L1 with wrap-around)."""
    xv, yv = lat.vertex_xy(v)
    xw, yw = lat.vertex_xy(w)
    dx = abs(xv - xw)
    dy = abs(yv - yw)
    return min(dx, lat.L - dx) + min(dy, lat.L - dy)


def assignment_cost(supplies: np.ndarray, lat: TorusLattice) -> int:
    """Optimal transport bound computed independently of the flow solver.

    Any integer flow decomposes into unit source-to-sink paths plus cycles,
    so the minimum of sum |k| equals the assignment optimum of unit charges
    over torus distances.  Used as a correctness oracle for the flow kernel.
    """
    sources = np.repeat(np.arange(supplies.size), np.maximum(supplies, 0))
    sinks = np.repeat(np.arange(supplies.size), np.maximum(-supplies, 0))
    if sources.size != sinks.size:
        raise ValueError("supplies must balance")
    if sources.size == 0:
        return 0
    cost = np.empty((sources.size, sinks.size), dtype=np.int64)
    for i, s in enumerate(sources):
        for j, t in enumerate(sinks):
            cost[i, j] = torus_distance(lat, int(s), int(t))
    rows, cols = linear_sum_assignment(cost)
    return int(cost[rows, cols].sum())


def _lift_pair(a1: int, a2: int, N: int) -> tuple[int, int]:
    lifted = lift_residues(np.array([a1, a2]), N)
    return int(lifted[0]), int(lifted[1])


def select_sector(weights: np.ndarray) -> tuple[int, int]:
    """Argmax over sector weights, invariant under positive rescaling.

    Ties break toward the smaller symmetric-range norm |a_sym|, then
    lexicographically on the symmetric representatives; both rules are fixed
    so decode results are reproducible.
    """
    N = weights.shape[0]
    best = None
    for a1 in range(N):
        for a2 in range(N):
            s1, s2 = _lift_pair(a1, a2, N)
            key = (-weights[a1, a2], s1 * s1 + s2 * s2, (s1, s2))
            if best is None or key < best[0]:
                best = (key, (a1, a2))
    return best[1]


def decode_sectors(
    k_mcf: IntFlow,
    ch: ChannelParams,
    sweeps: int,
    seed: int = 0,
    burn_in: int | None = None,
    restarts: int = 2,
) -> tuple[np.ndarray, tuple[int, int], list[str], int]:
    """Sector posterior on the reduced MCF background and its argmax.

    A cold chain can spend a whole short run with the worm open; the run is
    then extended (same chain, deterministic) until at least one closed
    configuration is seen.  A chain whose head is trapped in a disorder
    valley never closes at all, so after the extension ladder the chain is
    rebuilt from scratch on a derived stream, up to `restarts` times.  The
    total sweep count across all chains is reported back.

    A rare disorder landscape traps every chain.  Refinement then has no
    evidence to offer and the decoder keeps the hard-decision answer: a
    posterior concentrated on the trivial relative sector.
    """
    N = ch.N
    background = FlowField(values=k_mcf.values % N, N=N, lat=k_mcf.lat)
    burn = sweeps // 10 if burn_in is None else burn_in
    used = 0
    extensions = 0
    warnings = []
    for attempt in range(restarts + 1):
        chain_seed = seed if attempt == 0 else streams.stream_seed(seed, "restart", attempt)
        state = worm.make_worm_state(background, chain_seed)
        run = worm.run_worm(state, ch, sweeps, burn_in=burn)
        counts = run.hist.sum(axis=0)
        used += sweeps
        while counts.sum() == 0 and extensions < 8 * (attempt + 1):
            run = worm.run_worm(state, ch, sweeps)
            counts += run.hist.sum(axis=0)
            used += sweeps
            extensions += 1
        if counts.sum() > 0:
            break
    total = int(counts.sum())
    if total == 0:
        posterior = np.zeros((N, N))
        posterior[0, 0] = 1.0
        warnings.append(
            f"no closed configurations after {used} sweeps; kept the "
            "hard-decision sector"
        )
        return posterior, (0, 0), warnings, used
    if attempt:
        warnings.append(f"open-trapped refinement chain restarted {attempt} time(s)")
    if extensions:
        warnings.append(
            f"extended refinement {extensions}x before any closed configuration"
        )
    if ch.T is not None and ch.T >= 1.0 and np.any(counts == 0):
        warnings.append("some sectors unvisited on a hot chain")
    posterior = counts / total
    return posterior, select_sector(posterior), warnings, used


def judge_success(
    kprime_truth: FlowField, k_mcf: IntFlow, a_star: tuple[int, int]
) -> bool:
    """Success iff the chosen sector matches the homology of truth - correction."""
    N = kprime_truth.N
    rel = FlowField(
        values=(kprime_truth.values - k_mcf.values) % N, N=N, lat=kprime_truth.lat
    )
    return tuple(winding(rel)) == (a_star[0] % N, a_star[1] % N)


def refine_and_decode(
    k_mcf: IntFlow,
    kprime_truth: FlowField,
    ch: ChannelParams,
    sweeps: int,
    seed: int = 0,
    burn_in: int | None = None,
) -> DecoderResult:
    """Worm refinement then success judgment; truth is read only at the end."""
    t0 = time.perf_counter()
    posterior, a_star, warnings, used = decode_sectors(
        k_mcf, ch, sweeps, seed=seed, burn_in=burn_in
    )
    t1 = time.perf_counter()
    success = judge_success(kprime_truth, k_mcf, a_star)
    return DecoderResult(
        k_mcf=k_mcf,
        posterior=posterior,
        a_star=a_star,
        success=success,
        mcf_cost=mcf_cost(k_mcf),
        sweeps=used,
        warnings=warnings,
        timing={"refine_seconds": t1 - t0},
    )


def wilson_interval(failures: int, trials: int, z: float = 1.0) -> tuple[float, float]:
    """Binomial confidence interval that stays inside [0, 1] at the edges."""
    if trials <= 0:
        raise ValueError("need at least one trial")
    p = failures / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def logical_error_rate(
    ch: ChannelParams,
    lat: TorusLattice,
    trials: int,
    sweeps: int,
    seed: int = 0,
    burn_in: int | None = None,
):
    """Full inject -> syndrome -> decode -> judge cycles; P_logical with errors."""
    from .diagnostics import DisorderAverage

    if trials < 1:
        raise ValueError("need at least one trial")
    failures = np.empty(trials)
    costs = np.empty(trials)
    sweeps_used = np.empty(trials)
    t_start = time.perf_counter()
    for i in range(trials):
        kp = sample_reference_flow(ch, lat, streams.stream_seed(seed, "error", i))
        e = divergence(kp)
        k_mcf = min_cost_flow_correction(e)
        result = refine_and_decode(
            k_mcf, kp, ch, sweeps, seed=streams.stream_seed(seed, "refine", i),
            burn_in=burn_in,
        )
        failures[i] = 0.0 if result.success else 1.0
        costs[i] = result.mcf_cost
        sweeps_used[i] = result.sweeps
    err_low, err_high = wilson_interval(int(failures.sum()), trials)
    result = DisorderAverage.from_values(
        "logical_error_rate",
        failures,
        metadata={
            "N": ch.N,
            "L": lat.L,
            "T": ch.T,
            "p_physical": ch.physical_error_rate,
            "trials": trials,
            "sweeps": sweeps,
            "seed": seed,
            "err_low": err_low,
            "err_high": err_high,
            "mean_mcf_cost": float(costs.mean()),
            "mean_sweeps": float(sweeps_used.mean()),
            "elapsed_seconds": time.perf_counter() - t_start,
        },
    )
    return result
