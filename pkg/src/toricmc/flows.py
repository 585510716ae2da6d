"""Z_N flow algebra on links: divergence, winding, reference flows, lifts.

Flows live on oriented links as residues in {0..N-1}.  The divergence at a
vertex is (outgoing minus incoming) flow mod N; winding numbers are signed
sums across the two canonical cuts.  The integer lift used by the decoder
maps residues to the symmetric range.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np
from numba import njit

from .channel import ChannelParams
from .lattice import TorusLattice
from . import streams


class IntegrityError(Exception):
    """Corrupt or inconsistent snapshot data."""


@dataclass
class FlowField:
    values: np.ndarray  # (2L^2,) int64 residues in {0..N-1}
    N: int
    lat: TorusLattice

    def copy(self) -> "FlowField":
        return FlowField(values=self.values.copy(), N=self.N, lat=self.lat)


@dataclass
class SyndromeConfig:
    values: np.ndarray  # (L^2,) int64 residues in {0..N-1}
    N: int
    lat: TorusLattice


@dataclass
class IntFlow:
    """Signed integer flow used by the decoder; divergence is unreduced."""

    values: np.ndarray  # (2L^2,) int64
    lat: TorusLattice


def make_flow(lat: TorusLattice, N: int, values=None) -> FlowField:
    if values is None:
        values = np.zeros(lat.link_count, dtype=np.int64)
    else:
        values = np.asarray(values, dtype=np.int64) % N
        if values.shape != (lat.link_count,):
            raise ValueError(f"expected {lat.link_count} link values, got {values.shape}")
    return FlowField(values=values, N=int(N), lat=lat)


def divergence(f: FlowField) -> SyndromeConfig:
    """e_v = (sum of flow out of v) - (sum of flow into v) mod N."""
    lat = f.lat
    e = np.zeros(lat.vertex_count, dtype=np.int64)
    np.add.at(e, lat.link_tail, f.values)
    np.subtract.at(e, lat.link_head, f.values)
    return SyndromeConfig(values=e % f.N, N=f.N, lat=lat)


def integer_divergence(k: IntFlow) -> np.ndarray:
    """Unreduced divergence of an integer flow."""
    lat = k.lat
    e = np.zeros(lat.vertex_count, dtype=np.int64)
    np.add.at(e, lat.link_tail, k.values)
    np.subtract.at(e, lat.link_head, k.values)
    return e


def winding(f: FlowField, reference: FlowField | None = None) -> tuple[int, int]:
    """Homology sector (a1, a2) of a divergence-free flow.

    For a flow with nonzero syndrome, pass the stored reference flow of the
    same disorder realization; the sector is then measured relative to it.
    """
    vals = f.values
    if reference is not None:
        vals = (vals - reference.values) % f.N
    else:
        e = divergence(f)
        if np.any(e.values != 0):
            raise ValueError("winding of a non-divergence-free flow needs a reference")
    lat = f.lat
    a1 = int(vals[lat.cut1].sum() % f.N)
    a2 = int(vals[lat.cut2].sum() % f.N)
    return a1, a2


def curl_from_spins(lat: TorusLattice, theta, N: int) -> FlowField:
    """Divergence-free flow theta[plq_plus] - theta[plq_minus] of a plaquette
    spin field; adding it to any flow changes neither divergence nor winding.
    """
    theta = np.asarray(theta, dtype=np.int64)
    if theta.shape != (lat.plaquette_count,):
        raise ValueError(f"expected {lat.plaquette_count} plaquette spins")
    vals = (theta[lat.plq_plus] - theta[lat.plq_minus]) % N
    return FlowField(values=vals, N=int(N), lat=lat)


def loop_flow_x(lat: TorusLattice, N: int, charge: int = 1, row: int = 0) -> FlowField:
    """Non-contractible charge-q loop along a row; winding (q, 0)."""
    vals = np.zeros(lat.link_count, dtype=np.int64)
    for x in range(lat.L):
        vals[2 * (row * lat.L + x)] = charge % N
    return FlowField(values=vals, N=int(N), lat=lat)


def loop_flow_y(lat: TorusLattice, N: int, charge: int = 1, col: int = 0) -> FlowField:
    """Non-contractible charge-q loop along a column; winding (0, q)."""
    vals = np.zeros(lat.link_count, dtype=np.int64)
    for y in range(lat.L):
        vals[2 * (y * lat.L + col) + 1] = charge % N
    return FlowField(values=vals, N=int(N), lat=lat)


def path_flow(lat: TorusLattice, N: int, src: int, dst: int, charge: int = 1) -> FlowField:
    """L-shaped lattice path carrying `charge` from src to dst.

    Divergence is +charge at src and -charge at dst (mod N); which of the two
    wrap directions is taken does not matter for fiber sums, so the path walks
    in +x then +y without minimizing length.
    """
    if src == dst:
        raise ValueError("path endpoints must differ")
    L = lat.L
    vals = np.zeros(lat.link_count, dtype=np.int64)
    sx, sy = lat.vertex_xy(src)
    dx, dy = lat.vertex_xy(dst)
    x = sx
    while x != dx:
        vals[2 * (sy * L + x)] += charge
        x = (x + 1) % L
    y = sy
    while y != dy:
        vals[2 * (y * L + dx) + 1] += charge
        y = (y + 1) % L
    return FlowField(values=vals % N, N=int(N), lat=lat)


@njit(cache=True)
def _sample_links(cdf, n_links, state):
    out = np.empty(n_links, dtype=np.int64)
    for i in range(n_links):
        u = streams.uniform(state)
        k = 0
        while cdf[k] <= u:
            k += 1
        out[i] = k
    return out


def sample_reference_flow(ch: ChannelParams, lat: TorusLattice, seed: int) -> FlowField:
    """Draw each link independently from p; the divergence of the result is
    simultaneously the disorder realization, so sampling k' fixes both the
    reference flow and its syndrome.
    """
    state = streams.init_state(seed)
    cdf = np.cumsum(ch.p)
    cdf[-1] = 1.0 + 1e-12
    vals = _sample_links(cdf, lat.link_count, state)
    return FlowField(values=vals, N=ch.N, lat=lat)


def symmetric_lift(e: SyndromeConfig) -> np.ndarray:
    """Map each residue to its representative of minimal absolute value.

    For even N the tie at N/2 resolves to +N/2.  The integer sum of the
    result can be a nonzero multiple of N; the decoder restores balance.
    """
    return lift_residues(e.values, e.N)


def lift_residues(vals: np.ndarray, N: int) -> np.ndarray:
    vals = np.asarray(vals, dtype=np.int64) % N
    return np.where(vals <= N // 2, vals, vals - N)


_MAGIC = b"ZNFK"
_VERSION = 1
_HEADER = struct.Struct("<4sHIIQQ")  # magic, version, N, L, seed, sweep_count


def save_flow_snapshot(path, f: FlowField, seed: int, sweep_count: int) -> None:
    """Binary snapshot: little-endian header {N, L, seed, sweep-count}, one
    residue byte per link, then a CRC32 trailer."""
    if f.N > 255:
        raise ValueError("snapshot residues are single bytes; N must be <= 255")
    header = _HEADER.pack(_MAGIC, _VERSION, f.N, f.lat.L, seed & (2**64 - 1), sweep_count)
    payload = f.values.astype(np.uint8).tobytes()
    crc = zlib.crc32(header + payload)
    with open(path, "wb") as fh:
        fh.write(header + payload + struct.pack("<I", crc))


def load_flow_snapshot(path, lat: TorusLattice | None = None):
    """Load a snapshot; returns (FlowField, seed, sweep_count).

    Raises IntegrityError on any structural or checksum mismatch.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size + 4:
        raise IntegrityError("snapshot truncated")
    body, trailer = blob[:-4], blob[-4:]
    if zlib.crc32(body) != struct.unpack("<I", trailer)[0]:
        raise IntegrityError("snapshot checksum mismatch")
    magic, version, N, L, seed, sweeps = _HEADER.unpack(body[: _HEADER.size])
    if magic != _MAGIC or version != _VERSION:
        raise IntegrityError("snapshot has wrong magic or version")
    payload = body[_HEADER.size :]
    if len(payload) != 2 * L * L:
        raise IntegrityError("snapshot payload has wrong length")
    if lat is None:
        from .lattice import build_lattice

        lat = build_lattice(L)
    elif lat.L != L:
        raise IntegrityError(f"snapshot is for L={L}, lattice has L={lat.L}")
    vals = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)
    if np.any(vals >= N):
        raise IntegrityError("snapshot residues exceed the modulus")
    return FlowField(values=vals, N=int(N), lat=lat), int(seed), int(sweeps)
