"""Disorder-averaged information measures built on the worm sampler.

Every observable follows the same pattern: draw a disorder realization by
sampling a reference flow (its divergence is the syndrome), estimate the
conditional winding distribution, reduce to a scalar, and aggregate over
realizations with jackknife errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import streams, worm
from .channel import ChannelParams
from .flows import lift_residues, sample_reference_flow
from .lattice import Region, TorusLattice
from .oracle import CapacityError


class FitError(Exception):
    """A least-squares fit lacked the points or spread to be determined."""


@dataclass
class DisorderAverage:
    """Per-realization values of one observable with a jackknife error.

    `mean` is not always the plain average of `values`: block-resampled
    estimators report their full-sample estimate and use the per-block values
    only for the error bar.
    """

    observable: str
    values: np.ndarray
    mean: float
    stderr: float
    count: int
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, observable: str, values, metadata=None) -> "DisorderAverage":
        values = np.asarray(values, dtype=float)
        mean, se = jackknife_mean_se(values)
        return cls(
            observable=observable,
            values=values,
            mean=mean,
            stderr=se,
            count=values.size,
            metadata=metadata or {},
        )


def jackknife_mean_se(values: np.ndarray) -> tuple[float, float]:
    """Delete-one jackknife of the mean; error is NaN below two samples."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return float("nan"), float("nan")
    mean = float(values.mean())
    if n < 2:
        return mean, float("nan")
    loo = (values.sum() - values) / (n - 1)
    se = math.sqrt((n - 1) / n * float(((loo - loo.mean()) ** 2).sum()))
    return mean, se


def entropy_nats(p: np.ndarray) -> float:
    """Shannon entropy of a probability array; zero entries contribute zero."""
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def coherent_information(
    ch: ChannelParams,
    lat: TorusLattice,
    realizations: int,
    sweeps: int,
    seed: int = 0,
    burn_in: int | None = None,
    blocks: int = 16,
    dual: bool = False,
) -> DisorderAverage:
    """I = 2 ln N - [H(a|e)] (- the flux-sector term when `dual` is set).

    Pure X dephasing leaves the flux syndrome deterministic, so the second
    conditional entropy vanishes identically and is skipped.  With `dual`,
    the identical pipeline runs a second, independently seeded pass standing
    in for the dual-lattice flux computation of a symmetric X+Z channel.
    """
    if realizations < 1:
        raise ValueError("need at least one disorder realization")
    two_log_n = 2.0 * math.log(ch.N)
    values = np.empty(realizations)
    warn_count = 0
    for i in range(realizations):
        kp = sample_reference_flow(ch, lat, streams.stream_seed(seed, "disorder", i))
        est = worm.estimate_sector_distribution(
            kp, ch, sweeps, burn_in=burn_in,
            seed=streams.stream_seed(seed, "chain", i), blocks=blocks,
        )
        warn_count += bool(est.warnings)
        value = two_log_n - entropy_nats(est.probabilities)
        if dual:
            kp_d = sample_reference_flow(
                ch, lat, streams.stream_seed(seed, "disorder-dual", i)
            )
            est_d = worm.estimate_sector_distribution(
                kp_d, ch, sweeps, burn_in=burn_in,
                seed=streams.stream_seed(seed, "chain-dual", i), blocks=blocks,
            )
            warn_count += bool(est_d.warnings)
            value -= entropy_nats(est_d.probabilities)
        values[i] = value
    result = DisorderAverage.from_values(
        "coherent_information",
        values,
        metadata={
            "N": ch.N,
            "L": lat.L,
            "T": ch.T,
            "sweeps": sweeps,
            "seed": seed,
            "dual": dual,
            "ergodicity_warnings": warn_count,
        },
    )
    result.metadata["normalized_mean"] = result.mean / two_log_n
    result.metadata["normalized_stderr"] = result.stderr / two_log_n
    return result


def _encode_columns(samples: np.ndarray, N: int) -> np.ndarray:
    """Pack rows of residues into int64 keys (base-N little-endian)."""
    m = samples.shape[1]
    if m == 0:
        return np.zeros(samples.shape[0], dtype=np.int64)
    if N**m > 2**62:
        raise CapacityError("empirical histogram keys overflow int64")
    pows = N ** np.arange(m, dtype=np.int64)
    return samples @ pows


def _miller_madow(keys: np.ndarray) -> float:
    """Plug-in entropy of integer keys plus the (K-1)/2n bias correction."""
    _, counts = np.unique(keys, return_counts=True)
    n = counts.sum()
    h = math.log(n) - float((counts * np.log(counts)).sum()) / n
    return h + (len(counts) - 1) / (2.0 * n)


def cmi_sampled(
    ch: ChannelParams,
    lat: TorusLattice,
    A: Region,
    B: Region,
    C: Region,
    samples: int,
    seed: int = 0,
    interior_cap: int = 14,
    blocks: int = 8,
) -> DisorderAverage:
    """Sampled I(A:C|B) from empirical syndrome histograms.

    Entropies use the Miller-Madow correction and the combination is clipped
    at zero.  `values` holds per-block re-estimates used only for the error
    bar; `mean` is the all-samples estimate.  The interior cap guards against
    regimes where the largest marginal cannot be resolved by counting; callers
    must raise it explicitly for big regions, accepting the bias risk.
    """
    from .oracle import _composite_interiors

    int_ab, int_b, int_bc, int_abc = _composite_interiors(lat, A, B, C)
    if len(int_abc) > interior_cap:
        raise CapacityError(
            f"largest interior has {len(int_abc)} vertices, cap is {interior_cap}"
        )
    if samples < blocks or samples < 2:
        raise ValueError("need at least `blocks` syndrome samples")
    N = ch.N
    rng_seed = streams.stream_seed(seed, "cmi-samples")
    e = _sample_syndromes(ch, lat, samples, rng_seed)

    def estimate(rows: np.ndarray) -> float:
        k_ab = _encode_columns(rows[:, int_ab], N)
        k_abc = _encode_columns(rows[:, int_abc], N)
        e_a = rows[:, A.interior].sum(axis=1) % N
        k_b = _encode_columns(rows[:, int_b], N) * N + e_a
        k_bc = _encode_columns(rows[:, int_bc], N) * N + e_a
        value = (
            _miller_madow(k_ab)
            + _miller_madow(k_bc)
            - _miller_madow(k_b)
            - _miller_madow(k_abc)
        )
        return max(value, 0.0)

    full = estimate(e)
    bounds = np.linspace(0, samples, blocks + 1, dtype=int)
    block_values = [estimate(e[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]
    result = DisorderAverage.from_values(
        "cmi_sampled",
        block_values,
        metadata={
            "N": N,
            "L": lat.L,
            "T": ch.T,
            "samples": samples,
            "seed": seed,
            "radii": (A.r_outer, B.r_outer, C.r_outer),
        },
    )
    result.mean = full
    return result


def _sample_syndromes(
    ch: ChannelParams, lat: TorusLattice, samples: int, seed: int
) -> np.ndarray:
    """(samples, V) array of syndromes from independent link draws."""
    state = streams.init_state(seed)
    cdf = np.cumsum(ch.p)
    cdf[-1] = 1.0 + 1e-12
    from .flows import _sample_links

    e = np.empty((samples, lat.vertex_count), dtype=np.int64)
    for s in range(samples):
        links = _sample_links(cdf, lat.link_count, state)
        row = np.zeros(lat.vertex_count, dtype=np.int64)
        np.add.at(row, lat.link_tail, links)
        np.subtract.at(row, lat.link_head, links)
        e[s] = row % ch.N
    return e


def relative_entropy(
    ch: ChannelParams,
    lat: TorusLattice,
    a: tuple[int, int],
    realizations: int,
    sweeps: int,
    seed: int = 0,
    burn_in: int | None = None,
) -> DisorderAverage:
    """Excess free energy F = sum_b P[b|e] ln(P[b|e]/P[b+a|e]), averaged.

    Realizations where some visited sector b has an unvisited partner b+a are
    infinitely divergent under the plug-in estimate; they are excluded from
    the mean and reported as a flagged fraction.
    """
    a1, a2 = int(a[0]) % ch.N, int(a[1]) % ch.N
    if (a1, a2) == (0, 0):
        raise ValueError("sector offset must be nontrivial")
    finite: list[float] = []
    divergent = 0
    for i in range(realizations):
        kp = sample_reference_flow(ch, lat, streams.stream_seed(seed, "disorder", i))
        est = worm.estimate_sector_distribution(
            kp, ch, sweeps, burn_in=burn_in, seed=streams.stream_seed(seed, "chain", i)
        )
        P = est.probabilities
        shifted = np.roll(np.roll(P, -a1, axis=0), -a2, axis=1)
        support = P > 0
        if np.any(support & (shifted == 0)):
            divergent += 1
            continue
        finite.append(float((P[support] * np.log(P[support] / shifted[support])).sum()))
    result = DisorderAverage.from_values(
        "relative_entropy",
        finite,
        metadata={
            "N": ch.N,
            "L": lat.L,
            "T": ch.T,
            "sector": (a1, a2),
            "sweeps": sweeps,
            "seed": seed,
            "realizations": realizations,
            "divergent_fraction": divergent / realizations,
        },
    )
    return result


@dataclass
class StiffnessFit:
    kappa: float
    r_squared: float
    kappa_se: float
    intercept: float
    points: int


def fit_stiffness(hist, N: int | None = None, min_count: int = 10) -> StiffnessFit:
    """Weighted fit of -ln P(a) against |a_sym|^2 / 2 over well-visited sectors.

    Accepts a SectorEstimate or a raw (N, N) count table.  Weights are the
    sector counts, the right scale for multinomial log-frequency noise.
    """
    if isinstance(hist, worm.SectorEstimate):
        counts = hist.counts
    else:
        counts = np.asarray(hist)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
        raise ValueError("expected a square sector count table")
    n_mod = counts.shape[0] if N is None else int(N)
    total = counts.sum()
    if total <= 0:
        raise FitError("no closed-configuration tallies to fit")
    a = np.arange(n_mod)
    a_sym = lift_residues(a, n_mod)
    x2 = (a_sym[:, None] ** 2 + a_sym[None, :] ** 2) / 2.0
    mask = counts >= min_count
    x = x2[mask]
    y = -np.log(counts[mask] / total)
    w = counts[mask].astype(float)
    if np.unique(x).size < 3:
        raise FitError(
            f"only {np.unique(x).size} distinct |a|^2 values with >= {min_count} counts"
        )
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    sxy = (w * (x - xbar) * (y - ybar)).sum()
    kappa = sxy / sxx
    intercept = ybar - kappa * xbar
    resid = y - (intercept + kappa * x)
    dof = x.size - 2
    chi2 = (w * resid**2).sum()
    kappa_se = math.sqrt(max(chi2 / dof, 0.0) / sxx) if dof > 0 else float("nan")
    ss_tot = (w * (y - ybar) ** 2).sum()
    r_squared = 1.0 - chi2 / ss_tot if ss_tot > 0 else float("nan")
    return StiffnessFit(
        kappa=float(kappa),
        r_squared=float(r_squared),
        kappa_se=float(kappa_se),
        intercept=float(intercept),
        points=int(x.size),
    )
