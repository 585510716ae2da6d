"""Wilson-loop and defect-pair (Renyi-1) correlators.

Both are disorder averages of square-rooted ratio estimators: the square
root is taken per realization after the Monte Carlo ratio has converged, so
small-sample bias enters before the disorder average.  fit_decay_models
discriminates exponential from power-law decay on the resulting profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from . import streams, worm
from .channel import ChannelParams
from .diagnostics import DisorderAverage, FitError
from .flows import sample_reference_flow
from .lattice import TorusLattice


def wilson_loop(
    ch: ChannelParams,
    lat: TorusLattice,
    q: int,
    realizations: int,
    sweeps: int,
    seed: int = 0,
    burn_in: int | None = None,
) -> DisorderAverage:
    """[sqrt(P[(q,0)|e] / P[(0,0)|e])] over disorder realizations.

    A rare realization gives the trivial sector so little weight that one
    chain never revisits it; further independent chains are pooled into the
    histogram until it can be normalized.  The retry pattern depends only on
    the sector counts, which the chain seed stream keeps identical across q,
    so same-seed calls stay paired realization by realization.
    """
    if not 1 <= q <= ch.N - 1:
        raise ValueError(f"charge must lie in 1..{ch.N - 1}, got {q}")
    values = np.empty(realizations)
    warn_count = 0
    for i in range(realizations):
        kp = sample_reference_flow(ch, lat, streams.stream_seed(seed, "disorder", i))
        counts = np.zeros((ch.N, ch.N))
        warned = False
        for attempt in range(4):
            chain_seed = (
                streams.stream_seed(seed, "chain", i)
                if attempt == 0
                else streams.stream_seed(seed, "chain", i, attempt)
            )
            est = worm.estimate_sector_distribution(
                kp, ch, sweeps, burn_in=burn_in, seed=chain_seed
            )
            warned = warned or bool(est.warnings)
            counts += est.counts
            if counts[0, 0] > 0:
                break
        warn_count += warned or attempt > 0
        p00 = counts[0, 0]
        if p00 == 0:
            raise worm.EstimationError(
                "trivial sector unvisited by any pooled chain; cannot "
                "normalize the Wilson ratio"
            )
        values[i] = math.sqrt(counts[q, 0] / p00)
    return DisorderAverage.from_values(
        "wilson_loop",
        values,
        metadata={
            "N": ch.N,
            "L": lat.L,
            "T": ch.T,
            "q": q,
            "sweeps": sweeps,
            "seed": seed,
            "ergodicity_warnings": warn_count,
        },
    )


def renyi1_profile(
    ch: ChannelParams,
    lat: TorusLattice,
    x: int,
    separations,
    q: int = 1,
    realizations: int = 10,
    sweeps: int = 10_000,
    seed: int = 0,
    burn_in: int | None = None,
    min_open: int = 20,
) -> dict[int, DisorderAverage]:
    """R1 at several separations along +x from tail x, one chain per realization.

    Separations index heads y = x + r * x_hat on the torus.  Realizations
    whose open-worm tally at a head falls below `min_open` are kept but
    counted in the low_statistics_fraction metadata, since the square root
    of a noisy ratio is biased.
    """
    separations = [int(r) for r in separations]
    L = lat.L
    x0, y0 = x % L, (x // L) % L
    heads = {r: y0 * L + (x0 + r) % L for r in separations}
    for r, y in heads.items():
        if y == x:
            raise ValueError(f"separation {r} wraps onto the tail vertex")
    per_r: dict[int, list[float]] = {r: [] for r in separations}
    low_stats = {r: 0 for r in separations}
    for i in range(realizations):
        kp = sample_reference_flow(ch, lat, streams.stream_seed(seed, "disorder", i))
        profile = worm.estimate_defect_profile(
            kp, ch, x, q, sweeps, burn_in=burn_in,
            seed=streams.stream_seed(seed, "chain", i),
        )
        for r, y in heads.items():
            per_r[r].append(math.sqrt(profile.ratios[y]))
            if profile.counts[y] < min_open:
                low_stats[r] += 1
    return {
        r: DisorderAverage.from_values(
            "renyi1",
            per_r[r],
            metadata={
                "N": ch.N,
                "L": lat.L,
                "T": ch.T,
                "q": q,
                "r": r,
                "sweeps": sweeps,
                "seed": seed,
                "low_statistics_fraction": low_stats[r] / realizations,
            },
        )
        for r in separations
    }


def renyi1_correlator(
    ch: ChannelParams,
    lat: TorusLattice,
    x: int,
    y: int,
    realizations: int,
    sweeps: int,
    seed: int = 0,
    q: int = 1,
    burn_in: int | None = None,
    min_open: int = 20,
) -> DisorderAverage:
    """[sqrt(Z[e + e_xy]/Z[e])] between two fixed vertices."""
    if x == y:
        raise ValueError("correlator endpoints must differ")
    values = np.empty(realizations)
    low_stats = 0
    for i in range(realizations):
        kp = sample_reference_flow(ch, lat, streams.stream_seed(seed, "disorder", i))
        est = worm.estimate_defect_ratio(
            kp, ch, x, y, q, sweeps, burn_in=burn_in,
            seed=streams.stream_seed(seed, "chain", i),
        )
        values[i] = math.sqrt(est.ratio)
        if est.open_count < min_open:
            low_stats += 1
    return DisorderAverage.from_values(
        "renyi1",
        values,
        metadata={
            "N": ch.N,
            "L": lat.L,
            "T": ch.T,
            "q": q,
            "x": x,
            "y": y,
            "sweeps": sweeps,
            "seed": seed,
            "low_statistics_fraction": low_stats / realizations,
        },
    )


@dataclass
class DecayFit:
    """Exponential vs power-law comparison on one decay profile."""

    alpha: float            # exponential rate in A exp(-alpha r)
    eta: float              # power-law exponent in B r^-eta
    aic_exponential: float
    aic_power: float
    preferred: str          # "exponential" | "power"
    chi2_exponential: float
    chi2_power: float


def fit_decay_models(r, values, errors=None) -> DecayFit:
    """Fit A e^{-alpha r} and B r^{-eta} in linear space and compare by AIC.

    Errors get a floor of 5% of the largest value so zero-variance points
    cannot dominate; both models have two parameters, so the AIC difference
    reduces to the chi-square difference while staying reported as AIC.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(values, dtype=float)
    if r.size != y.size or r.size < 3:
        raise FitError("need at least three separations to compare decay models")
    if np.any(r <= 0):
        raise FitError("separations must be positive")
    if not np.any(y > 0):
        raise FitError("all correlator values are zero; nothing to fit")
    if errors is None:
        sigma = np.full_like(y, 0.05 * max(y.max(), 1e-12))
    else:
        sigma = np.asarray(errors, dtype=float).copy()
    floor = 0.05 * max(y.max(), 1e-12)
    sigma = np.where(np.isfinite(sigma) & (sigma > floor), sigma, floor)

    # initial guesses from the first and last positive points; a zero tail
    # would otherwise send the rate estimates to infinity
    pos = np.flatnonzero(y > 0)
    y0 = y[pos[0]]
    r0, r1 = r[pos[0]], r[pos[-1]]
    y1 = y[pos[-1]]
    span = r1 - r0
    alpha0 = min(max(math.log(y0 / y1) / span, 1e-3), 10.0) if span > 0 else 1.0
    eta0 = min(max(math.log(y0 / y1) / math.log(r1 / r0), 1e-3), 20.0) if span > 0 else 1.0

    def expo(rr, A, alpha):
        return A * np.exp(-alpha * rr)

    def power(rr, B, eta):
        return B * rr ** (-eta)

    # a zero tail leaves (amplitude, rate) jointly unidentifiable along a flat
    # valley, so both parameters get finite caps for the solver to settle on
    amp_cap = 1e4 * float(y.max())
    fits = {}
    for name, fn, p0, rate_cap in (
        ("exponential", expo, (min(y0 * math.exp(alpha0 * r0), amp_cap), alpha0), 30.0),
        ("power", power, (min(y0 * r0**eta0, amp_cap), eta0), 60.0),
    ):
        try:
            popt, _ = curve_fit(fn, r, y, p0=p0, sigma=sigma, absolute_sigma=True,
                                bounds=([0.0, 0.0], [amp_cap, rate_cap]),
                                maxfev=20_000)
        except RuntimeError as err:
            raise FitError(f"{name} fit did not converge: {err}") from err
        chi2 = float((((y - fn(r, *popt)) / sigma) ** 2).sum())
        fits[name] = (popt, chi2)
    aic_exp = fits["exponential"][1] + 4.0
    aic_pow = fits["power"][1] + 4.0
    return DecayFit(
        alpha=float(fits["exponential"][0][1]),
        eta=float(fits["power"][0][1]),
        aic_exponential=aic_exp,
        aic_power=aic_pow,
        preferred="exponential" if aic_exp <= aic_pow else "power",
        chi2_exponential=fits["exponential"][1],
        chi2_power=fits["power"][1],
    )
