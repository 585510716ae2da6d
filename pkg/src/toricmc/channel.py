"""Charge-conjugation-symmetric Z_N dephasing channels.

The public constructor builds the single-harmonic cosine family
p_k proportional to exp(cos(2*pi*k/N)/T); arbitrary symmetric distributions
enter through the expert constructor.  Entropies are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq


class ChannelError(ValueError):
    """Invalid channel parameters."""


@dataclass(frozen=True)
class ChannelParams:
    N: int
    T: float | None
    p: np.ndarray
    beta: np.ndarray = field(repr=False, default=None)

    @property
    def physical_error_rate(self) -> float:
        return 1.0 - float(self.p[0])

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.shape != (self.N,):
            raise ChannelError(f"p must have shape ({self.N},), got {p.shape}")
        if np.any(p < 0):
            raise ChannelError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ChannelError("probabilities must sum to 1")
        if not np.allclose(p[1:], p[1:][::-1], rtol=0, atol=1e-12):
            raise ChannelError("charge conjugation requires p_k = p_{N-k}")
        object.__setattr__(self, "p", p)
        if self.beta is None:
            object.__setattr__(self, "beta", _fourier_couplings(p))


def _fourier_couplings(p: np.ndarray) -> np.ndarray:
    """Cosine-series couplings beta of alpha_k = ln p_k.

    For a conjugation-symmetric channel alpha is an even sequence, so
    alpha_k = sum_m beta_m cos(2*pi*k*m/N) exactly.  Zero-probability
    entries make the couplings undefined; an empty array is stored then.
    """
    if np.any(p == 0):
        return np.empty(0)
    alpha = np.log(p)
    beta = np.fft.ifft(alpha)
    return np.real(beta)


def cosine_channel(N: int, T: float) -> ChannelParams:
    """Channel with p_k proportional to exp(cos(2*pi*k/N)/T)."""
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise ChannelError(f"qudit dimension must be an integer >= 2, got {N!r}")
    if not (T > 0):
        raise ChannelError(f"decoherence temperature must be positive, got {T!r}")
    k = np.arange(N)
    logw = np.cos(2.0 * np.pi * k / N) / T
    logw -= logw.max()
    w = np.exp(logw)
    p = w / w.sum()
    # enforce exact conjugation symmetry against rounding
    p[1:] = 0.5 * (p[1:] + p[1:][::-1])
    p /= p.sum()
    return ChannelParams(N=int(N), T=float(T), p=p)


def custom_channel(N: int, p) -> ChannelParams:
    """Expert constructor for an arbitrary conjugation-symmetric distribution."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (int(N),):
        raise ChannelError(f"p must have shape ({N},), got {p.shape}")
    if np.any(p < 0):
        raise ChannelError("probabilities must be nonnegative")
    s = p.sum()
    if not np.isfinite(s) or s <= 0:
        raise ChannelError("probabilities must have a positive finite sum")
    p = p / s
    if not np.allclose(p[1:], p[1:][::-1], rtol=0, atol=1e-9):
        raise ChannelError("charge conjugation requires p_k = p_{N-k}")
    p[1:] = 0.5 * (p[1:] + p[1:][::-1])
    p /= p.sum()
    return ChannelParams(N=int(N), T=None, p=p)


def shannon_entropy(ch: ChannelParams) -> float:
    """H = -sum_k p_k ln p_k in nats; zero terms are dropped."""
    p = ch.p[ch.p > 0]
    return float(-np.sum(p * np.log(p)))


def entropy_at(N: int, T: float) -> float:
    return shannon_entropy(cosine_channel(N, T))


def selfdual_threshold(N: int) -> float:
    """The unique T with ln N = 2 H(T) for the cosine channel.

    H(T) increases monotonically from 0 to ln N, so a bracketing root search
    converges to the unique solution; the residual is verified < 1e-10.
    """
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise ChannelError(f"qudit dimension must be an integer >= 2, got {N!r}")
    target = np.log(N)

    def g(T: float) -> float:
        return 2.0 * entropy_at(N, T) - target

    lo, hi = 1e-3, 1e4
    while g(lo) > 0:
        lo /= 8.0
    tc = brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    if abs(g(tc)) > 1e-10:
        raise RuntimeError(f"root residual {g(tc):.3e} exceeds 1e-10")
    return float(tc)
