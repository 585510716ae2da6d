"""Disorder-averaged observables and their error machinery."""

import math

import numpy as np
import pytest

from toricmc import diagnostics, flows, oracle, worm
from toricmc.channel import cosine_channel
from toricmc.lattice import annular_regions, build_lattice
from toricmc.oracle import CapacityError


def test_jackknife_matches_classic_sem():
    rng = np.random.default_rng(0)
    x = rng.normal(size=40)
    mean, se = diagnostics.jackknife_mean_se(x)
    assert mean == pytest.approx(x.mean())
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size))


def test_jackknife_degenerate_sizes():
    mean, se = diagnostics.jackknife_mean_se(np.array([3.0]))
    assert mean == 3.0 and math.isnan(se)
    mean, se = diagnostics.jackknife_mean_se(np.array([]))
    assert math.isnan(mean) and math.isnan(se)


def test_entropy_nats():
    assert diagnostics.entropy_nats(np.full(8, 0.125)) == pytest.approx(math.log(8))
    assert diagnostics.entropy_nats(np.array([1.0, 0.0, 0.0])) == 0.0


def test_disorder_average_from_values():
    da = diagnostics.DisorderAverage.from_values("obs", [1.0, 2.0, 3.0])
    assert da.count == 3
    assert da.mean == pytest.approx(2.0)
    assert da.stderr == pytest.approx(np.std([1, 2, 3], ddof=1) / math.sqrt(3))


def test_coherent_information_vanishes_at_high_temperature():
    lat = build_lattice(3)
    ch = cosine_channel(2, 200.0)
    da = diagnostics.coherent_information(ch, lat, realizations=5, sweeps=20_000)
    assert abs(da.mean) < 0.02
    assert abs(da.metadata["normalized_mean"]) < 0.02


def test_coherent_information_saturates_at_low_temperature():
    lat = build_lattice(4)
    ch = cosine_channel(2, 0.15)
    da = diagnostics.coherent_information(ch, lat, realizations=6, sweeps=3_000)
    assert da.metadata["normalized_mean"] > 0.99
    assert da.mean == pytest.approx(2 * math.log(2), rel=0.01)


def test_coherent_information_dual_subtracts_second_term():
    lat = build_lattice(3)
    ch = cosine_channel(2, 200.0)
    single = diagnostics.coherent_information(ch, lat, realizations=3, sweeps=5_000)
    double = diagnostics.coherent_information(
        ch, lat, realizations=3, sweeps=5_000, dual=True
    )
    # each hot-chain entropy is ~ln 4, so the dual variant sits ~2 ln 2 lower
    assert double.mean < single.mean - 1.0
    with pytest.raises(ValueError):
        diagnostics.coherent_information(ch, lat, realizations=0, sweeps=10)


def test_sampled_cmi_matches_enumeration_in_dilute_regime():
    lat = build_lattice(6)
    A, B, C = annular_regions(lat, 1, 2, 3)
    ch = cosine_channel(2, 0.3)
    exact = oracle.enumerate_cmi(ch, lat, A, B, C)
    da = diagnostics.cmi_sampled(ch, lat, A, B, C, 60_000, seed=0, interior_cap=25)
    assert abs(da.mean - exact) < 0.015
    assert da.stderr < 0.01


def test_sampled_cmi_interior_cap():
    lat = build_lattice(6)
    A, B, C = annular_regions(lat, 1, 2, 3)
    ch = cosine_channel(2, 0.3)
    with pytest.raises(CapacityError):
        diagnostics.cmi_sampled(ch, lat, A, B, C, 1_000)  # default cap is 14 < 25
    with pytest.raises(ValueError):
        diagnostics.cmi_sampled(ch, lat, A, B, C, 4, blocks=8, interior_cap=25)


def test_relative_entropy_vanishes_at_high_temperature():
    lat = build_lattice(3)
    ch = cosine_channel(2, 200.0)
    da = diagnostics.relative_entropy(ch, lat, (1, 0), realizations=5, sweeps=20_000)
    assert da.metadata["divergent_fraction"] == 0.0
    assert abs(da.mean) < 0.02


def test_relative_entropy_diverges_when_frozen():
    lat = build_lattice(4)
    ch = cosine_channel(2, 0.15)
    da = diagnostics.relative_entropy(ch, lat, (1, 0), realizations=4, sweeps=3_000)
    assert da.metadata["divergent_fraction"] == 1.0
    assert da.count == 0
    with pytest.raises(ValueError):
        diagnostics.relative_entropy(ch, lat, (0, 0), realizations=1, sweeps=10)


def _gaussian_counts(N, kappa, scale=10**7):
    from toricmc.flows import lift_residues

    a = lift_residues(np.arange(N), N)
    x2 = (a[:, None] ** 2 + a[None, :] ** 2) / 2.0
    return np.rint(scale * np.exp(-kappa * x2)).astype(np.int64)


def test_fit_stiffness_recovers_synthetic_slope():
    counts = _gaussian_counts(8, kappa=2.0)
    fit = diagnostics.fit_stiffness(counts)
    assert fit.kappa == pytest.approx(2.0, abs=1e-4)
    assert fit.r_squared > 0.9999
    assert fit.intercept == pytest.approx(math.log(counts.sum() / 10**7), abs=1e-3)


def test_fit_stiffness_accepts_sector_estimate():
    lat = build_lattice(3)
    ch = cosine_channel(4, 0.6)
    kp = flows.make_flow(lat, 4)
    est = worm.estimate_sector_distribution(kp, ch, 100_000, seed=8)
    fit_a = diagnostics.fit_stiffness(est)
    fit_b = diagnostics.fit_stiffness(est.counts)
    assert fit_a.kappa == fit_b.kappa
    assert fit_a.kappa > 0


def test_fit_stiffness_failure_modes():
    with pytest.raises(diagnostics.FitError):
        diagnostics.fit_stiffness(np.zeros((4, 4), dtype=np.int64))
    lopsided = np.array([[10**6, 3], [3, 3]], dtype=np.int64)
    with pytest.raises(diagnostics.FitError):
        diagnostics.fit_stiffness(lopsided)
    with pytest.raises(ValueError):
        diagnostics.fit_stiffness(np.zeros((2, 3), dtype=np.int64))
