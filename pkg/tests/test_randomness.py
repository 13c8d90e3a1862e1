import math

import numpy as np
import pytest
from scipy import special, stats

from relentcode import randomness as rnd
from relentcode.harness import ks_2samp_test, ks_test
from relentcode.randomness import DeterministicStream, new_stream

N = 100_000


def draws(stream, n, fn=rnd.next_uniform):
    return np.array([fn(stream) for _ in range(n)])


def test_same_seed_same_sequence():
    a, b = new_stream(42, 0), new_stream(42, 0)
    assert [a.next_u64() for _ in range(1000)] == [b.next_u64() for _ in range(1000)]


def test_substreams_look_alike():
    a = draws(new_stream(42, 0), 10_000)
    b = draws(new_stream(42, 1), 10_000)
    assert not np.array_equal(a, b)
    assert ks_2samp_test(a, b).passed


def test_distinct_seeds_distinct_first_draw():
    assert rnd.next_uniform(new_stream(42, 0)) != rnd.next_uniform(new_stream(43, 0))


def test_seek_and_fork_replay():
    s = new_stream(7, 3)
    first = [s.next_uniform() for _ in range(10)]
    s.seek(4)
    assert s.next_uniform() == first[4]
    f = s.fork()
    assert f.next_uniform() == s.next_uniform()


def test_rejects_out_of_range_seed():
    with pytest.raises(ValueError):
        DeterministicStream(-1)
    with pytest.raises(ValueError):
        DeterministicStream(0, 1 << 64)


def test_uniform_range_and_moments():
    u = draws(new_stream(1, 0), N)
    assert np.all((u > 0) & (u < 1))
    assert abs(u.mean() - 0.5) < 0.003
    assert ks_test(u, lambda t: np.clip(t, 0, 1)).passed


def test_uniform_from_bits_extremes_stay_open():
    assert 0 < rnd.uniform_from_bits(0) < 1e-15
    assert 1 - 1e-15 < rnd.uniform_from_bits((1 << 64) - 1) < 1


def test_exponential_inverse_cdf():
    assert rnd.exponential_from_uniform(1 - math.exp(-1)) == pytest.approx(1.0, abs=1e-15)
    assert 0 < rnd.exponential_from_uniform(1e-300) < 1e-299
    e = draws(new_stream(2, 0), N, rnd.next_exponential)
    assert np.all(e > 0)
    assert abs(e.mean() - 1.0) < 0.01


def test_gaussian_inverse_cdf_points():
    assert rnd.gaussian_from_uniform(0.5) == 0.0
    for u in (2.0**-53, 2.0**-40, 2.0**-7, 0.125, 0.4375):  # 1 - u exact
        assert rnd.gaussian_from_uniform(u) == pytest.approx(-rnd.gaussian_from_uniform(1 - u), abs=1e-12)
    with pytest.raises(ValueError):
        rnd.gaussian_from_uniform(0.0)
    with pytest.raises(ValueError):
        rnd.gaussian_from_uniform(1.0)


def test_gaussian_matches_scipy_and_is_monotone():
    us = np.concatenate([np.logspace(-300, -2.01, 200), np.linspace(0.01, 0.99, 999)])
    ours = np.array([rnd.gaussian_from_uniform(u) for u in us])
    np.testing.assert_allclose(ours, special.ndtri(us), rtol=1e-14, atol=1e-14)
    assert np.all(np.diff(ours) > 0)


def test_gaussian_ks():
    g = draws(new_stream(3, 0), N, rnd.next_gaussian)
    assert ks_test(g, stats.norm.cdf).passed


def test_fault_hook_is_looked_up_at_call_time(monkeypatch):
    monkeypatch.setattr(rnd, "uniform_from_bits", lambda bits: 0.25)
    assert rnd.next_uniform(new_stream(0)) == 0.25
