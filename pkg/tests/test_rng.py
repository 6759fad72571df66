import subprocess
import sys

import numpy as np
import pytest

from forkjoin.errors import NonPositiveRate
from forkjoin.rng import RngStream, generate_arrival_times, sample_exponential


def test_mean_of_many_draws():
    x = RngStream(0, "arrivals").exponentials(1.0, 1_000_000)
    assert abs(x.mean() - 1.0) < 0.005
    assert np.all(x > 0)


def test_rate_scaling_halves_draws():
    a = RngStream(3, "service-a").exponentials(1.0, 1000)
    b = RngStream(3, "service-a").exponentials(2.0, 1000)
    assert np.array_equal(a / 2, b)


def test_scalar_draw_matches_vector():
    s1, s2 = RngStream(9, "x"), RngStream(9, "x")
    assert [sample_exponential(0.5, s1) for _ in range(3)] == s2.exponentials(0.5, 3).tolist()


def test_first_draws_identical_across_processes():
    code = ("from forkjoin.rng import RngStream;"
            "print(repr(RngStream(42, 'arrivals').exponentials(1.0, 5).tolist()))")
    outs = {subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
            for _ in range(2)}
    assert len(outs) == 1
    assert eval(outs.pop()) == RngStream(42, "arrivals").exponentials(1.0, 5).tolist()


def test_labels_give_different_streams():
    a = RngStream(1, "service-a").uniforms(1000)
    b = RngStream(1, "service-b").uniforms(1000)
    assert not np.array_equal(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_uniforms_open_interval():
    u = RngStream(5, "u").uniforms(100_000)
    assert u.min() > 0 and u.max() < 1


def test_rejects_bad_rate_and_seed():
    with pytest.raises(NonPositiveRate):
        RngStream(0, "x").exponentials(0.0, 3)
    with pytest.raises(ValueError):
        RngStream(-1, "x")


def test_single_arrival_equals_first_interval():
    t = generate_arrival_times(0.3, 1, RngStream(4, "arrivals"))
    gap = RngStream(4, "arrivals").exponentials(0.3, 1)
    assert t.tolist() == gap.tolist()


def test_arrivals_increasing_with_rate_close_to_lambda():
    t = generate_arrival_times(1.0, 10_000, RngStream(11, "arrivals"))
    assert np.all(np.diff(t) > 0)
    # 3 sigma of the mean interval is 3 / sqrt(n) = 0.03
    assert abs(len(t) / t[-1] - 1.0) < 0.03


def test_count_must_be_positive():
    with pytest.raises(ValueError):
        generate_arrival_times(1.0, 0, RngStream(0, "a"))
