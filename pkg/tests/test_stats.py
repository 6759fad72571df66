import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forkjoin.errors import TooFewEvents, ZeroVariance
from forkjoin.rng import RngStream
from forkjoin.stats import (CHI2_THRESHOLD, STUDENT_THRESHOLD, ChiSquareReport, IntervalSample,
                            PoissonVerdict, StudentReport, bin_counts, chi_square_exponential,
                            classify_almost_poisson, equiprobable_bin_edges, lag1_student)


def equiprobable_sample(rate, per_bin, bins=30):
    """``per_bin`` copies of each bin's probability midpoint."""
    mids = -np.log1p(-(np.arange(bins) + 0.5) / bins) / rate
    return np.repeat(mids, per_bin)


def test_two_bins_split_at_median():
    assert equiprobable_bin_edges(1.0, 2).tolist() == pytest.approx([math.log(2)])


def test_edges_scale_with_rate():
    assert np.allclose(equiprobable_bin_edges(2.0, 30), equiprobable_bin_edges(1.0, 30) / 2, rtol=1e-15)


def test_first_of_thirty_edges():
    assert equiprobable_bin_edges(1.0, 30)[0] == pytest.approx(-math.log(29 / 30), rel=1e-14)
    assert equiprobable_bin_edges(1.0, 30)[0] == pytest.approx(0.03390155, abs=1e-8)


def test_each_bin_has_mass_one_over_bins():
    edges = np.concatenate([[0.0], equiprobable_bin_edges(0.7, 30), [np.inf]])
    mass = np.diff(1 - np.exp(-0.7 * edges))
    assert np.allclose(mass, 1 / 30, atol=1e-14)


def test_thresholds():
    r = chi_square_exponential(equiprobable_sample(1.0, 10), 1.0)
    assert (r.bins, r.dof, r.threshold) == (30, 29, 49.6)
    assert STUDENT_THRESHOLD == 2.33


def test_perfect_sample_has_zero_statistic():
    r = chi_square_exponential(equiprobable_sample(0.3, 10), 0.3)
    assert r.statistic == 0.0
    assert not r.rejected


@given(st.lists(st.floats(0.0, 50.0), min_size=100, max_size=400), st.randoms(use_true_random=False))
@settings(max_examples=50, deadline=None)
def test_bins_partition_and_permutation_invariance(xs, rnd):
    counts = bin_counts(xs, 0.5)
    assert counts.sum() == len(xs)
    shuffled = list(xs)
    rnd.shuffle(shuffled)
    assert chi_square_exponential(shuffled, 0.5).statistic == pytest.approx(
        chi_square_exponential(xs, 0.5).statistic, rel=1e-12)


def test_student_is_order_sensitive():
    x = np.sort(RngStream(1, "t").exponentials(1.0, 1000))
    shuffled = RngStream(2, "p")._gen.permutation(x)
    assert lag1_student(x).statistic > 10
    assert lag1_student(shuffled).statistic != lag1_student(x).statistic


def test_alternating_sequence_rejected():
    r = lag1_student(np.tile([1.0, 2.0], 100))
    assert r.r == pytest.approx(-1.0)
    assert math.isinf(r.statistic) and r.rejected


def test_student_formula():
    x = RngStream(3, "t").exponentials(1.0, 500)
    r = np.corrcoef(x[:-1], x[1:])[0, 1]
    rep = lag1_student(x)
    assert rep.r == pytest.approx(r, rel=1e-10)
    assert rep.statistic == pytest.approx(abs(r) * math.sqrt((500 - 3) / (1 - r * r)), rel=1e-10)


def test_zero_variance_and_small_samples():
    with pytest.raises(ZeroVariance):
        lag1_student(np.ones(200))
    with pytest.raises(TooFewEvents):
        chi_square_exponential(np.ones(99), 1.0)
    with pytest.raises(TooFewEvents):
        lag1_student(np.arange(99.0))


def test_interval_sample_validation():
    with pytest.raises(ValueError):
        IntervalSample(np.array([1.0, -0.1]))
    assert IntervalSample(np.arange(5.0)).n == 5


def test_shuffled_equiprobable_sample_is_almost_poisson():
    x = RngStream(0, "perm")._gen.permutation(equiprobable_sample(1.0, 100))
    v = classify_almost_poisson(x, 1.0)
    assert v.chi.statistic == 0.0
    assert v.student.statistic < STUDENT_THRESHOLD
    assert v.almost_poisson


@given(chi=st.floats(0, 100), stu=st.floats(0, 10))
def test_verdict_logic(chi, stu):
    v = PoissonVerdict(ChiSquareReport(chi, ()), StudentReport(0.0, stu), 1000, 1.0)
    assert v.almost_poisson == (chi <= CHI2_THRESHOLD and stu <= STUDENT_THRESHOLD)
    assert v.chi.rejected == (chi > 49.6)


def test_exponential_stream_accepted_and_json_shape():
    x = RngStream(7, "arrivals").exponentials(0.3, 100_000)
    v = classify_almost_poisson(x, 0.3)
    d = v.to_dict()
    assert set(d) >= {"chi2", "st", "almost_poisson", "n", "rate"}
    assert d["n"] == 100_000 and d["rate"] == 0.3


def test_wrong_rate_rejected():
    x = RngStream(7, "arrivals").exponentials(0.3, 100_000)
    assert chi_square_exponential(x, 0.33).rejected
