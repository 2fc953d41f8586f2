import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from oracles import wilcoxon_double_loop
from rotperm import DegenerateSampleError, TwoSampleView, em_statistic, t_statistic, wilcoxon_statistic
from rotperm.stats import empirical_quantile, quantile_index, weighted_quantile, wilcoxon_bruteforce

V = TwoSampleView.from_arrays

small_ints = st.lists(st.integers(0, 6), min_size=2, max_size=25)


def test_t_identical_samples_is_zero():
    assert t_statistic(V([1.0, 2.0, 5.0], [5.0, 1.0, 2.0])) == 0.0


def test_t_hand_value():
    assert t_statistic(V([1, 2, 3], [2, 3, 4])) == pytest.approx(np.sqrt(1.5), abs=1e-12)


def test_t_matches_scipy():
    rng = np.random.default_rng(1)
    x0, x1 = rng.normal(size=17), rng.normal(1, 2, size=23)
    assert t_statistic(V(x0, x1)) == pytest.approx(sps.ttest_ind(x1, x0).statistic, rel=1e-12)


def test_t_degenerate():
    with pytest.raises(DegenerateSampleError, match="degenerate sample"):
        t_statistic(V([2.0, 2.0], [2.0, 2.0]))


@pytest.mark.parametrize(
    "x0, x1, expected",
    [([1, 2], [3, 4], 4.0), ([1, 3], [2, 2], 2.0), ([5, 5], [5, 5], 2.0)],
)
def test_wilcoxon_examples(x0, x1, expected):
    assert wilcoxon_statistic(V(x0, x1)) == expected
    assert wilcoxon_bruteforce(V(x0, x1)) == expected


@settings(max_examples=200, deadline=None)
@given(small_ints, small_ints)
def test_wilcoxon_matches_double_loop(x0, x1):
    view = V(x0, x1)
    assert wilcoxon_statistic(view) == wilcoxon_double_loop(view.sample0, view.sample1)


@settings(max_examples=200, deadline=None)
@given(small_ints, small_ints)
def test_wilcoxon_swap_identity(x0, x1):
    view = V(x0, x1)
    assert wilcoxon_statistic(view) + wilcoxon_statistic(view.swapped()) == len(x0) * len(x1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=20), st.lists(st.floats(-100, 100), min_size=2, max_size=20))
def test_t_antisymmetric(x0, x1):
    view = V(x0, x1)
    try:
        t = t_statistic(view)
    except DegenerateSampleError:
        return
    assert t_statistic(view.swapped()) == pytest.approx(-t, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize(
    "values, level, expected",
    [(np.arange(1, 101), 0.05, 5), ([3, 1, 2], 0.5, 2), ([1, 2, 3, 4], 0.5, 2), (np.arange(1, 101), 0.07, 7)],
)
def test_empirical_quantile_examples(values, level, expected):
    assert empirical_quantile(values, level) == expected


def _scan_quantile(values, level):
    xs = np.sort(values)
    for y in xs:
        if np.mean(xs <= y) >= level - 1e-12:
            return y


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=30), st.floats(0.01, 1.0))
def test_empirical_quantile_matches_scan(values, level):
    assert empirical_quantile(values, level) == _scan_quantile(np.array(values, float), level)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=30),
    st.floats(0.01, 0.99),
    st.floats(0.01, 0.99),
    st.floats(0.1, 10),
    st.floats(-5, 5),
)
def test_empirical_quantile_monotone_and_equivariant(values, l1, l2, a, b):
    lo, hi = sorted((l1, l2))
    assert empirical_quantile(values, lo) <= empirical_quantile(values, hi)
    x = np.array(values)
    assert empirical_quantile(a * x + b, lo) == pytest.approx(a * empirical_quantile(x, lo) + b, abs=1e-9)


def test_empirical_quantile_empty():
    with pytest.raises(ValueError):
        empirical_quantile([], 0.5)


def test_quantile_index_bounds():
    assert quantile_index(1.0, 7) == 6
    assert quantile_index(1e-9, 7) == 0
    with pytest.raises(ValueError):
        quantile_index(0.0, 3)


def test_em_examples():
    x0 = np.arange(1.0, 101.0)
    assert em_statistic(V(x0, x0), 0.3) == 0.0
    assert em_statistic(V(x0, x0 + 1), 0.42) == 1.0
    assert em_statistic(V(x0, x0 - 0.5), 0.05) == pytest.approx(-0.5)


def test_weighted_quantile_with_ties():
    # ties collapse: mass 0.2 + 0.3 at value 2 reaches 0.5
    assert weighted_quantile([1, 2, 2, 3], [0.1, 0.2, 0.3, 0.4], 0.6) == 2
    assert weighted_quantile([1, 2, 2, 3], [0.1, 0.2, 0.3, 0.4], 0.61) == 3


def test_statistics_invariant_to_unit_and_cluster_order(null_sample):
    view = TwoSampleView.from_sample(null_sample)
    rng = np.random.default_rng(0)
    shuffled = V(rng.permutation(view.sample0), rng.permutation(view.sample1))
    assert t_statistic(shuffled) == pytest.approx(t_statistic(view), rel=1e-12)
    assert wilcoxon_statistic(shuffled) == wilcoxon_statistic(view)
    assert em_statistic(shuffled, 0.3) == em_statistic(view, 0.3)


def test_view_from_sample(null_sample):
    view = TwoSampleView.from_sample(null_sample)
    assert view.n0 == view.n1 == 180
    assert set(view.labels0) == set(null_sample.membership(0))
