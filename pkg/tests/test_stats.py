import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import mannwhitneyu

from hessbound.errors import DomainError, ShapeError
from hessbound.stats import macro_f1, mann_whitney_u


def test_macro_f1_examples():
    truth = np.array([0, 0, 1, 1])
    assert macro_f1(truth, truth) == 1.0
    assert macro_f1(np.ones(4, int), truth) == pytest.approx(1 / 3)
    assert macro_f1(1 - truth, truth) == 0.0
    # class 0 absent from both: scores 1 by convention
    assert macro_f1([1, 1], [1, 1]) == 1.0
    with pytest.raises(ShapeError):
        macro_f1([0, 1], [0])


def test_exact_small_example():
    u, p = mann_whitney_u([1, 2, 3], [10, 11, 12])
    assert u == 0.0 and p == pytest.approx(0.1, abs=1e-15)


def test_identical_and_empty():
    assert mann_whitney_u([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])[1] == pytest.approx(1.0)
    assert mann_whitney_u(list(range(20)), list(range(20)))[1] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        mann_whitney_u([], [1.0])


def test_disjoint_large_samples():
    u, p = mann_whitney_u(np.arange(30), np.arange(100, 130))
    assert u == 0.0 and p < 1e-3


@settings(max_examples=60, deadline=None)
@given(
    a=st.lists(st.floats(-100, 100), min_size=1, max_size=7, unique=True),
    b=st.lists(st.floats(-100, 100), min_size=1, max_size=12, unique=True),
)
def test_exact_matches_scipy_without_ties(a, b):
    if set(a) & set(b):
        return
    u, p = mann_whitney_u(a, b)
    ref = mannwhitneyu(a, b, alternative="two-sided", method="exact")
    assert u == ref.statistic
    assert p == pytest.approx(ref.pvalue, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    a=st.lists(st.integers(0, 6), min_size=8, max_size=30),
    b=st.lists(st.integers(0, 6), min_size=8, max_size=30),
)
def test_normal_approximation_matches_scipy_with_ties(a, b):
    u, p = mann_whitney_u(a, b)
    ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert u == ref.statistic
    assert p == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-15)


def test_exact_with_ties_by_brute_force():
    from itertools import combinations

    from scipy.stats import rankdata

    a, b = [1.0, 2.0, 2.0], [2.0, 3.0, 3.0, 4.0]
    u, p = mann_whitney_u(a, b)
    ranks = rankdata(a + b)
    mean = len(a) * len(b) / 2
    us = [sum(ranks[list(c)]) - 6 for c in combinations(range(7), 3)]
    expected = np.mean([abs(x - mean) >= abs(u - mean) - 1e-12 for x in us])
    assert p == pytest.approx(expected, rel=1e-12)
