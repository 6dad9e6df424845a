import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hessbound.activations import ActivationKind, eval, eval_vec, profile
from hessbound.errors import DomainError
from instances import KINDS, kinds

GRID = np.arange(-20.0, 20.0 + 5e-4, 1e-3)


def test_exactly_five_kinds_parse_case_insensitively():
    assert len(KINDS) == 5
    for k in KINDS:
        assert ActivationKind.parse(str(k).upper()) is k
    with pytest.raises(DomainError):
        ActivationKind.parse("relu")


@pytest.mark.parametrize(
    "kind, y, expected",
    [
        (ActivationKind.LINEAR, 3.7, (3.7, 1.0, 0.0)),
        (ActivationKind.SIGMOID, 0.0, (0.5, 0.25, 0.0)),
        (ActivationKind.GELU, 0.0, (0.0, 0.5, math.sqrt(2 / math.pi))),
        (ActivationKind.SMOOTHRELU, 0.0, (math.log(2.0), 0.5, 0.25)),
        (ActivationKind.TANH, 0.0, (0.0, 1.0, 0.0)),
    ],
)
def test_point_values(kind, y, expected):
    assert eval(kind, y) == pytest.approx(expected, abs=1e-15)


def test_tanh_second_derivative_minimum_location():
    y_star = math.atanh(1 / math.sqrt(3))
    assert eval(ActivationKind.TANH, y_star)[2] == pytest.approx(-4 * math.sqrt(3) / 9, rel=1e-13)


def test_vector_examples():
    f, f1, f2 = eval_vec(ActivationKind.LINEAR, np.array([1.0, 2.0]))
    np.testing.assert_array_equal(f, [1, 2])
    np.testing.assert_array_equal(f1, [1, 1])
    np.testing.assert_array_equal(f2, [0, 0])
    f, f1, f2 = eval_vec(ActivationKind.SIGMOID, np.zeros(3))
    np.testing.assert_array_equal(f, [0.5] * 3)
    np.testing.assert_array_equal(f1, [0.25] * 3)
    np.testing.assert_array_equal(f2, [0.0] * 3)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_input_rejected(bad):
    for k in KINDS:
        with pytest.raises(DomainError):
            eval(k, bad)


@pytest.mark.parametrize("kind", KINDS)
def test_stable_for_large_inputs(kind):
    y = np.array([-500.0, -40.0, 40.0, 500.0])
    for arr in eval_vec(kind, y):
        assert np.all(np.isfinite(arr))


def test_profile_table():
    sig = profile(ActivationKind.SIGMOID)
    assert sig.zeta1 == 1 / 16 and sig.zeta2 == pytest.approx(math.sqrt(3) / 18, rel=1e-15)
    assert round(sig.zeta2, 3) == 0.096
    lin = profile(ActivationKind.LINEAR)
    assert (lin.zeta1, lin.zeta2) == (1.0, 0.0)
    assert profile(ActivationKind.TANH).zeta2 == pytest.approx(4 * math.sqrt(3) / 9, rel=1e-15)
    assert profile(ActivationKind.SMOOTHRELU).zeta2 == 0.25
    gelu = profile(ActivationKind.GELU)
    assert gelu.f_prime_max == pytest.approx(1.1289, abs=1e-4)
    # squared closed-form maximum of f', not a truncated decimal
    assert gelu.zeta1 == gelu.f_prime_max**2
    assert gelu.zeta1 == pytest.approx(1.27442, abs=1e-5)
    assert gelu.zeta2 == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    assert gelu.f_second_min == pytest.approx(-0.10798, abs=1e-5)
    assert gelu.f_prime_inf == pytest.approx(-0.1289, abs=1e-4)


@pytest.mark.parametrize("kind", KINDS)
def test_profile_invariants(kind):
    p = profile(kind)
    assert p.f_second_min <= 0.0 <= p.f_second_max
    assert p.zeta1 >= 0 and p.zeta2 >= 0
    assert p.saturating == (kind in (ActivationKind.SIGMOID, ActivationKind.TANH))


@pytest.mark.parametrize("kind", KINDS)
def test_grid_extrema_match_profile(kind):
    _, f1, f2 = eval_vec(kind, GRID)
    p = profile(kind)
    assert f1.max() <= p.f_prime_max + 1e-9
    assert f2.max() <= p.f_second_max + 1e-9
    assert f2.min() >= p.f_second_min - 1e-9
    assert abs(f1.max() - p.f_prime_max) < 1e-4
    assert abs(f2.max() - p.f_second_max) < 1e-4
    assert abs(f2.min() - p.f_second_min) < 1e-4
    assert abs(f1.min() - p.f_prime_inf) < 1e-4
    assert abs(p.zeta1 - max(p.f_prime_max**2, p.f_prime_inf**2)) < 1e-12
    assert abs(p.zeta2 - max(abs(p.f_second_max), abs(p.f_second_min))) < 1e-12


@settings(max_examples=200, deadline=None)
@given(kind=kinds, y=st.floats(-10, 10))
def test_central_differences(kind, y):
    h = 1e-5
    fp, f1p, _ = eval(kind, y + h)
    fm, f1m, _ = eval(kind, y - h)
    _, f1, f2 = eval(kind, y)
    assert abs(f1 - (fp - fm) / (2 * h)) <= 1e-6
    assert abs(f2 - (f1p - f1m) / (2 * h)) <= 1e-6


def test_sigmoid_identities_and_smoothrelu_link():
    f, f1, f2 = eval_vec(ActivationKind.SIGMOID, GRID)
    np.testing.assert_allclose(f1, f * (1 - f), rtol=1e-12)
    np.testing.assert_allclose(f2, (1 - 2 * f) * f1, rtol=1e-12, atol=1e-300)
    _, g1, g2 = eval_vec(ActivationKind.SMOOTHRELU, GRID)
    np.testing.assert_allclose(g1, f, rtol=1e-12)
    np.testing.assert_allclose(g2, f1, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(kind=kinds, ys=st.lists(st.floats(-30, 30), min_size=1, max_size=6))
def test_vector_matches_scalar(kind, ys):
    f, f1, f2 = eval_vec(kind, np.array(ys))
    for i, y in enumerate(ys):
        assert (f[i], f1[i], f2[i]) == eval(kind, y)
