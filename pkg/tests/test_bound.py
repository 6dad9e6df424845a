import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hessbound.activations import ActivationKind
from hessbound.bound import (
    SpectrumReport,
    asymptotic_flatness_check,
    flatness_constant,
    jacobi_eigh,
    lambda_sup_closed_form,
    lambda_sup_from_batch,
    save_spectrum_json,
    spectrum_report,
)
from hessbound.errors import DomainError, NumericError
from hessbound.hessian import hessian_from_batch
from hessbound.oracle import matrix_sq_trace, matrix_trace
from hessbound.traces import trace_bundle
from instances import kinds, random_instance, rng_from, seeds


def random_symmetric(rng, n, scale=1.0):
    B = rng.normal(size=(n, n)) * scale
    return np.triu(B) + np.triu(B, 1).T


def test_closed_form_examples():
    assert lambda_sup_closed_form(0.0, 0.0, 7) == (0.0, 0.0, 0.0)
    assert lambda_sup_closed_form(4.0, 10.0, 2) == (2.0, 1.0, 3.0)
    lam, D = 2.5, 9
    assert lambda_sup_closed_form(lam, lam * lam, D)[2] == pytest.approx(lam, rel=1e-15)


def test_closed_form_errors_and_clamp():
    with pytest.raises(DomainError):
        lambda_sup_closed_form(1.0, 1.0, 0)
    with pytest.raises(DomainError):
        lambda_sup_closed_form(1.0, -1.0, 3)
    # tr^2/D a hair above tr(H^2): round-off, clamped
    mu, s2, lam = lambda_sup_closed_form(3.0, 3.0 * (1 - 1e-15), 3)
    assert s2 == 0.0 and lam == mu
    with pytest.raises(NumericError):
        lambda_sup_closed_form(3.0, 2.0, 3)


def test_spectrum_report_small_cases():
    r = spectrum_report(np.eye(5))
    assert r.lambda_sup == 1.0 and r.lambda1 == 1.0 and r.psd
    r = spectrum_report(np.diag([1.0, 0.0, 0.0, 0.0]))
    assert r.lambda_sup == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(DomainError):
        spectrum_report(np.array([[1.0, 2.0], [2.0 + 1e-9, 1.0]]))
    with pytest.raises(DomainError):
        spectrum_report(np.ones((2, 3)))


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(1, 25), scale=st.sampled_from([1e-3, 1.0, 1e3]))
def test_jacobi_matches_lapack(seed, n, scale):
    A = random_symmetric(rng_from(seed), n, scale)
    w, U = jacobi_eigh(A, vectors=True)
    ref = np.linalg.eigvalsh(A)[::-1]
    norm = max(np.linalg.norm(A), 1e-300)
    assert np.max(np.abs(w - ref)) <= 1e-11 * norm
    assert np.all(np.diff(w) <= 0)
    np.testing.assert_allclose(U.T @ U, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(A @ U, U * w, atol=1e-11 * norm)


def test_jacobi_reports_non_convergence():
    A = random_symmetric(rng_from(0), 8)
    with pytest.raises(NumericError):
        jacobi_eigh(A, max_sweeps=1)


@settings(max_examples=150, deadline=None)
@given(seed=seeds, n=st.integers(1, 20))
def test_bound_and_moments_on_random_symmetric(seed, n):
    A = random_symmetric(rng_from(seed), n)
    r = spectrum_report(A)
    assert r.lambda1 <= r.lambda_sup + 1e-9 * max(1.0, abs(r.lambda_sup))
    assert abs(float(np.sum(r.eigenvalues)) - matrix_trace(A)) <= 1e-9 * max(1.0, np.abs(A).sum())
    mean = float(np.mean(r.eigenvalues))
    var = float(np.mean((r.eigenvalues - mean) ** 2))
    assert abs(r.mu - mean) <= 1e-9 * max(1.0, abs(mean))
    assert abs(r.sigma2 - var) <= 1e-9 * max(1.0, var)


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(2, 20))
def test_rank_one_equality(seed, n):
    rng = rng_from(seed)
    u = rng.normal(size=n)
    A = np.outer(u, u)
    A = np.triu(A) + np.triu(A, 1).T
    r = spectrum_report(A)
    assert abs(r.lambda_sup - r.lambda1) <= 1e-9 * r.lambda1


@settings(max_examples=60, deadline=None)
@given(kind=kinds, seed=seeds)
def test_bound_on_network_hessians(kind, seed):
    params, _, batch = random_instance(rng_from(seed), kind, 2, 3, 6)
    r = spectrum_report(hessian_from_batch(params, batch), trace_bundle(batch, params))
    assert r.lambda1 <= r.lambda_sup + 1e-9 * max(1.0, abs(r.lambda_sup))
    assert r.lambda_sup == pytest.approx(lambda_sup_from_batch(batch, params), rel=1e-15)


def _with_residuals(batch, delta):
    """Same network state but residuals ``delta`` (labels unchanged, s' consistent)."""
    s1 = np.abs(delta) * (1 - np.abs(delta))
    return dataclasses.replace(batch, delta=delta, s1=s1)


def test_zero_residuals_give_zero_bound():
    params, _, batch = random_instance(rng_from(1), ActivationKind.SIGMOID, 2, 3, 5)
    assert lambda_sup_from_batch(_with_residuals(batch, np.zeros(5)), params) == 0.0


@pytest.mark.parametrize("kind", list(ActivationKind))
def test_residual_scaling_sweep_is_monotone(kind):
    params, _, batch = random_instance(rng_from(2), kind, 2, 3, 6)
    base = np.where(batch.q == 1, -0.5, 0.5)
    values = [lambda_sup_from_batch(_with_residuals(batch, base * 10.0**-k), params) for k in range(1, 7)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-4 * values[0]


@settings(max_examples=60, deadline=None)
@given(kind=kinds, seed=seeds, k=st.integers(1, 8))
def test_flatness_constant_bounds_bound(kind, seed, k):
    params, _, batch = random_instance(rng_from(seed), kind, 2, 3, 5)
    rng = rng_from(seed + 1)
    delta = np.where(batch.q == 1, -1.0, 1.0) * rng.uniform(0, 10.0**-k, 5)
    b = _with_residuals(batch, delta)
    eps = 10.0 ** (1 - k)
    assert asymptotic_flatness_check(b, params, eps)
    assert lambda_sup_from_batch(b, params) <= flatness_constant(b, params) * np.max(np.abs(delta)) * (1 + 1e-12)


def test_flatness_check_vacuous_and_errors():
    params, _, batch = random_instance(rng_from(3), ActivationKind.TANH, 2, 3, 5)
    assert asymptotic_flatness_check(batch, params, 1e-9)
    with pytest.raises(DomainError):
        asymptotic_flatness_check(batch, params, 0.0)


def test_report_json_round_trip(tmp_path):
    r = spectrum_report(random_symmetric(rng_from(4), 6))
    save_spectrum_json(r, tmp_path / "s.json")
    import json

    back = SpectrumReport.from_json(json.loads((tmp_path / "s.json").read_text()))
    assert np.array_equal(back.eigenvalues, r.eigenvalues) and back.lambda_sup == r.lambda_sup
    assert math.isclose(matrix_sq_trace(np.diag(r.eigenvalues)), float(np.sum(r.eigenvalues**2)))
