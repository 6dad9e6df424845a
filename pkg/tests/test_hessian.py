import numpy as np
import pytest
from hypothesis import given, settings

from hessbound.activations import ActivationKind
from hessbound.bound import jacobi_eigh
from hessbound.hessian import hessian_single, hessian_total, load_hessian_csv, save_hessian_csv
from hessbound.loss_grad import total_loss
from hessbound.network import Dataset, NetworkParams, NetworkShape, flatten, forward, unflatten
from hessbound.oracle import fd_hessian, frobenius_diff
from instances import kinds, random_instance, rng_from, seeds

LIN = ActivationKind.LINEAR
SIG = ActivationKind.SIGMOID


def kron_blocks(params, kind, x, q):
    """Per-sample blocks straight from the Kronecker formulas with dense diagonals."""
    t = forward(params, kind, x, q)
    hx = np.concatenate([[1.0], x])[:, None]
    hr = np.concatenate([[1.0], t.r])[:, None]
    Vt = params.V_tilde[None, :]
    Fp, Fpp = np.diag(t.f1), np.diag(t.f2)
    core = t.s1 * Fp @ Vt.T @ Vt @ Fp + t.delta * np.diag(params.V_tilde) @ Fpp
    Hww = np.kron(hx @ hx.T, core)
    Hvw = np.kron(hx.T, t.s1 * hr @ Vt @ Fp + t.delta * np.vstack([np.zeros((1, len(t.r))), Fp]))
    Hvv = t.s1 * hr @ hr.T
    return np.block([[Hww, Hvw.T], [Hvw, Hvv]])


@settings(max_examples=60, deadline=None)
@given(kind=kinds, seed=seeds)
def test_blocks_match_dense_kronecker_formulas(kind, seed):
    rng = rng_from(seed)
    params, _, _ = random_instance(rng, kind, 2, 3, 1)
    x = rng.uniform(-1, 1, 2)
    q = int(rng.integers(0, 2))
    H = hessian_single(params, kind, x, q).assembled
    np.testing.assert_allclose(H, kron_blocks(params, kind, x, q), rtol=1e-12, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(kind=kinds, seed=seeds)
def test_matches_finite_differences(kind, seed):
    params, data, _ = random_instance(rng_from(seed), kind, 2, 3, 5)
    shape = params.shape
    fd = fd_hessian(lambda t: total_loss(unflatten(t, shape), kind, data), flatten(params))
    assert frobenius_diff(hessian_total(params, kind, data).assembled, fd) <= 1e-4


@settings(max_examples=40, deadline=None)
@given(kind=kinds, seed=seeds)
def test_structure_invariants(kind, seed):
    params, data, _ = random_instance(rng_from(seed), kind, 2, 3, 6)
    hb = hessian_total(params, kind, data)
    A = hb.assembled
    assert np.array_equal(A, A.T)
    assert np.array_equal(hb.Hvw, hb.Hwv.T)
    assert hb.Hww.shape == (9, 9) and hb.Hwv.shape == (9, 4) and hb.Hvv.shape == (4, 4) and hb.D == 13
    assert np.trace(A) == pytest.approx(np.trace(hb.Hww) + np.trace(hb.Hvv), rel=1e-14)
    eig = jacobi_eigh(A)
    assert eig.dtype == np.float64
    assert float(eig.sum()) == pytest.approx(np.trace(A), rel=1e-10, abs=1e-12)


def test_linear_activation_block_is_psd_kronecker():
    params, data, batch = random_instance(rng_from(2), LIN, 2, 3, 1)
    hb = hessian_total(params, LIN, data)
    hx = np.concatenate([[1.0], data.X[:, 0]])
    Vt = params.V_tilde
    expected = batch.s1[0] * np.kron(np.outer(hx, hx), np.outer(Vt, Vt))
    np.testing.assert_allclose(hb.Hww, expected, rtol=1e-13, atol=1e-15)
    assert np.linalg.eigvalsh(hb.Hww).min() >= -1e-12


@pytest.mark.parametrize("kind", list(ActivationKind))
def test_zero_output_weights_kill_ww_block(kind):
    params, data, _ = random_instance(rng_from(3), kind, 2, 3, 4)
    params = NetworkParams(params.W, np.zeros(4), params.shape)
    assert not hessian_total(params, kind, data).Hww.any()


def test_reduction_and_linearity():
    params, data, _ = random_instance(rng_from(4), ActivationKind.GELU, 2, 3, 1)
    single = hessian_single(params, ActivationKind.GELU, data.X[:, 0], int(data.q[0])).assembled
    assert np.array_equal(hessian_total(params, ActivationKind.GELU, data).assembled, single)
    _, data, _ = random_instance(rng_from(5), ActivationKind.GELU, 2, 3, 5)
    once = hessian_total(params, ActivationKind.GELU, data).assembled
    twice = hessian_total(params, ActivationKind.GELU, data.concat(data)).assembled
    np.testing.assert_allclose(twice, 2 * once, rtol=1e-14, atol=1e-15)


def test_separable_linear_hessian_vanishes_with_margin():
    X = np.array([[1.0, 2.0, -1.0, -2.0]])
    data = Dataset(X, [1, 1, 0, 0])
    shape = NetworkShape(1, 1)
    norms = []
    for scale in (1.0, 5.0, 20.0, 80.0):
        params = NetworkParams(np.array([[0.0, scale]]), np.array([0.0, scale]), shape)
        norms.append(np.abs(hessian_total(params, LIN, data).assembled).max())
    assert all(a > b for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1e-100


def test_csv_round_trip(tmp_path):
    params, data, _ = random_instance(rng_from(6), SIG, 2, 3, 3)
    A = hessian_total(params, SIG, data).assembled
    save_hessian_csv(A, tmp_path / "h.csv")
    assert np.array_equal(load_hessian_csv(tmp_path / "h.csv"), A)
