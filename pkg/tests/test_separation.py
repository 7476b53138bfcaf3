import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsca.errors import DimensionMismatch, SingularB, ValidationError
from nsca.separation import ajd, amari_index, apply_transform, gevd, offdiag_energy
from nsca.signal import MultichannelSignal, covariance_full


def random_spd(rng, n, cond=1e3):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = np.logspace(0, np.log10(cond), n)
    return (q * ev) @ q.T


def gevd_residuals(a, b, res):
    w = res.eigenmatrix
    wbw = w.T @ b @ w
    waw = w.T @ a @ w
    off = waw - np.diag(np.diag(waw))
    return np.abs(wbw - np.eye(len(a))).max(), np.abs(off).max(), waw


def test_gevd_diagonal_pair():
    res = gevd(np.diag([2.0, 1.0]), np.eye(2))
    np.testing.assert_allclose(res.eigenvalues, [1.0, 2.0])
    np.testing.assert_allclose(np.abs(res.eigenmatrix), [[0.0, 1.0], [1.0, 0.0]], atol=1e-15)


def test_gevd_identical_pair():
    rng = np.random.default_rng(0)
    a = random_spd(rng, 5)
    np.testing.assert_allclose(gevd(a, a).eigenvalues, 1.0, rtol=1e-10)


def test_gevd_random_pair_residuals_and_rayleigh():
    rng = np.random.default_rng(1)
    a, b = random_spd(rng, 8), random_spd(rng, 8)
    res = gevd(a, b)
    rb, ra, waw = gevd_residuals(a, b, res)
    assert rb <= 1e-8 and ra <= 1e-8 * np.abs(a).max()
    w = res.eigenmatrix
    rayleigh = np.einsum("ij,ik,kj->j", w, a, w) / np.einsum("ij,ik,kj->j", w, b, w)
    np.testing.assert_allclose(rayleigh, res.eigenvalues, rtol=1e-8)
    assert np.all(np.diff(res.eigenvalues) >= 0)


def test_gevd_errors():
    with pytest.raises(DimensionMismatch):
        gevd(np.eye(2), np.eye(3))
    with pytest.raises(ValidationError):
        gevd(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))
    with pytest.raises(SingularB):
        gevd(np.eye(2), np.diag([1.0, -1.0]))


def test_gevd_regularizes_singular_b():
    b = np.diag([1.0, 0.0])
    res = gevd(np.eye(2), b)
    assert res.regularized
    assert np.all(np.isfinite(res.eigenvalues))


def test_gevd_sign_convention():
    rng = np.random.default_rng(2)
    w = gevd(random_spd(rng, 6), random_spd(rng, 6)).eigenmatrix
    cols = np.arange(6)
    assert np.all(w[np.argmax(np.abs(w), axis=0), cols] > 0)


def test_gevd_scaling_and_congruence():
    rng = np.random.default_rng(3)
    a, b = random_spd(rng, 5), random_spd(rng, 5)
    base = gevd(a, b)
    scaled = gevd(3.0 * a, b)
    np.testing.assert_allclose(scaled.eigenvalues, 3.0 * base.eigenvalues, rtol=1e-8)
    np.testing.assert_allclose(np.abs(scaled.eigenmatrix), np.abs(base.eigenmatrix), rtol=1e-6,
                               atol=1e-9)
    m = rng.standard_normal((5, 5)) + 3 * np.eye(5)
    moved = gevd(m.T @ a @ m, m.T @ b @ m)
    np.testing.assert_allclose(moved.eigenvalues, base.eigenvalues, rtol=1e-8)


def test_ajd_on_diagonal_set():
    rng = np.random.default_rng(4)
    cs = [np.diag(rng.uniform(0.5, 2.0, 4)) for _ in range(3)]
    res = ajd(cs, np.eye(4))
    assert res.offdiag_score[-1] == pytest.approx(0.0, abs=1e-20)
    w = np.abs(res.demixing)
    np.testing.assert_allclose(np.sort(w, axis=0)[-1], 1.0, rtol=1e-12)
    np.testing.assert_allclose(np.sort(w, axis=0)[:-1], 0.0, atol=1e-12)


def exact_model(rng, n=6, k=3):
    m = rng.standard_normal((n, n))
    ds = [np.diag(rng.uniform(0.1, 2.0, n)) for _ in range(k)]
    return m, [m @ d @ m.T for d in ds], m @ m.T


def test_ajd_recovers_exact_model():
    rng = np.random.default_rng(5)
    m, cs, b = exact_model(rng)
    res = ajd(cs, b)
    assert amari_index(res.demixing, m) < 0.01
    assert res.offdiag_score[-1] <= 1e-10 * res.offdiag_score[0]
    np.testing.assert_allclose(res.demixing.T @ b @ res.demixing, np.eye(6), atol=1e-8)
    assert res.converged and np.isfinite(res.condition_number)


def test_ajd_perturbed_model():
    rng = np.random.default_rng(6)
    m, cs, b = exact_model(rng)
    noisy = []
    for c in cs:
        e = rng.standard_normal(c.shape)
        noisy.append(c + 0.01 * np.abs(c).max() * (e + e.T) / 2)
    assert amari_index(ajd(noisy, b).demixing, m) < 0.1


def test_ajd_needs_two_matrices():
    with pytest.raises(ValidationError):
        ajd([np.eye(3)], np.eye(3))


def test_ajd_reports_non_convergence():
    rng = np.random.default_rng(7)
    _, cs, b = exact_model(rng)
    res = ajd(cs, b, max_sweeps=1)
    assert not res.converged and res.iterations == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 7), st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_ajd_score_nonincreasing(n, k, seed):
    rng = np.random.default_rng(seed)
    cs = [random_spd(rng, n, 50) for _ in range(k)]
    res = ajd(cs, random_spd(rng, n, 50))
    assert np.all(np.diff(res.offdiag_score) <= 1e-12 * res.offdiag_score[0] + 1e-300)


def test_offdiag_energy():
    assert offdiag_energy([np.array([[1.0, 2.0], [2.0, 1.0]])]) == 8.0


def test_apply_transform_identity_and_scaling():
    rng = np.random.default_rng(8)
    x = MultichannelSignal(rng.standard_normal((3, 50)), 10.0)
    np.testing.assert_array_equal(apply_transform(np.eye(3), x).data, x.data)
    y = apply_transform(np.diag([2.0, 1.0, 1.0]), x)
    np.testing.assert_allclose(y.data[0], 2 * x.data[0])
    assert y.fs == 10.0
    with pytest.raises(DimensionMismatch):
        apply_transform(np.eye(2), x)


def test_apply_transform_whitens():
    rng = np.random.default_rng(9)
    x = MultichannelSignal(rng.standard_normal((4, 4)) @ rng.standard_normal((4, 3000)), 1.0)
    cx = covariance_full(x)
    cp = covariance_full(MultichannelSignal(x.data[:, :500], 1.0))
    w = gevd(cp, cx).eigenmatrix
    np.testing.assert_allclose(covariance_full(apply_transform(w, x)), np.eye(4), atol=1e-8)


def test_amari_index_values():
    assert amari_index(np.eye(3), np.eye(3)) == 0.0
    perm = np.eye(3)[[2, 0, 1]] @ np.diag([3.0, -2.0, 5.0])
    assert amari_index(perm.T, np.eye(3)) == pytest.approx(0.0, abs=1e-15)
    # ones(3) + I: each row and column gives 4/2 - 1 = 1, so 6 / (2*3*2)
    assert amari_index(np.ones((3, 3)) + np.eye(3), np.eye(3)) == pytest.approx(0.5)
    with pytest.raises(DimensionMismatch):
        amari_index(np.eye(2), np.eye(3))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31 - 1))
def test_amari_index_range(n, seed):
    rng = np.random.default_rng(seed)
    v = amari_index(rng.standard_normal((n, n)), rng.standard_normal((n, n)))
    assert 0.0 <= v <= 1.0
