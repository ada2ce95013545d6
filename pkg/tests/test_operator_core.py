import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdyson.errors import DimensionMismatch, DomainError, NotHermitian, OverflowRisk
from cdyson.operator_core import (
    SpectralWindow,
    apply_function,
    eig_hermitian,
    evolve,
    operator_norm,
    spectral_projector,
)
from conftest import random_hermitian


def charpoly_roots(m):
    """Eigenvalues from the Faddeev-LeVerrier characteristic polynomial (matrix products only)."""
    n = m.shape[0]
    coeffs = [1.0 + 0j]
    mk = np.zeros_like(m)
    for k in range(1, n + 1):
        mk = m @ (mk + coeffs[-1] * np.eye(n))
        coeffs.append(-np.trace(mk) / k)
    return np.sort(np.roots(coeffs).real)


def power_norm(m, iters=3000):
    v = np.ones(m.shape[1], dtype=np.complex128)
    for _ in range(iters):
        v = m.conj().T @ (m @ v)
        v /= np.linalg.norm(v)
    return float(np.sqrt(np.linalg.norm(m.conj().T @ (m @ v))))


def test_identity_and_diagonal():
    h = eig_hermitian(np.eye(3))
    assert np.allclose(h.eigenvalues, 1.0)
    assert np.allclose(h.eigenvectors, np.eye(3))
    h = eig_hermitian(np.diag([0.0, 1.0, 2.0]))
    assert np.allclose(h.eigenvalues, [0, 1, 2])


def test_unsorted_diagonal_uses_permutation():
    h = eig_hermitian(np.diag([2.0, 0.0, 1.0]))
    assert np.allclose(h.eigenvalues, [0, 1, 2])
    assert np.allclose(h.eigenvectors @ np.diag(h.eigenvalues) @ h.eigenvectors.T, np.diag([2.0, 0.0, 1.0]))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_eigenvalues_match_characteristic_polynomial(rng, d):
    m = random_hermitian(rng, d)
    h = eig_hermitian(m)
    assert np.allclose(h.eigenvalues, charpoly_roots(m), atol=1e-9)


def test_reconstruction_residual_dim8(rng):
    m = random_hermitian(rng, 8)
    h = eig_hermitian(m)
    rec = h.eigenvectors @ np.diag(h.eigenvalues) @ h.eigenvectors.conj().T
    assert np.linalg.norm(m - rec, 2) <= 1e-10 * np.linalg.norm(m, 2)
    assert np.allclose(h.eigenvectors.conj().T @ h.eigenvectors, np.eye(8), atol=1e-12)


def test_rejects_non_hermitian_and_bad_shapes(rng):
    with pytest.raises(NotHermitian):
        eig_hermitian(rng.normal(size=(4, 4)))
    with pytest.raises(DimensionMismatch):
        eig_hermitian(np.ones((2, 3)))
    with pytest.raises(DomainError):
        eig_hermitian(np.diag([0.0, np.nan]))


def test_projector_examples(rng):
    h = eig_hermitian(np.diag([0.0, 1.0, 2.0]))
    assert np.allclose(spectral_projector(h, SpectralWindow(0, 1)), np.diag([1, 1, 0]))
    m = random_hermitian(rng, 6)
    h = eig_hermitian(m)
    assert np.allclose(spectral_projector(h, SpectralWindow(-h.norm - 1, h.norm + 1)), np.eye(6))
    a, b = -0.5, 1.0
    p = spectral_projector(h, SpectralWindow(a, b))
    count = int(np.sum((np.linalg.eigvalsh(m) >= a) & (np.linalg.eigvalsh(m) <= b)))
    assert np.isclose(np.trace(p).real, count)
    assert np.allclose(p @ p, p) and np.allclose(p, p.conj().T)
    assert np.allclose(p @ m, m @ p)


def test_empty_window_rejected():
    with pytest.raises(ValueError):
        SpectralWindow(1.0, 0.0)


def test_apply_function_examples(rng):
    m = random_hermitian(rng, 5)
    h = eig_hermitian(m)
    assert np.linalg.norm(apply_function(h, lambda x: x) - m) <= 1e-10
    d = eig_hermitian(np.diag([0.0, 1.0]))
    assert np.allclose(apply_function(d, lambda x: np.exp(-1j * np.pi * x)), np.diag([1, -1]))
    psd = m @ m.conj().T
    hp = eig_hermitian(psd)
    r = apply_function(hp, lambda x: (x + 1) ** -0.5)
    assert np.allclose(r @ r @ (psd + np.eye(5)), np.eye(5), atol=1e-10)
    with pytest.raises(DomainError):
        apply_function(d, lambda x: 1.0 / x)


def test_evolve_examples(rng):
    h = eig_hermitian(random_hermitian(rng, 6))
    assert np.allclose(evolve(h, 0), np.eye(6))
    d = eig_hermitian(np.diag([0.0, 2.0]))
    assert np.allclose(evolve(d, -1j), np.diag([1, np.exp(-2)]))
    u = evolve(h, 1.7)
    assert np.linalg.norm(u @ u.conj().T - np.eye(6), 2) <= 1e-10


def test_evolve_overflow_guard():
    h = eig_hermitian(np.diag([0.0, 10.0]))
    with pytest.raises(OverflowRisk):
        evolve(h, 100j)
    evolve(h, -100j)  # decaying direction is fine


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 0), st.floats(-3, 3), st.floats(-2, 0), st.integers(0, 2 ** 32 - 1))
def test_semigroup(a, b, c, d, seed):
    rng = np.random.default_rng(seed)
    h = eig_hermitian(random_hermitian(rng, 5, 0.5))
    z, w = complex(a, b), complex(c, d)
    lhs = evolve(h, z) @ evolve(h, w)
    assert np.allclose(lhs, evolve(h, z + w), atol=1e-10 * max(1, np.abs(lhs).max()))


def test_operator_norm_against_power_iteration(rng):
    m = rng.normal(size=(7, 5)) + 1j * rng.normal(size=(7, 5))
    assert np.isclose(operator_norm(m), power_norm(m), rtol=1e-8)


def test_operator_norm_lanczos_path(rng):
    n = 700
    m = rng.normal(size=(n, n)) / np.sqrt(n)
    assert np.isclose(operator_norm(m), np.linalg.norm(m, 2), rtol=1e-9)
    d = np.diag(rng.uniform(-3, 2, n))
    assert np.isclose(operator_norm(d), np.abs(np.diagonal(d)).max())
