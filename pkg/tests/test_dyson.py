import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdyson.dyson import (
    InteractionSystem,
    certify_c0,
    check_schrodinger,
    compute_Vn,
    dyson_series,
    evolve_steps,
    exact_propagator,
    group_law_defects,
    heisenberg,
    majorant,
    propagate,
    time_ordered_with_insertions,
)
from cdyson.contour import Contour
from cdyson.errors import DimensionMismatch, HalfPlaneViolation, NoFiniteShift
from cdyson.operator_core import SpectralWindow, eig_hermitian, spectral_projector
from conftest import direct_propagator, random_hermitian, random_system


def test_heisenberg_examples(rng):
    s = random_system(rng, 6)
    assert np.allclose(heisenberg(s, 0), s.a)
    lam = s.h0.eigenvalues
    v = s.h0.eigenvectors
    commuting = v @ np.diag(rng.normal(size=6)) @ v.conj().T
    sc = InteractionSystem(s.h0, commuting)
    assert np.allclose(heisenberg(sc, 1.3 - 0.4j), commuting, atol=1e-12)
    z = 0.7 - 0.3j
    got = v.conj().T @ heisenberg(s, z) @ v
    want = np.exp(1j * z * (lam[:, None] - lam[None, :])) * (v.conj().T @ s.a @ v)
    assert np.allclose(got, want, atol=1e-12)


def test_certificate_examples(rng):
    lam = np.sort(rng.uniform(0, 2, 6))
    lam[0] = 0
    h0 = np.diag(lam)
    c = certify_c0(InteractionSystem(h0, np.eye(6)))
    assert c.b == 0 and np.isclose(c.C, 1.0)
    s = random_system(rng, 8)
    assert np.isclose(s.certificate.b, s.lam_max) and s.certificate.leak <= 1e-9 * s.a_norm
    # C against the direct operator norm of A (H0 + 1)^{-1/2}
    h = eig_hermitian(s.h0.matrix - s.energy_shift * np.eye(8))
    root = h.eigenvectors @ np.diag((h.eigenvalues + 1) ** -0.5) @ h.eigenvectors.conj().T
    assert np.isclose(s.certificate.C, np.linalg.norm(s.a @ root, 2))


def test_band_operator_shift(rng):
    # A couples levels at most 2 apart in a ladder H0 = diag(0, 1, ..., 7)
    d = 8
    h0 = np.diag(np.arange(d, dtype=float))
    a = np.zeros((d, d), dtype=complex)
    for i in range(d - 2):
        a[i, i + 2] = a[i + 2, i] = 0.3
    c = certify_c0(InteractionSystem(h0, a))
    assert np.isclose(c.b, 2.0)
    # direct check: (1 - P_{E+b}) A P_E = 0
    h = eig_hermitian(h0)
    for E in range(d):
        pe = spectral_projector(h, SpectralWindow(0, E))
        pb = spectral_projector(h, SpectralWindow(0, E + c.b))
        assert np.abs((np.eye(d) - pb) @ a @ pe).max() == 0


def test_vn_examples(rng):
    s = random_system(rng, 6)
    z, zp = 1.0 - 0.7j, 0.3 - 0.2j
    assert np.allclose(compute_Vn(s, z, zp, 0), np.eye(6))
    lam = s.lam
    mu = lam[:, None] - lam[None, :]
    safe = np.where(np.abs(mu) < 1e-14, 1.0, mu)
    phi = np.where(np.abs(mu) < 1e-14, z - zp, (np.exp(1j * mu * z) - np.exp(1j * mu * zp)) / (1j * safe))
    v = s.h0.eigenvectors
    v1 = v.conj().T @ compute_Vn(s, z, zp, 1) @ v
    assert np.abs(v1 - (-1j) * (v.conj().T @ s.a @ v) * phi).max() <= 1e-13
    c = 0.4
    sc = InteractionSystem(s.h0, c * np.eye(6))
    for n in range(1, 6):
        want = (-1j * c * (z - zp)) ** n / np.prod(np.arange(1, n + 1))
        assert np.allclose(compute_Vn(sc, z, zp, n), want * np.eye(6), atol=1e-14)


def test_vn_block_and_mismatch(rng):
    s = random_system(rng, 5)
    x = rng.normal(size=(5, 2)) + 0j
    full = compute_Vn(s, 1 - 1j, 0, 3)
    assert np.allclose(compute_Vn(s, 1 - 1j, 0, 3, block=x), full @ x, atol=1e-13)
    assert np.allclose(compute_Vn(s, 1 - 1j, 0, 3, block=x[:, 0]), full @ x[:, 0], atol=1e-13)
    with pytest.raises(DimensionMismatch):
        compute_Vn(s, 1, 0, 1, block=np.ones(4))


def test_series_trivial_cases(rng):
    s = random_system(rng, 6)
    ds = dyson_series(s, 0.4 - 0.2j, 0.4 - 0.2j)
    assert np.array_equal(ds.value, np.eye(6)) and ds.N == 0
    s0 = InteractionSystem(s.h0, np.zeros((6, 6)))
    assert np.allclose(dyson_series(s0, 2 - 1j, -1 - 0.5j).value, np.eye(6), atol=1e-15)
    with pytest.raises(HalfPlaneViolation):
        dyson_series(s, 0.0, -1j)


@pytest.mark.parametrize("d", [8, 24])
def test_series_matches_direct_propagator(rng, d):
    s = random_system(rng, d)
    z, zp = 2.0 - 2.5j, -1.0 - 0.5j
    ds = dyson_series(s, z, zp)
    ref = direct_propagator(s.h0.matrix, s.a, z, zp)
    assert np.linalg.norm(ds.value - ref, 2) <= 1e-9
    assert np.linalg.norm(exact_propagator(s, z, zp) - ref, 2) <= 1e-10
    assert np.allclose(ds.partial_sum(), ds.value)


def test_non_symmetric_perturbation(rng):
    s = random_system(rng, 8, symmetric=False)
    z, zp = 1.0 - 1.5j, -0.5 - 0.2j
    assert np.linalg.norm(dyson_series(s, z, zp).value - direct_propagator(s.h0.matrix, s.a, z, zp), 2) <= 1e-9


def test_stepping_route_agrees(rng):
    s = random_system(rng, 12)
    z, zp = 6.0 - 3.0j, -5.0 - 0.5j
    ref = direct_propagator(s.h0.matrix, s.a, z, zp)
    assert np.linalg.norm(propagate(s, z, zp) - ref, 2) <= 1e-8 * max(1, np.linalg.norm(ref, 2))
    with pytest.raises(HalfPlaneViolation):
        evolve_steps(s, 1j, np.eye(12))


def test_detour_path_vn(rng):
    s = random_system(rng, 6)
    z, zp = 1.0 - 0.7j, 0.3 - 0.2j
    for n in range(1, 7):
        a = compute_Vn(s, z, zp, n)
        b = compute_Vn(s, z, zp, n, path=Contour((zp, 2.0 - 0.3j, 0.5 - 0.6j, z)))
        assert np.abs(a - b).max() <= 1e-9


def test_insertions(rng):
    s = random_system(rng, 6)
    c = Contour((-1.0, 1.0))
    assert np.allclose(time_ordered_with_insertions(s, [], c), dyson_series(s, 1.0, -1.0).value, atol=1e-10)
    s0 = InteractionSystem(s.h0, np.zeros((6, 6)))
    b = random_hermitian(rng, 6)
    one = time_ordered_with_insertions(s0, [(b, 0.3)], c)
    assert np.allclose(one, heisenberg(InteractionSystem(s.h0, b), 0.3), atol=1e-12)
    a1, a2 = random_hermitian(rng, 6), random_hermitian(rng, 6)
    got = time_ordered_with_insertions(s, [(a2, -0.4), (a1, 0.5)], c)
    h0, a = s.h0.matrix, s.a
    from scipy.linalg import expm
    e = lambda w, m: expm(-1j * w * m)
    want = (e(-1.0, h0) @ e(1.0 - 0.5, h0 + a) @ a1 @ e(0.5 + 0.4, h0 + a) @ a2 @ e(-0.4 + 1.0, h0 + a)
            @ e(-1.0, h0))
    assert np.linalg.norm(got - want, 2) <= 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_group_laws_property(seed):
    rng = np.random.default_rng(seed)
    s = random_system(rng, 6)
    ims = np.sort(-rng.uniform(0, 1.5, 3))
    re = rng.uniform(-1.5, 1.5, 3)
    z, zp, zpp = (complex(r, i) for r, i in zip(re, ims))
    d = group_law_defects(s, z, zp, zpp, shift=rng.uniform(-1, 1))
    assert max(d.values()) <= 1e-8


def test_majorant_dominates_terms(rng):
    s = random_system(rng, 10, C=0.6)
    z, zp = 1.0 - 1.0j, -0.8 - 0.3j
    ds = dyson_series(s, z, zp)
    h = s.h0
    for E in np.unique(s.lam)[::3]:
        m = majorant(s.certificate, E, z, zp, ds.N)
        p = spectral_projector(h, SpectralWindow(h.lam_min, h.lam_min + E))
        for _ in range(5):
            psi = p @ (rng.normal(size=10) + 1j * rng.normal(size=10))
            psi /= np.linalg.norm(psi)
            for n, term in enumerate(ds.terms):
                assert np.linalg.norm(term @ psi) <= m[n] * (1 + 1e-9)


def test_schrodinger_residual(rng):
    s = random_system(rng, 6)
    worst, parts = check_schrodinger(s, [1.0 - 0.5j, -0.7 - 1.2j])
    assert worst <= 1e-5 and set(parts) == {"schrodinger", "dz", "dz_prime"}


def test_no_finite_shift_is_reachable_only_for_bad_input(rng):
    s = random_system(rng, 4)
    with pytest.raises(ValueError):
        certify_c0(s, E_grid=[])
    assert NoFiniteShift.__mro__[1].__name__ == "CDysonError"
