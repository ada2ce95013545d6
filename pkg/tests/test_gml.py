import numpy as np
import pytest

from cdyson.dyson import InteractionSystem
from cdyson.errors import DegenerateGroundState, InsertionOutOfRange, VanishingOverlap
from cdyson.gml import (
    adiabatic_check,
    complex_evolution_W,
    coupled_gap,
    fit_decay_rate,
    gml_ratio,
    gml_sweep,
    greens_function_direct,
    ground_state,
    upper_hull,
)
from cdyson.operator_core import eig_hermitian
from conftest import random_hermitian


def gapped(rng, d=10, coupling=0.25):
    lam = np.r_[0.0, np.sort(rng.uniform(1.0, 1.3, d - 1))]
    a = random_hermitian(rng, d)
    return np.diag(lam).astype(complex), a * coupling / np.linalg.norm(a, 2)


def test_ground_state_examples():
    h0 = np.diag([0.0, 1.0, 2.0])
    gs = ground_state(h0, np.eye(3)[0])
    assert gs.E0 == 0 and np.isclose(gs.overlap, 1) and np.allclose(gs.omega, np.eye(3)[0])
    gs = ground_state(np.diag([-1.0, 0.0, 3.0]), np.ones(3) / np.sqrt(3))
    assert gs.E0 == -1 and gs.gap == 1


def test_overlap_approaches_one_at_weak_coupling(rng):
    h0, a = gapped(rng)
    o0 = np.eye(10)[0]
    defects = [1 - abs(ground_state(h0 + e * a, o0).overlap) for e in (0.4, 0.2, 0.1, 0.05)]
    assert np.all(np.diff(defects) < 0)
    # second order in e: halving e quarters the defect
    assert np.isclose(defects[-2] / defects[-1], 4, rtol=0.1)


def test_degenerate_inputs_raise():
    with pytest.raises(DegenerateGroundState):
        ground_state(np.diag([0.0, 0.0, 1.0]), np.eye(3)[0])
    # Omega in the odd sector of a parity-symmetric H, Omega0 even
    h = np.array([[1.0, 0, 0], [0, -1.0, 0], [0, 0, 0.5]])
    with pytest.raises(VanishingOverlap):
        ground_state(h, np.array([1.0, 0, 1.0]) / np.sqrt(2))
    # the ratio itself refuses such inputs instead of returning a number
    with pytest.raises(DegenerateGroundState):
        gml_ratio(np.diag([0.0, 0.0, 1.0]), np.zeros((3, 3)), [], 3.0, 0.1)
    with pytest.raises(VanishingOverlap):
        gml_ratio(np.diag([0.0, 1.0, 1.5]), np.diag([0.0, -2.0, 0.0]), [], 3.0, 0.1)


def test_greens_function_examples(rng):
    h0, a = gapped(rng, 8)
    h = h0 + a
    gs = ground_state(h, np.eye(8)[0])
    assert np.isclose(greens_function_direct(gs, h, [np.eye(8)], [0.3]), 1)
    x = random_hermitian(rng, 8)
    assert np.isclose(greens_function_direct(gs, h, [x], [0.3]), np.vdot(gs.omega, x @ gs.omega))
    t1, t2 = 0.7, -0.4
    w, v = np.linalg.eigh(h)
    want = sum(np.exp(-1j * (t1 - t2) * (w[j] - w[0])) * abs(np.vdot(gs.omega, x @ v[:, j])) ** 2 for j in range(8))
    assert np.isclose(greens_function_direct(gs, h, [x, x], [t1, t2]), want, atol=1e-12)


def test_complex_evolution_w(rng):
    h0, a = gapped(rng, 6)
    from scipy.linalg import expm
    z = 1.5 - 0.8j
    assert np.allclose(complex_evolution_W(h0, a, z), expm(-1j * z * (h0 + a)), atol=1e-9)


def test_free_theory_ratio_is_free_correlator(rng):
    h0, _ = gapped(rng, 8)
    x, y = random_hermitian(rng, 8), random_hermitian(rng, 8)
    lam = np.diagonal(h0).real
    r = gml_ratio(h0, np.zeros((8, 8)), [(x, 0.5), (y, -0.3)], 5.0, 0.1)
    xt = np.exp(1j * 0.5 * lam)[:, None] * x * np.exp(-1j * 0.5 * lam)[None, :]
    yt = np.exp(-1j * 0.3 * lam)[:, None] * y * np.exp(1j * 0.3 * lam)[None, :]
    assert abs(r - (xt @ yt)[0, 0]) <= 1e-12
    assert gml_ratio(h0, random_hermitian(rng, 8) * 0.1, [], 4.0, 0.1) == pytest.approx(1.0)
    with pytest.raises(InsertionOutOfRange):
        gml_ratio(h0, np.zeros((8, 8)), [(x, 5.0)], 4.0, 0.1)


def test_coupled_sweep_converges_at_gap_rate(rng):
    h0, a = gapped(rng, 12)
    x, y = random_hermitian(rng, 12), random_hermitian(rng, 12)
    sw = gml_sweep(h0, a, [(x, 0.5), (y, -0.3)], eps=0.1)
    assert sw.abs_error[-1] <= 1e-6
    assert sw.rate_rel_error <= 0.2
    assert sw.sector_gap == pytest.approx(sw.gap)


def test_coupled_gap_skips_hidden_levels():
    lam = np.array([0.0, 0.5, 1.2])
    vecs = np.eye(3)
    assert coupled_gap(lam, vecs, np.array([0.8, 0.0, 0.6])) == pytest.approx(1.2)
    assert coupled_gap(lam, vecs, np.array([1.0, 0.0, 0.0])) == np.inf


def test_hull_and_fit():
    # envelope fit over a tail that spans many oscillation periods
    t = np.linspace(0, 60, 81)
    for w in (3.0, 1.3):
        err = np.exp(-0.2 * t) * (1.5 + np.cos(w * t))
        assert fit_decay_rate(t, err) == pytest.approx(0.2, rel=0.1)
    assert fit_decay_rate(t, np.exp(-0.2 * t)) == pytest.approx(0.2, rel=1e-12)
    assert upper_hull([0, 1, 2], [0, 1, 0]) == [0, 1, 2]
    assert upper_hull([0, 1, 2], [0, -1, 0]) == [0, 2]
    assert np.isnan(fit_decay_rate([1, 2], [1e-20, 1e-21], floor=1e-15))


def test_adiabatic_projection(rng):
    h0, a = gapped(rng, 8)
    h = eig_hermitian(h0 + a)
    gs = ground_state(h, np.eye(8)[0])
    psis = [rng.normal(size=8) + 1j * rng.normal(size=8) for _ in range(4)]
    grid = np.linspace(5, 150, 30)
    tab = adiabatic_check(h, gs, 0.1, grid, psis)
    assert np.all(tab.monotone)
    assert np.all(np.abs(tab.rates - tab.predicted) <= 0.2 * tab.predicted)
