import numpy as np
import pytest

from cdyson.dyson import InteractionSystem


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))[None, :]


def random_system(rng, d, C=0.8, top=1.5, symmetric=True):
    """Non-diagonal H0 with spectrum in [0, top] and ``max(C, C_adj)`` scaled to ``C``."""
    lam = np.sort(rng.uniform(0.0, top, d))
    lam[0] = 0.0
    q = random_unitary(rng, d)
    h0 = (q * lam) @ q.conj().T
    h0 = (h0 + h0.conj().T) / 2
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    if symmetric:
        a = (a + a.conj().T) / 2
    s = InteractionSystem(h0, a)
    c = max(s.certificate.C, s.certificate.C_adj)
    return InteractionSystem(h0, a * (C / c))


def direct_propagator(h0, a, z, zp):
    """``exp(izH0) exp(-i(z-z')H) exp(-iz'H0)`` via scipy's expm (independent of the package)."""
    from scipy.linalg import expm

    return expm(1j * z * h0) @ expm(-1j * (z - zp) * (h0 + a)) @ expm(-1j * zp * h0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
