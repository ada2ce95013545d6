"""Dense Hermitian spectral calculus.

Every operator in the package is a dense ``complex128`` square array.  A
:class:`HermitianOperator` carries its eigendecomposition so that spectral
projectors, functions of the operator and complex-time propagators are all
evaluated as ``V f(lam) V^dagger``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import ConvergenceFailure, DimensionMismatch, DomainError, NotHermitian, OverflowRisk

# exp() argument ceiling in double precision
EXP_LIMIT = 700.0
# above this size the 2-norm is computed by Lanczos on M^dagger M
_DENSE_NORM_MAX = 600


def as_matrix(m):
    """Validate and return ``m`` as a square finite complex matrix."""
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    return m


def operator_norm(m):
    """Largest singular value of ``m``."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    if m.ndim == 1:
        return float(np.linalg.norm(m))
    if min(m.shape) <= _DENSE_NORM_MAX:
        return float(np.linalg.norm(m, 2))
    if _is_diagonal(m):
        return float(np.max(np.abs(np.diagonal(m))))
    mh = m.conj().T
    n = m.shape[1]
    op = LinearOperator((n, n), matvec=lambda v: mh @ (m @ v), dtype=np.complex128)
    # deterministic start vector
    v0 = np.ones(n, dtype=np.complex128) / np.sqrt(n)
    val = eigsh(op, k=1, which="LA", tol=1e-13, v0=v0, return_eigenvectors=False)
    return float(np.sqrt(max(val[0].real, 0.0)))


def _is_diagonal(m):
    n = m.shape[0]
    # strided view over the off-diagonal entries, no copy of the matrix
    flat = m.reshape(-1)
    body = flat[1:].reshape(n - 1, n + 1)[:, :n] if n > 1 else flat[:0]
    return not np.any(body)


@dataclass(frozen=True)
class SpectralWindow:
    """Closed interval ``[lo, hi]`` of the real line."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    hermiticity_defect: float
    norm: float
    diagonal: bool = False
    # for diagonal input: eigenvalue k sits at basis position perm[k]
    perm: np.ndarray = None

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def lam_max(self):
        return float(self.eigenvalues[-1])

    @property
    def lam_min(self):
        return float(self.eigenvalues[0])

    def membership_tol(self):
        return 1e-12 * max(1.0, self.norm)

    def in_window(self, w):
        d = self.membership_tol()
        return (self.eigenvalues >= w.lo - d) & (self.eigenvalues <= w.hi + d)

    def to_eigenbasis(self, x):
        return self.eigenvectors.conj().T @ x

    def from_eigenbasis(self, x):
        return self.eigenvectors @ x


def _fix_phases(v):
    idx = np.argmax(np.abs(v) > 1e-10, axis=0)
    lead = v[idx, np.arange(v.shape[1])]
    return v * (np.abs(lead) / lead)[None, :]


def eig_hermitian(m, htol=1e-12):
    """Eigendecomposition of a Hermitian matrix with a reproducible eigenvector phase."""
    m = as_matrix(m)
    nrm = operator_norm(m)
    diag = _is_diagonal(m)
    if diag:
        d = np.diagonal(m)
        defect = float(np.max(np.abs(d.imag))) * 2.0 if d.size else 0.0
    else:
        defect = operator_norm(m - m.conj().T)
    if defect > htol * max(nrm, np.finfo(float).tiny):
        raise NotHermitian(f"hermiticity defect {defect:.3e} exceeds {htol:.1e} * {nrm:.3e}")
    if diag:
        d = np.diagonal(m).real
        order = np.argsort(d, kind="stable")
        lam = d[order]
        vecs = np.zeros_like(m)
        vecs[order, np.arange(len(order))] = 1.0
    else:
        try:
            lam, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
        vecs = _fix_phases(vecs)
        order = None
    return HermitianOperator(m, np.asarray(lam, dtype=float), vecs, defect, nrm, diag, order)


def spectral_projector(h, w):
    """Orthogonal projector onto the eigenspaces with eigenvalue in ``w``."""
    sel = h.in_window(w)
    if h.diagonal:
        mask = np.zeros(h.dim, dtype=bool)
        mask[h.perm[sel]] = True
        return np.diag(mask.astype(np.complex128))
    v = h.eigenvectors[:, sel]
    return v @ v.conj().T


def _evaluate(f, lam):
    try:
        vals = np.asarray(f(lam), dtype=np.complex128)
        if vals.shape != lam.shape:
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([complex(f(x)) for x in lam], dtype=np.complex128)
    return vals


def apply_function(h, f):
    """``f(H) = V diag(f(lam)) V^dagger``; ``f`` maps reals to complex numbers."""
    with np.errstate(all="ignore"):
        vals = _evaluate(f, h.eigenvalues)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise DomainError(f"function is not finite at eigenvalue {h.eigenvalues[bad][0]!r}")
    if h.diagonal:
        out = np.zeros_like(h.matrix)
        out[h.perm, h.perm] = vals
        return out
    v = h.eigenvectors
    return (v * vals[None, :]) @ v.conj().T


def check_growth(h, z, what="exp(-izH)"):
    """Raise OverflowRisk if exp(-i z lam) would exceed the double-precision range."""
    growth = float(np.max(np.imag(z) * h.eigenvalues))
    if growth > EXP_LIMIT:
        raise OverflowRisk(f"{what}: exponent {growth:.1f} exceeds {EXP_LIMIT}")


def evolve(h, z):
    """Complex-time propagator ``exp(-i z H)``."""
    z = complex(z)
    check_growth(h, z)
    return apply_function(h, lambda lam: np.exp(-1j * z * lam))
