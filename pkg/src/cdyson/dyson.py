"""Interaction picture, Dyson terms V_n and the time-ordered exponential U(A; z, z').

All heavy lifting happens in the eigenbasis of H0, where
``A(zeta)_{ab} = exp(i zeta (lam_a - lam_b)) A_ab``.  The iterated integrals
are evaluated by collocation: Gauss-Legendre nodes on each straight piece of
the path and the spectral integration matrix of that node set turn the
recursion ``V_{k+1}(zeta) = -i int_{z'}^{zeta} A(xi) V_k(xi) dxi`` into one
batched matrix product per order.
"""
from dataclasses import dataclass, field
from functools import cached_property
from math import lgamma, log

import numpy as np

from . import _accel
from .contour import Contour, QuadratureRule, order_compare
from .errors import (
    CoincidentInsertions,
    DimensionMismatch,
    HalfPlaneViolation,
    NoFiniteShift,
    OverflowRisk,
    QuadratureNotConverged,
    TruncationFailure,
)
from .operator_core import EXP_LIMIT, HermitianOperator, as_matrix, eig_hermitian, operator_norm

DEFAULT_TOL = 1e-12
# collocation resolution: (frequency content) * (piece length) per piece
_PIECE_BUDGET = 8.0
# cocycle step budget: ||A|| * step and spread * step / 2
_STEP_BUDGET = 2.0


def _half_plane_ok(z, zp):
    slack = 1e-12 * max(1.0, abs(z), abs(zp))
    return z.imag <= zp.imag + slack


class InteractionSystem:
    """``H0`` (shifted so that its lowest eigenvalue is 0) together with a perturbation ``A``."""

    def __init__(self, h0, a, htol=1e-12):
        if not isinstance(h0, HermitianOperator):
            h0 = eig_hermitian(h0, htol)
        a = as_matrix(a)
        if a.shape != h0.matrix.shape:
            raise DimensionMismatch(f"H0 is {h0.matrix.shape}, A is {a.shape}")
        self.h0 = h0
        self.a = a
        self.energy_shift = h0.lam_min
        self.lam = h0.eigenvalues - h0.lam_min
        self.lam[0] = 0.0

    @property
    def dim(self):
        return self.h0.dim

    @property
    def lam_max(self):
        return float(self.lam[-1])

    @property
    def spread(self):
        return float(self.lam[-1] - self.lam[0])

    @cached_property
    def at(self):
        """``A`` in the H0 eigenbasis."""
        return _eig_op(self, self.a)

    @cached_property
    def a_norm(self):
        return operator_norm(self.a)

    @cached_property
    def is_symmetric(self):
        return bool(np.allclose(self.a, self.a.conj().T, rtol=0, atol=1e-14 * max(1.0, self.a_norm)))

    def adjoint(self):
        """Same ``H0`` with ``A`` replaced by ``A^dagger``."""
        if self.is_symmetric:
            return self
        if "_adjoint" in self.__dict__:
            return self.__dict__["_adjoint"]
        other = InteractionSystem.__new__(InteractionSystem)
        other.h0, other.a = self.h0, self.a.conj().T.copy()
        other.energy_shift, other.lam = self.energy_shift, self.lam
        other.__dict__["at"] = self.at.conj().T.copy()
        other.__dict__["_adjoint"] = self
        self.__dict__["_adjoint"] = other
        return other

    # basis changes; cheap for diagonal H0
    def to_eig(self, x):
        h = self.h0
        if h.diagonal:
            return x[h.perm] if x.ndim == 1 else x[h.perm, ...]
        return h.to_eigenbasis(x)

    def from_eig(self, x):
        h = self.h0
        if h.diagonal:
            out = np.empty_like(x)
            out[h.perm] = x
            return out
        return h.from_eigenbasis(x)

    def conj_eig(self, m):
        """``V m V^dagger`` for a matrix given in the eigenbasis."""
        h = self.h0
        if h.diagonal:
            out = np.empty_like(m)
            out[np.ix_(h.perm, h.perm)] = m
            return out
        return h.eigenvectors @ m @ h.eigenvectors.conj().T

    def free_phase(self, z):
        """Diagonal of ``exp(i z H0)`` in the eigenbasis (shifted H0)."""
        guard(self, -complex(z).imag, "exp(izH0)")
        return np.exp(1j * complex(z) * self.lam)

    @cached_property
    def certificate(self):
        return certify_c0(self)


def guard(s, growth_im, what):
    if growth_im * s.lam_max > EXP_LIMIT:
        raise OverflowRisk(f"{what}: exponent {growth_im * s.lam_max:.1f} exceeds {EXP_LIMIT}")


def heisenberg(s, z):
    """``A(z) = exp(izH0) A exp(-izH0)``."""
    z = complex(z)
    guard(s, abs(z.imag), "A(z)")
    d = np.exp(1j * z * s.lam)
    return s.conj_eig(d[:, None] * s.at / d[None, :])


def heisenberg_apply(s, op_eig, z, x):
    """``op(z) x`` for ``op`` and ``x`` already in the eigenbasis."""
    z = complex(z)
    guard(s, abs(z.imag), "A(z)")
    d = np.exp(1j * z * s.lam)
    x = x / (d if x.ndim == 1 else d[:, None])
    y = op_eig @ x
    return y * (d if y.ndim == 1 else d[:, None])


# ---------------------------------------------------------------------------
# C0 certification

@dataclass(frozen=True)
class C0Certificate:
    C: float
    C_adj: float
    b: float
    b_op: float
    b_adj: float
    E_grid: tuple
    leak: float

    @property
    def b_used(self):
        return self.b


def _shift_for(at, lam, levels, tol):
    """Largest certified shift over ``levels``, plus the excluded leakage (Frobenius)."""
    w = np.abs(at) ** 2
    np.cumsum(w, axis=1, out=w)  # w[i, j] = sum_{k <= j} |A_ik|^2, columns ascending in lam
    delta = 1e-12 * max(1.0, float(np.max(np.abs(lam))))
    cols = np.searchsorted(lam, np.asarray(levels) + delta, side="right") - 1
    rown = np.zeros((len(levels), len(lam)))
    ok = cols >= 0
    rown[ok] = w[:, cols[ok]].T
    del w
    rown = rown[:, ::-1]
    lam_rows = lam[::-1]
    shifts = _accel.shift_scan(rown, lam_rows, np.asarray(levels, dtype=float), tol * tol)
    # leakage actually excluded at the certified shift
    leak = 0.0
    for k, e in enumerate(levels):
        outside = lam_rows > e + shifts[k] + delta
        leak = max(leak, float(np.sqrt(rown[k][outside].sum())))
    return float(shifts.max(initial=0.0)), leak


def certify_c0(s, E_grid=None, rtol=1e-10):
    """C0 data: ``C = ||A (H0+1)^{-1/2}||``, the same for ``A^dagger``, and a certified shift ``b``."""
    lam = s.lam
    if E_grid is None:
        E_grid = np.unique(lam)
    E_grid = np.asarray(sorted(float(e) for e in E_grid))
    if E_grid.size == 0:
        raise ValueError("E_grid must be non-empty")
    scale = 1.0 / np.sqrt(lam + 1.0)
    at = s.at
    C = operator_norm(at * scale[None, :])
    tol = rtol * max(s.a_norm, np.finfo(float).tiny)
    b_op, leak = _shift_for(at, lam, E_grid, tol)
    if s.is_symmetric:
        C_adj, b_adj, leak_adj = C, b_op, leak
    else:
        ath = at.conj().T
        C_adj = operator_norm(ath * scale[None, :])
        b_adj, leak_adj = _shift_for(ath, lam, E_grid, tol)
    b = max(b_op, b_adj)
    if not np.isfinite(b):
        raise NoFiniteShift("no finite spectral shift certifies A")
    return C0Certificate(C, C_adj, b, b_op, b_adj, tuple(E_grid.tolist()), max(leak, leak_adj))


def log_majorant(cert, E, z, zp, n_max):
    """``log m_n`` for n = 0..n_max, the boundLem bound on ``||V_n Psi|| / ||Psi||``, Psi in V_E.

    The exponential factor uses ``K = max(|Im z|, |Im z'|)``.
    """
    C, b = max(cert.C, cert.C_adj), cert.b
    K = max(abs(complex(z).imag), abs(complex(zp).imag))
    dz = abs(complex(z) - complex(zp))
    out = np.empty(n_max + 1)
    out[0] = 0.0
    if C == 0.0 or dz == 0.0:
        out[1:] = -np.inf
        return out
    acc = 0.0
    for n in range(1, n_max + 1):
        acc += 0.5 * log(E + (n - 1) * b + 1.0)
        out[n] = n * log(C * dz) + K * (2 * E + n * b) - lgamma(n + 1) + acc
    return out


def majorant(cert, E, z, zp, n_max):
    with np.errstate(over="ignore"):
        return np.exp(log_majorant(cert, E, z, zp, n_max))


def majorant_tail(cert, E, z, zp, N):
    """Upper bound on ``sum_{n > N} m_n`` (inf when the ratio test has not kicked in yet)."""
    lm = log_majorant(cert, E, z, zp, N + 2)
    if not np.isfinite(lm[N + 1]):
        return 0.0
    ratio = np.exp(lm[N + 2] - lm[N + 1])  # ratios decrease in n
    if ratio >= 1.0:
        return np.inf
    with np.errstate(over="ignore"):
        return float(np.exp(lm[N + 1]) / (1.0 - ratio))


# ---------------------------------------------------------------------------
# collocation

def _pieces(s, vertices, budget=_PIECE_BUDGET):
    """Split each straight segment so the integrand is well resolved by the rule."""
    freq = s.spread + 2.0 * s.a_norm
    out = [complex(vertices[0])]
    for a, b in zip(vertices, vertices[1:]):
        a, b = complex(a), complex(b)
        k = max(1, int(np.ceil(abs(b - a) * freq / budget)))
        out.extend(a + (b - a) * (j / k) for j in range(1, k + 1))
    return out


def _levels(s, vertices, x, rule):
    """Yield ``V_k(end, start) x`` for k = 0, 1, 2, ... along the polyline (eigenbasis)."""
    xn, w = rule.nodes_weights
    S = rule.integration_matrix
    verts = np.array([complex(v) for v in vertices])
    starts, ends = verts[:-1], verts[1:]
    half = (ends - starts) / 2.0
    zeta = ((starts + ends) / 2.0)[:, None] + half[:, None] * xn[None, :]
    guard(s, float(np.max(np.abs(zeta.imag))), "collocation phases")
    P, q = zeta.shape
    flat = zeta.reshape(-1)
    d, c = x.shape
    xk = np.broadcast_to(x[:, None, :], (d, P * q, c)).copy()
    yield x.copy()
    at = s.at
    lam = s.lam
    while True:
        z1 = _accel.phase_scale(xk, lam, flat, -1.0)
        z2 = (at @ z1.reshape(d, -1)).reshape(d, P * q, c)
        y = _accel.phase_scale(z2, lam, flat, 1.0).reshape(d, P, q, c)
        nxt = np.empty_like(xk).reshape(d, P, q, c)
        start = np.zeros((d, c), dtype=np.complex128)
        for p in range(P):
            fac = -1j * half[p]
            yp = y[:, p]
            nxt[:, p] = start[:, None, :] + fac * np.matmul(S, yp)
            start = start + fac * np.tensordot(yp, w, axes=([1], [0]))
        xk = nxt.reshape(d, P * q, c)
        yield start


def _straight(z, zp):
    return [complex(zp), complex(z)]


def _path_vertices(z, zp, path):
    if path is None:
        return _straight(z, zp)
    verts = list(path.vertices) if isinstance(path, Contour) else [complex(v) for v in path]
    if abs(verts[0] - zp) > 1e-12 * max(1, abs(zp)) or abs(verts[-1] - z) > 1e-12 * max(1, abs(z)):
        raise ValueError("path must start at z' and end at z")
    return verts


def _block(s, block):
    if block is None:
        return np.eye(s.dim, dtype=np.complex128), True
    x = np.asarray(block, dtype=np.complex128)
    if x.ndim not in (1, 2) or x.shape[0] != s.dim:
        raise DimensionMismatch(f"block has {x.shape[0]} rows, system dim is {s.dim}")
    return s.to_eig(x.reshape(s.dim, -1)), False


def _vn_eig(s, verts, x, n, rule):
    gen = _levels(s, _pieces(s, verts), x, rule)
    for k, val in enumerate(gen):
        if k == n:
            return val


def compute_Vn(s, z, zp, n, rule=QuadratureRule(), path=None, block=None, check=True):
    """``V_n(A; z, z')`` (or ``V_n`` applied to ``block``) by collocation along ``path``."""
    z, zp = complex(z), complex(zp)
    if n < 0:
        raise ValueError("n must be >= 0")
    x, ident = _block(s, block)
    if n == 0 or z == zp:
        # exact: no basis round trip
        base = np.eye(s.dim, dtype=np.complex128) if block is None else np.array(block, dtype=np.complex128)
        return base if n == 0 else np.zeros_like(base)
    else:
        verts = _path_vertices(z, zp, path)
        val = _vn_eig(s, verts, x, n, rule)
        if check:
            fine = _vn_eig(s, verts, x, n, rule.doubled())
            diff = np.linalg.norm(fine - val)
            ref = np.linalg.norm(fine)
            floor = 1e-13 * np.exp(n * log(max(s.a_norm * abs(z - zp), 1e-300)) - lgamma(n + 1))
            if diff > 1e-8 * ref + floor:
                raise QuadratureNotConverged(f"V_{n}: q->2q change {diff:.2e} vs norm {ref:.2e}")
            val = fine
    return _out(s, val, ident, block)


def _out(s, val, ident, block):
    if ident:
        return s.conj_eig(val)
    res = s.from_eig(val)
    return res.reshape(-1) if np.asarray(block).ndim == 1 else res


# ---------------------------------------------------------------------------
# the series

@dataclass(frozen=True, eq=False)
class DysonSeries:
    system: InteractionSystem = field(repr=False)
    z: complex
    z_prime: complex
    terms: list = field(repr=False)
    tail_bound: float
    N: int
    next_term_norm: float
    certified: bool
    value: np.ndarray = field(repr=False)

    def partial_sum(self, n=None):
        n = self.N if n is None else n
        return sum(self.terms[: n + 1])


def _run_series(s, verts, x, tol, N_max, rule, fixed_N=None):
    """Endpoint terms (eigenbasis) until two consecutive next terms are negligible."""
    gen = _levels(s, _pieces(s, verts), x, rule)
    terms = [next(gen)]
    total = terms[0].copy()
    peak = np.linalg.norm(terms[0])
    small = 0
    for k, val in enumerate(gen, start=1):
        if fixed_N is not None:
            terms.append(val)
            if k == fixed_N + 1:
                return terms, fixed_N
            continue
        nrm = np.linalg.norm(val)
        peak = max(peak, nrm)
        limit = max(tol * max(1.0, np.linalg.norm(total)), 64 * np.finfo(float).eps * peak)
        small = small + 1 if nrm < limit else 0
        terms.append(val)
        if small == 2:
            return terms, k - 2
        total = total + val
        if k > N_max + 1:
            raise TruncationFailure(f"series not converged after {N_max} terms (last term norm {nrm:.2e})")


def dyson_series(s, z, zp, tol=DEFAULT_TOL, N_max=400, rule=QuadratureRule(), path=None,
                 block=None, check=True):
    """Truncated time-ordered exponential ``U_N(A; z, z')`` on the straight segment (or ``path``)."""
    z, zp = complex(z), complex(zp)
    if not _half_plane_ok(z, zp):
        raise HalfPlaneViolation(f"Im z = {z.imag} > Im z' = {zp.imag}")
    x, ident = _block(s, block)
    if z == zp:
        terms, N = [x], 0
        tail = 0.0
        nxt = 0.0
    else:
        verts = _path_vertices(z, zp, path)
        terms, N = _run_series(s, verts, x, tol, N_max, rule)
        if check:
            fine, _ = _run_series(s, verts, x, tol, N_max, rule.doubled(), fixed_N=N)
            coarse = sum(terms[: N + 1])
            ref = sum(fine[: N + 1])
            diff = np.linalg.norm(ref - coarse)
            if diff > 1e-8 * max(1.0, np.linalg.norm(ref)):
                raise QuadratureNotConverged(f"U_N: q->2q change {diff:.2e}")
            terms = fine
        nxt = float(np.linalg.norm(terms[N + 1]))
        tail = majorant_tail(s.certificate, s.lam_max, z, zp, N)
    value = sum(terms[: N + 1])
    out_terms = [_out(s, t, ident, block) for t in terms[: N + 1]]
    if z == zp:
        exact = np.eye(s.dim, dtype=np.complex128) if block is None else np.array(block, dtype=np.complex128)
        return DysonSeries(s, z, zp, [exact], 0.0, 0, 0.0, True, exact)
    return DysonSeries(s, z, zp, out_terms, tail, N, nxt, bool(tail <= tol), _out(s, value, ident, block))


# ---------------------------------------------------------------------------
# long legs: cocycle of short steps

def _step_matrix(s, delta, tol, rule):
    """``exp(-i delta H0) U(delta, 0)`` in the eigenbasis (``= exp(-i delta H)`` for H = H0 + A)."""
    eye = np.eye(s.dim, dtype=np.complex128)
    terms, N = _run_series(s, [0j, delta], eye, tol, 400, rule)
    fine, _ = _run_series(s, [0j, delta], eye, tol, 400, rule.doubled(), fixed_N=N)
    u = sum(fine[: N + 1])
    if np.linalg.norm(u - sum(terms[: N + 1])) > 1e-8 * max(1.0, np.linalg.norm(u)):
        raise QuadratureNotConverged("step propagator did not converge under q->2q")
    return np.exp(-1j * delta * s.lam)[:, None] * u


def max_step(s):
    return _STEP_BUDGET / max(s.a_norm, s.spread / 2.0, 1e-300)


_STEP_CACHE_SIZE = 8


def _cached_step(s, delta, tol, rule):
    cache = s.__dict__.setdefault("_step_cache", {})
    key = (round(delta.real, 14), round(delta.imag, 14), tol, rule.q)
    if key not in cache:
        if len(cache) >= _STEP_CACHE_SIZE:
            cache.pop(next(iter(cache)))
        cache[key] = _step_matrix(s, delta, tol, rule)
    return cache[key]


def evolve_steps(s, dz, x, tol=DEFAULT_TOL, rule=QuadratureRule(), step=None):
    """``exp(-i dz (H - c)) x`` in the eigenbasis, ``c`` the H0 shift, as a product of short steps.

    ``Im dz <= 0``.  Each step is a converged Dyson series for
    ``exp(-i delta H0) U(delta, 0)``; steps have a standard length along the
    direction of ``dz`` plus one shorter remainder, and are cached per system.
    """
    dz = complex(dz)
    if dz.imag > 1e-12 * max(1.0, abs(dz)):
        raise HalfPlaneViolation(f"step direction {dz} points into the upper half plane")
    if dz == 0:
        return x.copy()
    h = max_step(s) if step is None else step
    length = abs(dz)
    unit = dz / length
    n = int(np.floor(length / h * (1 + 1e-12)))
    rem = length - n * h
    y = x
    if n:
        m = _cached_step(s, unit * h, tol, rule)
        for _ in range(n):
            y = m @ y
    if rem > 1e-12 * h:
        y = _cached_step(s, unit * rem, tol, rule) @ y
    return y


def propagate_eig(s, z, zp, x, tol=DEFAULT_TOL, rule=QuadratureRule(), step=None):
    """``U(z, z') x`` with ``x`` in the eigenbasis, via ``exp(izH0) exp(-i(z-z')H) exp(-iz'H0)``."""
    z, zp = complex(z), complex(zp)
    if not _half_plane_ok(z, zp):
        raise HalfPlaneViolation(f"Im z = {z.imag} > Im z' = {zp.imag}")
    if z == zp:
        return x.copy()
    guard(s, zp.imag, "exp(-iz'H0)")
    guard(s, -z.imag, "exp(izH0)")
    left = np.exp(-1j * zp * s.lam)
    y = x * (left if x.ndim == 1 else left[:, None])
    y = evolve_steps(s, z - zp, y, tol, rule, step)
    right = np.exp(1j * z * s.lam)
    return y * (right if y.ndim == 1 else right[:, None])


def propagate(s, z, zp, block=None, tol=DEFAULT_TOL, rule=QuadratureRule(), step=None):
    """``U(A; z, z')`` (or its action on ``block``) as a product of short Dyson steps."""
    x, ident = _block(s, block)
    val = propagate_eig(s, z, zp, x, tol, rule, step)
    return _out(s, val, ident, block)


def time_ordered_with_insertions(s, ops, c, tol=DEFAULT_TOL, rule=QuadratureRule()):
    """``U(z, zeta_1) A_1(zeta_1) U(zeta_1, zeta_2) ... A_k(zeta_k) U(zeta_k, z')`` ordered by the curve."""
    items = [(as_matrix(a), complex(zeta)) for a, zeta in ops]
    params = [c.parameter(zeta) for _, zeta in items]
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if order_compare(c, items[i][1], items[j][1]) == "equal":
                raise CoincidentInsertions(f"insertions {items[i][1]} and {items[j][1]} coincide")
    order = sorted(range(len(items)), key=lambda k: -params[k])
    z, zp = c.end, c.start
    x = np.eye(s.dim, dtype=np.complex128)
    cur = zp
    # build right to left: latest insertion ends up leftmost
    for k in reversed(order):
        a, zeta = items[k]
        x = propagate_eig(s, zeta, cur, x, tol, rule)
        x = heisenberg_apply(s, _eig_op(s, a), zeta, x)
        cur = zeta
    x = propagate_eig(s, z, cur, x, tol, rule)
    return s.conj_eig(x)


def _eig_op(s, a):
    """``V^dagger a V``."""
    h = s.h0
    if h.diagonal:
        return a[np.ix_(h.perm, h.perm)]
    return h.eigenvectors.conj().T @ a @ h.eigenvectors


# ---------------------------------------------------------------------------
# differential equations

def _exact_free(s, z):
    return s.conj_eig(np.diag(np.exp(-1j * complex(z) * (s.lam + s.energy_shift))))


def complex_w(s, z, tol=1e-14):
    """``W(z) = exp(-izH0) U(z, 0)``."""
    return _exact_free(s, z) @ dyson_series(s, z, 0.0, tol=tol).value


def check_schrodinger(s, z_grid, h=1e-2, tol=1e-14):
    """Max relative residual of the three differential equations on ``z_grid``.

    Derivatives are central differences with one Richardson step.
    """
    H = s.h0.matrix + s.a

    def rich(f):
        d1 = (f(h) - f(-h)) / (2 * h)
        d2 = (f(h / 2) - f(-h / 2)) / h
        return (4 * d2 - d1) / 3

    worst = {"schrodinger": 0.0, "dz": 0.0, "dz_prime": 0.0}
    for z in z_grid:
        z = complex(z)
        if z.imag >= 0:
            raise HalfPlaneViolation("grid must lie in the open lower half plane")
        W = complex_w(s, z, tol)
        dW = rich(lambda e: complex_w(s, z + e, tol))
        rhs = -1j * H @ W
        worst["schrodinger"] = max(worst["schrodinger"], np.linalg.norm(dW - rhs) / np.linalg.norm(rhs))
        U = dyson_series(s, z, 0.0, tol=tol).value
        dU = rich(lambda e: dyson_series(s, z + e, 0.0, tol=tol).value)
        rhs = -1j * heisenberg(s, z) @ U
        worst["dz"] = max(worst["dz"], np.linalg.norm(dU - rhs) / max(np.linalg.norm(rhs), 1e-300))
        # z' derivative at z' = 0 (real shifts keep Im z <= Im z')
        dUp = rich(lambda e: dyson_series(s, z, e, tol=tol).value)
        rhs = 1j * U @ s.a
        worst["dz_prime"] = max(worst["dz_prime"], np.linalg.norm(dUp - rhs) / max(np.linalg.norm(rhs), 1e-300))
    return max(worst.values()), worst


def exact_propagator(s, z, zp):
    """``exp(izH0) exp(-i(z-z')H) exp(-iz'H0)`` by direct diagonalisation (reference)."""
    H = eig_hermitian(s.h0.matrix + s.a) if s.is_symmetric else None
    z, zp = complex(z), complex(zp)
    if H is None:
        from scipy.linalg import expm
        mid = expm(-1j * (z - zp) * (s.h0.matrix + s.a))
    else:
        vals = np.exp(-1j * (z - zp) * H.eigenvalues)
        mid = (H.eigenvectors * vals[None, :]) @ H.eigenvectors.conj().T
    return _exact_free(s, -z) @ mid @ _exact_free(s, zp)


# ---------------------------------------------------------------------------
# group-law checks

def group_law_defects(s, z, zp, zpp, t=1.3, tp=-0.4, shift=0.7, tol=DEFAULT_TOL, n_path=6):
    """Relative defects of the algebraic identities of ``U`` at the given points.

    Needs ``Im z <= Im zp <= Im zpp``; ``t``, ``tp`` and ``shift`` are real.
    Keys: cocycle, translation, unitarity (symmetric ``A`` only), adjoint,
    path (largest V_n difference for n <= ``n_path`` between the segment
    and a detour).
    """
    z, zp, zpp = complex(z), complex(zp), complex(zpp)
    if not (_half_plane_ok(z, zp) and _half_plane_ok(zp, zpp)):
        raise HalfPlaneViolation("need Im z <= Im z' <= Im z''")

    def U(sys_, a, b):
        return dyson_series(sys_, a, b, tol=tol).value

    def rel(x, ref):
        return float(np.linalg.norm(x - ref, 2) / max(1.0, np.linalg.norm(ref, 2)))

    out = {}
    full = U(s, z, zpp)
    out["cocycle"] = rel(U(s, z, zp) @ U(s, zp, zpp), full)
    r = float(shift)
    moved = _exact_free(s, -r) @ U(s, zp, zpp) @ _exact_free(s, r)
    out["translation"] = rel(moved, U(s, zp + r, zpp + r))
    if s.is_symmetric:
        ut = U(s, float(t), float(tp))
        out["unitarity"] = rel(ut @ ut.conj().T, np.eye(s.dim))
    out["adjoint"] = rel(U(s, z, zp).conj().T, U(s.adjoint(), np.conj(zp), np.conj(z)))
    detour = [zp, _detour_point(z, zp), z]
    worst = 0.0
    for n in range(1, n_path + 1):
        a = compute_Vn(s, z, zp, n)
        b = compute_Vn(s, z, zp, n, path=detour)
        worst = max(worst, float(np.linalg.norm(a - b, 2) / max(1.0, np.linalg.norm(a, 2))))
    out["path"] = worst
    return out


def _detour_point(z, zp):
    """A vertex off the segment ``zp -> z`` whose imaginary part stays between the ends."""
    mid = (z + zp) / 2
    d = z - zp
    # sideways step along the real axis keeps Im inside [Im z, Im z']
    return mid + (0.5 * abs(d) + 0.5)
