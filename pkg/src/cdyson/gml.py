"""Ground states, complex-time evolution and the Gell-Mann-Low ratio.

The ratio is evaluated on vectors: every long leg of the contour acts on the
free vacuum (or on a vector derived from it), and the left end is brought
over with ``U(A; z, z')^dagger = U(A^dagger; z'^*, z^*)``.  Vectors stay of
order one along the whole contour, whereas the full matrix ``U`` would carry
entries of size ``exp(T eps lam_max)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .contour import QuadratureRule, gml_contour
from .dyson import (
    DEFAULT_TOL,
    InteractionSystem,
    _eig_op,
    evolve_steps,
    guard,
    heisenberg_apply,
    max_step,
    propagate_eig,
)
from .errors import DegenerateGroundState, HalfPlaneViolation, SmallDenominator, VanishingOverlap
from .operator_core import HermitianOperator, eig_hermitian

# numerical floor below which |ratio - G| is rounding noise, relative to max(1, |G|)
ERROR_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class GroundStateData:
    E0: float
    omega: np.ndarray = field(repr=False)
    gap: float
    overlap: complex
    P0: np.ndarray = field(repr=False)
    spectrum: np.ndarray = field(repr=False, default=None)
    # distance to the first level whose eigenspace is not orthogonal to Omega0
    sector_gap: float = np.inf


def coupled_gap(lam, vecs, omega0, cluster_tol=1e-8, weight_tol=1e-8):
    """``E_n - E_0`` for the lowest excited eigenspace with ``||P_n Omega0|| > weight_tol``.

    Symmetries of ``H`` that also fix ``Omega0`` hide whole sectors from the
    free vacuum; those levels never enter the Gell-Mann-Low ratio.
    """
    amp = np.abs(vecs.conj().T @ omega0) ** 2
    k = 1
    n = lam.size
    while k < n:
        j = k
        while j + 1 < n and lam[j + 1] - lam[k] <= cluster_tol * max(1.0, abs(lam[k])):
            j += 1
        if np.sqrt(amp[k : j + 1].sum()) > weight_tol:
            return float(lam[k] - lam[0])
        k = j + 1
    return np.inf


def _herm(h):
    return h if isinstance(h, HermitianOperator) else eig_hermitian(h)


def ground_state(H, omega0, gap_tol=None, overlap_tol=1e-8):
    """Lowest eigenpair of ``H`` with the phase fixed so that ``<Omega, Omega0> > 0``."""
    h = _herm(H)
    gap_tol = 1e-8 * max(h.norm, 1.0) if gap_tol is None else gap_tol
    lam = h.eigenvalues
    gap = float(lam[1] - lam[0]) if lam.size > 1 else np.inf
    if gap <= gap_tol:
        raise DegenerateGroundState(f"gap {gap:.3e} <= {gap_tol:.1e}: ground state is not unique")
    omega = h.eigenvectors[:, 0].copy()
    omega0 = np.asarray(omega0, dtype=np.complex128)
    ov = np.vdot(omega, omega0)
    if abs(ov) <= overlap_tol:
        raise VanishingOverlap(f"|<Omega, Omega0>| = {abs(ov):.3e} <= {overlap_tol:.1e}")
    omega *= ov / abs(ov)
    omega /= np.linalg.norm(omega)
    sector = coupled_gap(lam, h.eigenvectors, omega0 / np.linalg.norm(omega0), gap_tol)
    return GroundStateData(float(lam[0]), omega, gap, complex(abs(ov)), np.outer(omega, omega.conj()), lam, sector)


def complex_evolution_W(H0, H1, z, tol=DEFAULT_TOL):
    """``W(z) = exp(-izH0) U(z, 0)`` for ``Im z <= 0``, from short Dyson steps."""
    s = H0 if isinstance(H0, InteractionSystem) and H1 is None else InteractionSystem(H0, H1)
    z = complex(z)
    if z.imag > 0:
        raise HalfPlaneViolation(f"W(z) needs Im z <= 0, got {z}")
    y = evolve_steps(s, z, np.eye(s.dim, dtype=np.complex128), tol)
    return s.conj_eig(y * np.exp(-1j * z * s.energy_shift))


def greens_function_direct(gs, H, ops, zs):
    """``G_m = exp(i(z_1 - z_m)E0) <Omega, A_1 W(z_1 - z_2) ... A_m Omega>`` from the spectrum of ``H``."""
    h = _herm(H)
    zs = [complex(z) for z in zs]
    if len(ops) != len(zs):
        raise ValueError("one time per operator")
    if not ops:
        return 1.0 + 0j
    for a, b in zip(zs, zs[1:]):
        if a.imag > b.imag + 1e-12 * max(1.0, abs(a), abs(b)):
            raise HalfPlaneViolation("imaginary parts of the times must be non-decreasing")
    v = np.asarray(ops[-1], dtype=np.complex128) @ gs.omega
    vec = h.eigenvectors
    shifted = h.eigenvalues - gs.E0  # >= 0, so every factor is a contraction
    for k in range(len(ops) - 2, -1, -1):
        w = zs[k] - zs[k + 1]
        v = vec @ (np.exp(-1j * w * shifted) * (vec.conj().T @ v))
        v = np.asarray(ops[k], dtype=np.complex128) @ v
    # the exp(-i w E0) factors telescope to exp(-i(z_1 - z_m)E0) and cancel the prefactor
    return complex(np.vdot(gs.omega, v))


@dataclass(frozen=True)
class GmlTerms:
    numerator: complex
    denominator: complex
    scale: float

    @property
    def ratio(self):
        return self.numerator / self.denominator


def _vacuum_eig(s, omega0):
    if omega0 is None:
        v = np.zeros(s.dim, dtype=np.complex128)
        v[0] = 1.0
        return v
    return s.to_eig(np.asarray(omega0, dtype=np.complex128))


def _leg(s, x, zp, t, tol, rule):
    """``U(t, z') x`` for real ``t`` and ``Im z' >= 0``, routed through 0.

    The diagonal piece ``z' -> 0`` only depends on ``z'``, so the step
    matrices are shared by every insertion time and every T.
    """
    guard(s, complex(zp).imag, "exp(-iz'H0)")
    y = x * np.exp(-1j * complex(zp) * s.lam)
    y = evolve_steps(s, -complex(zp), y, tol, rule)
    y = evolve_steps(s, t, y, tol, rule)
    return y * np.exp(1j * t * s.lam)


def gml_terms(s, ops, T, eps, tol=DEFAULT_TOL, omega0=None, rule=QuadratureRule()):
    """Numerator and denominator of the ratio on the polyline through the real insertion times."""
    times = [float(t) for _, t in ops]
    gml_contour(T, eps, times)  # validates range and distinctness
    z_end, z_start = T * (1 - 1j * eps), -T * (1 - 1j * eps)
    adj = s.adjoint()
    o0 = _vacuum_eig(s, omega0)
    items = sorted(((np.asarray(a, dtype=np.complex128), float(t)) for a, t in ops), key=lambda p: -p[1])

    r0 = _leg(s, o0, z_start, 0.0, tol, rule)
    l0 = _leg(adj, o0, np.conj(z_end), 0.0, tol, rule)
    den = complex(np.vdot(l0, r0))
    scale = float(np.linalg.norm(l0) * np.linalg.norm(r0))
    if not items:
        num = den
    else:
        v = _leg(s, o0, z_start, items[-1][1], tol, rule)
        for k in range(len(items) - 1, -1, -1):
            a, t = items[k]
            v = heisenberg_apply(s, _eig_op(s, a), t, v)
            if k > 0:
                v = propagate_eig(s, items[k - 1][1], t, v, tol, rule)
        left = _leg(adj, o0, np.conj(z_end), items[0][1], tol, rule)
        num = complex(np.vdot(left, v))
        scale = max(scale, float(np.linalg.norm(left) * np.linalg.norm(v)))
    if abs(den) < 1e-12 * scale:
        raise SmallDenominator(f"|denominator| = {abs(den):.3e} against scale {scale:.3e}")
    return GmlTerms(num, den, scale)


def gml_ratio(H0, H1, ops, T, eps, tol=DEFAULT_TOL, omega0=None, verify=True):
    """Right-hand side of the Gell-Mann-Low formula at finite ``T`` and ``eps``.

    ``ops`` is a list of ``(A_k, t_k)`` with real, distinct ``t_k`` in ``(-T, T)``.
    With ``verify`` (default) a Hermitian ``H`` is first checked for a unique
    ground state that overlaps ``omega0``; DegenerateGroundState or
    VanishingOverlap is raised otherwise, since the limit would not exist.
    """
    s = H0 if isinstance(H0, InteractionSystem) and H1 is None else InteractionSystem(H0, H1)
    if verify and s.is_symmetric:
        ground_state(s.h0.matrix + s.a, s.from_eig(_vacuum_eig(s, omega0)))
    return gml_terms(s, ops, T, eps, tol, omega0).ratio


# ---------------------------------------------------------------------------
# sweeps and fits

def upper_hull(x, y):
    """Indices of the upper convex hull of the points (x, y), x ascending."""
    hull = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def fit_decay_rate(T, err, floor=0.0):
    """Exponential rate of the envelope of ``err`` over the second half of ``T``.

    The error oscillates under its envelope, so the fit runs over the upper
    convex hull of ``log err``; points at or below ``floor`` are dropped.
    """
    T, err = np.asarray(T, dtype=float), np.asarray(err, dtype=float)
    tail = slice(len(T) // 2, None)
    t, e = T[tail], err[tail]
    keep = e > floor
    t, e = t[keep], e[keep]
    if t.size < 2:
        return np.nan
    y = np.log(e)
    idx = upper_hull(t, y)
    if len(idx) < 2:
        return np.nan
    slope = np.polyfit(t[idx], y[idx], 1)[0]
    return float(-slope)


@dataclass(frozen=True, eq=False)
class GmlSweep:
    eps: float
    T_grid: np.ndarray
    ratio: np.ndarray
    reference: complex
    abs_error: np.ndarray
    rate: float
    gap: float
    E0: float
    overlap: complex
    numerators: np.ndarray = field(repr=False, default=None)
    sector_gap: float = np.inf

    @property
    def predicted_rate(self):
        return self.eps * self.gap

    @property
    def sector_rate(self):
        """``eps`` times the gap to the first level the free vacuum can reach."""
        return self.eps * self.sector_gap

    @property
    def rate_rel_error(self):
        return abs(self.rate - self.predicted_rate) / self.predicted_rate


def default_T_grid(eps, gap, t_max=0.0, points=40, depth=20.0, quantum=None):
    """Geometric grid from just past the insertions up to ``eps T gap = depth``.

    With ``quantum`` set, points are snapped to its multiples (duplicates dropped).
    """
    lo = max(1.0, 1.5 * t_max + 0.5)
    hi = max(depth / (eps * gap), 2 * lo)
    grid = np.geomspace(lo, hi, points)
    if quantum:
        grid = np.unique(np.maximum(np.ceil(grid / quantum), 1) * quantum)
        grid = grid[grid > t_max]
    return grid


def gml_sweep(H0, H1, ops, eps=0.1, T_grid=None, tol=DEFAULT_TOL, omega0=None, gs=None):
    s = InteractionSystem(H0, H1)
    H = eig_hermitian(s.h0.matrix + s.a)
    if omega0 is None:
        omega0 = s.from_eig(_vacuum_eig(s, None))
    gs = ground_state(H, omega0) if gs is None else gs
    times = [float(t) for _, t in ops]
    if T_grid is None:
        quantum = max_step(s) / np.sqrt(1 + eps * eps)
        T_grid = default_T_grid(eps, gs.gap, max((abs(t) for t in times), default=0.0), quantum=quantum)
    T_grid = np.asarray(T_grid, dtype=float)
    if np.any(np.diff(T_grid) <= 0):
        raise ValueError("T grid must be strictly increasing")
    srt = sorted(ops, key=lambda p: -float(p[1]))
    ref = greens_function_direct(gs, H, [a for a, _ in srt], [t for _, t in srt])
    ratios, nums = [], []
    for T in T_grid:
        terms = gml_terms(s, ops, T, eps, tol, omega0)
        ratios.append(terms.ratio)
        nums.append(terms.numerator)
    ratios = np.array(ratios)
    if not np.all(np.isfinite(ratios)):
        raise FloatingPointError("non-finite ratio in sweep")
    err = np.abs(ratios - ref)
    rate = fit_decay_rate(T_grid, err, ERROR_FLOOR * max(1.0, abs(ref)))
    return GmlSweep(eps, T_grid, ratios, ref, err, rate, gs.gap, gs.E0, gs.overlap, np.array(nums), gs.sector_gap)


# ---------------------------------------------------------------------------
# adiabatic projection

@dataclass(frozen=True, eq=False)
class AdiabaticTable:
    T_grid: np.ndarray
    errors: np.ndarray  # (samples, T)
    rates: np.ndarray
    predicted: np.ndarray
    monotone: np.ndarray


def adiabatic_errors(H, gs, eps, T_grid, psi, sign=1):
    """``||exp(iw E0) exp(-iwH) psi - P0 psi||`` with ``w = T(sign - i eps)``."""
    h = _herm(H)
    vec = h.eigenvectors
    coef = vec.conj().T @ psi
    out = []
    for T in T_grid:
        w = T * (sign - 1j * eps)
        # exp(-iw(H - E0)) is a contraction for Im w <= 0
        phase = np.exp(-1j * w * (h.eigenvalues - gs.E0))
        v = vec @ (phase * coef)
        out.append(np.linalg.norm(v - gs.P0 @ psi))
    return np.array(out)


def predicted_adiabatic_rate(gs, psi, eps, H, weight_tol=1e-20):
    """``eps (E_j - E0)`` for the lowest excited level that ``psi`` actually touches."""
    h = _herm(H)
    coef = np.abs(h.eigenvectors.conj().T @ psi) ** 2
    gaps = h.eigenvalues - gs.E0
    for j in range(1, len(gaps)):
        if coef[j] > weight_tol * coef.sum():
            return eps * gaps[j]
    return np.inf


def adiabatic_check(H, gs, eps, T_grid, psis, sign=1, floor=1e-13):
    h = _herm(H)
    T_grid = np.asarray(T_grid, dtype=float)
    errs, rates, preds, mono = [], [], [], []
    for psi in psis:
        e = adiabatic_errors(h, gs, eps, T_grid, psi, sign)
        errs.append(e)
        tail = e[len(e) // 2:]
        live = tail[tail > floor * max(1.0, np.linalg.norm(psi))]
        mono.append(bool(np.all(np.diff(live) <= 0)))
        rates.append(fit_decay_rate(T_grid, e, floor * max(1.0, np.linalg.norm(psi))))
        preds.append(predicted_adiabatic_rate(gs, psi, eps, h))
    return AdiabaticTable(T_grid, np.array(errs), np.array(rates), np.array(preds), np.array(mono))


def insertion_boundedness(H, A, r, zetas):
    """``||(H - zeta)^r A (H - zeta)^{-r}||`` for each ``zeta`` off the real axis."""
    h = _herm(H)
    vec = h.eigenvectors
    at = vec.conj().T @ np.asarray(A, dtype=np.complex128) @ vec
    out = []
    for zeta in zetas:
        d = (h.eigenvalues - complex(zeta)) ** r
        out.append(float(np.linalg.norm(d[:, None] * at / d[None, :], 2)))
    return np.array(out)
