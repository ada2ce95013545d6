"""Cutoff QED on a finite momentum lattice.

Photon modes are ``(momentum i, polarization r)`` at boson index ``2 i + r``.
Electron modes are ``(momentum j, c)`` at fermion index ``4 j + c`` with
``c`` running over ``b_{+1/2}, b_{-1/2}, d_{+1/2}, d_{-1/2}``.  Continuum
integrals over momenta and positions become weighted finite sums; the
Fourier transform of a translated profile is ``exp(-i k.x) chi(k)``.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dyson import InteractionSystem, certify_c0
from .errors import ModeCollision, ZeroMode
from .fock import BosonFockSpace, CompositeSpace, FermionFockSpace, OneParticleSpace, kron_lift
from .operator_core import eig_hermitian

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)
_Z2 = np.zeros((2, 2), dtype=np.complex128)
_I2 = np.eye(2, dtype=np.complex128)
# Dirac representation
BETA = np.block([[_I2, _Z2], [_Z2, -_I2]])
ALPHA = (np.eye(4, dtype=np.complex128),) + tuple(np.block([[_Z2, s], [s, _Z2]]) for s in SIGMA)
GAMMA = (BETA,) + tuple(BETA @ a for a in ALPHA[1:])
SPIN = tuple(0.5 * np.block([[s, _Z2], [_Z2, s]]) for s in SIGMA)
SPINS = (0.5, -0.5)


def _unique_rows(p, what):
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if np.linalg.norm(p[i] - p[j]) <= 1e-12:
                raise ModeCollision(f"{what} momenta {i} and {j} coincide: {p[i]}")


def _fix_phase(v):
    k = int(np.argmax(np.abs(v) > 1e-12))
    return v * (abs(v[k]) / v[k])


def _profile(chi, n):
    if chi is None:
        return np.ones(n, dtype=np.complex128)
    chi = np.asarray(chi, dtype=np.complex128).reshape(-1)
    if chi.shape[0] != n:
        raise ValueError(f"{chi.shape[0]} profile values for {n} momenta")
    return chi


def polarizations(k):
    """Two real unit vectors orthogonal to ``k`` and to each other."""
    k = np.asarray(k, dtype=float)
    zhat = np.array([0.0, 0.0, 1.0])
    if np.linalg.norm(np.cross(k, zhat)) <= 1e-12 * np.linalg.norm(k):
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    e1 = np.cross(zhat, k)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(k, e1)
    e2 /= np.linalg.norm(e2)
    return e1, e2


def helicity_pair(p):
    """Two-spinors with ``(sigma.p_hat) chi = +chi`` and ``-chi`` (sigma_z eigenvectors at p = 0)."""
    p = np.asarray(p, dtype=float)
    n = np.linalg.norm(p)
    if n <= 1e-14:
        return _I2[:, 0].copy(), _I2[:, 1].copy()
    sp = sum(pi * s for pi, s in zip(p / n, SIGMA))
    w, v = np.linalg.eigh(sp)
    return _fix_phase(v[:, 1]), _fix_phase(v[:, 0])


def dirac_spinors(p, M):
    """``u_s(p), v_s(p)`` for ``s = +1/2, -1/2`` as a (2, 4) pair of arrays, unit normalized."""
    p = np.asarray(p, dtype=float)
    E = np.sqrt(p @ p + M * M)
    sp = sum(pi * s for pi, s in zip(p, SIGMA))
    norm = np.sqrt((E + M) / (2 * E))
    u, v = [], []
    for eta in helicity_pair(p):
        u.append(_fix_phase(norm * np.concatenate([eta, sp @ eta / (E + M)])))
        v.append(_fix_phase(norm * np.concatenate([-sp @ eta / (E + M), eta])))
    return np.array(u), np.array(v)


@dataclass(frozen=True, eq=False)
class PhotonModeSet:
    momenta: np.ndarray
    chi: np.ndarray = None
    cutoff: float = np.inf
    k_min: float = 0.1

    def __post_init__(self):
        k = np.asarray(self.momenta, dtype=float).reshape(-1, 3)
        norms = np.linalg.norm(k, axis=1)
        if np.any(norms < self.k_min):
            raise ZeroMode(f"photon momentum with |k| = {norms.min():.3g} < k_min = {self.k_min}")
        _unique_rows(k, "photon")
        chi = _profile(self.chi, len(k)).copy()
        chi[norms > self.cutoff] = 0.0
        object.__setattr__(self, "momenta", k)
        object.__setattr__(self, "chi", chi)

    @property
    def count(self):
        return len(self.momenta)

    @property
    def omega(self):
        return np.linalg.norm(self.momenta, axis=1)

    @cached_property
    def pol(self):
        return np.array([polarizations(k) for k in self.momenta])  # (n, 2, 3)

    @property
    def mode_energies(self):
        return np.repeat(self.omega, 2)

    @property
    def labels(self):
        return tuple(("photon", i, r) for i in range(self.count) for r in (1, 2))

    def bound_norms(self):
        """``||chi/omega||`` and ``||chi/sqrt(omega)||`` as finite sums over momenta."""
        a = np.abs(self.chi)
        return float(np.linalg.norm(a / self.omega)), float(np.linalg.norm(a / np.sqrt(self.omega)))

    @property
    def M_ph(self):
        n1, n2 = self.bound_norms()
        return 2 * np.sqrt(2) * n1 + np.sqrt(2) * n2

    @property
    def max_energy(self):
        w = self.omega[np.abs(self.chi) > 0]
        return float(w.max()) if w.size else 0.0


@dataclass(frozen=True, eq=False)
class ElectronModeSet:
    momenta: np.ndarray
    mass: float
    chi: np.ndarray = None
    cutoff: float = np.inf

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("electron mass must be positive")
        p = np.asarray(self.momenta, dtype=float).reshape(-1, 3)
        _unique_rows(p, "electron")
        chi = _profile(self.chi, len(p)).copy()
        chi[np.linalg.norm(p, axis=1) > self.cutoff] = 0.0
        object.__setattr__(self, "momenta", p)
        object.__setattr__(self, "chi", chi)

    @property
    def count(self):
        return len(self.momenta)

    @property
    def energies(self):
        return np.sqrt(np.sum(self.momenta ** 2, axis=1) + self.mass ** 2)

    @cached_property
    def spinors(self):
        us, vs, vt = [], [], []
        for p in self.momenta:
            u, v = dirac_spinors(p, self.mass)
            us.append(u)
            vs.append(v)
            vt.append(dirac_spinors(-p, self.mass)[1])
        return np.array(us), np.array(vs), np.array(vt)  # each (n, 2, 4)

    @property
    def mode_energies(self):
        return np.repeat(self.energies, 4)

    @property
    def labels(self):
        names = ("b+", "b-", "d+", "d-")
        return tuple(("electron", j, c) for j in range(self.count) for c in names)

    @property
    def shift_bound(self):
        """``sqrt(Lambda_el^2 + M^2)`` with ``Lambda_el`` the largest momentum actually present."""
        lam = self.cutoff if np.isfinite(self.cutoff) else float(np.max(np.linalg.norm(self.momenta, axis=1)))
        return float(np.sqrt(lam ** 2 + self.mass ** 2))


def _as_points(points):
    return np.asarray(points, dtype=float).reshape(-1, 3)


@dataclass(eq=False)
class QedModel:
    photons: PhotonModeSet
    electrons: ElectronModeSet
    composite: CompositeSpace
    coupling: float
    points: np.ndarray
    weights: np.ndarray
    H_fr: np.ndarray = field(repr=False)
    H_I: np.ndarray = field(repr=False)
    H_II: np.ndarray = field(repr=False)
    vacuum_index: int = 0

    @property
    def dim(self):
        return self.composite.dim

    @cached_property
    def H_int(self):
        return self.H_I + self.H_II

    @cached_property
    def H_tot(self):
        return self.H_fr + self.H_int

    @cached_property
    def h0(self):
        return eig_hermitian(self.H_fr)

    def vacuum(self):
        return self.composite.vacuum()

    def lift_photon(self, m):
        return kron_lift(self.composite, None, m)

    def lift_fermion(self, m):
        return kron_lift(self.composite, m, None)

    def system(self, a):
        return InteractionSystem(self.h0, a)


# ---------------------------------------------------------------------------
# fields

def _photon_coefficients(photons, j, x):
    """Per-mode test function of ``A_j(0, x)``: ``chi(k) exp(-ik.x) e_j^(r)(k) / sqrt(2 omega)``."""
    if j not in (1, 2, 3):
        raise ValueError("photon field direction must be 1, 2 or 3")
    x = np.asarray(x, dtype=float)
    base = photons.chi * np.exp(-1j * photons.momenta @ x) / np.sqrt(2 * photons.omega)
    f = np.empty(2 * photons.count, dtype=np.complex128)
    f[0::2] = base * photons.pol[:, 0, j - 1]
    f[1::2] = base * photons.pol[:, 1, j - 1]
    return f


def photon_field_on(space, photons, j, x):
    f = _photon_coefficients(photons, j, x)
    a = space.annihilator(f)
    return a + a.conj().T


def _dirac_coefficients(electrons, l, x):
    """``(f, g)`` with ``psi_l(0, x) = B(f) + B(g)^*`` on the electron mode space."""
    if l not in (1, 2, 3, 4):
        raise ValueError("spinor index must be 1..4")
    x = np.asarray(x, dtype=float)
    u, _, vt = electrons.spinors
    chix = electrons.chi * np.exp(-1j * electrons.momenta @ x)
    n = electrons.count
    f = np.zeros(4 * n, dtype=np.complex128)
    g = np.zeros(4 * n, dtype=np.complex128)
    for si in range(2):
        f[si::4] = chix * np.conj(u[:, si, l - 1])
        g[2 + si::4] = chix * vt[:, si, l - 1]
    return f, g


def dirac_field_on(space, electrons, l, x):
    f, g = _dirac_coefficients(electrons, l, x)
    return space.psi(f, g)


def current_on(space, electrons, mu, x, normal_ordered=True):
    """``j^mu(0, x) = sum psi_l^* alpha^mu_{ll'} psi_{l'}``, normal ordered by default."""
    coeffs = [_dirac_coefficients(electrons, l, x) for l in (1, 2, 3, 4)]
    alpha = ALPHA[mu]
    out = np.zeros((space.dim, space.dim), dtype=np.complex128)
    for l in range(4):
        f1, g1 = coeffs[l]
        for lp in range(4):
            c = alpha[l, lp]
            if c == 0:
                continue
            f2, g2 = coeffs[lp]
            if normal_ordered:
                # psi^* = B(g) + B(f)^*, i.e. psi(f -> g, g -> f)
                out += c * space.normal_order([(g1, f1), (f2, g2)])
            else:
                out += c * (space.psi(f1, g1).conj().T @ space.psi(f2, g2))
    return out


def current_product_minus_vev(space, electrons, mu, x):
    """Second route to ``:j^mu:`` for quadratics: product minus its vacuum expectation."""
    j = current_on(space, electrons, mu, x, normal_ordered=False)
    vac = space.vacuum()
    return j - np.vdot(vac, j @ vac) * np.eye(space.dim)


def photon_field(model, j, x, lift=False):
    a = photon_field_on(model.composite.boson, model.photons, j, x)
    return model.lift_photon(a) if lift else a


def dirac_field(model, l, x, lift=False):
    p = dirac_field_on(model.composite.fermion, model.electrons, l, x)
    return model.lift_fermion(p) if lift else p


def current(model, mu, x, lift=False):
    j = current_on(model.composite.fermion, model.electrons, mu, x)
    return model.lift_fermion(j) if lift else j


def coulomb_potential(photons, x):
    """``V_C(x) = (1/4 pi) sum_k |chi(k)|^2 exp(ik.x) / omega^2``."""
    x = np.asarray(x, dtype=float)
    return complex(np.sum(np.abs(photons.chi) ** 2 * np.exp(1j * photons.momenta @ x) / photons.omega ** 2)
                   / (4 * np.pi))


def charge_density_pair(space, electrons, xa, xb):
    """``:j^0(x_a) j^0(x_b):`` by the combinatorial normal ordering of four fields."""
    ca = [_dirac_coefficients(electrons, l, xa) for l in (1, 2, 3, 4)]
    cb = ca if np.array_equal(xa, xb) else [_dirac_coefficients(electrons, l, xb) for l in (1, 2, 3, 4)]
    out = np.zeros((space.dim, space.dim), dtype=np.complex128)
    for l in range(4):
        f1, g1 = ca[l]
        for lp in range(4):
            f2, g2 = cb[lp]
            out += space.normal_order([(g1, f1), (f1, g1), (g2, f2), (f2, g2)])
    return out


def build_hamiltonians(photons, electrons, coupling, points, weights, n_max):
    """Assemble ``H_fr``, ``H_I`` and ``H_II`` on the truncated Fock space.

    ``weights[a]`` is the quadrature weight times the spatial cutoff at ``points[a]``.
    """
    points = _as_points(points)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.shape[0] != points.shape[0]:
        raise ValueError("one weight per spatial point")
    bos = BosonFockSpace(OneParticleSpace(2 * photons.count, photons.labels), n_max)
    fer = FermionFockSpace(OneParticleSpace(4 * electrons.count, electrons.labels))
    comp = CompositeSpace(fer, bos)
    h_el = fer.second_quantize(np.diag(electrons.mode_energies))
    h_ph = bos.second_quantize(np.diag(photons.mode_energies))
    H_fr = kron_lift(comp, h_el, None) + kron_lift(comp, None, h_ph)
    del h_el, h_ph
    e = float(coupling)
    H_I = np.zeros((comp.dim, comp.dim), dtype=np.complex128)
    H_II = np.zeros((comp.dim, comp.dim), dtype=np.complex128)
    if e != 0.0:
        for x, w in zip(points, weights):
            if w == 0.0:
                continue
            for i in (1, 2, 3):
                J = current_on(fer, electrons, i, x)
                A = photon_field_on(bos, photons, i, x)
                H_I += (e * w) * np.kron(J, A)
        rho2 = np.zeros((fer.dim, fer.dim), dtype=np.complex128)
        for xa, wa in zip(points, weights):
            for xb, wb in zip(points, weights):
                c = wa * wb * coulomb_potential(photons, xa - xb)
                if c != 0:
                    rho2 += c * charge_density_pair(fer, electrons, xa, xb)
        H_II += kron_lift(comp, (e * e / 2) * rho2, None)
    return QedModel(photons, electrons, comp, e, points, weights, H_fr, H_I, H_II)


# ---------------------------------------------------------------------------
# certificates and surrogates

def analytic_shift_bounds(model):
    """Closed-form spectral shifts: photon field, Dirac field, ``H_I`` and ``H_II``."""
    lam_ph = model.photons.cutoff if np.isfinite(model.photons.cutoff) else model.photons.max_energy
    e_el = model.electrons.shift_bound
    return {"photon": lam_ph, "dirac": e_el, "H_I": 2 * e_el + lam_ph, "H_II": 4 * e_el}


def certify_operator(model, op):
    return certify_c0(model.system(op))


def commutator_norms(model, n_max=3):
    """``||ad^n_{H_fr}(H_int) (H_fr + 1)^{-1}||`` for n = 1..n_max (``H_fr`` is diagonal)."""
    d = np.real(np.diagonal(model.H_fr))
    diff = d[:, None] - d[None, :]
    out = []
    x = model.H_int
    for n in range(1, n_max + 1):
        x = diff * x
        out.append(float(np.linalg.norm(x / (d[None, :] + 1.0), 2)))
    return out


def domain_surrogate(model, n_max=3):
    """``||(H_tot^n - H_fr^n)(H_fr + 1)^{-n}||`` for n = 1..n_max."""
    d = np.real(np.diagonal(model.H_fr))
    out = []
    pt, pf = np.eye(model.dim, dtype=np.complex128), np.eye(model.dim, dtype=np.complex128)
    for n in range(1, n_max + 1):
        pt = pt @ model.H_tot
        pf = pf * d[None, :]
        out.append(float(np.linalg.norm((pt - pf) / (d[None, :] + 1.0) ** n, 2)))
    return out


def field_mapping_surrogate(model, op, n_max=3):
    """``||H^n op (H - E0 + 1)^{-(n+1)}||`` for n = 0..n_max, ``H = H_tot``."""
    h = eig_hermitian(model.H_tot)
    at = h.eigenvectors.conj().T @ op @ h.eigenvectors
    lam = h.eigenvalues
    out = []
    for n in range(n_max + 1):
        out.append(float(np.linalg.norm((lam[:, None] ** n) * at / ((lam - lam[0] + 1.0)[None, :] ** (n + 1)), 2)))
    return out


def insertion_operator(model, kind, index, x):
    """Lifted field for a GML insertion: ``photon`` (A_j), ``dirac`` (psi_l) or ``dirac_adj``."""
    if kind == "photon":
        return photon_field(model, index, x, lift=True)
    if kind == "dirac":
        return dirac_field(model, index, x, lift=True)
    if kind == "dirac_adj":
        return dirac_field(model, index, x, lift=True).conj().T
    raise ValueError(f"unknown field kind {kind!r}")


def run_gml_qed(model, insertions, eps=0.1, T_grid=None, tol=1e-12):
    """GML sweep for field insertions ``(kind, index, x, t)`` with ``H0 = H_fr`` and ``H1 = H_int``."""
    from .gml import gml_sweep

    ops = [(insertion_operator(model, kind, idx, x), float(t)) for kind, idx, x, t in insertions]
    return gml_sweep(model.h0, model.H_int, ops, eps=eps, T_grid=T_grid, tol=tol, omega0=model.vacuum())
