"""Truncated boson and fermion Fock spaces.

Boson basis: occupation vectors with total occupation <= ``n_max``, ordered
by total and then reverse-lexicographically, so the vacuum is index 0.
Creation past the cutoff is dropped (hard truncation), which makes the
canonical commutation relations exact only on the sectors below the top one.

Fermion basis: the 2**d bitstrings in integer order, bit ``i`` being the
occupation of mode ``i``.  ``b_i`` picks up ``(-1)**(number of occupied modes
below i)``, so ``|n> = b*_{i1} ... b*_{ik} |0>`` with ``i1 < ... < ik``.

Composite spaces put the fermion index first (``np.kron(fermion, boson)``).
"""
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, permutations
from math import factorial, prod

import numpy as np
from scipy import sparse

from . import _accel
from .errors import DimensionMismatch


@dataclass(frozen=True)
class OneParticleSpace:
    dim: int
    labels: tuple = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("one-particle space needs dim >= 1")
        labels = tuple(range(self.dim)) if self.labels is None else tuple(self.labels)
        if len(labels) != self.dim:
            raise DimensionMismatch(f"{len(labels)} labels for {self.dim} modes")
        if len(set(labels)) != len(labels):
            raise ValueError("mode labels must be unique")
        object.__setattr__(self, "labels", labels)


def _vector(space, f):
    f = np.asarray(f, dtype=np.complex128).reshape(-1)
    if f.shape[0] != space.one_particle.dim:
        raise DimensionMismatch(f"vector of length {f.shape[0]} on a {space.one_particle.dim}-mode space")
    return f


def _one_particle_matrix(space, t):
    t = np.asarray(t, dtype=np.complex128)
    d = space.one_particle.dim
    if t.shape != (d, d):
        raise DimensionMismatch(f"one-particle operator of shape {t.shape}, expected {(d, d)}")
    return t


class _FockBase:
    one_particle: OneParticleSpace

    @property
    def modes(self):
        return self.one_particle.dim

    def vacuum(self):
        v = np.zeros(self.dim, dtype=np.complex128)
        v[0] = 1.0
        return v

    def annihilator(self, f):
        """``sum_i conj(f_i) c_i`` -- anti-linear in ``f``."""
        f = _vector(self, f)
        out = sparse.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        for i in np.nonzero(f)[0]:
            out = out + np.conj(f[i]) * self.lowering(i)
        return out.toarray()

    def creator(self, f):
        return self.annihilator(f).conj().T

    def second_quantize(self, t):
        """``dGamma(T) = sum_ij T_ij c_i^dagger c_j``."""
        t = _one_particle_matrix(self, t)
        out = sparse.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        for i, j in zip(*np.nonzero(t)):
            out = out + t[i, j] * (self.lowering(i).T.conj() @ self.lowering(j))
        return out.toarray()

    def number_operator(self):
        return self.second_quantize(np.eye(self.modes))


@dataclass(frozen=True, eq=False)
class BosonFockSpace(_FockBase):
    one_particle: OneParticleSpace
    n_max: int
    _ladder: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @cached_property
    def basis(self):
        return _accel.occupation_basis(self.modes, self.n_max)

    @cached_property
    def _keys(self):
        base = self.n_max + 1
        keys = self.basis @ (base ** np.arange(self.modes, dtype=np.int64))
        return keys, np.argsort(keys, kind="stable")

    @property
    def dim(self):
        return self.basis.shape[0]

    @cached_property
    def totals(self):
        return self.basis.sum(axis=1)

    def index(self, occupation):
        occ = np.asarray(occupation, dtype=np.int64)
        if occ.shape != (self.modes,) or occ.min() < 0 or occ.sum() > self.n_max:
            raise KeyError(tuple(occupation))
        keys, order = self._keys
        key = int(occ @ ((self.n_max + 1) ** np.arange(self.modes, dtype=np.int64)))
        pos = np.searchsorted(keys[order], key)
        return int(order[pos])

    def state(self, occupation):
        v = np.zeros(self.dim, dtype=np.complex128)
        v[self.index(occupation)] = 1.0
        return v

    def lowering(self, i):
        """Sparse ``a_i`` on the truncated basis."""
        if not 0 <= i < self.modes:
            raise DimensionMismatch(f"mode {i} out of range")
        if i not in self._ladder:
            keys, order = self._keys
            rows, cols, vals = _accel.boson_lower(self.basis, keys, order, i, self.n_max + 1)
            self._ladder[i] = sparse.csr_matrix(
                (vals.astype(np.complex128), (rows, cols)), shape=(self.dim, self.dim))
        return self._ladder[i]

    def below_cutoff(self, depth=1):
        """Projector onto total occupation <= n_max - depth."""
        return np.diag((self.totals <= self.n_max - depth).astype(np.complex128))

    def gamma(self, t):
        """``Gamma_b(T)``: ``(x)^n T`` restricted to the symmetric sectors."""
        t = _one_particle_matrix(self, t)
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for a in range(self.dim):
            ra = np.repeat(np.arange(self.modes), self.basis[a])
            na = prod(factorial(int(k)) for k in self.basis[a])
            for b in np.nonzero(self.totals == self.totals[a])[0]:
                cb = np.repeat(np.arange(self.modes), self.basis[b])
                nb = prod(factorial(int(k)) for k in self.basis[b])
                out[a, b] = _permanent(t[np.ix_(ra, cb)]) / np.sqrt(na * nb)
        return out


def _permanent(m):
    n = m.shape[0]
    if n == 0:
        return 1.0
    return sum(prod(m[i, p[i]] for i in range(n)) for p in permutations(range(n)))


@dataclass(frozen=True, eq=False)
class FermionFockSpace(_FockBase):
    one_particle: OneParticleSpace
    _ladder: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self):
        return 1 << self.modes

    @cached_property
    def occupations(self):
        states = np.arange(self.dim)
        return (states[:, None] >> np.arange(self.modes)[None, :]) & 1

    def index(self, occupation):
        occ = np.asarray(occupation, dtype=np.int64)
        if occ.shape != (self.modes,) or np.any((occ != 0) & (occ != 1)):
            raise KeyError(tuple(occupation))
        return int(occ @ (1 << np.arange(self.modes)))

    def state(self, occupation):
        v = np.zeros(self.dim, dtype=np.complex128)
        v[self.index(occupation)] = 1.0
        return v

    def lowering(self, i):
        if not 0 <= i < self.modes:
            raise DimensionMismatch(f"mode {i} out of range")
        if i not in self._ladder:
            rows, cols, vals = _accel.fermion_lower(self.modes, i)
            self._ladder[i] = sparse.csr_matrix(
                (vals.astype(np.complex128), (rows, cols)), shape=(self.dim, self.dim))
        return self._ladder[i]

    def psi(self, f, g):
        """``psi(f, g) = B(f) + B(g)^*``."""
        return self.annihilator(f) + self.creator(g)

    def gamma(self, t):
        """``Gamma_f(T)``: matrix elements are minors of ``T``."""
        t = _one_particle_matrix(self, t)
        occ = self.occupations
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        count = occ.sum(axis=1)
        for a in range(self.dim):
            ra = np.nonzero(occ[a])[0]
            for b in np.nonzero(count == count[a])[0]:
                cb = np.nonzero(occ[b])[0]
                out[a, b] = np.linalg.det(t[np.ix_(ra, cb)]) if ra.size else 1.0
        return out

    def normal_order(self, factors):
        """``:psi(f_1, g_1) ... psi(f_n, g_n):`` for a list of ``(f, g)`` pairs.

        Every creation part is moved to the left of every annihilation part,
        keeping the relative order within each group, with the sign of the
        shuffle.
        """
        n = len(factors)
        if n > 4:
            raise ValueError("normal ordering is implemented for products of at most four fields")
        ann = [sparse.csr_matrix(self.annihilator(f)) for f, _ in factors]
        cre = [sparse.csr_matrix(self.creator(g)) for _, g in factors]
        out = sparse.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        for k in range(n + 1):
            for left in combinations(range(n), k):
                right = [j for j in range(n) if j not in left]
                inversions = sum(1 for i in left for j in right if j < i)
                term = sparse.identity(self.dim, dtype=np.complex128, format="csr")
                for i in left:
                    term = term @ cre[i]
                for j in right:
                    term = term @ ann[j]
                out = out + (-1) ** inversions * term
        return out.toarray()

    def normal_order_bilinear(self, terms):
        """``sum coef * :psi(f1, g1) psi(f2, g2):`` over ``(coef, (f1, g1), (f2, g2))``."""
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for coef, first, second in terms:
            if coef != 0:
                out += coef * self.normal_order([first, second])
        return out


@dataclass(frozen=True, eq=False)
class CompositeSpace:
    fermion: FermionFockSpace
    boson: BosonFockSpace

    @property
    def dim(self):
        return self.fermion.dim * self.boson.dim

    def vacuum(self):
        return np.kron(self.fermion.vacuum(), self.boson.vacuum())

    def lift(self, left=None, right=None):
        return kron_lift(self, left, right)


def kron_lift(space, left=None, right=None):
    """``left (x) right`` on the composite space; ``None`` stands for the identity."""
    nf, nb = space.fermion.dim, space.boson.dim
    left = np.eye(nf, dtype=np.complex128) if left is None else np.asarray(left, dtype=np.complex128)
    right = np.eye(nb, dtype=np.complex128) if right is None else np.asarray(right, dtype=np.complex128)
    if left.shape != (nf, nf) or right.shape != (nb, nb):
        raise DimensionMismatch(f"factors {left.shape} (x) {right.shape} on a ({nf}, {nb}) space")
    return np.kron(left, right)


def boson_annihilator(space, f):
    return space.annihilator(f)


def fermion_annihilator(space, f):
    return space.annihilator(f)


def second_quantize(space, t):
    return space.second_quantize(t)
