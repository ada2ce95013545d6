"""Polyline contours in the complex plane and Gauss-Legendre quadrature on them."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre

from .errors import CoincidentInsertions, InsertionOutOfRange, NonFiniteIntegrand, NotOnContour

SNAP_TOL = 1e-10
_SIMPLE_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule with ``q`` nodes per segment."""

    q: int = 32

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("need at least two nodes per segment")

    @cached_property
    def nodes_weights(self):
        return legendre.leggauss(self.q)

    @property
    def nodes(self):
        return self.nodes_weights[0]

    @property
    def weights(self):
        return self.nodes_weights[1]

    @cached_property
    def integration_matrix(self):
        """``S[i, j] = int_{-1}^{x_i} l_j(x) dx`` for the Lagrange basis ``l_j`` on the nodes."""
        x, w = self.nodes_weights
        q = self.q
        pm = legendre.legvander(x, q - 1)  # pm[j, m] = P_m(x_j)
        coeffs = (w[:, None] * pm) * ((2 * np.arange(q) + 1) / 2.0)[None, :]
        integ = legendre.legint(coeffs.T, lbnd=-1, axis=0)  # (q+1, q)
        return legendre.legvander(x, q) @ integ

    def doubled(self):
        return QuadratureRule(2 * self.q)


def _segments_intersect(p1, p2, p3, p4, tol):
    d1, d2 = p2 - p1, p4 - p3
    cross = lambda a, b: a.real * b.imag - a.imag * b.real
    den = cross(d1, d2)
    r = p3 - p1
    if abs(den) <= tol * abs(d1) * abs(d2):
        if abs(cross(r, d1)) > tol * max(abs(d1), 1.0):
            return False
        # collinear: overlap test along d1
        t0 = (r * np.conj(d1)).real / abs(d1) ** 2
        t1 = ((p4 - p1) * np.conj(d1)).real / abs(d1) ** 2
        lo, hi = min(t0, t1), max(t0, t1)
        return hi >= -tol and lo <= 1 + tol
    t = cross(r, d2) / den
    u = cross(r, d1) / den
    return -tol <= t <= 1 + tol and -tol <= u <= 1 + tol


@dataclass(frozen=True)
class Contour:
    """Oriented simple polyline from ``vertices[0]`` to ``vertices[-1]``."""

    vertices: tuple

    def __post_init__(self):
        v = tuple(complex(z) for z in self.vertices)
        if len(v) < 2:
            raise ValueError("a contour needs at least two vertices")
        for a, b in zip(v, v[1:]):
            if a == b:
                raise ValueError(f"repeated consecutive vertex {a}")
        object.__setattr__(self, "vertices", v)
        segs = list(zip(v, v[1:]))
        for i in range(len(segs)):
            for j in range(i + 1, len(segs)):
                if j == i + 1:
                    # adjacent: must not fold back onto each other
                    (a, b), (_, c) = segs[i], segs[j]
                    d1, d2 = b - a, c - b
                    par = (d1 * np.conj(d2))
                    if abs(par.imag) <= _SIMPLE_TOL * abs(d1) * abs(d2) and par.real < 0:
                        raise ValueError("contour folds back on itself")
                    continue
                if _segments_intersect(*segs[i], *segs[j], _SIMPLE_TOL):
                    raise ValueError(f"segments {i} and {j} intersect; contour is not simple")

    @property
    def start(self):
        return self.vertices[0]

    @property
    def end(self):
        return self.vertices[-1]

    @cached_property
    def segment_lengths(self):
        v = np.array(self.vertices)
        return np.abs(np.diff(v))

    @cached_property
    def cumulative(self):
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths)])

    @property
    def length(self):
        return float(self.cumulative[-1])

    def parameter(self, zeta):
        """Arclength parameter of ``zeta`` (snapped to the nearest contour point)."""
        zeta = complex(zeta)
        best, best_t = np.inf, None
        for k, (a, b) in enumerate(zip(self.vertices, self.vertices[1:])):
            d = b - a
            s = min(max(((zeta - a) * np.conj(d)).real / abs(d) ** 2, 0.0), 1.0)
            dist = abs(a + s * d - zeta)
            if dist < best:
                best, best_t = dist, self.cumulative[k] + s * self.segment_lengths[k]
        scale = max(1.0, max(abs(z) for z in self.vertices))
        if best > SNAP_TOL * scale:
            raise NotOnContour(f"{zeta} is {best:.2e} away from the contour")
        return float(best_t)

    def point(self, t):
        k = int(np.clip(np.searchsorted(self.cumulative, t, side="right") - 1, 0, len(self.segment_lengths) - 1))
        a, b = self.vertices[k], self.vertices[k + 1]
        s = (t - self.cumulative[k]) / self.segment_lengths[k]
        return a + s * (b - a)


def order_compare(c, z1, z2):
    """'succeeds' if ``z1`` comes later along ``c`` than ``z2``, 'precedes' if earlier."""
    t1, t2 = c.parameter(z1), c.parameter(z2)
    if abs(t1 - t2) <= 1e-12 * max(1.0, c.length):
        return "equal"
    return "succeeds" if t1 > t2 else "precedes"


def integrate(c, g, rule=QuadratureRule()):
    """Line integral of the matrix-valued ``g`` along ``c``."""
    x, w = rule.nodes_weights
    total = None
    for a, b in zip(c.vertices, c.vertices[1:]):
        half = (b - a) / 2.0
        mid = (a + b) / 2.0
        for xj, wj in zip(x, w):
            val = np.asarray(g(mid + half * xj), dtype=np.complex128)
            if not np.all(np.isfinite(val)):
                raise NonFiniteIntegrand(f"integrand not finite at {mid + half * xj}")
            term = (wj * half) * val
            total = term if total is None else total + term
    return total


def gml_contour(T, eps, insertions=()):
    """Polyline -T(1-i eps) -> t_min -> t_max -> T(1-i eps) through real insertion times."""
    if not (T > 0 and eps > 0):
        raise ValueError("T and eps must be positive")
    ts = sorted(float(t) for t in insertions)
    if any(not np.isfinite(t) for t in ts):
        raise InsertionOutOfRange("insertion times must be finite")
    if ts and max(abs(ts[0]), abs(ts[-1])) >= T:
        raise InsertionOutOfRange(f"insertions must lie in (-{T}, {T})")
    if any(b == a for a, b in zip(ts, ts[1:])):
        raise CoincidentInsertions("insertion times must be distinct")
    start, end = -T * (1 - 1j * eps), T * (1 - 1j * eps)
    middle = [] if not ts else ([ts[0]] if ts[0] == ts[-1] else [ts[0], ts[-1]])
    return Contour(tuple([start, *middle, end]))
