"""Hot loops with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``CDYSON_DISABLE_NUMBA`` is
unset (or "0"). Both paths return identical arrays; ``tests/test_accel.py``
holds them to that.
"""
import itertools
import os

import numpy as np

_flag = os.environ.get("CDYSON_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


# ---------------------------------------------------------------------------
# boson occupation basis

def _occupations_numpy(d, n_max):
    rows = []
    for total in range(n_max + 1):
        sector = [c for c in itertools.product(range(total + 1), repeat=d) if sum(c) == total]
        sector.sort(reverse=True)
        rows.extend(sector)
    return np.array(rows, dtype=np.int64).reshape(-1, d)


@njit(cache=True)
def _occupations_numba(d, n_max):
    # count first: C(d + n_max, n_max)
    count = 1
    for k in range(1, n_max + 1):
        count = count * (d + k) // k
    out = np.zeros((count, d), dtype=np.int64)
    row = 0
    cur = np.zeros(d, dtype=np.int64)
    for total in range(n_max + 1):
        # reverse-lex walk within the sector: start from (total, 0, ..., 0)
        cur[:] = 0
        cur[0] = total
        while True:
            out[row, :] = cur
            row += 1
            # next composition in reverse-lex order
            j = d - 2
            while j >= 0 and cur[j] == 0:
                j -= 1
            if j < 0:
                break
            cur[j] -= 1
            rest = 0
            for m in range(j + 1, d):
                rest += cur[m]
                cur[m] = 0
            cur[j + 1] = rest + 1
    return out


def occupation_basis(d, n_max):
    """All occupation vectors with total <= n_max, graded by total then reverse-lex."""
    if NUMBA_ENABLED:
        return _occupations_numba(int(d), int(n_max))
    return _occupations_numpy(int(d), int(n_max))


# ---------------------------------------------------------------------------
# boson lowering operator a_i as (rows, cols, vals)

def _boson_lower_numpy(basis, keys, order, mode, base):
    occ = basis[:, mode]
    src = np.nonzero(occ > 0)[0]
    tkeys = keys[src] - base ** mode
    pos = np.searchsorted(keys[order], tkeys)
    dst = order[pos]
    return dst, src, np.sqrt(occ[src].astype(np.float64))


@njit(cache=True)
def _boson_lower_numba(basis, keys, order, mode, base):
    n = basis.shape[0]
    sorted_keys = keys[order]
    step = 1
    for _ in range(mode):
        step *= base
    cnt = 0
    for s in range(n):
        if basis[s, mode] > 0:
            cnt += 1
    rows = np.empty(cnt, dtype=np.int64)
    cols = np.empty(cnt, dtype=np.int64)
    vals = np.empty(cnt, dtype=np.float64)
    k = 0
    for s in range(n):
        occ = basis[s, mode]
        if occ > 0:
            target = keys[s] - step
            pos = np.searchsorted(sorted_keys, target)
            rows[k] = order[pos]
            cols[k] = s
            vals[k] = np.sqrt(occ)
            k += 1
    return rows, cols, vals


def boson_lower(basis, keys, order, mode, base):
    if NUMBA_ENABLED:
        return _boson_lower_numba(basis, keys, order, int(mode), int(base))
    return _boson_lower_numpy(basis, keys, order, int(mode), int(base))


# ---------------------------------------------------------------------------
# fermion lowering operator b_i with the occupation-parity sign

def _fermion_lower_numpy(d, mode):
    states = np.arange(1 << d, dtype=np.int64)
    src = states[(states >> mode) & 1 == 1]
    below = src & ((1 << mode) - 1)
    parity = np.array([bin(int(v)).count("1") & 1 for v in below], dtype=np.int64)
    return src ^ (1 << mode), src, np.where(parity == 1, -1.0, 1.0)


@njit(cache=True)
def _fermion_lower_numba(d, mode):
    n = 1 << d
    half = n >> 1
    rows = np.empty(half, dtype=np.int64)
    cols = np.empty(half, dtype=np.int64)
    vals = np.empty(half, dtype=np.float64)
    mask = (1 << mode) - 1
    k = 0
    for s in range(n):
        if (s >> mode) & 1:
            v = s & mask
            p = 0
            while v:
                v &= v - 1
                p ^= 1
            rows[k] = s ^ (1 << mode)
            cols[k] = s
            vals[k] = -1.0 if p else 1.0
            k += 1
    return rows, cols, vals


def fermion_lower(d, mode):
    if NUMBA_ENABLED:
        return _fermion_lower_numba(int(d), int(mode))
    return _fermion_lower_numpy(int(d), int(mode))


# ---------------------------------------------------------------------------
# interaction-picture phase scaling: out[a, j, ...] = exp(sign*i*zeta_j*lam_a) * x[a, j, ...]

def _phase_scale_numpy(x, lam, zeta, sign):
    ph = np.exp(sign * 1j * np.outer(lam, zeta))
    return x * ph.reshape(ph.shape + (1,) * (x.ndim - 2))


@njit(cache=True)
def _phase_scale_numba(x, lam, zeta, sign):
    n, q, r = x.shape
    out = np.empty_like(x)
    for a in range(n):
        for j in range(q):
            ph = np.exp(sign * 1j * zeta[j] * lam[a])
            for c in range(r):
                out[a, j, c] = ph * x[a, j, c]
    return out


def phase_scale(x, lam, zeta, sign):
    """Scale a (dim, nodes, cols) block row-wise by exp(sign*i*zeta_j*lam_a)."""
    if NUMBA_ENABLED:
        return _phase_scale_numba(np.ascontiguousarray(x, dtype=np.complex128),
                                  np.asarray(lam, dtype=np.float64),
                                  np.asarray(zeta, dtype=np.complex128), float(sign))
    return _phase_scale_numpy(x, lam, zeta, sign)


# ---------------------------------------------------------------------------
# spectral-shift scan used by C0 certification

def _shift_scan_numpy(rownorm2, lam_rows, e_levels, tol2):
    # rownorm2[k] is the row-norm^2 vector of A restricted to columns with
    # eigenvalue <= e_levels[k]; rows sorted by descending eigenvalue
    out = np.zeros(len(e_levels))
    for k in range(len(e_levels)):
        tail = np.cumsum(rownorm2[k])
        hit = np.nonzero(tail > tol2)[0]
        out[k] = 0.0 if hit.size == 0 else max(0.0, lam_rows[hit[0]] - e_levels[k])
    return out


@njit(cache=True)
def _shift_scan_numba(rownorm2, lam_rows, e_levels, tol2):
    m, n = rownorm2.shape
    out = np.zeros(m)
    for k in range(m):
        acc = 0.0
        for i in range(n):
            acc += rownorm2[k, i]
            if acc > tol2:
                out[k] = max(0.0, lam_rows[i] - e_levels[k])
                break
    return out


def shift_scan(rownorm2, lam_rows, e_levels, tol2):
    """Smallest certified shift per energy level (rows sorted by descending eigenvalue)."""
    rownorm2 = np.ascontiguousarray(rownorm2, dtype=np.float64)
    if NUMBA_ENABLED:
        return _shift_scan_numba(rownorm2, np.asarray(lam_rows, dtype=np.float64),
                                 np.asarray(e_levels, dtype=np.float64), float(tol2))
    return _shift_scan_numpy(rownorm2, lam_rows, e_levels, tol2)
