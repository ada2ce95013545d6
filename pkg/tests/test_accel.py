import json
import os
import subprocess
import sys

import numpy as np
import pytest

from cdyson import _accel

needs_numba = pytest.mark.skipif(not _accel.NUMBA_ENABLED, reason="numba path disabled")


@needs_numba
def test_kernels_agree(rng):
    assert np.array_equal(_accel._occupations_numpy(4, 3), _accel._occupations_numba(4, 3))
    basis = _accel._occupations_numpy(3, 3)
    keys = basis @ (4 ** np.arange(3, dtype=np.int64))
    order = np.argsort(keys, kind="stable")
    for mode in range(3):
        a = _accel._boson_lower_numpy(basis, keys, order, mode, 4)
        b = _accel._boson_lower_numba(basis, keys, order, mode, 4)
        sa, sb = np.lexsort((a[0], a[1])), np.lexsort((b[0], b[1]))
        for x, y in zip(a, b):
            assert np.array_equal(np.asarray(x)[sa], np.asarray(y)[sb])
    for mode in range(4):
        a, b = _accel._fermion_lower_numpy(4, mode), _accel._fermion_lower_numba(4, mode)
        sa, sb = np.argsort(a[1]), np.argsort(b[1])
        for x, y in zip(a, b):
            assert np.array_equal(np.asarray(x)[sa], np.asarray(y)[sb])
    x = rng.normal(size=(5, 3, 2)) + 1j * rng.normal(size=(5, 3, 2))
    lam = rng.uniform(0, 2, 5)
    zeta = rng.normal(size=3) - 1j * rng.uniform(size=3)
    assert np.allclose(_accel._phase_scale_numpy(x, lam, zeta, -1.0), _accel._phase_scale_numba(x, lam, zeta, -1.0),
                       rtol=1e-15, atol=0)
    rown = rng.uniform(size=(4, 9))
    lam_rows = np.sort(rng.uniform(0, 3, 9))[::-1].copy()
    lv = np.linspace(0, 2, 4)
    assert np.array_equal(_accel._shift_scan_numpy(rown, lam_rows, lv, 0.5),
                          _accel._shift_scan_numba(rown, lam_rows, lv, 0.5))


_PROBE = (
    "import json, numpy as np; from cdyson import _accel, InteractionSystem, dyson_series;"
    "from cdyson.fock import BosonFockSpace, OneParticleSpace;"
    "r=np.random.default_rng(1); d=6; lam=np.sort(r.uniform(0,1,d)); lam[0]=0;"
    "a=r.normal(size=(d,d)); a=(a+a.T)/2*0.2; s=InteractionSystem(np.diag(lam), a);"
    "u=dyson_series(s, 1-1j, 0j).value; b=BosonFockSpace(OneParticleSpace(3), 3);"
    "print(json.dumps({'numba': _accel.NUMBA_ENABLED, 'u': [u.real.tolist(), u.imag.tolist()],"
    "'basis': b.basis.tolist(), 'b': s.certificate.b, 'low': b.lowering(1).toarray().real.tolist()}))"
)


def _probe(flag):
    env = dict(os.environ, CDYSON_DISABLE_NUMBA=flag)
    r = subprocess.run([sys.executable, "-c", _PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(r.stdout)


def test_env_flag_switches_path_with_identical_results():
    off = _probe("1")
    assert off["numba"] is False
    on = _probe("0")
    assert off["basis"] == on["basis"] and off["low"] == on["low"] and off["b"] == on["b"]
    assert np.allclose(np.array(off["u"]), np.array(on["u"]), rtol=0, atol=1e-14)
