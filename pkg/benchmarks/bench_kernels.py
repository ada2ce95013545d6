"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Kernel rows call both implementations directly in one process (the numba
ones are warmed up first so compilation is not timed).  ``--end-to-end``
also runs one Dyson-series evaluation in two subprocesses, with and without
``CDYSON_DISABLE_NUMBA=1``.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cdyson import _accel


def _cases(rng):
    dim, nodes, cols = 64, 32, 64
    x = rng.normal(size=(dim, nodes, cols)) + 1j * rng.normal(size=(dim, nodes, cols))
    lam = np.sort(rng.uniform(0, 2, dim))
    zeta = rng.normal(size=nodes) - 1j * rng.uniform(0, 1, nodes)
    basis = _accel._occupations_numpy(6, 4)
    keys = basis @ (5 ** np.arange(6, dtype=np.int64))
    order = np.argsort(keys, kind="stable")
    rown = rng.uniform(size=(200, 400))
    lam_rows = np.sort(rng.uniform(0, 3, 400))[::-1].copy()
    levels = np.linspace(0, 3, 200)
    return {
        "occupation_basis(8, 5)": (_accel._occupations_numpy, _accel._occupations_numba, (8, 5)),
        "boson_lower(6 modes, n<=4)": (_accel._boson_lower_numpy, _accel._boson_lower_numba,
                                       (basis, keys, order, 2, 5)),
        "fermion_lower(12 modes)": (_accel._fermion_lower_numpy, _accel._fermion_lower_numba, (12, 5)),
        "phase_scale(64x32x64)": (_accel._phase_scale_numpy, _accel._phase_scale_numba, (x, lam, zeta, -1.0)),
        "shift_scan(200x400)": (_accel._shift_scan_numpy, _accel._shift_scan_numba,
                                (rown, lam_rows, levels, 1e-3)),
    }


_E2E = (
    "import time, numpy as np; from cdyson import InteractionSystem, dyson_series;"
    "r=np.random.default_rng(0); d=32; lam=np.sort(r.uniform(0,1.5,d)); lam[0]=0;"
    "a=r.normal(size=(d,d)); a=(a+a.T)/2; a*=0.8/np.linalg.norm(a,2);"
    "s=InteractionSystem(np.diag(lam), a); dyson_series(s, 1-1j, 0j);"
    "t=time.perf_counter(); dyson_series(s, 2-2.5j, -1-0.5j); print(time.perf_counter()-t)"
)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--end-to-end", action="store_true")
    args = p.parse_args(argv)
    if not _accel.NUMBA_ENABLED:
        print("numba path disabled in this process; only numpy timings are meaningful")
    rng = np.random.default_rng(0)
    print(f"{'kernel':30s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}")
    for name, (f_np, f_nb, a) in _cases(rng).items():
        f_nb(*a)  # compile
        t_np = min(timeit.repeat(lambda: f_np(*a), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: f_nb(*a), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:30s} {t_np:12.3f} {t_nb:12.3f} {t_np / t_nb:8.2f}")
    if args.end_to_end:
        for label, flag in (("numba", "0"), ("numpy", "1")):
            env = dict(os.environ, CDYSON_DISABLE_NUMBA=flag)
            out = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
            print(f"dyson_series dim 32 [{label}]: {float(out.stdout) * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
