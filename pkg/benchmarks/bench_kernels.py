"""Compare the numba and numpy backends of the two hot kernels.

    python3 benchmarks/bench_kernels.py [--n 8001] [--steps 200] [--repeat 5]

Reports best-of-repeat wall time per backend and the max difference between
their outputs.  The first numba call (compilation) is excluded.
"""
import argparse
import time

import numpy as np

from deltanls import _kernels
from deltanls.discrete_operators import hamiltonian_bands, soliton_arrays
from deltanls.soliton_family import Grid, SolitonParams


def best_time(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_strang(n_half, steps, repeat):
    grid = Grid(0.05, n_half)
    params = SolitonParams(-1.0, -1, 5.0, 1.0)
    Q = soliton_arrays(grid, params, "closed").Q
    u0 = Q * (1 + 0.01 * np.exp(-grid.x**2)) + 0j
    hd, ho = hamiltonian_bands(grid, params.q)
    res = {}
    for backend in ("numpy", "numba"):
        if backend == "numba" and not _kernels.HAVE_NUMBA:
            continue
        st = _kernels.strang_stepper(hd, ho, 0.01, params.sigma, params.p, backend=backend)
        st.run(u0, 1)  # warm up / compile
        res[backend] = best_time(lambda: st.run(u0, steps), repeat)
    return res


def bench_volterra(n, repeat):
    h = 0.0025
    z = h * np.arange(n)
    rng = np.random.default_rng(0)
    k1 = np.exp(-z) * np.sin(2 * z) / 2 + 0j
    k2 = (1 - np.exp(-2 * z)) / 2 + 0j
    F0 = rng.standard_normal(n) * np.exp(-z) + 0j
    F1 = rng.standard_normal(n) * np.exp(-z) + 0j
    res = {}
    for backend in ("numpy", "numba"):
        if backend == "numba" and not _kernels.HAVE_NUMBA:
            continue
        _kernels.volterra_apply(k1[:8], k2[:8], F0[:8], F1[:8], h, backend=backend)
        res[backend] = best_time(lambda: _kernels.volterra_apply(k1, k2, F0, F1, h, backend=backend), repeat)
    return res


def report(name, res):
    line = [name]
    for backend, (t, _) in res.items():
        line.append(f"{backend} {t * 1e3:9.2f} ms")
    if len(res) == 2:
        (ta, a), (tb, b) = res["numpy"], res["numba"]
        a = np.concatenate([np.ravel(x) for x in (a if isinstance(a, tuple) else (a,))])
        b = np.concatenate([np.ravel(x) for x in (b if isinstance(b, tuple) else (b,))])
        line.append(f"speedup {ta / tb:6.1f}x  max|diff| {np.max(np.abs(a - b)):.2e}")
    print("  ".join(line))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=8001, help="grid nodes for the split-step kernel")
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--volterra-n", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"numba available: {_kernels.HAVE_NUMBA}; default backend: {_kernels.BACKEND}")
    report(f"strang n={args.n} steps={args.steps}", bench_strang(args.n // 2, args.steps, args.repeat))
    report(f"volterra n={args.volterra_n}", bench_volterra(args.volterra_n, args.repeat))


if __name__ == "__main__":
    main()
