"""Numba versus pure-numpy timings for the hot kernels.

Usage::

    python benchmarks/bench_kernels.py [--npts 32] [--repeat 7]

Each entry is the minimum over ``--repeat`` calls after one warm-up call (the
warm-up also triggers JIT compilation). Both flavours are called directly, so
``EVTH_DISABLE_NUMBA`` does not matter here.
"""

import argparse
import time

import numpy as np

from evth import kernels as K
from evth.oracles import perturbed_flat
from evth.grid import GridSpec
from evth.radius import NEIGHBOURS


def best_of(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(npts, rng):
    grid = GridSpec(npts)
    h = grid.spacing
    s = perturbed_flat(grid, 1e-3, (1, 1, 0))
    g = np.array(s.g)
    k = 0.1 * rng.standard_normal(g.shape)
    n = 1.0 + 0.01 * rng.standard_normal(grid.shape)
    ginv, det = K.inv_det_numpy(g)
    dg = K.d1_stack_numpy(g, h)
    gam = K.christoffel2_numpy(ginv, dg)
    ric = K.ricci_from_gamma_numpy(gam, h)
    dn = K.d1_stack_numpy(n, h)
    ddn = K.d1_stack_numpy(dn, h)
    dk = K.d1_stack_numpy(k, h)
    cov = K.cov_deriv_sym_numpy(dk, gam, k)
    yield "d1_stack(g)", (g, h)
    yield "inv_det", (g,)
    yield "christoffel2", (ginv, dg)
    yield "ricci_from_gamma", (gam, h)
    yield "eig3", (g,)
    yield "rate_dk", (ginv, gam, ric, k, n, dn, ddn)
    yield "sq_norm(sym)", (k, ginv)
    yield "sq_norm(rank3)", (cov, ginv)
    yield "cov_deriv_sym", (dk, gam, k)
    yield "kgk", (k, ginv)
    yield "curl_sym", (cov, g, det)
    small = GridSpec(min(npts, 16))
    gs = np.array(perturbed_flat(small, 1e-3).g)
    src = (0, 0, 0)
    yield "shortest_paths(plain)", (gs, small.spacing, src, NEIGHBOURS, np.inf, False)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--npts", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"grid {args.npts}^3, best of {args.repeat}")
    print(f"{'kernel':24s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, a in cases(args.npts, rng):
        name = label.split("(")[0]
        np_fn = getattr(K, f"{name}_numpy")
        nb_fn = getattr(K, f"{name}_numba")
        t_np = best_of(lambda: np_fn(*a), args.repeat)
        t_nb = best_of(lambda: nb_fn(*a), args.repeat)
        print(f"{label:24s} {1e3 * t_np:10.3f} {1e3 * t_nb:10.3f} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
