"""Compare the compiled and numpy wedge kernels.

    python3 benchmarks/bench_wedge.py [--repeat N]

Two measurements: the raw kernel on dense random operands, and a full Chern
form computation (rank 3 metric, jet order 3, 64 points) with each backend
swapped in.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from chernforms import kernels
from chernforms.geometry import chern_connection, chern_form
from chernforms.grassmann import GeneratorSet, Multivector
from chernforms.identities import random_metric, random_points
from chernforms.jets import Chart, _table_space


def dense_operand(rng, gens, order, batch, terms):
    size = _table_space(2 * gens.n, order).size(order)
    masks = np.sort(rng.choice(1 << gens.count, size=terms, replace=False)).astype(np.int64)
    coeffs = rng.normal(size=(terms, size, batch)) + 1j * rng.normal(size=(terms, size, batch))
    return Multivector(gens, order, masks, coeffs)


def kernel_args(a, b):
    sp = _table_space(2 * a.n, a.order)
    t = sp.n_triples(a.order)
    return (a.masks, a.coeffs, b.masks, np.ascontiguousarray(b.coeffs), sp.prod_i[:t],
            sp.prod_j[:t], sp.prod_k[:t], sp.size(a.order), a.gens.count)


def chern_workload():
    rng = np.random.default_rng(0)
    chart = Chart(random_points(rng, 64, 2), 3)
    metric = random_metric(chart, 3, rng)
    return lambda: chern_form(chern_connection(metric))


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    compiled = kernels.compiled_wedge_terms()
    backends = {"numpy": kernels.python_wedge_terms}
    if compiled is None:
        print("compiled kernel not built; timing the numpy kernel only")
    else:
        backends["cython"] = compiled

    rng = np.random.default_rng(1)
    gens = GeneratorSet(2, 3)
    cases = [("order 0, batch 4096, 64 x 64 terms", 0, 4096, 64),
             ("order 2, batch 64, 48 x 48 terms", 2, 64, 48),
             ("order 4, batch 16, 24 x 24 terms", 4, 16, 24)]
    print(f"{'case':40s}" + "".join(f"{name:>12s}" for name in backends) + f"{'speedup':>10s}")
    for label, order, batch, terms in cases:
        a = dense_operand(rng, gens, order, batch, terms)
        b = dense_operand(rng, gens, order, batch, terms)
        argv_ = kernel_args(a, b)
        ref = None
        times = {}
        for name, fn in backends.items():
            times[name] = best_of(lambda: fn(*argv_), args.repeat)
            masks, coeffs = fn(*argv_)
            out = Multivector(gens, order, masks, coeffs)
            if ref is None:
                ref = out
            else:
                assert (out - ref).max_abs() <= 1e-12 * max(1.0, ref.max_abs())
        speed = times["numpy"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:40s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in backends)
              + f"{speed:9.1f}x")

    work = chern_workload()
    saved = kernels.wedge_terms
    times = {}
    try:
        for name, fn in backends.items():
            kernels.wedge_terms = fn
            times[name] = best_of(work, max(1, args.repeat // 2))
    finally:
        kernels.wedge_terms = saved
    speed = times["numpy"] / times["cython"] if "cython" in times else float("nan")
    print(f"{'chern form, rank 3, 64 points':40s}"
          + "".join(f"{times[n] * 1e3:10.2f}ms" for n in backends) + f"{speed:9.1f}x")


if __name__ == "__main__":
    main()
