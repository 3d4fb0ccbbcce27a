"""Compare the compiled and numpy kernels on family-sized batches.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from glminmax import _kernels_py, kernels
from glminmax.glenergy import _edge_arrays
from glminmax.manifold import flat_torus, unit_sphere

try:
    from glminmax import _kernels as compiled
except ImportError:
    compiled = None


def cases():
    # (label, mesh, batch size): batch sizes match the interior of typical disk families
    yield "sphere k=4", unit_sphere(4), 193
    yield "torus2 m=64", flat_torus(2, 64), 97
    yield "torus3 m=16", flat_torus(3, 16), 97


def bench(label, mesh, nf, repeat):
    tail, head, weight, mass = _edge_arrays(mesh)
    U = np.random.default_rng(0).normal(scale=0.8, size=(nf, mesh.n_vertices, 2))
    impls = [("numpy", _kernels_py)] + ([("cython", compiled)] if compiled else [])
    times = {}
    for name, impl in impls:
        ops = {
            "energy_grad": lambda impl=impl: kernels.energy_grad(U, tail, head, weight, mass, 25.0,
                                                                  impl=impl),
            "energy": lambda impl=impl: kernels.energy(U, tail, head, weight, mass, 25.0, impl=impl),
            "truncate": lambda impl=impl: kernels.truncate(U.copy(), impl=impl),
        }
        for op, fn in ops.items():
            times[name, op] = min(timeit.repeat(fn, number=1, repeat=repeat))
    for op in ("energy_grad", "energy", "truncate"):
        line = f"{label:14s} {op:12s} numpy {1e3 * times['numpy', op]:9.2f} ms"
        if compiled:
            c = times["cython", op]
            line += f"   cython {1e3 * c:9.2f} ms   speedup {times['numpy', op] / c:6.1f}x"
        print(line)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    for label, mesh, nf in cases():
        bench(label, mesh, nf, args.repeat)


if __name__ == "__main__":
    main()
