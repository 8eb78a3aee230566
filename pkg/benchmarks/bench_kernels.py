"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import timeit

import numpy as np

from dickecr import kernels
from dickecr.cheby import ChebyshevPropagator
from dickecr.model import ModelParams, build_dicke_hamiltonian


def cases():
    p = ModelParams(1.0, 0.01, 0.01, 1.5, 200)  # fig1 size, dim 804
    prop = ChebyshevPropagator(build_dicke_hamiltonian(p))
    coeffs = prop.coefficients(prop.max_dt)
    psi = np.random.default_rng(0).normal(size=p.basis.dim) + 0j
    y0 = np.array([0.5, 0.0, 0.0, 5.0, 0.0])
    b = prop.bounds
    return {
        f"chebyshev_series (dim {p.basis.dim}, {coeffs.size} terms)": lambda k: k.chebyshev_series(
            prop.indptr, prop.indices, prop.data, psi, coeffs, b.half_width, b.center),
        "bessel_j_sequence (x=400, n=500)": lambda k: k.bessel_j_sequence(400.0, 500),
        "rk4_spin_field (20000 steps)": lambda k: k.rk4_spin_field(
            y0, 1.0, 0.01, 0.02, 5.0, 0.0, False, 2 * math.pi / 200, 20000, 100),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    found = kernels.backends()
    if "cython" not in found:
        print("compiled extension not built; only the python backend is available")
    print(f"{'kernel':48s}" + "".join(f"{n:>12s}" for n in found) + ("     speedup" if len(found) > 1 else ""))
    for label, fn in cases().items():
        best = {}
        for name, mod in found.items():
            number = 1 if name == "python" and "rk4" in label else 3
            best[name] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
        row = f"{label:48s}" + "".join(f"{best[n] * 1e3:10.2f}ms" for n in found)
        if len(found) > 1:
            row += f"{best['python'] / best['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
