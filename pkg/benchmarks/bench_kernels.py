"""Compare the compiled and pure-Python kernel backends.

Times each kernel on representative sizes, then a full 350x350 compressed
decomposition, once per backend, and prints the ratio.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import timeit

import numpy as np

from cssd import kernels
from cssd.bases import BasisSpec, _clamped_knots, build_basis
from cssd.evalsim import SimulationScenario, generate
from cssd.sensing import compress, kron_operator
from cssd.solver import Problem2D, SolverConfig


def kernel_cases(size):
    rng = np.random.default_rng(0)
    z = rng.standard_normal(size)
    g = rng.standard_normal(size)
    out = np.empty(size)
    x = rng.standard_normal(size)
    t = (np.arange(1000) + 0.5) / 1000
    kv = _clamped_knots(2, 497)
    B = build_basis(BasisSpec("bspline", 1000, 2, 497)).matrix
    return {
        f"soft_threshold (n={size})": lambda: kernels.soft_threshold(z, 0.3, out),
        f"prox_l1_step (n={size})": lambda: kernels.prox_l1_step(z, g, 0.1, 0.05, out),
        f"extrapolate (n={size})": lambda: kernels.extrapolate(z, x, 0.7, out),
        "bspline_design (1000 x 500, degree 2)": lambda: kernels.bspline_design(t, kv, 2),
        "column_support (1000 x 500)": lambda: kernels.column_support(B, 1e-12),
    }


def solve_case(ratio):
    sc = SimulationScenario(
        kind="twod",
        dims=(350, 350),
        smooth_basis={"kind": "bspline", "degree": 3, "knots": 3},
        sparse_basis={"kind": "bspline", "degree": 2, "knots": 88},
        s=10,
        seed=7,
        anomaly_layout="blobs",
        anomaly_floor=0.2,
        lambda_policy="scale",
    )
    (B1, B2), (Ba1, Ba2) = sc.bases()
    truth = generate(sc, 0)
    f = np.sqrt(ratio)
    p = int(round(350 * f))
    op = kron_operator(p, 350, p, 350, seed=1)
    data = compress(op, truth.y).data
    prob = Problem2D(data, op, B1, B2, Ba1, Ba2)
    cfg = SolverConfig(0.03 * prob.lambda_max(), accel=True)
    return {f"2-D solve 350x350 at ratio {ratio:g}": lambda: prob.solve(cfg)}


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10**6:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller kernel arrays, fewer repeats")
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; only the python backend is available")
    size = 8_100 if args.quick else 91 * 91 * 4
    repeat = 2 if args.quick else args.repeat
    cases = {**kernel_cases(size), **solve_case(0.08)}
    width = max(map(len, cases))
    print(f"{'case':<{width}}  " + "  ".join(f"{b:>12}" for b in backends) + "   python/compiled")
    for name, fn in cases.items():
        times = {}
        for b in backends:
            with kernels.use(b):
                times[b] = best_time(fn, repeat)
        cols = "  ".join(f"{times[b] * 1e3:10.3f}ms" for b in backends)
        ratio = f"{times['python'] / times['compiled']:8.2f}x" if "compiled" in times else ""
        print(f"{name:<{width}}  {cols}   {ratio}")


if __name__ == "__main__":
    main()
