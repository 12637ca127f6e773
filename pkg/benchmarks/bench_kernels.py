"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 20000] [--d 500] [--density 0.05]

Kernel timings call both kernel modules directly; the end-to-end solver
timing runs one OPDA-FM epoch per backend in a subprocess so that the
``OPDA_BACKEND`` switch is honoured.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from opda import _kernels_numba as nb
from opda import _kernels_numpy as npk
from opda.numcore import RandomSource, sample_minibatch
from opda.synth import make_synthetic

SOLVER_SNIPPET = """
import time
from opda.synth import make_synthetic
from opda.objectives import LogisticObjective
from opda.solvers import SolverConfig, run
ds, _ = make_synthetic({n}, {d}, {density}, 0)
obj = LogisticObjective(ds, 1.0 / ds.n_samples)
cfg = SolverConfig(eta=1.0, lambda1=1e-4, batch={batch}, m_inner={m}, max_outer=1)
run(obj, cfg)  # warm-up / JIT
t = time.perf_counter()
run(obj, cfg)
print((time.perf_counter() - t) * 1e3)
"""


def bench(fn, repeat=5):
    fn()
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number * 1e6


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--d", type=int, default=500)
    ap.add_argument("--density", type=float, default=0.05)
    ap.add_argument("--skip-solver", action="store_true")
    args = ap.parse_args()

    ds, _ = make_synthetic(args.n, args.d, args.density, 0)
    rng = RandomSource(1)
    batch = int(np.ceil(np.sqrt(args.n)))
    rows = sample_minibatch(rng, args.n, batch)
    x = rng.generator.standard_normal(args.d)
    w = rng.generator.standard_normal(batch)
    blk = np.ascontiguousarray(rng.generator.standard_normal((args.d, 4)))
    big = rng.generator.standard_normal(100_000)
    ref = rng.generator.standard_normal(100_000)
    csr = (ds.indptr, ds.indices, ds.data)

    cases = {
        "csr_margins (minibatch)": lambda k: k.csr_margins(*csr, rows, x),
        "csr_accumulate (minibatch)": lambda k: k.csr_accumulate(*csr, rows, w, args.d),
        "csr_hvp r=4 (minibatch)": lambda k: k.csr_hvp(*csr, rows, w, blk),
        "csr_margins (full)": lambda k: k.csr_margins(*csr, np.arange(args.n), x),
        "pseudo_grad 1e5": lambda k: k.pseudo_grad(big, ref, 0.5),
        "align_phi 1e5": lambda k: k.align_phi(big, ref, 0.1),
        "partial_fisher_yates": lambda k: k.partial_fisher_yates(args.n, np.arange(batch) % args.n),
    }
    print(f"n={args.n} d={args.d} density={args.density} batch={batch}")
    print(f"{'kernel':30s} {'numba us':>12s} {'numpy us':>12s} {'speedup':>8s}")
    for name, call in cases.items():
        t_nb = bench(lambda: call(nb))
        t_np = bench(lambda: call(npk))
        print(f"{name:30s} {t_nb:12.1f} {t_np:12.1f} {t_np / t_nb:8.2f}")

    if args.skip_solver:
        return
    code = SOLVER_SNIPPET.format(n=args.n, d=args.d, density=args.density, batch=batch,
                                 m=int(np.ceil(args.n / batch)))
    times = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, OPDA_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        times[backend] = float(out.stdout.strip().splitlines()[-1])
    print(f"{'opda-fm epoch (ms)':30s} {times['numba']:12.1f} {times['numpy']:12.1f} "
          f"{times['numpy'] / times['numba']:8.2f}")


if __name__ == "__main__":
    main()
