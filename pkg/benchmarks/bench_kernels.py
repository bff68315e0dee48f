"""Compare the numba and numpy kernel backends, and time one full replication.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

The kernel section times each kernel pair directly. The end-to-end section
runs one Vervaat replication at n = 2**16 in two subprocesses, with and
without ``LRDVERVAAT_DISABLE_JIT``, so the whole import-time binding is
exercised. Simulation at this size is dominated by the FFT convolution, which
numba does not touch, so the end-to-end gap is much smaller than the kernel gap.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from lrdvervaat import _kernels as k

E2E = """
import json, time
from lrdvervaat import _kernels
from lrdvervaat.montecarlo import ExperimentConfig, lrd_model, run_replications
cfg = ExperimentConfig(lrd_model(0.7, 2**16), ("thm13", "thm11"), (2**16,), R=1)
run_replications(cfg, threads=1)  # warm-up (JIT compile, FFT plans)
t0 = time.perf_counter()
cfg = ExperimentConfig(lrd_model(0.7, 2**16), ("thm13", "thm11"), (2**16,), R={R})
run_replications(cfg, threads=1)
print(json.dumps({{"backend": _kernels.backend(), "seconds_per_replication": (time.perf_counter() - t0) / {R}}}))
"""


def best(stmt, repeat):
    return min(timeit.repeat(stmt, number=1, repeat=repeat))


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n, m in [(4096, 64), (4096, 512)]:
        e, c = rng.standard_normal(n + m), rng.random(m + 1)
        k.convolve_valid_numba(e, c)
        rows.append((f"convolve_valid n={n} M={m}",
                     best(lambda: k.convolve_valid_numba(e, c), repeat),
                     best(lambda: k.convolve_valid_numpy(e, c), repeat)))
    for n in (2**12, 2**16):
        u = np.sort(rng.random(n))
        t = np.linspace(0, 1, 4 * n)
        k.step_integrals_numba(u, t)
        rows.append((f"step_integrals n={n} grid={4 * n}",
                     best(lambda: k.step_integrals_numba(u, t), repeat),
                     best(lambda: k.step_integrals_numpy(u, t), repeat)))
    return rows


def end_to_end(reps):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, LRDVERVAAT_DISABLE_JIT=flag)
        res = subprocess.run([sys.executable, "-c", E2E.format(R=reps)], env=env, capture_output=True,
                             text=True, check=True)
        d = json.loads(res.stdout.strip().splitlines()[-1])
        out[d["backend"]] = d["seconds_per_replication"]
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--e2e-reps", type=int, default=5)
    args = ap.parse_args()
    if not k.HAVE_NUMBA:
        print("numba not installed; only the numpy backend is available")
        return
    print(f"{'kernel':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'ratio':>7s}")
    for name, tj, tn in kernel_table(args.repeat):
        print(f"{name:40s} {1e3 * tj:11.3f} {1e3 * tn:11.3f} {tn / tj:7.2f}")
    e2e = end_to_end(args.e2e_reps)
    print(f"\none replication (thm13 + thm11, n=2^16, M=2^20): "
          f"numba {e2e.get('numba', float('nan')):.3f}s, numpy {e2e.get('numpy', float('nan')):.3f}s")


if __name__ == "__main__":
    main()
