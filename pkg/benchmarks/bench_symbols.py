"""Compiled vs pure-numpy quadrature backends on symbol-table construction.

    python benchmarks/bench_symbols.py [--d 3] [--xi-max 32] [--repeat 3] [--out bench.csv]

Each row times building the lambda/b/c/d tables for every lattice shell
|xi| <= xi_max at one horizon, and records the largest difference between
the two backends.
"""
import argparse
import csv
import statistics
import sys
import time

import numpy as np

from nlstokes.kernels import preset
from nlstokes.quadrature import KIND_COS, KIND_SIN, available_backends, radial_transform
from nlstokes.symbols import lattice_norms_sq


def build(kernels, shells, backend):
    a = kernels.delta * np.sqrt(shells.astype(float))
    out = []
    for prof, kind in ((kernels.omega, KIND_COS), (kernels.omega_hat, KIND_SIN),
                       (kernels.omega_tilde, KIND_COS), (kernels.omega_bar, KIND_COS)):
        out.append(radial_transform(prof, kind, a, backend=backend)[0])
    return np.stack(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--xi-max", type=int, default=32)
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.05, 0.5])
    ap.add_argument("--families", nargs="+", default=["constant", "polynomial_bump", "fractional"])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--out", help="CSV file (default: stdout)")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; timing the python fallback only", file=sys.stderr)
    shells = lattice_norms_sq(args.d, args.xi_max)
    rows = []
    for fam in args.families:
        for delta in args.deltas:
            ks = preset(fam, args.d, delta)
            ref = None
            times = {}
            for be in backends:
                samples = []
                for _ in range(args.repeat):
                    t0 = time.perf_counter()
                    vals = build(ks, shells, be)
                    samples.append(time.perf_counter() - t0)
                times[be] = statistics.median(samples)
                if ref is None:
                    ref = vals
                    diff = 0.0
                else:
                    diff = float(np.max(np.abs(vals - ref) / np.maximum(1.0, np.abs(ref))))
            py = times.get("python")
            cc = times.get("compiled")
            rows.append({
                "family": fam, "d": args.d, "delta": delta, "shells": shells.size,
                "compiled_s": "" if cc is None else f"{cc:.4f}",
                "python_s": f"{py:.4f}",
                "speedup": "" if cc is None else f"{py / cc:.1f}",
                "max_rel_diff": f"{diff:.2e}",
            })
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
