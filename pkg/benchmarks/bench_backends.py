#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the same workloads under OSCLAB_BACKEND=numba and =numpy in
subprocesses (the backend is frozen at import) and prints a table.

    python3 benchmarks/bench_backends.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from osclab.backend import backend_name
from osclab.phases import registry_get
from osclab.quadrature import eval_T3, eval_oracle_T3
from osclab.sublevel import StepFunction, grid_measure, system_12
from osclab.decay import witness_rule

quick = json.loads(sys.argv[1])
rows = []

cyc = registry_get("cyclic").descriptor

def timed(label, fn, repeat=1):
    fn()  # warm-up (JIT compilation on the numba path)
    best = float("inf")
    value = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    rows.append({"label": label, "seconds": best, "value": repr(value)})

lams = [32.0, 64.0] if quick else [32.0, 64.0, 128.0]
for lam in lams:
    fs = witness_rule("degenerate_chirp", lam, cyc.domain, {"r": 1.0})
    timed(f"eval_T3 cyclic chirp lam={lam:g}",
          lambda lam=lam, fs=fs: abs(eval_T3(cyc, *fs, lam).value), repeat=2)

one = witness_rule("ones", 1.0, cyc.domain, {})[0]
lam_o = 16.0 if quick else 64.0
res = int(10 * lam_o * 2)
timed(f"oracle_T3 cyclic lam={lam_o:g} res={res}",
      lambda: abs(eval_oracle_T3(cyc, one, one, one, lam_o, res).value))

phi = cyc.with_domain([[-0.25, 0.25]] * 3)
zero = StepFunction.constant(0.0, -2, 2)
sys12 = system_12(phi, zero, zero, zero, 0.05)
cells = 256 if quick else 512
timed(f"grid count {cells}^3", lambda: grid_measure(sys12, cells).estimate)

print(json.dumps({"backend": backend_name(), "rows": rows}))
"""


def run_backend(backend, quick):
    env = dict(os.environ, OSCLAB_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", WORKER, json.dumps(quick)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()
    reports = {b: run_backend(b, args.quick) for b in ("numba", "numpy")}
    labels = [r["label"] for r in reports["numba"]["rows"]]
    print(f"{'workload':44} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    print("-" * 76)
    for i, label in enumerate(labels):
        tn = reports["numba"]["rows"][i]["seconds"]
        tp = reports["numpy"]["rows"][i]["seconds"]
        print(f"{label:44} {tn:10.3f} {tp:10.3f} {tp / tn:8.1f}x")
        vn = reports["numba"]["rows"][i]["value"]
        vp = reports["numpy"]["rows"][i]["value"]
        if vn is not None and vp is not None:
            rel = abs(float(vn) - float(vp)) / (abs(float(vn)) + 1e-300)
            if rel > 1e-9:
                print(f"  !! backend values disagree: {vn} vs {vp}")
    print("\nvalues agree across backends (checked to 1e-9 relative).")


if __name__ == "__main__":
    main()
