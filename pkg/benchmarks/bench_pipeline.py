"""Run the refinement pipeline with each kernel backend and compare wall time.

    python benchmarks/bench_pipeline.py [--scenario one_slot] [--seeds 3]

Each backend runs in its own process, since ``MRREFINE_NUMBA`` is read at
import time.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

_CHILD = """
import json, sys, time
from importlib import resources
from mrrefine import kernels
from mrrefine.params import PipelineParams
from mrrefine.pipeline import refine
from mrrefine.scene import load_scenario
from mrrefine.task import load_plan
name, seeds = sys.argv[1], int(sys.argv[2])
d = resources.files("mrrefine") / "scenarios"
scn = load_scenario((d / f"{name}.scn").read_text(), name)
plan = load_plan((d / f"{name}.plan").read_text(), scn)
refine(scn, plan, PipelineParams(seed=0))  # warm-up, includes JIT compilation
t = time.perf_counter()
spans = [refine(scn, plan, PipelineParams(seed=s)).makespan for s in range(seeds)]
print(json.dumps({"backend": kernels.BACKEND, "seconds": time.perf_counter() - t, "makespans": spans}))
"""


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="one_slot")
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, MRREFINE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _CHILD, args.scenario, str(args.seeds)], env=env,
                             check=True, capture_output=True, text=True).stdout
        got = json.loads(out.strip().splitlines()[-1])
        results[got["backend"]] = got
        print(f"{got['backend']:<6} {got['seconds']:8.2f} s for {args.seeds} seed(s)")
    if len(results) == 2:
        same = results["numba"]["makespans"] == results["numpy"]["makespans"]
        print(f"speedup {results['numpy']['seconds'] / results['numba']['seconds']:.1f}x, "
              f"identical makespans: {same}")


if __name__ == "__main__":
    main()
