"""Time the hot kernels with numba against the pure-Python fallback.

Each backend runs in its own interpreter because WIMESH_DISABLE_NUMBA is read
at import. The numba timing excludes the first call, which pays for JIT or
cache loading.

    python3 benchmarks/bench_kernels.py [--cycles 3000] [--repeat 3]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from wimesh._accel import backend
from wimesh.config import ExperimentConfig
from wimesh.predictor import replay_features
from wimesh.sim import simulate
from wimesh.tuner import TrainingSet, two_step_optimize

cycles, repeat = int(sys.argv[1]), int(sys.argv[2])
cfg = ExperimentConfig(scheme="dsam", injection_load=0.2, warmup_cycles=200,
                       measure_cycles=cycles, seed=1)
series = np.random.default_rng(0).integers(0, 200, 20_000)

def best(fn):
    fn()  # warm: compile or load the cache
    out = []
    for _ in range(repeat):
        t = time.perf_counter(); fn(); out.append(time.perf_counter() - t)
    return min(out)

res = {"backend": backend(),
       "simulate": best(lambda: simulate(cfg)),
       "replay_features": best(lambda: replay_features(series)),
       "two_step_optimize": best(lambda: two_step_optimize(TrainingSet(series[:2000]), rounds=200)),
       "checksum": simulate(cfg).summary.delivered_packets}
print(json.dumps(res))
"""


def measure(disable: bool, cycles: int, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("WIMESH_DISABLE_NUMBA", None)
    if disable:
        env["WIMESH_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, str(cycles), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cycles", type=int, default=3000, help="measured cycles per simulate call")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast = measure(False, args.cycles, args.repeat)
    slow = measure(True, args.cycles, args.repeat)
    if fast["checksum"] != slow["checksum"]:
        print(f"backends disagree: {fast['checksum']} vs {slow['checksum']} packets")
        return 1
    print(f"{'kernel':20s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for k in ("simulate", "replay_features", "two_step_optimize"):
        print(f"{k:20s} {fast[k]:10.4f} {slow[k]:10.4f} {slow[k] / fast[k]:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
