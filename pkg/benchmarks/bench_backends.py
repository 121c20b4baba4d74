"""Benchmark the compiled kernel backend against the numpy fallback.

Per-kernel timings run in-process against both backend modules; the
end-to-end tracker loop runs in subprocesses so each measurement uses the
backend exactly as selected at import time.

Usage:
    python benchmarks/bench_backends.py            # compare both backends
    python benchmarks/bench_backends.py --single   # active backend only (JSON)
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def time_call(fn, repeats=2000):
    """Best-of-three average microseconds per call."""
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - start) / repeats)
    return best * 1e6


def micro_inputs(n, d, obs_count, seed=123):
    from subtrack.datagen import random_orthonormal

    rng = np.random.default_rng(seed)
    basis = random_orthonormal(n, d, seed=seed + 1).basis
    omega = np.sort(rng.choice(n, size=obs_count, replace=False)).astype(np.int64)
    values = rng.standard_normal(obs_count)
    return basis, omega, values


def bench_micro(core, n, d, obs_count):
    basis, omega, values = micro_inputs(n, d, obs_count)
    w = core.solve_restricted(basis, omega, values)
    p, r, wn, pn, rn = core.predict_and_residual(basis, omega, values, w)
    scratch = basis.copy()
    return {
        "solve_restricted": time_call(lambda: core.solve_restricted(basis, omega, values)),
        "predict_and_residual": time_call(
            lambda: core.predict_and_residual(basis, omega, values, w)
        ),
        "apply_rotation_step": time_call(
            lambda: core.apply_rotation_step(scratch, p, r, w, 0.99, 0.14, pn, rn, wn)
        ),
        "gram_identity_error": time_call(lambda: core.gram_identity_error(basis)),
    }


def bench_tracker_loop(n, d, obs_count, steps):
    from subtrack import GroundTruth, GrouseTracker, StreamConfig, generate_stream, process_stream
    from subtrack.datagen import random_orthonormal

    config = StreamConfig(n=n, d=d, num_steps=steps, obs_count=obs_count, seed=5, init_seed=6)
    truth = GroundTruth.random(n, d, seed=7)
    stream = generate_stream(config, truth)
    tracker = GrouseTracker(random_orthonormal(n, d, seed=6))
    start = time.perf_counter()
    process_stream(tracker, stream, ground_truth=truth.u_bar)
    elapsed = time.perf_counter() - start
    return steps / elapsed


def run_single(args):
    import subtrack
    from subtrack._backend import core

    result = {
        "backend": subtrack.backend_name(),
        "micro_us": bench_micro(core, args.n, args.d, args.obs),
        "steps_per_sec": bench_tracker_loop(args.n, args.d, args.obs, args.steps),
    }
    print(json.dumps(result))


def run_compare(args):
    from subtrack import _core_numpy

    try:
        from subtrack import _core
    except ImportError:
        print("compiled backend not built; run pip install -e . first", file=sys.stderr)
        return 1

    print(f"problem: n={args.n} d={args.d} |omega|={args.obs} steps={args.steps}\n")
    micro = {"compiled": bench_micro(_core, args.n, args.d, args.obs),
             "numpy": bench_micro(_core_numpy, args.n, args.d, args.obs)}
    print(f"{'kernel':<24}{'compiled us':>14}{'numpy us':>12}{'speedup':>10}")
    for name in micro["compiled"]:
        fast, slow = micro["compiled"][name], micro["numpy"][name]
        print(f"{name:<24}{fast:>14.2f}{slow:>12.2f}{slow / fast:>9.1f}x")

    loops = {}
    script = os.path.abspath(__file__)
    for backend, env_extra in [("compiled", {}), ("numpy", {"SUBTRACK_PURE_PYTHON": "1"})]:
        env = dict(os.environ, **env_extra)
        cmd = [sys.executable, script, "--single", "--n", str(args.n), "--d", str(args.d),
               "--obs", str(args.obs), "--steps", str(args.steps)]
        out = subprocess.run(cmd, capture_output=True, text=True, env=env, check=True)
        payload = json.loads(out.stdout)
        assert payload["backend"] == backend, payload
        loops[backend] = payload["steps_per_sec"]
    print(f"\n{'tracker loop':<24}{loops['compiled']:>11.0f}/s{loops['numpy']:>10.0f}/s"
          f"{loops['compiled'] / loops['numpy']:>9.1f}x")
    return 0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--single", action="store_true",
                        help="benchmark only the active backend, emit JSON")
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--d", type=int, default=10)
    parser.add_argument("--obs", type=int, default=60)
    parser.add_argument("--steps", type=int, default=5000)
    args = parser.parse_args()
    if args.single:
        run_single(args)
        return 0
    return run_compare(args)


if __name__ == "__main__":
    sys.exit(main())
