"""Time the distance kernels with and without numba.

Each backend runs in its own interpreter so that MAXDIST_DISABLE_NUMBA is
honoured exactly as in normal use.  Example::

    python3 benchmarks/bench_kernels.py --points 20000 --segments 5000
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from maxdist import kernels

n_pts, n_seg, n_centers, repeats = map(int, sys.argv[1:5])
rng = np.random.default_rng(0)
t = np.linspace(0.0, 2.0 * np.pi, n_seg + 1)
curve = np.column_stack([np.cos(t) * (1 + 0.2 * np.sin(7 * t)), np.sin(t)])
a, b = curve[:-1].copy(), curve[1:].copy()
pts = rng.uniform(-1.5, 1.5, (n_pts, 2))
centers = curve[rng.integers(0, n_seg, n_centers)]
radii = np.array([0.01, 0.03, 0.1])

def best(fn):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

print(json.dumps({
    "backend": kernels.BACKEND,
    "nearest_on_segments": best(lambda: kernels.nearest_on_segments(pts, a, b)),
    "ball_lengths": best(lambda: kernels.ball_lengths(centers, a, b, radii)),
}))
"""


def run_backend(disable_numba: bool, args) -> dict:
    env = dict(os.environ)
    env.pop("MAXDIST_DISABLE_NUMBA", None)
    if disable_numba:
        env["MAXDIST_DISABLE_NUMBA"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", WORKER, str(args.points), str(args.segments), str(args.centers), str(args.repeats)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=20000)
    p.add_argument("--segments", type=int, default=5000)
    p.add_argument("--centers", type=int, default=400)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--json", action="store_true", help="print raw results as JSON")
    args = p.parse_args(argv)

    rows = [run_backend(False, args), run_backend(True, args)]
    if args.json:
        print(json.dumps(rows, indent=2))
        return 0
    print(f"{args.points} points, {args.segments} segments, {args.centers} ball centres; best of {args.repeats}")
    print(f"{'kernel':<22}" + "".join(f"{r['backend']:>12}" for r in rows) + f"{'speedup':>10}")
    for kernel in ("nearest_on_segments", "ball_lengths"):
        times = [r[kernel] for r in rows]
        speed = times[1] / times[0] if rows[0]["backend"] == "numba" and times[0] > 0 else float("nan")
        print(f"{kernel:<22}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + f"{speed:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
