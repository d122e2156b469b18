"""Compare the compiled and numpy kernel backends on the hot paths.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--json out.json] [--experiment]

Each case runs the same inputs through every importable backend, checks
the outputs agree exactly, and reports the best wall time of ``--repeat``.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from hapticid import fixtures, kernels
from hapticid.features import Quantizer
from hapticid.grasp import (HandModel, NoiseModel, apply_contact_noise, build_pose_grid, grasp_rays,
                            noise_block)


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def make_cases():
    q = Quantizer()
    hand = HandModel()
    bowl = fixtures.load_fixture("bowl")
    grid = build_pose_grid(fixtures.load_fixture("mug"), 360, hand)

    # ray casting: one full pose grid (360 poses x 3 fingers) against the bowl
    origins, dirs = grasp_rays(np.arange(360), 360, hand)

    # features: 50 noisy samples at every valid pose of the mug
    noise = NoiseModel()
    pos, nrm = [], []
    for i in grid.valid_indices:
        block = noise_block(noise, 50, "train", int(i))
        p, n = apply_contact_noise(grid.positions[i], grid.normals[i], block, noise)
        pos.append(p)
        nrm.append(n)
    pos, nrm = np.ascontiguousarray(np.concatenate(pos)), np.ascontiguousarray(np.concatenate(nrm))

    rng = np.random.default_rng(0)
    keys = np.unique(rng.integers(0, 3_000_000, size=5_000)).astype(np.int64)
    counts = rng.integers(1, 200, size=keys.size).astype(np.int64)
    codes = rng.choice(keys, size=(360, 150)).astype(np.int64)

    def grasp_loop(b):
        # one test grasp: 50 noisy samples -> keys -> votes against 5 tables
        feats = b.pair_cosines(pos[:50], nrm[:50])
        test = b.encode(feats, q.distance_step, q.cos_edges, q.n_angle_bins, True)
        return np.array([b.lookup_counts(test, keys, counts).sum() for _ in range(5)])

    return {
        f"first_hits ({len(origins)} rays x {len(bowl.triangles)} tris)":
            lambda b: b.first_hits(origins, dirs, bowl._v0, bowl._e1, bowl._e2, 1e-9),
        f"pair_cosines + encode ({len(pos)} samples)":
            lambda b: b.encode(b.pair_cosines(pos, nrm), q.distance_step, q.cos_edges, q.n_angle_bins, True),
        f"lookup_counts ({codes.size} codes, {keys.size} keys)":
            lambda b: b.lookup_counts(codes, keys, counts),
        "per-grasp loop (50 samples, 5 tables)": grasp_loop,
    }


_SWEEP = """
import time
from hapticid.harness import ExperimentConfig, run_experiment
t0 = time.perf_counter()
run_experiment(ExperimentConfig(seed=0))
print(time.perf_counter() - t0)
"""


def time_sweep(backend):
    env = dict(os.environ)
    env.pop("HAPTICID_PURE_PYTHON", None)
    if backend == "python":
        env["HAPTICID_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", _SWEEP], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results to this file")
    ap.add_argument("--experiment", action="store_true",
                    help="also time the full default sweep (train + 14000 records) per backend")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default: {kernels.BACKEND})")
    rows = []
    for name, fn in make_cases().items():
        timings, outs = {}, {}
        for bname, mod in backends.items():
            timings[bname], outs[bname] = best_of(lambda: fn(mod), args.repeat)
        results = list(outs.values())
        agree = all(_same(results[0], r) for r in results[1:])
        row = {"case": name, "agree": agree, **{f"{b}_s": t for b, t in timings.items()}}
        if "cython" in timings:
            row["speedup"] = timings["python"] / timings["cython"]
        rows.append(row)
        cols = "  ".join(f"{b} {t * 1e3:9.2f} ms" for b, t in timings.items())
        speed = f"  x{row['speedup']:.1f}" if "speedup" in row else ""
        print(f"{name:48s} {cols}{speed}  {'identical' if agree else 'MISMATCH'}")
    if args.experiment:
        timings = {b: time_sweep(b) for b in backends}
        row = {"case": "full sweep", "agree": True, **{f"{b}_s": t for b, t in timings.items()}}
        rows.append(row)
        print(f"{'full sweep (train + run)':48s} " + "  ".join(f"{b} {t:8.2f} s " for b, t in timings.items()))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["agree"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
