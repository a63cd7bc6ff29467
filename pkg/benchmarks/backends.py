"""Compare the pure-Python and compiled shortest-path kernels.

The driver re-runs itself once per importable backend with
LATORACLE_BACKEND pinned, times oracle continuations over a dense
seeded corpus, checks both backends produced identical outputs, and
prints a small table:

    python3 benchmarks/backends.py [--examples N] [--repeats R] [--seed S]
"""

import argparse
import hashlib
import json
import os
import statistics
import subprocess
import sys
import time


def build_jobs(seed: int, examples: int):
    import random

    from latoracle.il import SyntheticTask, generate_task
    from latoracle.oracle import prepare_lattice

    task = generate_task(
        SyntheticTask(
            source_vocab=16,
            target_vocab=16,
            noise_rate=0.1,
            coverage=1.0,
            candidates=12,
            min_len=30,
            max_len=40,
        ),
        examples,
        seed=seed,
    )
    rng = random.Random(seed)
    jobs = []
    for ex in task.examples:
        cut = round(rng.choice((0.0, 0.25, 0.5, 0.75)) * len(ex.reference))
        jobs.append((prepare_lattice(ex.lattice), ex.reference[:cut], ex.reference))
    return jobs


def run_child(args: argparse.Namespace) -> None:
    from latoracle.dp import BACKEND
    from latoracle.metrics import ThetaParams
    from latoracle.oracle import continue_prefix

    theta = ThetaParams(0.25, 0.5)
    jobs = build_jobs(args.seed, args.examples)
    digest = hashlib.sha256()
    for exp, prefix, ref in jobs:  # warm caches and capture outputs once
        res = continue_prefix(exp, prefix, ref, theta)
        digest.update(repr((res.continuation, round(res.linear_cost, 9))).encode())
    times = []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        for exp, prefix, ref in jobs:
            continue_prefix(exp, prefix, ref, theta)
        times.append(time.perf_counter() - t0)
    print(
        json.dumps(
            {
                "backend": BACKEND,
                "us_per_continuation": statistics.median(times) / len(jobs) * 1e6,
                "digest": digest.hexdigest(),
            }
        )
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--examples", type=int, default=60)
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--seed", type=int, default=20)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.child:
        run_child(args)
        return 0

    from latoracle.dp import backends

    reports = []
    for name in backends():
        env = dict(os.environ, LATORACLE_BACKEND=name)
        proc = subprocess.run(
            [
                sys.executable,
                os.path.abspath(__file__),
                "--child",
                "--examples", str(args.examples),
                "--repeats", str(args.repeats),
                "--seed", str(args.seed),
            ],
            env=env,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return proc.returncode
        reports.append(json.loads(proc.stdout))

    digests = {r["digest"] for r in reports}
    if len(digests) != 1:
        print("backend outputs differ, refusing to report timings", file=sys.stderr)
        return 1
    base = max(r["us_per_continuation"] for r in reports)
    print(f"{'backend':<10} {'us/continuation':>16} {'speedup':>8}")
    for r in sorted(reports, key=lambda r: -r["us_per_continuation"]):
        us = r["us_per_continuation"]
        print(f"{r['backend']:<10} {us:>16.1f} {base / us:>7.1f}x")
    print(f"outputs identical across backends (sha256 {digests.pop()[:12]})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
