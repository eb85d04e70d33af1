#!/usr/bin/env python3
"""Measure the accuracy/speed trade-off versus sampling duration: wall
clock latency, FPS, and per-second-of-signal latency of the full
detect+correct path.

Example:
    python scripts/speed_tradeoff.py --reps 3
"""

import argparse

from dronerid.evalharness import measure_speed


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--durations", default="1,2,5,10,20,50",
                    help="comma-separated sampling durations in ms")
    args = ap.parse_args()

    durations = tuple(float(d) for d in args.durations.split(","))
    rows = measure_speed(durations_ms=durations, reps=args.reps, seed=args.seed)
    print(f"{'dur ms':>7} {'latency s':>10} {'fps':>8} {'s per s':>9} {'cv':>5}")
    for r in rows:
        print(f"{r.duration_ms:7.0f} {r.latency_s:10.3f} {r.fps:8.2f} "
              f"{r.per_second_latency_s:9.2f} {r.latency_cv:5.2f}")


if __name__ == "__main__":
    main()
