#!/usr/bin/env python3
"""Parameter study for the segmented energy refinement: success rate of
the pilot-peak recovery versus alpha, beta, and segment length P on the
constructed interference corpus.

Example:
    python scripts/refine_param_study.py --scenarios 100
"""

import argparse

import numpy as np

from dronerid.correct import RefineParams
from dronerid.evalharness import build_refine_scenario, refine_error


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenarios", type=int, default=100)
    ap.add_argument("--seed", type=int, default=9000)
    args = ap.parse_args()

    snrs = [-9, -7, -5, -3, -1, 1, 3, 5, 7, 9, 11, 13, 15]
    corpus = [build_refine_scenario(args.seed + i, snrs[i % len(snrs)])
              for i in range(args.scenarios)]

    def rate(mode, params):
        return float(np.mean([refine_error(sc, mode, params) <= sc.tolerance
                              for sc in corpus]))

    print(f"{args.scenarios} scenarios, SNR -9..15 dB, +10 dB pulsed interference\n")
    print("defaults (alpha=1.2, beta=3, P=400):")
    for mode in ("segmented", "direct", "raw"):
        print(f"  {mode:10s} {100 * rate(mode, RefineParams()):5.1f}%")

    print("\nalpha sweep:")
    for a in np.arange(0.4, 2.01, 0.2):
        print(f"  alpha={a:.1f}  {100 * rate('segmented', RefineParams(alpha=float(a))):5.1f}%")

    print("\nbeta sweep:")
    for b in (0, 1, 3, 5, 9):
        print(f"  beta={b}  {100 * rate('segmented', RefineParams(beta=b)):5.1f}%")

    print("\nsegment length sweep:")
    for p in (100, 200, 400, 800, 1600):
        print(f"  P={p:<5d} {100 * rate('segmented', RefineParams(segment_len=p)):5.1f}%")


if __name__ == "__main__":
    main()
