#!/usr/bin/env python3
"""Run the SNR x noise-kind scenario sweep and write CSV/JSON/plots.

Example:
    python scripts/run_snr_sweep.py --out results/sweep --scenarios 200 --workers 4
"""

import argparse
import json
from pathlib import Path

from dronerid.evalharness import SweepConfig, run_sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/sweep")
    ap.add_argument("--scenarios", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--duration-ms", type=float, default=2.0)
    args = ap.parse_args()

    cfg = SweepConfig(
        master_seed=args.seed,
        num_scenarios=args.scenarios,
        duration_s=args.duration_ms * 1e-3,
        workers=args.workers,
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report = run_sweep(cfg)
    report.to_csv(outdir / "sweep.csv")
    report.save_json(outdir / "summary.json")
    print(json.dumps(report.summary(), indent=2))

    for variant in cfg.variants:
        by_snr = report.metric_by(variant, "snr_db", "mean_iou")
        row = "  ".join(f"{snr:+.0f}:{v:.2f}" for snr, v in by_snr.items())
        print(f"{variant:10s} IoU by SNR  {row}")


if __name__ == "__main__":
    main()
