#!/usr/bin/env python3
"""Export a labeled synthetic corpus for an external detector: cf32
captures, TFI PNGs with axis sidecars, and truth boxes per capture.

Example:
    python scripts/make_corpus.py --out corpus --captures 10
"""

import argparse
import json
from pathlib import Path

from dronerid.detect import boxes_to_json_obj
from dronerid.evalharness import SweepConfig, _priors_for, build_capture
from dronerid.signal import write_cf32
from dronerid.tfa import save_tfi_png, save_tfi_raw, stft


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="corpus")
    ap.add_argument("--captures", type=int, default=10)
    ap.add_argument("--seed", type=int, default=100)
    ap.add_argument("--duration-ms", type=float, default=2.0)
    ap.add_argument("--raw", action="store_true", help="also write raw float32 matrices")
    args = ap.parse_args()

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = SweepConfig(master_seed=args.seed, num_scenarios=args.captures,
                      duration_s=args.duration_ms * 1e-3,
                      snr_db_values=(1.0, 5.0, 9.0, 13.0))
    priors = _priors_for(cfg.bank_preset)
    index = []
    for sc in cfg.scenarios():
        cap = build_capture(sc, priors)
        stem = sc.scenario_id
        write_cf32(outdir / f"{stem}.cf32", cap.signal)
        tfi = stft(cap.signal)
        save_tfi_png(tfi, outdir / f"{stem}.png")
        if args.raw:
            save_tfi_raw(tfi, outdir / f"{stem}.f32")
        (outdir / f"{stem}.truth.json").write_text(
            json.dumps(boxes_to_json_obj(cap.truth_boxes), indent=2)
        )
        index.append({"id": stem, "snr_db": sc.snr_db, "noise": sc.noise_kind,
                      "interference": sc.interference})
    (outdir / "index.json").write_text(json.dumps(index, indent=2))
    print(f"wrote {args.captures} captures to {outdir}")


if __name__ == "__main__":
    main()
