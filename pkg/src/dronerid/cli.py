"""Command-line surface: synth, tfi, detect, correct, decode, eval, sweep, bank.

Config files are JSON; flags override file values. All randomness is
seeded from --seed, so every subcommand is a pure function of its inputs.
Exit codes: 0 success, 1 processing failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import codec
from .correct import ProtocolPriors, RefineParams, correct_all
from .detect import boxes_to_json_obj, load_boxes, save_boxes
from .evalharness import EvalReport, SweepConfig, measure_speed, run_sweep
from .filterbank import (
    FreqPrior,
    builtin_prior,
    design_filter_bank,
    load_bank,
    save_bank,
)
from .metrics import match_and_score
from .pipeline import DetectParams, decode_box, detect_boxes
from .signal import ChannelParams, FrameSpec, read_cf32, write_cf32
from .synth import CaptureEvent, compose_capture, synth_broadcast_frame, synth_interference, InterferenceParams
from .sync import DemodFailedError, SyncFailedError
from .tfa import save_tfi_png, save_tfi_raw, stft

__all__ = ["main"]


def _load_priors(path: str | None) -> ProtocolPriors:
    if path is None:
        return ProtocolPriors(freq_prior=builtin_prior("2g4_fs100"), frame_spec=FrameSpec())
    return ProtocolPriors.from_dict(json.loads(Path(path).read_text()))


def _refine_params(args) -> RefineParams:
    return RefineParams(
        alpha=args.alpha, beta=args.beta, segment_len=args.seglen, tau_conf=args.tau_conf
    )


def _cmd_synth(args) -> int:
    scenario = json.loads(Path(args.scenario).read_text())
    fs = float(scenario["sample_rate_hz"])
    cap_len = int(scenario["capture_len"])
    spec = FrameSpec.from_dict(scenario["frame_spec"]) if "frame_spec" in scenario else FrameSpec()
    events = []
    for i, ev in enumerate(scenario.get("events", [])):
        kind = ev["kind"]
        seed = args.seed + i
        if kind == "frame":
            payload = codec.pack_payload(
                ev.get("serial", "1AS000000000000"),
                ev.get("lat_deg", 0.0),
                ev.get("lon_deg", 0.0),
                ev.get("altitude_m", 0.0),
                ev.get("speed_ms", 0.0),
                bytes.fromhex(ev["uuid"]) if "uuid" in ev else None,
            )[:codec.DEFAULT_SCHEMA.message_bits]
            sig = synth_broadcast_frame(spec, payload, seed)
            events.append(CaptureEvent(
                signal=sig,
                start_sample=int(ev["start_sample"]),
                center_offset_hz=float(ev.get("center_offset_hz", 0.0)),
                is_frame=True,
                payload_bits=payload,
                truth_bandwidth_hz=spec.bandwidth_hz,
                occupied_bandwidth_hz=spec.used_bandwidth_hz,
                power_db=float(ev.get("power_db", 0.0)),
            ))
        else:
            params = InterferenceParams(
                duration_s=float(ev["duration_s"]),
                bandwidth_hz=float(ev["bandwidth_hz"]),
                sample_rate_hz=fs,
                center_offset_hz=0.0,
                power_db=0.0,
            )
            sig = synth_interference(kind, params, seed)
            events.append(CaptureEvent(
                signal=sig,
                start_sample=int(ev["start_sample"]),
                center_offset_hz=float(ev.get("center_offset_hz", 0.0)),
                power_db=float(ev.get("power_db", 0.0)),
            ))
    ch = ChannelParams.from_dict({**scenario.get("channel", {}), "rng_seed": args.seed})
    capture = compose_capture(events, cap_len, fs, ch)
    write_cf32(args.out, capture.signal)
    truth_path = args.truth_out or str(args.out) + ".truth.json"
    obj = boxes_to_json_obj(capture.truth_boxes)
    obj["payload_bits_hex"] = [np.packbits(p).tobytes().hex() for p in capture.payload_bits]
    Path(truth_path).write_text(json.dumps(obj, indent=2))
    print(f"wrote {args.out} ({cap_len} samples) and {truth_path}")
    return 0


def _cmd_tfi(args) -> int:
    sig = read_cf32(args.infile)
    tfi = stft(sig, args.fft, args.hop, args.window)
    save_tfi_png(tfi, args.out, colormap=args.colormap)
    if args.raw_out:
        save_tfi_raw(tfi, args.raw_out)
    print(f"wrote {args.out} ({tfi.num_time_bins} x {tfi.num_freq_bins})")
    return 0


def _cmd_detect(args) -> int:
    sig = read_cf32(args.infile)
    bank = load_bank(args.bank) if args.bank else None
    params = DetectParams(
        energy_percentile=args.percentile, min_area=args.min_area
    )
    boxes, _ = detect_boxes(sig, bank, params)
    save_boxes(boxes, args.boxes_out)
    print(f"{len(boxes)} boxes -> {args.boxes_out}")
    return 0


def _cmd_correct(args) -> int:
    sig = read_cf32(args.infile)
    boxes = load_boxes(args.boxes)
    priors = _load_priors(args.priors)
    if args.bank:
        from .filterbank import apply_filter_bank

        sig = apply_filter_bank(sig, load_bank(args.bank))
    corrected = correct_all(sig, boxes, priors, _refine_params(args), refine=args.refine)
    save_boxes(corrected, args.out, include_corrected=True)
    print(f"corrected {len(corrected)} boxes -> {args.out}")
    return 0


def _cmd_decode(args) -> int:
    sig = read_cf32(args.infile)
    boxes = load_boxes(args.boxes)
    priors = _load_priors(args.priors)
    records = []
    for i, box in enumerate(boxes):
        rec = {"box_index": i}
        try:
            payload = decode_box(sig, box, priors)
            rec.update(payload.to_dict())
        except (SyncFailedError, DemodFailedError) as exc:
            rec.update({"crc_ok": False, "error": str(exc)})
        records.append(rec)
    with open(args.out, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    ok = sum(1 for r in records if r.get("crc_ok"))
    print(f"decoded {ok}/{len(records)} boxes -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    dets = load_boxes(args.dets)
    truths = load_boxes(args.truth)
    m = match_and_score(dets, truths, args.iou_thresh)
    out = {
        "precision": m.precision, "recall": m.recall, "mean_iou": m.mean_iou,
        "wem": m.wem, "tp": m.tp, "fp": m.fp, "fn": m.fn,
    }
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _cmd_sweep(args) -> int:
    cfg_dict = json.loads(Path(args.config).read_text()) if args.config else {}
    num_scenarios = args.num_scenarios if args.num_scenarios is not None \
        else cfg_dict.get("num_scenarios", 60)
    cfg = SweepConfig(
        master_seed=args.seed,
        num_scenarios=num_scenarios,
        duration_s=cfg_dict.get("duration_s", 2e-3),
        workers=args.workers,
    )
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    report = run_sweep(cfg)
    report.to_csv(outdir / "sweep.csv")
    report.to_csv(outdir / "sweep_notiming.csv", include_timing=False)
    report.save_json(outdir / "summary.json")
    if args.speed:
        rows = measure_speed(seed=args.seed)
        with open(outdir / "speed.json", "w") as fh:
            json.dump([r.__dict__ for r in rows], fh, indent=2)
    if args.plots:
        _make_plots(report, outdir)
    print(f"report in {outdir}")
    print(json.dumps(report.summary(), indent=2))
    return 0


def _make_plots(report: EvalReport, outdir: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(15, 4))
    for metric, ax in zip(("mean_iou", "precision", "recall"), axes):
        for variant in sorted({r.variant for r in report.rows}):
            by_snr = report.metric_by(variant, "snr_db", metric)
            ax.plot(list(by_snr), list(by_snr.values()), marker="o", label=variant)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel(metric)
        ax.grid(True, alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(outdir / "metrics_vs_snr.png", dpi=120)
    plt.close(fig)


def _cmd_bank(args) -> int:
    if args.preset:
        prior = builtin_prior(args.preset)
    else:
        if not (args.freqs and args.bandwidth and args.fs):
            print("either --preset or all of --freqs/--bandwidth/--fs required", file=sys.stderr)
            return 2
        prior = FreqPrior(
            centers_hz=tuple(float(f) for f in args.freqs.split(",")),
            bandwidth_hz=args.bandwidth,
            sample_rate_hz=args.fs,
        )
    bank = design_filter_bank(prior, args.stopband_db, args.transition_hz)
    save_bank(bank, args.out)
    print(f"designed {len(bank.taps_per_band)} bands x {bank.num_taps} taps -> {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dronerid",
        description="Detect and decode drone broadcast frames in wideband I/Q captures.",
    )
    p.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthesize a capture from a scenario file")
    s.add_argument("--scenario", required=True, help="scenario JSON")
    s.add_argument("--out", required=True, help="output .cf32 path")
    s.add_argument("--truth-out", default=None, help="truth boxes JSON (default <out>.truth.json)")
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("tfi", help="render a spectrogram image")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", required=True, help="PNG path (sidecar JSON written next to it)")
    s.add_argument("--raw-out", default=None, help="optional raw float32 matrix path")
    s.add_argument("--fft", type=int, default=1024)
    s.add_argument("--hop", type=int, default=None)
    s.add_argument("--window", default="hann")
    s.add_argument("--colormap", choices=("gray", "viridis"), default="gray")
    s.set_defaults(func=_cmd_tfi)

    s = sub.add_parser("detect", help="run the baseline detector")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--bank", default=None, help="filter bank JSON")
    s.add_argument("--boxes-out", required=True)
    s.add_argument("--percentile", type=float, default=99.5)
    s.add_argument("--min-area", type=int, default=24)
    s.set_defaults(func=_cmd_detect)

    s = sub.add_parser("correct", help="correct detector boxes with protocol priors")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--boxes", required=True)
    s.add_argument("--priors", default=None, help="priors JSON (default built-in 2.4 GHz set)")
    s.add_argument("--bank", default=None, help="apply this bank before correlation")
    s.add_argument("--out", required=True)
    s.add_argument("--refine", choices=("segmented", "direct", "none"), default="segmented")
    s.add_argument("--alpha", type=float, default=1.2)
    s.add_argument("--beta", type=int, default=3)
    s.add_argument("--seglen", type=int, default=400)
    s.add_argument("--tau-conf", type=float, default=0.5)
    s.set_defaults(func=_cmd_correct)

    s = sub.add_parser("decode", help="decode payloads behind corrected boxes")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--boxes", required=True)
    s.add_argument("--priors", default=None)
    s.add_argument("--out", required=True, help="JSON-lines output")
    s.set_defaults(func=_cmd_decode)

    s = sub.add_parser("eval", help="score detections against truth boxes")
    s.add_argument("--dets", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--iou-thresh", type=float, default=0.5)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_eval)

    s = sub.add_parser("sweep", help="run a scenario sweep and write reports")
    s.add_argument("--config", default=None, help="sweep config JSON")
    s.add_argument("--num-scenarios", type=int, default=None,
                   help="overrides the config file value (default 60)")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--speed", action="store_true", help="also measure the speed trade-off")
    s.add_argument("--plots", action="store_true", help="write metric plots")
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("bank", help="design and save a filter bank")
    s.add_argument("--preset", default=None, help="builtin prior set name")
    s.add_argument("--freqs", default=None, help="comma-separated center offsets in Hz")
    s.add_argument("--bandwidth", type=float, default=None)
    s.add_argument("--fs", type=float, default=None)
    s.add_argument("--stopband-db", type=float, default=60.0)
    s.add_argument("--transition-hz", type=float, default=1e6)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_bank)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
