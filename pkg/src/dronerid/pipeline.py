"""End-to-end glue: capture -> detect -> correct -> decode.

Each stage is usable on its own; these helpers wire them together the way
the CLI and the evaluation harness run them.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import codec
from .correct import ProtocolPriors
from .detect import BoundingBox, baseline_detect
from .filterbank import FilterBank, apply_filter_bank
from .signal import ComplexSignal
from .sync import (
    DemodFailedError,
    SyncFailedError,
    coarse_sync,
    demodulate_ofdm,
    estimate_and_apply_cfo,
    locate_frame,
)
from .tfa import stft

__all__ = [
    "DetectParams",
    "detect_boxes",
    "decode_frame_baseband",
    "decode_box",
]


@dataclass(frozen=True)
class DetectParams:
    fft_size: int = 1024
    hop: int | None = None
    window_kind: str = "hann"
    energy_percentile: float = 99.5
    min_area: int = 24
    support_db: float = 7.0
    seed_floor_db: float = 9.0


def detect_boxes(
    sig: ComplexSignal,
    bank: FilterBank | None = None,
    params: DetectParams = DetectParams(),
) -> tuple[list[BoundingBox], ComplexSignal]:
    """Optional pre-filtering, then the baseline TFI detector.

    Returns (boxes, the signal the detector actually saw) so corrections
    can reuse the filtered capture.
    """
    seen = apply_filter_bank(sig, bank) if bank is not None else sig
    tfi = stft(seen, params.fft_size, params.hop, params.window_kind)
    boxes = baseline_detect(
        tfi,
        energy_percentile=params.energy_percentile,
        min_area=params.min_area,
        support_db=params.support_db,
        seed_floor_db=params.seed_floor_db,
    )
    return boxes, seen


def decode_frame_baseband(
    sig: ComplexSignal,
    priors: ProtocolPriors,
    schema: codec.PayloadSchema = codec.DEFAULT_SCHEMA,
    scramble: bool = True,
    scramble_init: int = codec.DEFAULT_SCRAMBLE_INIT,
    max_iters: int = 8,
) -> tuple[codec.DecodedPayload, int, float]:
    """Synchronize and decode one frame already at baseband rate B.

    Returns (payload, frame_start, cfo_subcarriers). Raises
    SyncFailedError / DemodFailedError on an undecodable region.
    """
    spec = priors.frame_spec
    start, _pilot, _ = locate_frame(sig, spec)
    corrected, eps = estimate_and_apply_cfo(sig, spec, start, anchor="zc")
    start, _pilot, _ = locate_frame(corrected, spec)
    demod = demodulate_ofdm(corrected, spec, start)
    llrs = demod.llrs
    if scramble:
        llrs = codec.descramble_llrs(llrs, scramble_init)
    coded_len = 3 * schema.block_bits + 12
    if llrs.size < coded_len:
        raise DemodFailedError("frame carries fewer soft bits than the coded block")
    bits, _iters = codec.turbo_decode(
        llrs[:coded_len],
        max_iters=max_iters,
        crc_hook=lambda b: codec.crc_check(b, schema.crc_polynomial),
    )
    return codec.parse_payload(bits, schema), start, eps


def decode_box(
    capture: ComplexSignal,
    box: BoundingBox,
    priors: ProtocolPriors,
    schema: codec.PayloadSchema = codec.DEFAULT_SCHEMA,
    scramble: bool = True,
    scramble_init: int = codec.DEFAULT_SCRAMBLE_INIT,
) -> codec.DecodedPayload:
    """Decode the frame indicated by a (corrected) bounding box.

    The capture is cropped around the box with a one-frame margin, the
    box's transmission band is mixed down and resampled, then the frame
    is synchronized and decoded.
    """
    fs = capture.sample_rate_hz
    spec = priors.frame_spec
    t_frame = spec.frame_duration_s
    lo = max(0, int((box.t_min_s - t_frame) * fs))
    hi = min(len(capture), int((box.t_max_s + t_frame) * fs))
    if hi - lo < spec.frame_samples * fs / spec.bandwidth_hz * 0.5:
        raise SyncFailedError("box window too small to contain a frame")
    window = ComplexSignal(capture.samples[lo:hi], fs, capture.center_freq_hz)
    f_i = priors.freq_prior.nearest_center(box.f_center_hz)
    baseband = coarse_sync(window, f_i, spec.bandwidth_hz)
    payload, _start, _eps = decode_frame_baseband(
        baseband, priors, schema, scramble, scramble_init
    )
    return payload
