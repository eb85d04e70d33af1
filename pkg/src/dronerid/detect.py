"""Pluggable detector surface: a built-in spectrogram detector plus the
boxes JSON interchange format used by external detectors.

The built-in detector uses hysteresis thresholding: connected support
regions are delimited at a fixed support percentile, and a region is
emitted only when it contains at least one pixel above the (higher)
energy percentile. This keeps the emitted box count monotone
non-increasing in the energy percentile, since raising it can only
disqualify support regions, never split them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .signal import ConfigurationError
from .tfa import TimeFrequencyImage

__all__ = [
    "BoundingBox",
    "BoxParseError",
    "baseline_detect",
    "save_boxes",
    "load_boxes",
    "boxes_to_json_obj",
]


class BoxParseError(ValueError):
    """Boxes file violates the interchange schema."""


@dataclass(frozen=True)
class BoundingBox:
    """Time/frequency rectangle with confidence.

    Times are seconds from capture start; frequencies are Hz relative to
    the capture center.
    """

    t_min_s: float
    t_max_s: float
    f_min_hz: float
    f_max_hz: float
    confidence: float = 1.0
    label: str = "drone_broadcast"
    corrected_freq: bool = False
    corrected_time: bool = False
    clipped: bool = False

    def __post_init__(self):
        if not (self.t_min_s < self.t_max_s):
            raise ConfigurationError(f"t_min {self.t_min_s} must be < t_max {self.t_max_s}")
        if not (self.f_min_hz < self.f_max_hz):
            raise ConfigurationError(f"f_min {self.f_min_hz} must be < f_max {self.f_max_hz}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ConfigurationError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def t_center_s(self) -> float:
        return 0.5 * (self.t_min_s + self.t_max_s)

    @property
    def f_center_hz(self) -> float:
        return 0.5 * (self.f_min_hz + self.f_max_hz)

    @property
    def duration_s(self) -> float:
        return self.t_max_s - self.t_min_s

    @property
    def bandwidth_hz(self) -> float:
        return self.f_max_hz - self.f_min_hz

    def area(self) -> float:
        return self.duration_s * self.bandwidth_hz


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def baseline_detect(
    tfi: TimeFrequencyImage,
    energy_percentile: float = 99.5,
    min_area: int = 24,
    support_db: float = 6.0,
    seed_floor_db: float = 9.0,
) -> list[BoundingBox]:
    """Detect high-energy tiles in a TFI; deterministic, no learning.

    The pixel powers are integrated over a 3x3 neighborhood (a radiometer
    window: single STFT pixels of noise-like signals are exponentially
    distributed and would fragment any threshold mask). Support regions
    are 4-connected smoothed pixels ``support_db`` above their
    per-frequency-bin floor (the median over time, clamped from below so
    the stopbands of a pre-filtered capture stay quiet). A region is
    emitted when it covers at least ``min_area`` bins and its smoothed
    peak reaches the global ``energy_percentile`` or stands
    ``seed_floor_db`` above its floor. The floor-referenced criteria are
    independent of the percentile, so the emitted box count is monotone
    non-increasing in it: raising it can only disqualify regions, never
    split them.

    Confidence is the region's mean contrast against the global floor:
    (mean - median) / (max - median) on smoothed powers, clamped to
    [0, 1].
    """
    mags = np.asarray(tfi.magnitudes, dtype=np.float64)
    if mags.size == 0 or mags.max() <= 0:
        return []
    power = ndimage.uniform_filter(mags * mags, size=3, mode="nearest")
    # noise reference per frequency bin: the median over time, allowed to
    # vary only 3 dB around the robust cross-bin reference, so shaped
    # stopbands of a pre-filtered capture stay quiet while occupied bins
    # do not normalize persistent signals out of view
    col_med = np.median(power, axis=0)
    ref = np.percentile(col_med, 75.0)
    bin_floor = np.clip(col_med, ref * 10.0 ** -0.3, ref * 10.0 ** 0.3)
    bin_floor = np.maximum(bin_floor, 1e-12 * power.max())[None, :]
    seed_level = float(np.percentile(power, energy_percentile))
    rel = power / bin_floor
    support = rel >= 10.0 ** (support_db / 10.0)
    labels, n_comp = ndimage.label(support, structure=_FOUR_CONNECTED)
    if n_comp == 0:
        return []
    floor_seed = 10.0 ** (seed_floor_db / 10.0)
    global_median = float(np.median(power))
    global_max = float(power.max())
    denom = max(global_max - global_median, 1e-30)

    boxes: list[BoundingBox] = []
    slices = ndimage.find_objects(labels)
    idx = np.arange(1, n_comp + 1)
    comp_max = ndimage.maximum(power, labels, index=idx)
    comp_rel_max = ndimage.maximum(rel, labels, index=idx)
    comp_area = ndimage.sum_labels(support, labels, index=idx)
    comp_mean = ndimage.mean(power, labels, index=idx)
    for i, sl in enumerate(slices):
        if sl is None:
            continue
        if comp_area[i] < min_area:
            continue
        if comp_max[i] < seed_level and comp_rel_max[i] < floor_seed:
            continue
        t_sl, f_sl = sl
        t_min, _ = tfi.time_edges_s(t_sl.start)
        _, t_max = tfi.time_edges_s(t_sl.stop - 1)
        f_min, _ = tfi.freq_edges_hz(f_sl.start)
        _, f_max = tfi.freq_edges_hz(f_sl.stop - 1)
        conf = float(np.clip((comp_mean[i] - global_median) / denom, 0.0, 1.0))
        boxes.append(BoundingBox(
            t_min_s=t_min, t_max_s=t_max, f_min_hz=f_min, f_max_hz=f_max,
            confidence=conf, label="drone_broadcast",
        ))
    boxes.sort(key=lambda b: (-b.confidence, b.t_min_s, b.f_min_hz))
    return boxes


def nms(boxes: list[BoundingBox], overlap_thresh: float = 0.8) -> list[BoundingBox]:
    """Suppress near-duplicate boxes, keeping the highest confidence.

    Neural detectors do this internally; correction can collapse several
    detections onto the same frame, so batch pipelines re-apply it.
    """
    from .metrics import iou  # local import: metrics depends on this module

    kept: list[BoundingBox] = []
    for b in sorted(boxes, key=lambda x: (-x.confidence, x.t_min_s, x.f_min_hz)):
        if all(iou(b, k) < overlap_thresh for k in kept):
            kept.append(b)
    return kept


# ---------------------------------------------------------------------------
# Boxes JSON interchange
# ---------------------------------------------------------------------------

_REQUIRED_FIELDS = ("t_min_s", "t_max_s", "f_min_hz", "f_max_hz", "confidence", "label")


def boxes_to_json_obj(boxes: list[BoundingBox], include_corrected: bool = False) -> dict:
    out = []
    for b in boxes:
        rec = {
            "t_min_s": b.t_min_s,
            "t_max_s": b.t_max_s,
            "f_min_hz": b.f_min_hz,
            "f_max_hz": b.f_max_hz,
            "confidence": b.confidence,
            "label": b.label,
        }
        if include_corrected or b.corrected_freq or b.corrected_time:
            rec["corrected"] = {"freq": b.corrected_freq, "time": b.corrected_time}
        if b.clipped:
            rec["clipped"] = True
        out.append(rec)
    return {"boxes": out}


def save_boxes(boxes: list[BoundingBox], path: str | Path, include_corrected: bool = False) -> None:
    Path(path).write_text(json.dumps(boxes_to_json_obj(boxes, include_corrected), indent=2))


def _parse_box(rec: dict, index: int) -> BoundingBox:
    for f in _REQUIRED_FIELDS:
        if f not in rec:
            raise BoxParseError(f"boxes[{index}]: missing field {f!r}")
    try:
        corrected = rec.get("corrected", {})
        return BoundingBox(
            t_min_s=float(rec["t_min_s"]),
            t_max_s=float(rec["t_max_s"]),
            f_min_hz=float(rec["f_min_hz"]),
            f_max_hz=float(rec["f_max_hz"]),
            confidence=float(rec["confidence"]),
            label=str(rec["label"]),
            corrected_freq=bool(corrected.get("freq", False)),
            corrected_time=bool(corrected.get("time", False)),
            clipped=bool(rec.get("clipped", False)),
        )
    except (TypeError, ValueError, ConfigurationError) as exc:
        raise BoxParseError(f"boxes[{index}]: {exc}") from exc


def load_boxes(path: str | Path) -> list[BoundingBox]:
    """Load boxes from the interchange schema; save -> load is identity."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BoxParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(obj, dict) or "boxes" not in obj or not isinstance(obj["boxes"], list):
        raise BoxParseError(f"{path}: top level must be an object with a 'boxes' list")
    return [_parse_box(rec, i) for i, rec in enumerate(obj["boxes"])]
