import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronerid.detect import (
    BoundingBox,
    BoxParseError,
    baseline_detect,
    load_boxes,
    nms,
    save_boxes,
)
from dronerid.metrics import iou
from dronerid.signal import ChannelParams, ComplexSignal, ConfigurationError
from dronerid.synth import CaptureEvent, compose_capture
from dronerid.tfa import TimeFrequencyImage, stft


def make_tfi(mags: np.ndarray, fs: float = 1e6, hop: int = 16) -> TimeFrequencyImage:
    return TimeFrequencyImage(
        magnitudes=mags, hop_samples=hop, fft_size=mags.shape[1],
        window_kind="hann", t0_sample=0, sample_rate_hz=fs,
    )


@pytest.fixture(scope="module")
def frame_capture(spec, payload_bits, clean_frame):
    fs = 100e6
    ev = CaptureEvent(clean_frame, 40_000, 10e6, is_frame=True,
                      payload_bits=payload_bits,
                      truth_bandwidth_hz=spec.bandwidth_hz,
                      occupied_bandwidth_hz=spec.used_bandwidth_hz)
    return compose_capture([ev], 200_000, fs, ChannelParams(snr_db=12.0, rng_seed=1))


class TestBoundingBox:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            BoundingBox(1.0, 0.5, 0.0, 1.0)
        with pytest.raises(ConfigurationError):
            BoundingBox(0.0, 1.0, 2.0, 1.0)
        with pytest.raises(ConfigurationError):
            BoundingBox(0.0, 1.0, 0.0, 1.0, confidence=1.5)

    def test_derived_quantities(self):
        b = BoundingBox(1.0, 3.0, -2e6, 2e6)
        assert b.t_center_s == 2.0
        assert b.bandwidth_hz == 4e6
        assert b.area() == pytest.approx(8e6)


class TestBaselineDetect:
    def test_single_clean_frame_one_box(self, frame_capture):
        tfi = stft(frame_capture.signal)
        boxes = baseline_detect(tfi, energy_percentile=99.0)
        assert len(boxes) == 1
        assert iou(boxes[0], frame_capture.truth_boxes[0]) >= 0.5

    def test_all_noise_empty(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(300_000) + 1j * rng.standard_normal(300_000)
        tfi = stft(ComplexSignal(x, 100e6))
        assert baseline_detect(tfi, min_area=24) == []

    def test_deterministic(self, frame_capture):
        tfi = stft(frame_capture.signal)
        a = baseline_detect(tfi)
        b = baseline_detect(tfi)
        assert a == b

    def test_boxes_within_extent(self, frame_capture):
        tfi = stft(frame_capture.signal)
        fs = frame_capture.signal.sample_rate_hz
        t_max = len(frame_capture.signal) / fs
        for b in baseline_detect(tfi, energy_percentile=98.0):
            assert 0 <= b.t_min_s < b.t_max_s <= t_max + 1e-9
            assert -fs / 2 <= b.f_min_hz < b.f_max_hz <= fs / 2

    def test_monotone_in_percentile(self, frame_capture):
        tfi = stft(frame_capture.signal)
        counts = [len(baseline_detect(tfi, energy_percentile=p))
                  for p in (95.0, 97.0, 99.0, 99.5, 99.9, 99.99)]
        assert counts == sorted(counts, reverse=True)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=10, deadline=None)
    def test_monotone_property_random_images(self, seed):
        rng = np.random.default_rng(seed)
        mags = rng.rayleigh(size=(80, 64)).astype(np.float64)
        # plant a few bright tiles
        for _ in range(int(rng.integers(0, 4))):
            r, c = rng.integers(0, 60), rng.integers(0, 50)
            mags[r:r + 12, c:c + 10] += rng.uniform(2, 10)
        tfi = make_tfi(mags)
        counts = [len(baseline_detect(tfi, energy_percentile=p, min_area=4))
                  for p in (90.0, 95.0, 99.0, 99.9)]
        assert counts == sorted(counts, reverse=True)

    def test_adversarial_burst_attracts_box(self, spec, payload_bits, clean_frame):
        # high-power burst over the frame band: at low SNR the strongest
        # box sits on the burst, the failure mode the corrector fixes
        from dronerid.synth import InterferenceParams, synth_interference

        fs = 100e6
        burst = synth_interference("ofdm_video", InterferenceParams(
            duration_s=0.8e-3, bandwidth_hz=14e6, sample_rate_hz=fs), seed=2)
        events = [
            CaptureEvent(clean_frame, 10_000, 10e6, is_frame=True,
                         payload_bits=payload_bits, truth_bandwidth_hz=spec.bandwidth_hz,
                         occupied_bandwidth_hz=spec.used_bandwidth_hz),
            CaptureEvent(burst, 100_000, 10e6, power_db=10.0),
        ]
        cap = compose_capture([events[0], events[1]], 200_000, fs,
                              ChannelParams(snr_db=-5.0, rng_seed=3))
        boxes = baseline_detect(stft(cap.signal))
        assert len(boxes) >= 1
        # the top box is on the burst, not the frame
        assert boxes[0].t_min_s > 0.9e-3


class TestNms:
    def test_duplicates_collapse(self):
        a = BoundingBox(0.0, 1.0, 0.0, 1e6, confidence=0.9)
        b = BoundingBox(0.01, 1.01, 0.0, 1e6, confidence=0.4)
        c = BoundingBox(5.0, 6.0, 0.0, 1e6, confidence=0.5)
        out = nms([a, b, c])
        assert out == [a, c]


class TestBoxesJson:
    def test_roundtrip(self, tmp_path):
        boxes = [
            BoundingBox(0.0, 1.0, -1e6, 1e6, confidence=0.5, label="drone_broadcast"),
            BoundingBox(1.0, 2.0, 2e6, 17e6, confidence=1.0, corrected_freq=True),
            BoundingBox(0.5, 0.9, -5e6, -2e6, confidence=0.25, corrected_time=True, clipped=True),
        ]
        path = tmp_path / "boxes.json"
        save_boxes(boxes, path)
        assert load_boxes(path) == boxes

    def test_schema_fields(self, tmp_path):
        path = tmp_path / "b.json"
        save_boxes([BoundingBox(0.0, 1.0, 0.0, 1e6)], path)
        obj = json.loads(path.read_text())
        rec = obj["boxes"][0]
        for k in ("t_min_s", "t_max_s", "f_min_hz", "f_max_hz", "confidence", "label"):
            assert k in rec

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(BoxParseError):
            load_boxes(path)

    def test_missing_field_diagnostic(self, tmp_path):
        path = tmp_path / "mf.json"
        path.write_text(json.dumps({"boxes": [{"t_min_s": 0.0}]}))
        with pytest.raises(BoxParseError, match=r"boxes\[0\].*t_max_s"):
            load_boxes(path)

    def test_invalid_geometry_diagnostic(self, tmp_path):
        path = tmp_path / "ig.json"
        path.write_text(json.dumps({"boxes": [{
            "t_min_s": 1.0, "t_max_s": 0.0, "f_min_hz": 0.0, "f_max_hz": 1.0,
            "confidence": 0.5, "label": "x",
        }]}))
        with pytest.raises(BoxParseError, match=r"boxes\[0\]"):
            load_boxes(path)
