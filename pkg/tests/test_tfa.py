import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import resample_poly

from dronerid.signal import ComplexSignal, ConfigurationError, InputTooShortError
from dronerid.synth import synth_broadcast_frame
from dronerid import tfa


def tone(freq_hz: float, fs: float, n: int, amp: float = 1.0) -> ComplexSignal:
    t = np.arange(n) / fs
    return ComplexSignal(amp * np.exp(2j * np.pi * freq_hz * t), fs)


class TestStft:
    def test_tone_column_argmax(self):
        fs, f0 = 1e6, 125e3
        sig = tone(f0, fs, 8192)
        tfi = tfa.stft(sig, fft_size=256, hop=64, window_kind="boxcar")
        expected_bin = int(round(f0 / fs * 256)) + 128
        assert np.all(np.argmax(tfi.magnitudes, axis=1) == expected_bin)

    def test_all_zero_signal(self):
        sig = ComplexSignal(np.full(4096, 0j), 1e6)
        tfi = tfa.stft(sig, 512)
        assert not np.any(tfi.magnitudes)

    def test_row_count_formula(self):
        sig = tone(0.0, 1e6, 5000)
        tfi = tfa.stft(sig, fft_size=512, hop=100)
        assert tfi.num_time_bins == (5000 - 512) // 100 + 1

    def test_frame_stripes(self, spec, clean_frame):
        # a clean frame shows M high-energy stripes over its band
        pad = np.concatenate([np.zeros(2000), clean_frame.samples, np.zeros(2000)])
        sig = ComplexSignal(pad, spec.bandwidth_hz)
        tfi = tfa.stft(sig, fft_size=256, hop=64)
        freqs = tfa.TimeFrequencyImage.freq_axis_hz(tfi)
        inband = np.abs(freqs) <= spec.used_bandwidth_hz / 2
        profile = (tfi.magnitudes[:, inband] ** 2).mean(axis=1)
        active = profile > 0.25 * profile.max()
        # one contiguous active stretch of the frame duration
        edges = np.flatnonzero(np.diff(active.astype(int)))
        assert len(edges) == 2
        active_rows = edges[1] - edges[0]
        expected = spec.frame_samples / 64
        assert active_rows == pytest.approx(expected, rel=0.1)

    def test_too_short_raises(self):
        with pytest.raises(InputTooShortError):
            tfa.stft(tone(0, 1e6, 100), fft_size=256)

    @given(st.floats(0.25, 4.0))
    @settings(max_examples=10, deadline=None)
    def test_scaling_linearity(self, c):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(2048) + 1j * rng.standard_normal(2048)
        a = tfa.stft(ComplexSignal(x, 1e6), 256)
        b = tfa.stft(ComplexSignal(c * x, 1e6), 256)
        np.testing.assert_allclose(b.magnitudes, c * a.magnitudes, rtol=2e-5)


class TestWelch:
    def test_flat_white_noise(self):
        rng = np.random.default_rng(0)
        n = 70_000
        x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        psd = tfa.welch_psd(ComplexSignal(x, 1e6), segment_len=1024)
        assert psd.num_segments >= 64
        dev_db = 10 * np.log10(psd.power / psd.power.mean())
        assert np.max(np.abs(dev_db)) < 3.0

    def test_tone_dominant_bin(self):
        sig = tone(100e3, 1e6, 50_000)
        psd = tfa.welch_psd(sig, 1024)
        assert 10 * np.log10(psd.power.max() / np.median(psd.power)) > 20

    def test_sum_of_independent_noises(self):
        rng = np.random.default_rng(7)
        n = 140_000
        a = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        b = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        p_sum = tfa.welch_psd(ComplexSignal(a + b, 1e6), 1024).power.mean()
        p_a = tfa.welch_psd(ComplexSignal(a, 1e6), 1024).power.mean()
        p_b = tfa.welch_psd(ComplexSignal(b, 1e6), 1024).power.mean()
        assert p_sum == pytest.approx(p_a + p_b, rel=0.05)

    def test_offset_fixed_to_half(self):
        sig = tone(0, 1e6, 10_000)
        psd = tfa.welch_psd(sig, 500)
        assert psd.offset == 250

    def test_too_short(self):
        with pytest.raises(InputTooShortError):
            tfa.welch_psd(tone(0, 1e6, 100), 1024)


def _frame_at_capture_rate(spec, payload=None, tiles=4, fs=100e6, snr_db=None, seed=0):
    payload = payload if payload is not None else np.zeros(360, dtype=np.uint8)
    frame = synth_broadcast_frame(spec, payload)
    x = np.tile(frame.samples, tiles)
    x = resample_poly(x, 625, 96)
    if snr_db is not None:
        rng = np.random.default_rng(seed)
        p = np.mean(np.abs(x) ** 2)
        npow = p * fs / (spec.used_bandwidth_hz * 10 ** (snr_db / 10))
        x = x + np.sqrt(npow / 2) * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
    return ComplexSignal(x, fs)


class TestBandwidth:
    def test_numerology_inference(self, spec):
        # B_u of 9.015 MHz at 15 kHz spacing means 600 used + 1 DC, and the
        # Eq-style scale-up lands on 15.36 MHz
        sig = _frame_at_capture_rate(spec, snr_db=10, seed=1)
        psd = tfa.welch_psd(sig, 4096)
        est = tfa.estimate_bandwidth(psd, fft_size_hint=1024)
        assert est.n_used_est == 600
        assert est.b_used_hz == pytest.approx(9.015e6, abs=120e3 * 601 / 1024)
        assert est.b_total_hz == pytest.approx(est.b_used_hz * 1024 / 601, rel=1e-12)
        assert abs(est.b_total_hz - spec.bandwidth_hz) <= 120e3

    def test_all_noise_raises(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(60_000) + 1j * rng.standard_normal(60_000)
        psd = tfa.welch_psd(ComplexSignal(x, 1e6), 1024)
        with pytest.raises(tfa.EstimationFailedError):
            tfa.estimate_bandwidth(psd, fft_size_hint=1024)


class TestSubcarrierCount:
    def test_lag_formula(self, spec):
        # direct substitution: n* = N fs / B
        sig = _frame_at_capture_rate(spec, snr_db=20, seed=3)
        est = tfa.estimate_num_subcarriers(sig, window_len=150_000,
                                           candidates={512, 1024, 2048})
        assert abs(est.n_star - 1024 * 100e6 / spec.bandwidth_hz) <= 3
        assert est.fft_size_est == 1024
        assert est.confident

    def test_mutual_verification(self, spec):
        sig = _frame_at_capture_rate(spec, snr_db=15, seed=4)
        est = tfa.estimate_num_subcarriers(sig, window_len=150_000,
                                           candidates={512, 1024, 2048})
        assert abs(est.n_star / 100e6 - est.fft_size_est / est.b_hat_hz) <= 2 / 100e6

    def test_empty_candidates_rejected(self, spec):
        sig = _frame_at_capture_rate(spec, tiles=2)
        with pytest.raises(ConfigurationError):
            tfa.estimate_num_subcarriers(sig, 10_000, candidates=set())

    def test_noise_gets_low_confidence(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(240_000) + 1j * rng.standard_normal(240_000)
        sig = ComplexSignal(x, 100e6)
        est = tfa.estimate_num_subcarriers(sig, 150_000, {512, 1024, 2048},
                                           b_hat_hz=15.36e6)
        assert not est.confident


class TestZc:
    def test_unit_modulus_exact(self):
        for r in (1, 147, 600):
            z = tfa.gen_zc(r, 601)
            np.testing.assert_allclose(np.abs(z), 1.0, atol=1e-12)

    def test_zero_lag_autocorrelation_equals_length(self):
        z = tfa.gen_zc(600, 601)
        assert np.abs(np.sum(z * np.conj(z))) == pytest.approx(601.0, abs=1e-9)

    def test_circular_autocorrelation_sidelobes(self):
        # brute-force circular correlation: ideal sequences have flat
        # (near-zero) off-peak lobes
        z = tfa.gen_zc(600, 601)
        for lag in (1, 7, 300):
            v = np.abs(np.sum(z * np.conj(np.roll(z, lag))))
            assert v <= 1 + 1e-6

    def test_cross_root_rejection_brute_force(self):
        v = 601
        roots = [1, 2, 147, 290, 600]
        for i, r1 in enumerate(roots):
            for r2 in roots[i + 1:]:
                z1, z2 = tfa.gen_zc(r1, v), tfa.gen_zc(r2, v)
                peaks = [np.abs(np.sum(z1 * np.conj(np.roll(z2, lag))))
                         for lag in range(0, v, 13)]
                assert max(peaks) / v <= 1 / math.sqrt(v) + 0.05

    def test_invalid_roots_rejected(self):
        with pytest.raises(ConfigurationError):
            tfa.gen_zc(0, 601)
        with pytest.raises(ConfigurationError):
            tfa.gen_zc(3, 9)  # gcd = 3


class TestRootIdentification:
    def test_identifies_configured_roots(self, spec, clean_frame):
        r1, r2 = tfa.identify_zc_root(clean_frame, {1, 147, 600}, spec)
        assert {r1, r2} == {600, 147}

    def test_true_roots_only(self, spec, clean_frame):
        r1, r2 = tfa.identify_zc_root(clean_frame, {600, 147}, spec)
        assert {r1, r2} == {600, 147}

    def test_noise_fails(self, spec):
        rng = np.random.default_rng(6)
        x = rng.standard_normal(30_000) + 1j * rng.standard_normal(30_000)
        sig = ComplexSignal(x, spec.bandwidth_hz)
        with pytest.raises(tfa.IdentificationFailedError):
            tfa.identify_zc_root(sig, {1, 147, 600}, spec)


class TestExport:
    def test_raw_roundtrip(self, tmp_path, clean_frame):
        tfi = tfa.stft(clean_frame, 256)
        path = tmp_path / "m.f32"
        tfa.save_tfi_raw(tfi, path)
        back = tfa.load_tfi_raw(path)
        np.testing.assert_allclose(back, tfi.magnitudes, rtol=1e-6)
        # header: rows, cols as 64-bit little-endian
        import struct

        with open(path, "rb") as fh:
            rows, cols = struct.unpack("<QQ", fh.read(16))
        assert (rows, cols) == tfi.magnitudes.shape

    @pytest.mark.parametrize("cmap", ["gray", "viridis"])
    def test_png_with_sidecar(self, tmp_path, clean_frame, cmap):
        from PIL import Image

        tfi = tfa.stft(clean_frame, 256)
        path = tmp_path / f"t_{cmap}.png"
        tfa.save_tfi_png(tfi, path, colormap=cmap)
        img = Image.open(path)
        assert img.size == (tfi.num_time_bins, tfi.num_freq_bins)
        import json

        sidecar = json.loads((tmp_path / f"t_{cmap}.png.json").read_text())
        assert sidecar["num_cols"] == tfi.num_time_bins
        assert sidecar["freq_step_hz"] < 0
