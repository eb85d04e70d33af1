"""Ground-truth capture synthesis: broadcast frames, interference, channel.

Frames are built by inverting the receive chain: CRC append, Turbo
encoding, Gold scrambling, QPSK mapping onto the used subcarriers,
constant-envelope pilot symbols on their configured positions, then
IFFT + cyclic prefix per symbol. Captures are assembled from placed
events at a common sampling rate, with exact bounding-box truth recorded
for every frame event.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

from . import codec
from .detect import BoundingBox
from .signal import ChannelParams, ComplexSignal, ConfigurationError, FrameSpec
from .tfa import subcarrier_bins, zc_time_template

__all__ = [
    "qpsk_map",
    "synth_broadcast_frame",
    "InterferenceParams",
    "synth_interference",
    "apply_channel",
    "CaptureEvent",
    "CaptureTruth",
    "compose_capture",
]


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped QPSK: pair (b0, b1) -> ((1-2 b0) + j (1-2 b1)) / sqrt(2)."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 2 != 0:
        raise ConfigurationError("bit count must be even for QPSK")
    i = 1.0 - 2.0 * bits[0::2].astype(np.float64)
    q = 1.0 - 2.0 * bits[1::2].astype(np.float64)
    return (i + 1j * q) / np.sqrt(2.0)


def _ofdm_symbol(freq_values: np.ndarray, bins: np.ndarray, fft_size: int) -> np.ndarray:
    grid = np.zeros(fft_size, dtype=np.complex128)
    grid[bins] = freq_values
    return np.fft.ifft(grid) * np.sqrt(fft_size)


def frame_data_capacity_bits(spec: FrameSpec) -> int:
    return len(spec.data_symbol_indices()) * spec.used_subcarriers * 2


def synth_broadcast_frame(
    spec: FrameSpec,
    payload_bits: np.ndarray,
    seed: int = 0,
    scramble: bool = True,
    scramble_init: int = codec.DEFAULT_SCRAMBLE_INIT,
    block_bits: int | None = None,
) -> ComplexSignal:
    """Synthesize one broadcast frame at baseband rate B.

    ``payload_bits`` is the pre-CRC message block (block_bits - 24 bits);
    the frame carries crc_append -> turbo_encode -> zero pad -> scramble
    -> QPSK on the data symbols, with the two pilot symbols at their
    configured positions. Output is RMS-normalized to 1. Synthesis is
    deterministic; ``seed`` is accepted for interface symmetry with the
    other generators.
    """
    del seed
    payload_bits = np.asarray(payload_bits, dtype=np.uint8).ravel()
    if block_bits is None:
        block_bits = payload_bits.size + codec.CRC_LEN
    if payload_bits.size != block_bits - codec.CRC_LEN:
        raise ConfigurationError(
            f"payload must be {block_bits - codec.CRC_LEN} bits for block size {block_bits}, "
            f"got {payload_bits.size}"
        )
    block = codec.crc_append(payload_bits)
    coded = codec.turbo_encode(block)
    capacity = frame_data_capacity_bits(spec)
    if coded.size > capacity:
        raise ConfigurationError(
            f"coded block ({coded.size} bits) exceeds frame capacity ({capacity} bits)"
        )
    data_bits = np.zeros(capacity, dtype=np.uint8)
    data_bits[:coded.size] = coded
    if scramble:
        data_bits = codec.gold_scramble(data_bits, scramble_init)
    symbols = qpsk_map(data_bits).reshape(len(spec.data_symbol_indices()), spec.used_subcarriers)

    data_bins = subcarrier_bins(spec, include_dc=False)
    out = np.empty(spec.frame_samples, dtype=np.complex128)
    pos = 0
    data_iter = iter(range(symbols.shape[0]))
    for m in range(spec.num_symbols):
        if m == spec.zc_symbol_indices[0]:
            body = zc_time_template(spec, spec.zc_roots[0])
        elif m == spec.zc_symbol_indices[1]:
            body = zc_time_template(spec, spec.zc_roots[1])
        else:
            body = _ofdm_symbol(symbols[next(data_iter)], data_bins, spec.fft_size)
        cp = spec.cp_length(m)
        out[pos:pos + cp] = body[-cp:]
        out[pos + cp:pos + cp + spec.fft_size] = body
        pos += cp + spec.fft_size
    assert pos == spec.frame_samples
    out /= np.sqrt(np.mean(np.abs(out) ** 2))
    return ComplexSignal(out, spec.bandwidth_hz, 0.0)


_INTERFERENCE_KINDS = ("fhss_burst", "ofdm_video", "narrowband_packet")


@dataclass(frozen=True)
class InterferenceParams:
    """Footprint of one interference burst, relative to capture center."""

    duration_s: float
    bandwidth_hz: float
    sample_rate_hz: float
    center_offset_hz: float = 0.0
    power_db: float = 0.0  # RMS relative to a unit-RMS frame; -inf for silent

    def __post_init__(self):
        if self.duration_s <= 0 or self.bandwidth_hz <= 0:
            raise ConfigurationError("duration and bandwidth must be positive")
        if abs(self.center_offset_hz) + self.bandwidth_hz / 2 > self.sample_rate_hz / 2:
            raise ConfigurationError("interference footprint exceeds the capture bandwidth")


def synth_interference(kind: str, params: InterferenceParams, seed: int = 0) -> ComplexSignal:
    """Generate one interference burst with the requested time-frequency tile.

    fhss_burst: constant-envelope sweep across the band (hop-dwell stand-in).
    ofdm_video: band-limited Gaussian block, spectrally flat over the band.
    narrowband_packet: like ofdm_video but intended for small bandwidths.
    """
    if kind not in _INTERFERENCE_KINDS:
        raise ConfigurationError(f"kind must be one of {_INTERFERENCE_KINDS}")
    fs = params.sample_rate_hz
    n = max(1, int(round(params.duration_s * fs)))
    rng = np.random.default_rng(seed)
    t = np.arange(n) / fs

    amplitude = 10.0 ** (params.power_db / 20.0) if np.isfinite(params.power_db) else 0.0
    if amplitude == 0.0:
        return ComplexSignal(np.zeros(n, dtype=np.complex128), fs, 0.0)

    if kind == "fhss_burst":
        # linear sweep over the tile; random initial phase
        f0 = -params.bandwidth_hz / 2
        rate = params.bandwidth_hz / params.duration_s
        phase = 2 * np.pi * (f0 * t + 0.5 * rate * t * t) + rng.uniform(0, 2 * np.pi)
        burst = np.exp(1j * phase)
    else:
        noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        burst = _bandlimit(noise, params.bandwidth_hz, fs)
        rms = np.sqrt(np.mean(np.abs(burst) ** 2))
        if rms > 0:
            burst = burst / rms

    burst = burst * amplitude * np.exp(2j * np.pi * params.center_offset_hz * t)
    return ComplexSignal(burst, fs, 0.0)


def _bandlimit(x: np.ndarray, bandwidth_hz: float, fs: float) -> np.ndarray:
    """Brick-wall the spectrum to [-bw/2, +bw/2] via FFT masking."""
    n = x.size
    freqs = np.fft.fftfreq(n, d=1.0 / fs)
    spec = np.fft.fft(x)
    spec[np.abs(freqs) > bandwidth_hz / 2] = 0.0
    return np.fft.ifft(spec)


def _make_noise(kind: str, n: int, power: float, rng: np.random.Generator) -> np.ndarray:
    """Additive noise of the requested total power and family."""
    phase = np.exp(2j * np.pi * rng.uniform(size=n))
    if kind == "awgn":
        return np.sqrt(power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    if kind == "rayleigh":
        # magnitude Rayleigh(sigma), E[m^2] = 2 sigma^2
        mag = rng.rayleigh(scale=np.sqrt(power / 2), size=n)
        return mag * phase
    if kind == "gamma":
        # magnitude Gamma(k=2, theta), E[m^2] = k (k+1) theta^2 = 6 theta^2
        mag = rng.gamma(shape=2.0, scale=np.sqrt(power / 6.0), size=n)
        return mag * phase
    if kind == "impulse":
        # sparse +20 dB spikes over a lowered Gaussian bed, same total power
        p_spike = 1e-3
        bed_power = power / (1.0 + p_spike * 100.0)
        bed = np.sqrt(bed_power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        gate = rng.uniform(size=n) < p_spike
        spikes = np.sqrt(100.0 * bed_power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        return bed + gate * spikes
    raise ConfigurationError(f"unknown noise kind {kind!r}")


def apply_channel(
    sig: ComplexSignal,
    ch: ChannelParams,
    occupied_bandwidth_hz: float | None = None,
    support: tuple[int, int] | None = None,
    signal_power: float | None = None,
) -> ComplexSignal:
    """Delay, attenuate, CFO-rotate, and add noise at a target in-band SNR.

    The SNR reference is ``signal_power`` when given (the clean frame
    power, as compose_capture computes it), otherwise the mean input
    power over ``support`` (whole record by default). The reference is
    taken before attenuation, so attenuation_db lowers the effective SNR
    below snr_db: it is the flight-distance surrogate. With the default
    full-band ``occupied_bandwidth_hz`` the noise is scaled so total
    powers match snr_db. Deterministic under ch.rng_seed.
    """
    x = sig.samples
    n = x.size
    fs = sig.sample_rate_hz
    if signal_power is not None:
        p_sig = float(signal_power)
    else:
        lo, hi = support if support is not None else (0, n)
        lo = max(0, min(lo, n - 1))
        hi = max(lo + 1, min(hi, n))
        p_sig = float(np.mean(np.abs(x[lo:hi]) ** 2))

    scale = 10.0 ** (-ch.attenuation_db / 20.0)
    x = x * scale
    if ch.delay_samples > 0:
        d = ch.delay_samples
        x = np.concatenate([np.zeros(min(d, n), dtype=np.complex128), x])[:n]
    if ch.cfo_hz != 0.0:
        x = x * np.exp(2j * np.pi * ch.cfo_hz * np.arange(n) / fs)

    band = occupied_bandwidth_hz if occupied_bandwidth_hz is not None else fs
    snr_lin = 10.0 ** (ch.snr_db / 10.0)
    # unit noise power when there is nothing to reference against
    noise_power = p_sig * fs / (band * snr_lin) if p_sig > 0 else 1.0
    rng = np.random.default_rng(ch.rng_seed)
    noise = _make_noise(ch.noise_kind, n, noise_power, rng)
    return sig.with_samples(x + noise)


@dataclass(frozen=True)
class CaptureEvent:
    """One placed emission: a frame (with truth) or an interference burst."""

    signal: ComplexSignal
    start_sample: int
    center_offset_hz: float = 0.0
    is_frame: bool = False
    payload_bits: np.ndarray | None = None
    truth_bandwidth_hz: float | None = None   # truth box width; frames only
    occupied_bandwidth_hz: float | None = None  # SNR reference band
    power_db: float = 0.0

    def __post_init__(self):
        if self.start_sample < 0:
            raise ConfigurationError("start_sample must be >= 0")


@dataclass(frozen=True)
class CaptureTruth:
    """A synthesized capture plus exact ground truth for scoring."""

    signal: ComplexSignal
    truth_boxes: list[BoundingBox]
    payload_bits: list[np.ndarray]

    def __post_init__(self):
        fs = self.signal.sample_rate_hz
        t_max = len(self.signal) / fs
        for b in self.truth_boxes:
            inside = (
                b.t_min_s >= -1e-9 and b.t_max_s <= t_max + 1e-9
                and b.f_min_hz >= -fs / 2 - 1e-6 and b.f_max_hz <= fs / 2 + 1e-6
            )
            if not inside:
                raise ConfigurationError(f"truth box {b} outside capture extent")


def compose_capture(
    events: list[CaptureEvent],
    capture_len: int,
    f_s: float,
    ch: ChannelParams | None = None,
) -> CaptureTruth:
    """Sum placed events into one capture and record exact truth boxes.

    Event signals are resampled from their native rate to ``f_s``, mixed
    to their center offsets, scaled to event power, and summed; overlap is
    allowed. Truth boxes (frames only) cover the placed time span and
    [offset - B/2, offset + B/2] in frequency, shifted by any channel
    delay. Noise SNR references the pooled frame supports and the frame's
    occupied band.
    """
    total = np.zeros(capture_len, dtype=np.complex128)
    boxes: list[BoundingBox] = []
    payloads: list[np.ndarray] = []
    frame_band: float | None = None
    frame_energy = 0.0
    frame_samples = 0

    for ev in events:
        x = ev.signal.samples
        if ev.signal.sample_rate_hz != f_s:
            frac = Fraction(ev.signal.sample_rate_hz / f_s).limit_denominator(10**6)
            x = resample_poly(x, frac.denominator, frac.numerator)
        scale = 10.0 ** (ev.power_db / 20.0)
        n = np.arange(x.size)
        x = x * scale * np.exp(2j * np.pi * ev.center_offset_hz * (ev.start_sample + n) / f_s)
        stop = ev.start_sample + x.size
        if stop > capture_len:
            raise ConfigurationError(
                f"event at sample {ev.start_sample} (len {x.size}) exceeds capture_len {capture_len}"
            )
        total[ev.start_sample:stop] += x
        if ev.is_frame:
            delay = ch.delay_samples if ch is not None else 0
            bw = ev.truth_bandwidth_hz
            if bw is None:
                raise ConfigurationError("frame events must set truth_bandwidth_hz")
            boxes.append(BoundingBox(
                t_min_s=(ev.start_sample + delay) / f_s,
                t_max_s=(stop + delay) / f_s,
                f_min_hz=ev.center_offset_hz - bw / 2,
                f_max_hz=ev.center_offset_hz + bw / 2,
                confidence=1.0,
                label="drone_broadcast",
            ))
            payloads.append(
                np.asarray(ev.payload_bits, dtype=np.uint8)
                if ev.payload_bits is not None else np.zeros(0, dtype=np.uint8)
            )
            # SNR references the clean frame power, uncontaminated by
            # overlapping interference
            frame_energy += float(np.sum(np.abs(x) ** 2))
            frame_samples += x.size
            if ev.occupied_bandwidth_hz is not None:
                frame_band = ev.occupied_bandwidth_hz

    sig = ComplexSignal(total, f_s, 0.0)
    if ch is not None:
        power = frame_energy / frame_samples if frame_samples else None
        sig = apply_channel(sig, ch, occupied_bandwidth_hz=frame_band, signal_power=power)
    return CaptureTruth(signal=sig, truth_boxes=boxes, payload_bits=payloads)
