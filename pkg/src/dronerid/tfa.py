"""Time-frequency transforms and modulation-parameter estimators.

Everything the detector and the correction stages need to know about a
capture is derived here: the spectrogram image, the Welch power spectrum,
half-power bandwidth, FFT-size estimation from cyclic-prefix
autocorrelation, and constant-envelope pilot sequence generation and
identification.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve, get_window, resample_poly

from .signal import ComplexSignal, ConfigurationError, FrameSpec, InputTooShortError

__all__ = [
    "TimeFrequencyImage",
    "PowerSpectrum",
    "BandwidthEstimate",
    "SubcarrierEstimate",
    "EstimationFailedError",
    "IdentificationFailedError",
    "stft",
    "welch_psd",
    "estimate_bandwidth",
    "estimate_num_subcarriers",
    "gen_zc",
    "zc_time_template",
    "identify_zc_root",
    "save_tfi_png",
    "save_tfi_raw",
    "load_tfi_raw",
]


class EstimationFailedError(RuntimeError):
    """No usable spectral structure found (e.g. all-noise input)."""


class IdentificationFailedError(RuntimeError):
    """No pilot-sequence correlation peak cleared the confidence threshold."""


@dataclass(frozen=True)
class TimeFrequencyImage:
    """STFT magnitude matrix [time_bins x freq_bins] with axis metadata.

    Frequency bins are fftshifted: bin b maps to (b - U//2) * fs / U Hz
    relative to the capture center. Row t covers capture samples
    [t0_sample + t*hop, t0_sample + t*hop + U).
    """

    magnitudes: np.ndarray
    hop_samples: int
    fft_size: int
    window_kind: str
    t0_sample: int
    sample_rate_hz: float

    def __post_init__(self):
        m = np.asarray(self.magnitudes)
        if m.ndim != 2:
            raise ConfigurationError("magnitudes must be 2-D [time, freq]")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ConfigurationError("magnitudes must be finite and non-negative")

    @property
    def num_time_bins(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def num_freq_bins(self) -> int:
        return self.magnitudes.shape[1]

    def freq_axis_hz(self) -> np.ndarray:
        u = self.fft_size
        return (np.arange(u) - u // 2) * self.sample_rate_hz / u

    def time_edges_s(self, row: int) -> tuple[float, float]:
        fs = self.sample_rate_hz
        start = self.t0_sample + row * self.hop_samples
        return start / fs, (start + self.fft_size) / fs

    def freq_edges_hz(self, col: int) -> tuple[float, float]:
        df = self.sample_rate_hz / self.fft_size
        center = (col - self.fft_size // 2) * df
        return center - df / 2, center + df / 2


def stft(
    sig: ComplexSignal,
    fft_size: int = 1024,
    hop: int | None = None,
    window_kind: str = "hann",
) -> TimeFrequencyImage:
    """Magnitude spectrogram of a capture.

    The window length equals the FFT size; columns are fftshifted so the
    capture center sits in the middle. Defaults: U = 1024, hop = U/4,
    Hann window.
    """
    u = int(fft_size)
    hop = u // 4 if hop is None else int(hop)
    x = sig.samples
    if u > x.size:
        raise InputTooShortError(f"fft_size {u} exceeds signal length {x.size}")
    if hop < 1:
        raise ConfigurationError("hop must be >= 1")
    win = get_window(window_kind, u, fftbins=True).astype(np.float64)
    n_rows = (x.size - u) // hop + 1
    mags = np.empty((n_rows, u), dtype=np.float32)
    block = 4096
    for r0 in range(0, n_rows, block):
        r1 = min(r0 + block, n_rows)
        idx = np.arange(r0, r1)[:, None] * hop + np.arange(u)[None, :]
        seg = x[idx] * win
        mags[r0:r1] = np.abs(np.fft.fftshift(np.fft.fft(seg, axis=1), axes=1)).astype(np.float32)
    return TimeFrequencyImage(
        magnitudes=mags,
        hop_samples=hop,
        fft_size=u,
        window_kind=window_kind,
        t0_sample=0,
        sample_rate_hz=sig.sample_rate_hz,
    )


@dataclass(frozen=True)
class PowerSpectrum:
    """Welch-averaged power spectrum with segment bookkeeping."""

    power: np.ndarray
    freq_hz: np.ndarray
    segment_len: int
    offset: int
    num_segments: int

    def __post_init__(self):
        if self.offset != self.segment_len // 2:
            raise ConfigurationError("segment offset is fixed to H/2")
        if np.any(np.asarray(self.power) < 0):
            raise ConfigurationError("power must be non-negative")


def welch_psd(sig: ComplexSignal, segment_len: int = 4096, window_kind: str = "hann") -> PowerSpectrum:
    """Averaged periodogram over half-overlapping windowed segments.

    Normalization is 1/(K*H) over K segments of length H; two-sided and
    fftshifted for complex input.
    """
    h = int(segment_len)
    x = sig.samples
    if h > x.size:
        raise InputTooShortError(f"segment_len {h} exceeds signal length {x.size}")
    d = h // 2
    k = (x.size - h) // d + 1
    win = get_window(window_kind, h, fftbins=True).astype(np.float64)
    acc = np.zeros(h, dtype=np.float64)
    for i in range(k):
        seg = x[i * d:i * d + h] * win
        acc += np.abs(np.fft.fft(seg)) ** 2
    power = np.fft.fftshift(acc / (k * h))
    freq = (np.arange(h) - h // 2) * sig.sample_rate_hz / h
    return PowerSpectrum(power=power, freq_hz=freq, segment_len=h, offset=d, num_segments=k)


@dataclass(frozen=True)
class BandwidthEstimate:
    """Half-power bandwidth of the dominant in-band signal."""

    b_used_hz: float
    f_lower_hz: float
    f_upper_hz: float
    b_total_hz: float
    p_max: float
    n_used_est: int


_PEAK_TO_MEDIAN_MIN = 1.6  # below this the spectrum is considered structureless


def _half_power_crossing(power: np.ndarray, start: int, step: int, level: float) -> float | None:
    """Walk from ``start`` by ``step`` until two consecutive bins sit below
    ``level``; return the interpolated fractional crossing index."""
    i = start
    n = power.size
    while 0 <= i + 2 * step < n:
        a, b = power[i + step], power[i + 2 * step]
        if a < level and b < level:
            prev = power[i]
            frac = (prev - level) / (prev - a) if prev > a else 0.5
            return i + step * frac
        i += step
    return None


def estimate_bandwidth(
    psd: PowerSpectrum,
    fft_size_hint: int,
    subcarrier_spacing_hz: float = 15_000.0,
) -> BandwidthEstimate:
    """Outermost half-power crossings around the spectrum peak.

    The used bandwidth spans N_u + 1 subcarriers; the total bandwidth is
    scaled up by N / (N_u + 1) where N_u is inferred from the spacing.
    Raises EstimationFailedError when no plateau stands above the floor.
    """
    power = np.asarray(psd.power, dtype=np.float64)
    peak_idx = int(np.argmax(power))
    p_max = float(power[peak_idx])
    med = float(np.median(power))
    if med <= 0 or p_max < _PEAK_TO_MEDIAN_MIN * med:
        raise EstimationFailedError("no dominant plateau above the noise floor")
    level = p_max / 2.0
    up = _half_power_crossing(power, peak_idx, +1, level)
    down = _half_power_crossing(power, peak_idx, -1, level)
    if up is None or down is None:
        raise EstimationFailedError("no half-power crossing found")
    bin_hz = psd.freq_hz[1] - psd.freq_hz[0]
    f_lower = psd.freq_hz[0] + down * bin_hz
    f_upper = psd.freq_hz[0] + up * bin_hz
    b_used = f_upper - f_lower
    n_used = max(1, int(round(b_used / subcarrier_spacing_hz)) - 1)
    b_total = b_used * fft_size_hint / (n_used + 1)
    return BandwidthEstimate(
        b_used_hz=b_used,
        f_lower_hz=f_lower,
        f_upper_hz=f_upper,
        b_total_hz=b_total,
        p_max=p_max,
        n_used_est=n_used,
    )


@dataclass(frozen=True)
class SubcarrierEstimate:
    """CP-autocorrelation FFT-size estimate and its mutual-verification data."""

    n_star: int          # autocorrelation peak lag, samples at f_s
    fft_size_est: int    # candidate minimizing |n_star/f_s - N/B|
    confident: bool
    peak_ratio: float    # peak / median over the searched lag window
    b_hat_hz: float
    lag_samples: float = 0.0  # parabolic apex of the peak, sub-sample


_PEAK_RATIO_MIN = 4.0


def estimate_num_subcarriers(
    sig: ComplexSignal,
    window_len: int,
    candidates: set[int] | list[int],
    b_hat_hz: float | None = None,
    band_center_hz: float = 0.0,
    subcarrier_spacing_hz: float = 15_000.0,
    fft_size_hint: int = 1024,
) -> SubcarrierEstimate:
    """Estimate the FFT size from the cyclic-prefix autocorrelation peak.

    gamma(n) = |sum_{k<window_len} x(k) x*(k+n)| peaks at n* = N f_s / B.
    The signal is first band-limited to 1.25 * b_hat around the band
    center (out-of-band noise would otherwise bury the peak at low SNR),
    and the argmax is searched over lags bracketing the candidate set
    (the short-lag main lobe of a band-limited signal would otherwise
    win). The candidate closest to n*/f_s = N/B is returned; candidates
    are discriminable because the total bandwidth B is protocol-fixed
    while N varies. When ``b_hat_hz`` is not supplied it is estimated
    internally using the protocol numerology hints.
    """
    cands = sorted(int(c) for c in candidates)
    if not cands:
        raise ConfigurationError("candidate set must be non-empty")
    x = sig.samples
    la = int(window_len)
    if la >= x.size:
        raise InputTooShortError("window_len must be smaller than the signal")
    if b_hat_hz is None:
        # the total-bandwidth estimate must come from the protocol
        # numerology prior, independent of the candidate under test; the
        # PSD bin width must exceed the coarsest plausible subcarrier
        # spacing or the plateau resolves into per-line ripple
        coarsest = subcarrier_spacing_hz * fft_size_hint / min(cands)
        seg = 1 << int(math.log2(max(256.0, sig.sample_rate_hz / (1.3 * coarsest))))
        psd = welch_psd(sig, segment_len=min(seg, x.size))
        est = estimate_bandwidth(psd, fft_size_hint=fft_size_hint,
                                 subcarrier_spacing_hz=subcarrier_spacing_hz)
        b_hat_hz = est.b_total_hz
        # protocol bandwidths form a fixed grid; snap when the raw
        # half-power measurement confirms the hinted channel width
        b_grid = fft_size_hint * subcarrier_spacing_hz
        if abs(b_hat_hz - b_grid) < 0.05 * b_grid:
            b_hat_hz = b_grid
        band_center_hz = 0.5 * (est.f_lower_hz + est.f_upper_hz)
    fs = sig.sample_rate_hz
    if band_center_hz != 0.0:
        x = x * np.exp(-2j * np.pi * band_center_hz * np.arange(x.size) / fs)
    if 1.1 * b_hat_hz < fs:
        freqs = np.fft.fftfreq(x.size, d=1.0 / fs)
        spec = np.fft.fft(x)
        spec[np.abs(freqs) > 1.1 * b_hat_hz / 2] = 0.0
        x = np.fft.ifft(spec)
    corr = np.abs(fftconvolve(x, np.conj(x[:la][::-1]), mode="valid"))
    # lags n = 0 .. L - La; restrict to the candidate-bracketing window
    lo = max(1, int(0.75 * cands[0] * fs / b_hat_hz))
    hi = min(corr.size - 1, int(math.ceil(1.25 * cands[-1] * fs / b_hat_hz)))
    if hi <= lo:
        raise InputTooShortError("signal too short for the candidate lag window")
    window = corr[lo:hi + 1]
    n_star = lo + int(np.argmax(window))
    med = float(np.median(window))
    ratio = float(corr[n_star] / med) if med > 0 else float("inf")
    # sub-sample apex: the oversampled correlation lobe spans several
    # samples, and the integer argmax jitters within it; a least-squares
    # parabola over the lobe top is stable against per-sample noise
    apex = float(n_star)
    half = 3
    if half <= n_star < corr.size - half:
        xs = np.arange(-half, half + 1, dtype=np.float64)
        ys = corr[n_star - half:n_star + half + 1]
        a, b, _c = np.polyfit(xs, ys, 2)
        if a < 0:
            shift = -b / (2 * a)
            if abs(shift) <= half:
                apex = n_star + float(shift)
    target = apex / fs
    best = min(cands, key=lambda n: abs(target - n / b_hat_hz))
    return SubcarrierEstimate(
        n_star=n_star,
        fft_size_est=best,
        confident=ratio >= _PEAK_RATIO_MIN,
        peak_ratio=ratio,
        b_hat_hz=b_hat_hz,
        lag_samples=apex,
    )


def gen_zc(root: int, length: int) -> np.ndarray:
    """Constant-envelope sequence z_r(v) = exp(-j pi r v (v+1) / V), v = 0..V-1.

    Requires gcd(r, V) = 1; other roots degenerate the correlation peak.
    """
    if length < 1:
        raise ConfigurationError("length must be >= 1")
    if not (0 < root < length):
        raise ConfigurationError(f"root must satisfy 0 < r < V, got r={root}, V={length}")
    if math.gcd(root, length) != 1:
        raise ConfigurationError(f"gcd(r={root}, V={length}) != 1: degenerate correlation")
    v = np.arange(length, dtype=np.float64)
    return np.exp(-1j * np.pi * root * v * (v + 1) / length)


def subcarrier_bins(spec: FrameSpec, include_dc: bool) -> np.ndarray:
    """FFT bin indices of the center subcarriers in ascending-frequency order."""
    half = spec.used_subcarriers // 2
    ks = np.arange(-half, half + 1)
    if not include_dc:
        ks = ks[ks != 0]
    return ks % spec.fft_size


def zc_time_template(spec: FrameSpec, root: int, sample_rate_hz: float | None = None) -> np.ndarray:
    """Time-domain pilot symbol body: the length-V sequence mapped onto the
    center subcarriers and inverse-transformed (CP excluded).

    When ``sample_rate_hz`` differs from the baseband rate B the template
    is rationally resampled to it.
    """
    seq = gen_zc(root, spec.zc_length)
    grid = np.zeros(spec.fft_size, dtype=np.complex128)
    grid[subcarrier_bins(spec, include_dc=True)] = seq
    body = np.fft.ifft(grid) * np.sqrt(spec.fft_size)
    if sample_rate_hz is None or sample_rate_hz == spec.bandwidth_hz:
        return body
    frac = Fraction(sample_rate_hz / spec.bandwidth_hz).limit_denominator(10**6)
    return resample_poly(body, frac.numerator, frac.denominator)


def _normalized_peak(x: np.ndarray, template: np.ndarray) -> tuple[float, int]:
    """Max of |<template, x[m:]>| / (||template|| ||x[m:]||) and its lag."""
    c = np.abs(fftconvolve(x, np.conj(template[::-1]), mode="valid"))
    e = np.concatenate([[0.0], np.cumsum(np.abs(x) ** 2)])
    v = template.size
    local = np.sqrt(np.maximum(e[v:] - e[:-v], 1e-30))
    norm = c / (np.linalg.norm(template) * local)
    m = int(np.argmax(norm))
    return float(norm[m]), m


_IDENT_CONFIDENCE_MIN = 0.25


def identify_zc_root(
    sig: ComplexSignal,
    candidate_roots: set[int] | list[int],
    spec: FrameSpec,
) -> tuple[int, int]:
    """Identify the two pilot roots present in a capture by exhaustive
    template matching; peaks must stand at distinct time positions."""
    roots = sorted(int(r) for r in candidate_roots)
    if not roots:
        raise ConfigurationError("candidate root set must be non-empty")
    results = []
    for r in roots:
        tpl = zc_time_template(spec, r, sig.sample_rate_hz)
        if tpl.size > len(sig):
            raise InputTooShortError("signal shorter than the pilot template")
        peak, pos = _normalized_peak(sig.samples, tpl)
        results.append((peak, pos, r))
    results.sort(reverse=True)
    best = results[0]
    if best[0] < _IDENT_CONFIDENCE_MIN:
        raise IdentificationFailedError(
            f"best normalized peak {best[0]:.3f} below threshold {_IDENT_CONFIDENCE_MIN}"
        )
    min_sep = spec.fft_size * sig.sample_rate_hz / spec.bandwidth_hz / 2
    second = None
    for peak, pos, r in results[1:]:
        if abs(pos - best[1]) >= min_sep:
            second = (peak, pos, r)
            break
    if second is None or second[0] < _IDENT_CONFIDENCE_MIN:
        if len(roots) == 1:
            return best[2], best[2]
        raise IdentificationFailedError("no second pilot peak at a distinct position")
    return best[2], second[2]


# ---------------------------------------------------------------------------
# TFI export for the detector bridge
# ---------------------------------------------------------------------------

_RAW_MAGIC_LEN = 16


def save_tfi_raw(tfi: TimeFrequencyImage, path: str | Path) -> None:
    """Raw float32 matrix with a 16-byte header: rows then cols as 64-bit LE."""
    path = Path(path)
    m = np.asarray(tfi.magnitudes, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
        fh.write(m.tobytes(order="C"))


def load_tfi_raw(path: str | Path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        rows, cols = struct.unpack("<QQ", fh.read(_RAW_MAGIC_LEN))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != rows * cols:
        raise ConfigurationError(f"{path}: payload does not match header dimensions")
    return data.reshape(rows, cols)


def save_tfi_png(
    tfi: TimeFrequencyImage,
    path: str | Path,
    colormap: str = "gray",
    db_floor: float = -60.0,
) -> None:
    """Render the TFI to an 8-bit PNG (frequency on the vertical axis, top
    = highest) plus a JSON sidecar mapping pixels to seconds/Hz."""
    from PIL import Image

    mags = np.asarray(tfi.magnitudes, dtype=np.float64)
    ref = mags.max() if mags.max() > 0 else 1.0
    db = 20.0 * np.log10(np.maximum(mags / ref, 10.0 ** (db_floor / 20.0)))
    scaled = (db - db_floor) / (-db_floor)
    img = np.flipud((scaled * 255.0).round().astype(np.uint8).T)
    if colormap == "gray":
        Image.fromarray(img, mode="L").save(path)
    elif colormap == "viridis":
        from matplotlib import colormaps

        lut = (np.asarray(colormaps["viridis"](np.arange(256) / 255.0))[:, :3] * 255).astype(np.uint8)
        Image.fromarray(lut[img], mode="RGB").save(path)
    else:
        raise ConfigurationError(f"unsupported colormap {colormap!r}")

    fs = tfi.sample_rate_hz
    u = tfi.fft_size
    sidecar = {
        "num_rows": int(tfi.num_freq_bins),
        "num_cols": int(tfi.num_time_bins),
        # pixel-center mapping; half a pixel reaches the cell edges
        "time_of_col0_s": (tfi.t0_sample + u / 2) / fs,
        "time_step_s": tfi.hop_samples / fs,
        "freq_of_row0_hz": (tfi.num_freq_bins - 1 - u // 2) * fs / u,
        "freq_step_hz": -fs / u,
        "sample_rate_hz": fs,
        "fft_size": u,
        "hop_samples": tfi.hop_samples,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))
