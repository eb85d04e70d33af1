"""Shared signal containers, frame numerology, and raw I/Q file access.

The sample container (`ComplexSignal`) carries complex baseband or RF
samples with enough metadata to map sample indices to absolute time and
frequency. `FrameSpec` pins down the OFDM numerology of a broadcast frame
(FFT size, cyclic prefixes, pilot placement) and `ChannelParams` bundles
the impairments applied on top of a clean capture.

Raw captures are stored as `.cf32` files: interleaved little-endian
float32 I/Q pairs with a JSON sidecar describing rate and center
frequency.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ComplexSignal",
    "FrameSpec",
    "ChannelParams",
    "ConfigurationError",
    "InputTooShortError",
    "read_cf32",
    "write_cf32",
    "DEFAULT_FRAME_SPEC",
]


class ConfigurationError(ValueError):
    """Raised when parameters are inconsistent with the protocol layout."""


class InputTooShortError(ValueError):
    """Raised when a signal is too short for the requested analysis window."""


@dataclass(frozen=True)
class ComplexSignal:
    """A sampled complex record with rate and center-frequency metadata.

    samples are unitless complex amplitudes; ``center_freq_hz`` is the RF
    frequency mapped to baseband zero, so all in-library frequencies are
    offsets relative to it.
    """

    samples: np.ndarray
    sample_rate_hz: float
    center_freq_hz: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.ndim != 1 or arr.size == 0:
            raise ConfigurationError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ConfigurationError("samples must be finite")
        if not (self.sample_rate_hz > 0):
            raise ConfigurationError("sample_rate_hz must be positive")
        if self.center_freq_hz < 0:
            raise ConfigurationError("center_freq_hz must be >= 0")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.samples) ** 2)))

    def with_samples(self, samples: np.ndarray) -> "ComplexSignal":
        return ComplexSignal(samples, self.sample_rate_hz, self.center_freq_hz)


@dataclass(frozen=True)
class FrameSpec:
    """OFDM numerology for one broadcast-frame variant.

    Defaults are scaled from the standard LTE 2048-point numerology by
    N/2048, which reproduces the observed 572/643 us frame durations at a
    15 kHz subcarrier spacing. Sequence-pilot placement and roots are
    configurable because they vary by drone type.
    """

    fft_size: int = 1024                  # N
    used_subcarriers: int = 600           # N_u, excludes DC
    subcarrier_spacing_hz: float = 15_000.0
    cp_normal: int = 72                   # samples at baseband rate
    cp_extend: int = 80                   # first-symbol CP
    num_symbols: int = 8                  # M, 8 or 9
    zc_symbol_indices: tuple[int, int] = (3, 5)
    zc_roots: tuple[int, int] = (600, 147)

    def __post_init__(self):
        n, nu = self.fft_size, self.used_subcarriers
        if n <= 0 or (n & (n - 1)) != 0:
            raise ConfigurationError(f"fft_size must be a power of two, got {n}")
        if not (0 < nu < n):
            raise ConfigurationError("used_subcarriers must satisfy 0 < N_u < N")
        if nu % 2 != 0:
            raise ConfigurationError("used_subcarriers must be even (split around DC)")
        if self.num_symbols not in (8, 9):
            raise ConfigurationError("num_symbols must be 8 or 9")
        if self.cp_normal <= 0 or self.cp_extend <= 0:
            raise ConfigurationError("cyclic prefix lengths must be positive")
        a, b = self.zc_symbol_indices
        if a == b or not all(0 <= i < self.num_symbols for i in (a, b)):
            raise ConfigurationError("zc_symbol_indices must be two distinct symbol indices in range")
        for r in self.zc_roots:
            if not (0 < r < self.zc_length) or math.gcd(r, self.zc_length) != 1:
                raise ConfigurationError(
                    f"root {r} invalid for length {self.zc_length}: need 0 < r < V and gcd(r, V) = 1"
                )

    @property
    def zc_length(self) -> int:
        """V = N_u + 1 (used subcarriers plus DC)."""
        return self.used_subcarriers + 1

    @property
    def virtual_subcarriers(self) -> int:
        return self.fft_size - self.used_subcarriers - 1

    @property
    def bandwidth_hz(self) -> float:
        """Total signal bandwidth B over all N subcarriers; also the baseband rate."""
        return self.fft_size * self.subcarrier_spacing_hz

    @property
    def used_bandwidth_hz(self) -> float:
        """Bandwidth spanned by the N_u + 1 center subcarriers."""
        return self.zc_length * self.subcarrier_spacing_hz

    def cp_length(self, symbol_index: int) -> int:
        return self.cp_extend if symbol_index == 0 else self.cp_normal

    @property
    def frame_samples(self) -> int:
        """Total baseband samples in one frame, summed per-symbol CP included."""
        return sum(self.fft_size + self.cp_length(i) for i in range(self.num_symbols))

    @property
    def frame_duration_s(self) -> float:
        return self.frame_samples / self.bandwidth_hz

    def symbol_body_start(self, symbol_index: int) -> int:
        """Baseband sample offset (from frame start) of a symbol's post-CP body."""
        return self.cp_extend + symbol_index * (self.fft_size + self.cp_normal)

    def data_symbol_indices(self) -> list[int]:
        return [i for i in range(self.num_symbols) if i not in self.zc_symbol_indices]

    def to_dict(self) -> dict:
        return {
            "fft_size": self.fft_size,
            "used_subcarriers": self.used_subcarriers,
            "subcarrier_spacing_hz": self.subcarrier_spacing_hz,
            "cp_normal": self.cp_normal,
            "cp_extend": self.cp_extend,
            "num_symbols": self.num_symbols,
            "zc_symbol_indices": list(self.zc_symbol_indices),
            "zc_roots": list(self.zc_roots),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrameSpec":
        return cls(
            fft_size=int(d["fft_size"]),
            used_subcarriers=int(d["used_subcarriers"]),
            subcarrier_spacing_hz=float(d["subcarrier_spacing_hz"]),
            cp_normal=int(d["cp_normal"]),
            cp_extend=int(d["cp_extend"]),
            num_symbols=int(d["num_symbols"]),
            zc_symbol_indices=tuple(d["zc_symbol_indices"]),
            zc_roots=tuple(d["zc_roots"]),
        )


DEFAULT_FRAME_SPEC = FrameSpec()

_NOISE_KINDS = ("awgn", "rayleigh", "gamma", "impulse")


@dataclass(frozen=True)
class ChannelParams:
    """Impairments applied to a clean capture; reproducible under ``rng_seed``."""

    snr_db: float = 20.0
    noise_kind: str = "awgn"
    cfo_hz: float = 0.0
    delay_samples: int = 0
    attenuation_db: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.noise_kind not in _NOISE_KINDS:
            raise ConfigurationError(
                f"noise_kind must be one of {_NOISE_KINDS}, got {self.noise_kind!r}"
            )
        if self.delay_samples < 0:
            raise ConfigurationError("delay_samples must be >= 0")
        if self.attenuation_db < 0:
            raise ConfigurationError("attenuation_db must be >= 0")

    def to_dict(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "noise_kind": self.noise_kind,
            "cfo_hz": self.cfo_hz,
            "delay_samples": self.delay_samples,
            "attenuation_db": self.attenuation_db,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelParams":
        return cls(
            snr_db=float(d.get("snr_db", 20.0)),
            noise_kind=str(d.get("noise_kind", "awgn")),
            cfo_hz=float(d.get("cfo_hz", 0.0)),
            delay_samples=int(d.get("delay_samples", 0)),
            attenuation_db=float(d.get("attenuation_db", 0.0)),
            rng_seed=int(d.get("rng_seed", 0)),
        )


def write_cf32(path: str | Path, sig: ComplexSignal) -> None:
    """Write interleaved little-endian float32 I/Q plus a JSON sidecar."""
    path = Path(path)
    interleaved = np.empty(2 * len(sig), dtype="<f4")
    interleaved[0::2] = sig.samples.real
    interleaved[1::2] = sig.samples.imag
    interleaved.tofile(path)
    sidecar = {
        "sample_rate_hz": sig.sample_rate_hz,
        "center_freq_hz": sig.center_freq_hz,
        "num_samples": len(sig),
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def read_cf32(
    path: str | Path,
    sample_rate_hz: float | None = None,
    center_freq_hz: float | None = None,
) -> ComplexSignal:
    """Read a `.cf32` capture; metadata comes from the sidecar unless overridden."""
    path = Path(path)
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if sidecar_path.exists():
        meta = json.loads(sidecar_path.read_text())
        sample_rate_hz = sample_rate_hz if sample_rate_hz is not None else float(meta["sample_rate_hz"])
        center_freq_hz = center_freq_hz if center_freq_hz is not None else float(meta.get("center_freq_hz", 0.0))
    if sample_rate_hz is None:
        raise ConfigurationError(f"no sidecar at {sidecar_path} and no sample rate given")
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % 2 != 0:
        raise ConfigurationError(f"{path}: odd number of float32 values, not interleaved I/Q")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return ComplexSignal(samples, sample_rate_hz, center_freq_hz or 0.0)
