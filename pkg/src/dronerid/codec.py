"""Bitstream recovery: Gold-sequence scrambling, Turbo coding, CRC, payload layout.

The coding chain mirrors the cellular stack the broadcast frames borrow
from: a length-31 dual-LFSR Gold scrambler, a rate-1/3 parallel
concatenated convolutional (Turbo) code with a quadratic permutation
polynomial interleaver, and a 24-bit CRC as the sole validity gate.
Concrete generator/polynomial choices are configuration with
cellular-standard defaults; the real vendor parameters are not public.

Bits are numpy uint8 arrays of 0/1 throughout. Soft values are LLRs with
the convention LLR = log P(bit=0) / P(bit=1), so positive means 0.
"""

from __future__ import annotations

import struct
import uuid as uuid_mod
from dataclasses import dataclass

import numpy as np

from .signal import ConfigurationError

__all__ = [
    "gold_sequence",
    "gold_scramble",
    "descramble_llrs",
    "turbo_encode",
    "turbo_decode",
    "crc_remainder",
    "crc_append",
    "crc_check",
    "DecodedPayload",
    "PayloadSchema",
    "DEFAULT_SCHEMA",
    "pack_payload",
    "parse_payload",
    "CRC24_POLY",
    "DEFAULT_SCRAMBLE_INIT",
    "TURBO_BLOCK_SIZES",
]

# CRC-24A generator (x^24 + x^23 + x^18 + x^17 + x^14 + x^11 + x^10 + x^7
# + x^6 + x^5 + x^4 + x^3 + x + 1), expressed without the leading x^24 term.
CRC24_POLY = 0x864CFB
CRC_LEN = 24

DEFAULT_SCRAMBLE_INIT = 0x1A2B3

_GOLD_OFFSET = 1600  # LFSR warm-up discard


def gold_sequence(length: int, c_init: int) -> np.ndarray:
    """Generate ``length`` bits of the Gold stream for a 31-bit initializer.

    Two length-31 LFSRs: x1(n+31) = x1(n+3) + x1(n), x1 seeded to a single
    leading one; x2(n+31) = x2(n+3) + x2(n+2) + x2(n+1) + x2(n), seeded from
    ``c_init``. The output is their XOR after discarding 1600 warm-up bits.
    """
    if length < 0:
        raise ConfigurationError("length must be >= 0")
    total = length + _GOLD_OFFSET + 31
    x1 = np.zeros(total, dtype=np.uint8)
    x2 = np.zeros(total, dtype=np.uint8)
    x1[0] = 1
    for i in range(31):
        x2[i] = (c_init >> i) & 1
    for n in range(total - 31):
        x1[n + 31] = (x1[n + 3] + x1[n]) & 1
        x2[n + 31] = (x2[n + 3] + x2[n + 2] + x2[n + 1] + x2[n]) & 1
    return (x1[_GOLD_OFFSET:_GOLD_OFFSET + length] + x2[_GOLD_OFFSET:_GOLD_OFFSET + length]) & 1


def gold_scramble(bits: np.ndarray, c_init: int = DEFAULT_SCRAMBLE_INIT) -> np.ndarray:
    """XOR a bit block with the Gold stream. Involution: applying twice restores."""
    bits = np.asarray(bits, dtype=np.uint8)
    return (bits ^ gold_sequence(bits.size, c_init)).astype(np.uint8)


def descramble_llrs(llrs: np.ndarray, c_init: int = DEFAULT_SCRAMBLE_INIT) -> np.ndarray:
    """Descramble soft values: flip LLR sign wherever the Gold bit is one."""
    llrs = np.asarray(llrs, dtype=np.float64)
    stream = gold_sequence(llrs.size, c_init)
    return llrs * (1.0 - 2.0 * stream.astype(np.float64))


# ---------------------------------------------------------------------------
# Turbo code: rate-1/3 PCCC, RSC constituents g0 = 13 (feedback), g1 = 15
# (octal), QPP interleaver. Output layout: [sys(K), par1(K), par2(K),
# tail1(6), tail2(6)] for a total of 3K + 12 bits.
# ---------------------------------------------------------------------------

# QPP pairs (f1, f2) per block size; 3GPP 36.212 Table 5.1.3-3 plus a
# locally verified entry for K = 1000.
TURBO_BLOCK_SIZES: dict[int, tuple[int, int]] = {
    40: (3, 10), 48: (7, 12), 56: (19, 42), 64: (7, 16), 72: (7, 18),
    80: (11, 20), 88: (5, 22), 96: (11, 24), 104: (7, 26), 112: (41, 84),
    120: (103, 90), 128: (15, 32), 136: (9, 34), 144: (17, 108), 152: (9, 38),
    160: (21, 120), 168: (101, 84), 176: (21, 44), 184: (57, 46), 192: (23, 48),
    200: (13, 50), 208: (27, 52), 216: (11, 36), 224: (27, 56), 232: (85, 58),
    240: (29, 60), 248: (33, 62), 256: (15, 32), 264: (17, 198), 272: (33, 68),
    280: (103, 210), 288: (19, 36), 296: (19, 74), 304: (37, 76), 312: (19, 78),
    320: (21, 120), 328: (21, 82), 336: (115, 84), 344: (193, 86), 352: (21, 44),
    360: (133, 90), 368: (81, 46), 376: (45, 94), 384: (23, 48), 392: (243, 98),
    400: (151, 40), 408: (155, 102), 416: (25, 52), 424: (51, 106), 432: (47, 72),
    440: (91, 110), 448: (29, 168), 456: (29, 114), 464: (247, 58), 472: (29, 118),
    480: (89, 180), 488: (91, 122), 496: (157, 62), 504: (55, 84), 512: (31, 64),
    528: (17, 66), 544: (35, 68), 560: (227, 420), 576: (65, 96), 592: (19, 74),
    608: (37, 76), 624: (41, 234), 640: (39, 80), 656: (185, 82), 672: (43, 252),
    688: (21, 86), 704: (155, 44), 720: (79, 120), 736: (139, 92), 752: (23, 94),
    768: (217, 48), 784: (25, 98), 800: (17, 80), 816: (127, 102), 832: (25, 52),
    848: (239, 106), 864: (17, 48), 880: (137, 110), 896: (215, 112), 912: (29, 114),
    928: (15, 58), 944: (147, 118), 960: (29, 60), 976: (59, 122), 992: (65, 124),
    1000: (17, 20),
    1008: (55, 84), 1024: (31, 64), 1056: (17, 66), 1088: (171, 204), 1120: (67, 140),
    1152: (35, 72), 1184: (19, 74), 1216: (39, 76), 1248: (19, 78), 1280: (199, 240),
    1312: (21, 82), 1344: (211, 252), 1376: (21, 86), 1408: (43, 88), 1440: (149, 60),
    1472: (45, 92), 1504: (49, 846), 1536: (71, 48), 1568: (13, 28), 1600: (17, 80),
    1632: (25, 102), 1664: (183, 104), 1696: (55, 954), 1728: (127, 96), 1760: (27, 110),
    1792: (29, 112), 1824: (29, 114), 1856: (57, 116), 1888: (45, 354), 1920: (31, 120),
    1952: (59, 610), 1984: (185, 124), 2016: (113, 420), 2048: (31, 64),
}

_TAIL_STEPS = 3
_NUM_STATES = 8
_NEG_INF = -1e30


def _qpp_indices(k: int) -> np.ndarray:
    if k not in TURBO_BLOCK_SIZES:
        raise ConfigurationError(f"unsupported turbo block size K={k}")
    f1, f2 = TURBO_BLOCK_SIZES[k]
    i = np.arange(k, dtype=np.int64)
    return (f1 * i + f2 * i * i) % k


def _rsc_tables() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Next-state / parity / feedback-input tables for the 8-state RSC."""
    next_state = np.zeros((2, _NUM_STATES), dtype=np.int64)
    parity = np.zeros((2, _NUM_STATES), dtype=np.int64)
    tail_bit = np.zeros(_NUM_STATES, dtype=np.int64)
    for s in range(_NUM_STATES):
        s1, s2, s3 = (s >> 2) & 1, (s >> 1) & 1, s & 1
        fb = s2 ^ s3
        tail_bit[s] = fb  # input that drives the register to zero
        for d in (0, 1):
            a = d ^ fb
            parity[d, s] = a ^ s1 ^ s3
            next_state[d, s] = (a << 2) | (s1 << 1) | s2
    return next_state, parity, tail_bit


_NEXT_STATE, _PARITY, _TAIL_BIT = _rsc_tables()


def _rsc_encode(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Encode one constituent; returns (parity bits, 6 tail bits as x,z pairs)."""
    state = 0
    parity = np.zeros(bits.size, dtype=np.uint8)
    for i, d in enumerate(bits):
        parity[i] = _PARITY[d, state]
        state = _NEXT_STATE[d, state]
    tail = np.zeros(2 * _TAIL_STEPS, dtype=np.uint8)
    for t in range(_TAIL_STEPS):
        d = int(_TAIL_BIT[state])
        tail[2 * t] = d
        tail[2 * t + 1] = _PARITY[d, state]
        state = _NEXT_STATE[d, state]
    assert state == 0
    return parity, tail


def turbo_encode(bits: np.ndarray) -> np.ndarray:
    """Rate-1/3 PCCC encoding of a K-bit block; output is 3K + 12 bits."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    k = bits.size
    perm = _qpp_indices(k)
    par1, tail1 = _rsc_encode(bits)
    par2, tail2 = _rsc_encode(bits[perm])
    return np.concatenate([bits, par1, par2, tail1, tail2]).astype(np.uint8)


def _incoming_tables() -> tuple[np.ndarray, np.ndarray]:
    """For each state, the two (input, source-state) branches that enter it."""
    in_d = np.zeros((_NUM_STATES, 2), dtype=np.int64)
    in_s = np.zeros((_NUM_STATES, 2), dtype=np.int64)
    fill = np.zeros(_NUM_STATES, dtype=np.int64)
    for d in (0, 1):
        for s in range(_NUM_STATES):
            s2 = _NEXT_STATE[d, s]
            in_d[s2, fill[s2]] = d
            in_s[s2, fill[s2]] = s
            fill[s2] += 1
    assert np.all(fill == 2)
    return in_d, in_s


_IN_D, _IN_S = _incoming_tables()


def _max_log_bcjr(
    llr_sys: np.ndarray,
    llr_par: np.ndarray,
    llr_apriori: np.ndarray,
    tail_sys: np.ndarray,
    tail_par: np.ndarray,
) -> np.ndarray:
    """One constituent max-log-MAP pass over the terminated 8-state trellis.

    Returns a-posteriori LLRs for the K information positions.
    """
    k = llr_sys.size
    steps = k + _TAIL_STEPS
    # half-LLR contribution of hypothesis bit b: +L/2 for b=0, -L/2 for b=1
    sys_all = np.concatenate([llr_sys + llr_apriori, tail_sys])
    par_all = np.concatenate([llr_par, tail_par])
    in_sign = np.array([1.0, -1.0])            # by input bit d
    par_sign = 1.0 - 2.0 * _PARITY.astype(np.float64)  # by (d, s)
    gamma = (
        0.5 * sys_all[:, None, None] * in_sign[None, :, None]
        + 0.5 * par_all[:, None, None] * par_sign[None, :, :]
    )  # [steps, d, s]

    alpha = np.empty((steps + 1, _NUM_STATES))
    alpha[0] = _NEG_INF
    alpha[0, 0] = 0.0
    for t in range(steps):
        cand = alpha[t] + gamma[t]  # [d, s]
        inc = cand[_IN_D, _IN_S]    # [s', 2]
        alpha[t + 1] = inc.max(axis=1)

    beta = np.empty((steps + 1, _NUM_STATES))
    beta[steps] = _NEG_INF
    beta[steps, 0] = 0.0
    for t in range(steps - 1, -1, -1):
        out = gamma[t] + beta[t + 1][_NEXT_STATE]  # [d, s]
        beta[t] = out.max(axis=0)

    # fully vectorized over the K info positions
    b0 = beta[1:k + 1][:, _NEXT_STATE[0]]  # [t, s]
    b1 = beta[1:k + 1][:, _NEXT_STATE[1]]
    v0 = alpha[:k] + gamma[:k, 0, :] + b0
    v1 = alpha[:k] + gamma[:k, 1, :] + b1
    return v0.max(axis=1) - v1.max(axis=1)


def turbo_decode(
    llrs: np.ndarray,
    max_iters: int = 8,
    extrinsic_scale: float = 0.75,
    crc_hook=None,
) -> tuple[np.ndarray, int]:
    """Iterative max-log-MAP decoding of a 3K + 12 soft block.

    ``crc_hook``, when given, is called with the hard-decision bits after
    each iteration and decoding stops early as soon as it returns True.
    Returns (bits, iterations_used).
    """
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    if (llrs.size - 12) % 3 != 0:
        raise ConfigurationError(f"soft input length {llrs.size} does not match 3K + 12")
    k = (llrs.size - 12) // 3
    perm = _qpp_indices(k)
    inv_perm = np.empty_like(perm)
    inv_perm[perm] = np.arange(k)

    sys_llr = llrs[:k]
    par1 = llrs[k:2 * k]
    par2 = llrs[2 * k:3 * k]
    tail1 = llrs[3 * k:3 * k + 6]
    tail2 = llrs[3 * k + 6:]
    t1_sys, t1_par = tail1[0::2], tail1[1::2]
    t2_sys, t2_par = tail2[0::2], tail2[1::2]
    sys_perm = sys_llr[perm]

    apriori1 = np.zeros(k)
    bits = (sys_llr < 0).astype(np.uint8)
    prev = None
    for it in range(1, max_iters + 1):
        post1 = _max_log_bcjr(sys_llr, par1, apriori1, t1_sys, t1_par)
        ext1 = extrinsic_scale * (post1 - sys_llr - apriori1)
        apriori2 = ext1[perm]
        post2 = _max_log_bcjr(sys_perm, par2, apriori2, t2_sys, t2_par)
        ext2 = extrinsic_scale * (post2 - sys_perm - apriori2)
        apriori1 = ext2[inv_perm]
        bits = (post2[inv_perm] < 0).astype(np.uint8)
        if crc_hook is not None and crc_hook(bits):
            return bits, it
        if prev is not None and np.array_equal(bits, prev):
            return bits, it
        prev = bits
    return bits, max_iters


# ---------------------------------------------------------------------------
# CRC
# ---------------------------------------------------------------------------

def crc_remainder(bits: np.ndarray, polynomial: int = CRC24_POLY, width: int = CRC_LEN) -> np.ndarray:
    """Remainder of bits * x^width modulo the generator, MSB-first long division."""
    reg = 0
    top = 1 << width
    mask = top - 1
    for b in np.asarray(bits, dtype=np.uint8):
        reg = ((reg << 1) | int(b))
        if reg & top:
            reg ^= top | polynomial
    for _ in range(width):
        reg <<= 1
        if reg & top:
            reg ^= top | polynomial
    reg &= mask
    return np.array([(reg >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def crc_append(bits: np.ndarray, polynomial: int = CRC24_POLY) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    return np.concatenate([bits, crc_remainder(bits, polynomial)])


def crc_check(bits: np.ndarray, polynomial: int = CRC24_POLY) -> bool:
    """True iff the trailing CRC verifies the preceding message bits."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size <= CRC_LEN:
        raise ConfigurationError("block shorter than the CRC field")
    return bool(np.all(crc_remainder(bits[:-CRC_LEN], polynomial) == bits[-CRC_LEN:]))


# ---------------------------------------------------------------------------
# Payload layout
# ---------------------------------------------------------------------------

# Stand-in serial prefixes per drone model; the first three characters of a
# serial are fixed per type.
KNOWN_SERIAL_PREFIXES = {
    "1AS": "air-2s",
    "1M3": "mini-3-pro",
    "1MV": "mavic-pro",
    "1M2": "mini-2",
    "1V3": "mavic-3",
    "1T3": "matrice-300",
    "1T0": "matrice-30t",
    "1V9": "mavic-3-pro",
    "1SE": "mini-2-se",
    "1N3": "mini-3",
}


@dataclass(frozen=True)
class PayloadSchema:
    """Fixed-width broadcast message layout feeding the Turbo block.

    version(1) serial(16) lat(i32) lon(i32) alt_cm(i16) speed_cms(i16)
    uuid(16), little-endian, then zero padding up to ``block_bits - 24``
    and a 24-bit CRC. The default fits K = 384 with no padding.
    """

    block_bits: int = 384
    crc_polynomial: int = CRC24_POLY

    PACK_FORMAT = "<B16siihh16s"

    @property
    def message_bits(self) -> int:
        return self.block_bits - CRC_LEN

    @property
    def payload_bytes(self) -> int:
        return struct.calcsize(self.PACK_FORMAT)

    def __post_init__(self):
        if self.block_bits not in TURBO_BLOCK_SIZES:
            raise ConfigurationError(f"block_bits {self.block_bits} not a supported turbo size")
        if self.payload_bytes * 8 > self.message_bits:
            raise ConfigurationError("payload layout does not fit the configured block")


DEFAULT_SCHEMA = PayloadSchema()


@dataclass(frozen=True)
class DecodedPayload:
    """Parsed broadcast message; fields are meaningful only when crc_ok."""

    crc_ok: bool
    raw_bits: np.ndarray
    serial: str = ""
    lat_deg: float = 0.0
    lon_deg: float = 0.0
    altitude_m: float = 0.0
    speed_ms: float = 0.0
    uuid: bytes = b""
    version: int = 0
    serial_prefix_known: bool = False
    model: str = ""

    def to_dict(self) -> dict:
        return {
            "crc_ok": self.crc_ok,
            "serial": self.serial,
            "lat_deg": self.lat_deg,
            "lon_deg": self.lon_deg,
            "altitude_m": self.altitude_m,
            "speed_ms": self.speed_ms,
            "uuid": self.uuid.hex() if self.uuid else "",
            "version": self.version,
            "serial_prefix_known": self.serial_prefix_known,
            "model": self.model,
        }


def _bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def _bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def pack_payload(
    serial: str,
    lat_deg: float,
    lon_deg: float,
    altitude_m: float = 0.0,
    speed_ms: float = 0.0,
    operator_uuid: bytes | None = None,
    version: int = 1,
    schema: PayloadSchema = DEFAULT_SCHEMA,
) -> np.ndarray:
    """Pack message fields into a CRC-protected Turbo block of schema.block_bits."""
    serial_b = serial.encode("ascii")
    if len(serial_b) > 16:
        raise ConfigurationError("serial longer than 16 bytes")
    serial_b = serial_b.ljust(16, b"\x00")
    if operator_uuid is None:
        operator_uuid = uuid_mod.UUID(int=0).bytes
    if len(operator_uuid) != 16:
        raise ConfigurationError("operator uuid must be 16 bytes")
    lat_fx = int(round(lat_deg * 1e7))
    lon_fx = int(round(lon_deg * 1e7))
    alt_fx = int(round(altitude_m * 100))
    speed_fx = int(round(speed_ms * 100))
    raw = struct.pack(
        schema.PACK_FORMAT, version, serial_b, lat_fx, lon_fx, alt_fx, speed_fx, operator_uuid
    )
    bits = _bytes_to_bits(raw)
    message = np.zeros(schema.message_bits, dtype=np.uint8)
    message[:bits.size] = bits
    return crc_append(message, schema.crc_polynomial)


def parse_payload(bits: np.ndarray, schema: PayloadSchema = DEFAULT_SCHEMA) -> DecodedPayload:
    """Parse a decoded Turbo block back into message fields.

    Parsing is refused (crc_ok False, no fields) when the CRC fails. An
    unknown serial prefix is flagged but the fields are still returned.
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size != schema.block_bits:
        raise ConfigurationError(
            f"expected {schema.block_bits} bits, got {bits.size}"
        )
    if not crc_check(bits, schema.crc_polynomial):
        return DecodedPayload(crc_ok=False, raw_bits=bits)
    raw = _bits_to_bytes(bits[:schema.message_bits])[:schema.payload_bytes]
    version, serial_b, lat_fx, lon_fx, alt_fx, speed_fx, op_uuid = struct.unpack(
        schema.PACK_FORMAT, raw
    )
    serial = serial_b.rstrip(b"\x00").decode("ascii", errors="replace")
    prefix_known = serial[:3] in KNOWN_SERIAL_PREFIXES
    return DecodedPayload(
        crc_ok=True,
        raw_bits=bits,
        serial=serial,
        lat_deg=lat_fx / 1e7,
        lon_deg=lon_fx / 1e7,
        altitude_m=alt_fx / 100.0,
        speed_ms=speed_fx / 100.0,
        uuid=op_uuid,
        version=version,
        serial_prefix_known=prefix_known,
        model=KNOWN_SERIAL_PREFIXES.get(serial[:3], ""),
    )
