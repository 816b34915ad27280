"""Bit-sequence representation of waveforms.

Each sample expands into its 16-bit binary form, turning a length-T clip
into a T x 16 binary matrix.  Two encodings: two's-complement int16 over
raw PCM, and IEEE 754 binary16 over normalized floating-point samples
(bit order: sign, exponent MSB-first, fraction MSB-first).  The matrix is
consumed either as 16 per-bit pulse channels or as a monochrome image.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bsrkit import half
from bsrkit.audio_io import PcmClip, Waveform

KIND_INT16 = "int16"
KIND_FLOAT16 = "float16"
_KIND_BYTES = {KIND_INT16: 0, KIND_FLOAT16: 1}
_KIND_NAMES = {v: k for k, v in _KIND_BYTES.items()}

# bit k of a row = bit (15 - k) of the uint16 code, so column 0 is the sign
_BIT_SHIFTS = np.arange(15, -1, -1, dtype=np.uint16)


@dataclass(frozen=True)
class Float16Bits:
    """Sign / 5-bit exponent / 10-bit fraction of one binary16 value."""

    sign: int
    exponent: int
    fraction: int

    def __post_init__(self):
        if self.sign not in (0, 1) or not 0 <= self.exponent < 32 or not 0 <= self.fraction < 1024:
            raise ValueError("fields out of range for binary16")

    @property
    def code(self) -> int:
        return (self.sign << 15) | (self.exponent << 10) | self.fraction

    @classmethod
    def from_code(cls, code: int) -> "Float16Bits":
        return cls(sign=(code >> 15) & 1, exponent=(code >> 10) & 0x1F, fraction=code & 0x3FF)

    def bits(self) -> tuple[int, ...]:
        """All 16 bits, sign first, exponent and fraction MSB-first."""
        return tuple((self.code >> s) & 1 for s in range(15, -1, -1))


@dataclass
class BitMatrix:
    """T x 16 binary matrix (uint8 entries in {0, 1})."""

    bits: np.ndarray
    encoding_kind: str
    source_id: str = ""

    def __post_init__(self):
        if self.bits.ndim != 2 or self.bits.shape[1] != 16:
            raise ValueError(f"bit matrix must be T x 16, got {self.bits.shape}")
        if self.encoding_kind not in _KIND_BYTES:
            raise ValueError(f"unknown encoding kind {self.encoding_kind!r}")


def encode_float16(x: float) -> Float16Bits:
    """Nearest binary16 for a finite value (ties to even, clamped at +-65504)."""
    return Float16Bits.from_code(half.encode_scalar(float(x)))


def decode_float16(b: Float16Bits) -> float:
    """Exact value of the bit pattern; E=31 raises (inf/NaN have no value here)."""
    return half.decode_scalar(b.code)


def encode_int16(s: int) -> np.ndarray:
    """Two's-complement bit vector, MSB first."""
    if not -32768 <= s <= 32767:
        raise ValueError(f"sample {s} outside int16 range")
    code = np.uint16(np.int16(s).view(np.uint16))
    return ((code >> _BIT_SHIFTS) & 1).astype(np.uint8)


def waveform_to_bsr(w: Waveform | PcmClip, kind: str) -> BitMatrix:
    """Expand every sample into its 16-bit vector; row t = sample t."""
    if kind == KIND_FLOAT16:
        if not isinstance(w, Waveform):
            raise TypeError("float16 BSR needs a normalized Waveform, got PCM integers")
        codes = half.encode_array(w.samples)
        source_id = w.source_id
    elif kind == KIND_INT16:
        if not isinstance(w, PcmClip):
            raise TypeError("int16 BSR needs a PcmClip of raw integers")
        codes = w.samples.astype(np.int16).view(np.uint16)
        source_id = ""
    else:
        raise ValueError(f"unknown encoding kind {kind!r}")
    bits = ((codes[:, None] >> _BIT_SHIFTS[None, :]) & 1).astype(np.uint8)
    return BitMatrix(bits=bits, encoding_kind=kind, source_id=source_id)


def bit_pulses(m: BitMatrix) -> np.ndarray:
    """16 channels x T real matrix; channel 0 is the sign-bit pulse."""
    return m.bits.T.astype(np.float64)


def matrix_from_pulses(pulses: np.ndarray, kind: str, source_id: str = "") -> BitMatrix:
    """Inverse of bit_pulses."""
    return BitMatrix(bits=np.asarray(pulses).T.astype(np.uint8), encoding_kind=kind, source_id=source_id)


def bit_image(m: BitMatrix, path: str | Path) -> None:
    """Render the matrix as a binary PBM (P4): pixel (t, k) = bit (t, k), 1 = black.

    Rows are 16 px wide, so each raster row packs into exactly 2 bytes.
    """
    t = m.bits.shape[0]
    raster = np.packbits(m.bits, axis=1).tobytes()
    Path(path).write_bytes(b"P4\n16 %d\n" % t + raster)


def save_bitmatrix(m: BitMatrix, path: str | Path) -> None:
    """Binary container: magic BSR1, kind byte, u32 T, rows packed 2 bytes each."""
    header = b"BSR1" + bytes([_KIND_BYTES[m.encoding_kind]]) + struct.pack("<I", m.bits.shape[0])
    Path(path).write_bytes(header + np.packbits(m.bits, axis=1).tobytes())


def load_bitmatrix(path: str | Path, source_id: str = "") -> BitMatrix:
    data = Path(path).read_bytes()
    if len(data) < 9 or data[:4] != b"BSR1":
        raise ValueError(f"{path}: not a BSR1 file")
    kind = _KIND_NAMES.get(data[4])
    if kind is None:
        raise ValueError(f"{path}: unknown kind byte {data[4]}")
    (t,) = struct.unpack("<I", data[5:9])
    if len(data) != 9 + 2 * t:
        raise ValueError(f"{path}: expected {2 * t} payload bytes, found {len(data) - 9}")
    packed = np.frombuffer(data[9:], dtype=np.uint8).reshape(t, 2)
    return BitMatrix(bits=np.unpackbits(packed, axis=1), encoding_kind=kind, source_id=source_id)
