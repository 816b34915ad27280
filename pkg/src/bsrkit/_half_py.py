"""Pure-Python binary16 conversion kernels.

Fallback twin of the compiled extension ``bsrkit._halfcore``; both expose
the same four functions and must agree bit-for-bit.  Encoding rounds to
nearest (ties to even) and clamps out-of-range finite values to the max
finite half (+-65504) instead of producing infinities.  E=31 patterns
(inf/NaN) are rejected on decode.
"""

import math
import struct

import numpy as np

MAX_FINITE_BITS = 0x7BFF  # 65504.0


def encode_f16_scalar(x: float) -> int:
    """Nearest binary16 code (as uint16) for a finite float."""
    d = struct.unpack("<Q", struct.pack("<d", x))[0]
    sgn = (d >> 48) & 0x8000
    d_exp = (d >> 52) & 0x7FF
    d_sig = d & 0xFFFFFFFFFFFFF

    if d_exp == 0x7FF:
        raise ValueError("cannot encode non-finite value %r" % (x,))
    if d_exp >= 1039:  # |x| >= 2^16: past the half range
        return sgn | MAX_FINITE_BITS
    if d_exp <= 1008:  # |x| < 2^-14: subnormal half or zero
        if d_exp < 998:  # |x| < 2^-25: underflows to signed zero
            return sgn
        # Round the full 53-bit significand at the subnormal ULP (2^-24).
        sig = 0x10000000000000 | d_sig
        cut = 1051 - d_exp  # 43..53
        half = 1 << (cut - 1)
        rem = sig & ((1 << cut) - 1)
        out = sig >> cut
        if rem > half or (rem == half and out & 1):
            out += 1
        return sgn | out  # carry into the exponent field is the right answer

    out = ((d_exp - 1008) << 10) | (d_sig >> 42)
    rem = d_sig & 0x3FFFFFFFFFF
    if rem > 0x20000000000 or (rem == 0x20000000000 and out & 1):
        out += 1
    if out >= 0x7C00:  # rounded past max normal
        out = MAX_FINITE_BITS
    return sgn | out


def decode_f16_scalar(code: int) -> float:
    """Exact value of a binary16 code; E=31 (inf/NaN) is rejected."""
    e_field = (code >> 10) & 0x1F
    frac = code & 0x3FF
    if e_field == 31:
        raise ValueError("E=31 pattern 0x%04X is outside the feature domain" % code)
    if e_field == 0:
        v = math.ldexp(frac, -24)
    else:
        v = math.ldexp(1024 | frac, e_field - 25)
    return -v if code & 0x8000 else v


def encode_f16(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    enc = encode_f16_scalar
    return np.fromiter((enc(v) for v in x.tolist()), dtype=np.uint16, count=x.size)


def decode_f16(codes) -> np.ndarray:
    codes = np.ascontiguousarray(codes, dtype=np.uint16)
    dec = decode_f16_scalar
    return np.fromiter((dec(c) for c in codes.tolist()), dtype=np.float64, count=codes.size)
