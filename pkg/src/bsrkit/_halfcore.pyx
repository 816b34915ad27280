# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled binary16 conversion kernels (twin of ``bsrkit._half_py``)."""

from libc.math cimport ldexp
from libc.stdint cimport uint16_t, uint64_t
from libc.string cimport memcpy

import numpy as np

MAX_FINITE_BITS = 0x7BFF


cdef inline int _encode_one(double x, uint16_t *out) noexcept:
    # Returns 0 on success, 1 when x is not finite.
    cdef uint64_t d, sgn, d_exp, d_sig, sig, half, rem, res, cut
    memcpy(&d, &x, 8)
    sgn = (d >> 48) & 0x8000u
    d_exp = (d >> 52) & 0x7FFu
    d_sig = d & 0xFFFFFFFFFFFFFu

    if d_exp == 0x7FFu:
        return 1
    if d_exp >= 1039u:
        out[0] = <uint16_t> (sgn | 0x7BFFu)
        return 0
    if d_exp <= 1008u:
        if d_exp < 998u:
            out[0] = <uint16_t> sgn
            return 0
        sig = 0x10000000000000u | d_sig
        cut = 1051u - d_exp
        half = (<uint64_t> 1u) << (cut - 1u)
        rem = sig & (((<uint64_t> 1u) << cut) - 1u)
        res = sig >> cut
        if rem > half or (rem == half and (res & 1u)):
            res += 1u
        out[0] = <uint16_t> (sgn | res)
        return 0

    res = ((d_exp - 1008u) << 10) | (d_sig >> 42)
    rem = d_sig & 0x3FFFFFFFFFFu
    if rem > 0x20000000000u or (rem == 0x20000000000u and (res & 1u)):
        res += 1u
    if res >= 0x7C00u:
        res = 0x7BFFu
    out[0] = <uint16_t> (sgn | res)
    return 0


cdef inline double _decode_one(uint16_t code, int *err) noexcept:
    cdef int e_field = (code >> 10) & 0x1F
    cdef int frac = code & 0x3FF
    cdef double v
    if e_field == 31:
        err[0] = 1
        return 0.0
    if e_field == 0:
        v = ldexp(frac, -24)
    else:
        v = ldexp(1024 | frac, e_field - 25)
    return -v if code & 0x8000u else v


def encode_f16_scalar(double x):
    cdef uint16_t out
    if _encode_one(x, &out):
        raise ValueError("cannot encode non-finite value %r" % (x,))
    return out


def decode_f16_scalar(code):
    cdef int err = 0
    cdef double v = _decode_one(<uint16_t> code, &err)
    if err:
        raise ValueError("E=31 pattern 0x%04X is outside the feature domain" % code)
    return v


def encode_f16(x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(xv.shape[0], dtype=np.uint16)
    cdef uint16_t[::1] ov = out
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        if _encode_one(xv[i], &ov[i]):
            raise ValueError("cannot encode non-finite value %r at index %d" % (xv[i], i))
    return out


def decode_f16(codes):
    cdef uint16_t[::1] cv = np.ascontiguousarray(codes, dtype=np.uint16)
    out = np.empty(cv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef int err = 0
    for i in range(cv.shape[0]):
        ov[i] = _decode_one(cv[i], &err)
        if err:
            raise ValueError("E=31 pattern 0x%04X is outside the feature domain" % cv[i])
    return out
