"""Built-in invariant checks runnable without any dataset (`bsrkit selftest`).

Each check prints one PASS/FAIL line; run() returns True when all pass.
"""

from __future__ import annotations

import numpy as np

from bsrkit import half
from bsrkit.audio_io import Waveform
from bsrkit.bsr import Float16Bits, encode_float16, waveform_to_bsr
from bsrkit.classifier import TrainConfig, loss_and_grad, sgdr_lr
from bsrkit.fusion import FusionSpec, fuse
from bsrkit.noise import pink_noise, snr_gain, white_noise
from bsrkit.scores import ScoreMatrix
from bsrkit.spectral import dct_matrix, deltas, fbank, mfcc


def _check_half_roundtrip():
    codes = np.array([c for c in range(65536) if (c >> 10) & 0x1F != 31], dtype=np.uint16)
    back = half.encode_array(half.decode_array(codes))
    assert np.array_equal(back, codes), "decode->encode identity failed"
    got = encode_float16(-0.49)
    assert got == Float16Bits(sign=1, exponent=0b01101, fraction=0b1111010111), got


def _check_shapes():
    rng = np.random.default_rng(0)
    for _ in range(3):
        w = Waveform(samples=rng.uniform(-1, 1, 16000), sample_rate=16000, normalized=True)
        assert waveform_to_bsr(w, "float16").bits.shape == (16000, 16)
        assert fbank(w).values.shape == (99, 120)
        assert mfcc(w).values.shape == (99, 39)


def _check_snr():
    rng = np.random.default_rng(1)
    for target in (0.0, 10.0, 20.0):
        for _ in range(10):
            s = rng.uniform(-1, 1, 4000)
            n = rng.standard_normal(4000)
            g = snr_gain(s, n, target)
            realized = 10 * np.log10(np.mean(s**2) / np.mean((g * n) ** 2))
            assert abs(realized - target) < 1e-9, realized


def _check_pink_slope():
    x = pink_noise(2**17, seed=0).samples
    seg = 4096
    frames = x[: (len(x) // seg) * seg].reshape(-1, seg) * np.hanning(seg)
    psd = np.mean(np.abs(np.fft.rfft(frames, axis=1)) ** 2, axis=0)
    f = np.fft.rfftfreq(seg, d=1 / 16000)
    m = (f >= 100) & (f <= 4000)
    slope = np.polyfit(np.log2(f[m]), 10 * np.log10(psd[m]), 1)[0]
    assert abs(slope + 3.0) <= 0.5, f"slope {slope:.2f} dB/octave"


def _check_fusion():
    a = ScoreMatrix(["u0"], ["x", "y"], np.array([[0.6, 0.4]]))
    b = ScoreMatrix(["u0"], ["x", "y"], np.array([[0.3, 0.7]]))
    fused = fuse(FusionSpec(sources=[a, b]))
    assert np.allclose(fused.probs, [[0.45, 0.55]], atol=1e-12)
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = rng.dirichlet(np.ones(4), size=5)
        m = ScoreMatrix([f"u{i}" for i in range(5)], list("abcd"), p)
        same = fuse(FusionSpec(sources=[m, m, m]))
        assert np.allclose(same.probs, p, atol=1e-12), "idempotence failed"


def _check_sgdr():
    cfg = TrainConfig()
    assert sgdr_lr(0, cfg) == 0.05
    for k, epoch in enumerate([5, 15, 35, 75, 155], start=1):
        assert sgdr_lr(epoch, cfg) == 0.05 * 0.76**k, (epoch, sgdr_lr(epoch, cfg))


def _check_gradients():
    rng = np.random.default_rng(3)
    for _ in range(3):
        c, d, n = 3, 5, 8
        w = rng.standard_normal((c, d))
        b = rng.standard_normal(c)
        x = rng.standard_normal((n, d))
        y = rng.integers(0, c, n)
        _, gw, _ = loss_and_grad(w, b, x, y)
        i, j = rng.integers(0, c), rng.integers(0, d)
        eps = 1e-5
        wp, wm = w.copy(), w.copy()
        wp[i, j] += eps
        wm[i, j] -= eps
        num = (loss_and_grad(wp, b, x, y)[0] - loss_and_grad(wm, b, x, y)[0]) / (2 * eps)
        assert abs(num - gw[i, j]) <= 1e-4 * max(1.0, abs(num)), (num, gw[i, j])


def _check_dct_deltas():
    d = dct_matrix(39)
    assert np.max(np.abs(d @ d.T - np.eye(39))) < 1e-10
    ramp = np.arange(7, dtype=float)[:, None]
    assert np.allclose(deltas(ramp, 2)[2:-2], 1.0)


CHECKS = [
    ("binary16 decode->encode identity and the -0.49 layout", _check_half_roundtrip),
    ("shape contract: BSR 16000x16, FBANK 99x120, MFCC 99x39", _check_shapes),
    ("SNR gain exactness at 0/10/20 dB", _check_snr),
    ("pink noise slope -3 dB/octave within 0.5", _check_pink_slope),
    ("fusion worked example and idempotence", _check_fusion),
    ("warm-restart schedule peak values", _check_sgdr),
    ("cross-entropy gradient vs finite differences", _check_gradients),
    ("DCT orthonormality and delta-of-ramp", _check_dct_deltas),
]


def run() -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            fn()
            print(f"PASS {name}")
        except Exception as e:
            ok = False
            print(f"FAIL {name}: {e}")
    return ok
