"""FBANK and MFCC extraction.

A 1 s / 16 kHz clip framed at 25 ms / 10 ms yields 99 frames; FBANK rows
are 120-dimensional (39 log mel energies + log frame energy, with delta
and double-delta), MFCC rows 39-dimensional (cepstra c1..c12 + log frame
energy, with deltas).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from bsrkit.audio_io import Waveform

LOG_FLOOR = 1e-10

KIND_FBANK = "fbank"
KIND_MFCC = "mfcc"
_KIND_BYTES = {KIND_FBANK: 0, KIND_MFCC: 1}
_KIND_NAMES = {v: k for k, v in _KIND_BYTES.items()}


@dataclass
class FrameConfig:
    window_len: float = 0.025  # s
    hop: float = 0.01  # s
    fft_size: int = 512
    preemphasis: float = 0.97
    n_mels: int = 39
    n_ceps: int = 12
    mel_fmin: float = 0.0
    mel_fmax: float = 8000.0
    delta_window: int = 2

    def __post_init__(self):
        if not 0 <= self.preemphasis < 1:
            raise ValueError("preemphasis must be in [0, 1)")
        if self.n_ceps > self.n_mels:
            raise ValueError("n_ceps cannot exceed n_mels")

    def window_samples(self, sample_rate: int) -> int:
        n = int(round(self.window_len * sample_rate))
        if n > self.fft_size:
            raise ValueError(f"window of {n} samples exceeds fft_size {self.fft_size}")
        return n

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.hop * sample_rate))


@dataclass
class FeatureMatrix:
    values: np.ndarray  # frames x dims
    kind: str
    frame_times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.frame_times.size == 0:
            self.frame_times = np.arange(self.values.shape[0]) * 0.01


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def preemphasize(w: Waveform, alpha: float) -> Waveform:
    """y[0] = x[0]; y[t] = x[t] - alpha * x[t-1]."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must be in [0, 1)")
    x = w.samples
    y = np.concatenate(([x[0]], x[1:] - alpha * x[:-1])) if x.size else x.copy()
    return Waveform(samples=y, sample_rate=w.sample_rate, source_id=w.source_id,
                    label=w.label, normalized=w.normalized)


def frame_count(n_samples: int, win: int, hop: int) -> int:
    return 1 + int(np.ceil((n_samples - win) / hop))


def frame_signal(w: Waveform, cfg: FrameConfig) -> np.ndarray:
    """Split into Hamming-windowed frames; the last frame is zero-padded.

    Frame count is 1 + ceil((N - win) / hop), which maps a 16000-sample clip
    at win=400 / hop=160 to exactly 99 frames.
    """
    win = cfg.window_samples(w.sample_rate)
    hop = cfg.hop_samples(w.sample_rate)
    n = w.samples.size
    if n < win:
        raise ValueError(f"clip of {n} samples is shorter than one {win}-sample window")
    count = frame_count(n, win, hop)
    padded = np.zeros((count - 1) * hop + win)
    padded[:n] = w.samples
    idx = np.arange(win)[None, :] + hop * np.arange(count)[:, None]
    return padded[idx] * np.hamming(win)


def power_spectrum(frame: np.ndarray, fft_size: int = 512) -> np.ndarray:
    """|DFT|^2 / fft_size over bins 0..fft_size/2."""
    frame = np.asarray(frame)
    if frame.shape[-1] > fft_size:
        raise ValueError("frame longer than fft_size")
    spec = np.fft.rfft(frame, n=fft_size)
    return (spec.real**2 + spec.imag**2) / fft_size


def mel_filterbank(cfg: FrameConfig, sample_rate: int) -> np.ndarray:
    """Triangular filters, centers uniform on the mel scale, unit peak each.

    Band edges snap to FFT bins; filter j rises over [bin_j, bin_{j+1}] and
    falls over [bin_{j+1}, bin_{j+2}], hitting exactly 1.0 at its center bin.
    """
    if not cfg.mel_fmin < cfg.mel_fmax <= sample_rate / 2:
        raise ValueError("need mel_fmin < mel_fmax <= Nyquist")
    mels = np.linspace(hz_to_mel(cfg.mel_fmin), hz_to_mel(cfg.mel_fmax), cfg.n_mels + 2)
    bins = np.floor((cfg.fft_size + 1) * mel_to_hz(mels) / sample_rate).astype(int)
    if np.any(np.diff(bins[1:-1]) <= 0):
        raise ValueError("degenerate mel filterbank: coincident filter centers; "
                         "reduce n_mels or enlarge fft_size")
    weights = np.zeros((cfg.n_mels, cfg.fft_size // 2 + 1))
    for j in range(cfg.n_mels):
        lo, mid, hi = bins[j], bins[j + 1], bins[j + 2]
        for i in range(lo, mid):
            weights[j, i] = (i - lo) / (mid - lo)
        for i in range(mid, hi + 1):
            weights[j, i] = (hi - i) / (hi - mid) if hi > mid else 1.0
        weights[j, mid] = 1.0
    return weights


def filter_center_bins(cfg: FrameConfig, sample_rate: int) -> np.ndarray:
    mels = np.linspace(hz_to_mel(cfg.mel_fmin), hz_to_mel(cfg.mel_fmax), cfg.n_mels + 2)
    return np.floor((cfg.fft_size + 1) * mel_to_hz(mels) / sample_rate).astype(int)[1:-1]


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II: D @ D.T = I."""
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    d = np.sqrt(2.0 / n) * np.cos(np.pi * k * (2 * m + 1) / (2 * n))
    d[0] /= np.sqrt(2.0)
    return d


def deltas(m: np.ndarray, n: int = 2) -> np.ndarray:
    """Regression deltas d_t = sum_k k (c_{t+k} - c_{t-k}) / (2 sum k^2), edges replicated."""
    if n < 1:
        raise ValueError("regression half-window must be >= 1")
    m = np.asarray(m, dtype=np.float64)
    padded = np.concatenate([np.repeat(m[:1], n, axis=0), m, np.repeat(m[-1:], n, axis=0)])
    denom = 2 * sum(k * k for k in range(1, n + 1))
    out = np.zeros_like(m)
    for k in range(1, n + 1):
        out += k * (padded[n + k : n + k + m.shape[0]] - padded[n - k : n - k + m.shape[0]])
    return out / denom


def _log_mel_and_energy(w: Waveform, cfg: FrameConfig) -> tuple[np.ndarray, np.ndarray]:
    frames = frame_signal(preemphasize(w, cfg.preemphasis), cfg)
    energy = np.log(np.maximum(np.sum(frames**2, axis=1), LOG_FLOOR))
    spec = power_spectrum(frames, cfg.fft_size)
    fb = mel_filterbank(cfg, w.sample_rate)
    logmel = np.log(np.maximum(spec @ fb.T, LOG_FLOOR))
    return logmel, energy


def _with_deltas(statics: np.ndarray, n: int) -> np.ndarray:
    d = deltas(statics, n)
    return np.hstack([statics, d, deltas(d, n)])


def fbank(w: Waveform, cfg: FrameConfig | None = None) -> FeatureMatrix:
    """Log mel energies + log frame energy with deltas (99 x 120 for 1 s / 16 kHz)."""
    cfg = cfg or FrameConfig()
    logmel, energy = _log_mel_and_energy(w, cfg)
    statics = np.hstack([logmel, energy[:, None]])
    times = np.arange(statics.shape[0]) * cfg.hop
    return FeatureMatrix(values=_with_deltas(statics, cfg.delta_window), kind=KIND_FBANK, frame_times=times)


def mfcc(w: Waveform, cfg: FrameConfig | None = None) -> FeatureMatrix:
    """DCT of the log mel energies, c1..c12 + log frame energy with deltas (99 x 39)."""
    cfg = cfg or FrameConfig()
    logmel, energy = _log_mel_and_energy(w, cfg)
    ceps = logmel @ dct_matrix(cfg.n_mels).T[:, 1 : cfg.n_ceps + 1]
    statics = np.hstack([ceps, energy[:, None]])
    times = np.arange(statics.shape[0]) * cfg.hop
    return FeatureMatrix(values=_with_deltas(statics, cfg.delta_window), kind=KIND_MFCC, frame_times=times)


def mfcc_from_logmel(logmel: np.ndarray, energy: np.ndarray, cfg: FrameConfig | None = None) -> np.ndarray:
    """MFCC statics recomputed from exported log mel values (determinism check hook)."""
    cfg = cfg or FrameConfig()
    ceps = logmel @ dct_matrix(cfg.n_mels).T[:, 1 : cfg.n_ceps + 1]
    return np.hstack([ceps, np.asarray(energy)[:, None]])


def save_features(m: FeatureMatrix, path: str | Path) -> None:
    """Binary container: magic FEA1, kind byte, u32 frames, u32 dims, f32 row-major."""
    frames, dims = m.values.shape
    header = b"FEA1" + bytes([_KIND_BYTES[m.kind]]) + struct.pack("<II", frames, dims)
    Path(path).write_bytes(header + m.values.astype("<f4").tobytes())


def load_features(path: str | Path) -> FeatureMatrix:
    data = Path(path).read_bytes()
    if len(data) < 13 or data[:4] != b"FEA1":
        raise ValueError(f"{path}: not a FEA1 file")
    kind = _KIND_NAMES.get(data[4])
    if kind is None:
        raise ValueError(f"{path}: unknown kind byte {data[4]}")
    frames, dims = struct.unpack("<II", data[5:13])
    expect = frames * dims * 4
    if len(data) != 13 + expect:
        raise ValueError(f"{path}: expected {expect} payload bytes, found {len(data) - 13}")
    values = np.frombuffer(data[13:], dtype="<f4").astype(np.float64).reshape(frames, dims)
    return FeatureMatrix(values=values, kind=kind)


def features_to_csv(m: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", newline="\n") as f:
        for row in m.values:
            f.write(",".join(f"{v:.9g}" for v in row) + "\n")
