"""Noise generation and SNR-exact mixing.

Gains are computed from full-clip mean-square powers, so the realized
pre-renormalization SNR equals the target up to float rounding.  Every
random draw is keyed by (master seed, clip id, condition name), making
whole synthesis runs reproducible per condition.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bsrkit.audio_io import Waveform, load_wav, normalize_peak, write_wav

KIND_BACKGROUND = "background"
KIND_WHITE = "white"
KIND_PINK = "pink"

PINK_ROWS = 16


@dataclass
class NoiseSpec:
    kind: str
    snr_db: float
    source: str | Path | None = None  # noise file, background kind only

    def __post_init__(self):
        if self.kind not in (KIND_BACKGROUND, KIND_WHITE, KIND_PINK):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == KIND_BACKGROUND and self.source is None:
            raise ValueError("background noise needs a source file")

    @property
    def condition(self) -> str:
        return f"{self.kind}_{self.snr_db:g}dB"


def white_noise(n: int, seed: int, sample_rate: int = 16000) -> Waveform:
    """i.i.d. standard Gaussian samples (unit variance before any normalization)."""
    if n <= 0:
        raise ValueError("sample count must be positive")
    samples = np.random.default_rng(seed).standard_normal(n)
    return Waveform(samples=samples, sample_rate=sample_rate, source_id=f"white:{seed}")


def pink_noise(n: int, seed: int, sample_rate: int = 16000) -> Waveform:
    """1/f noise via the Voss-McCartney multi-rate sum.

    Row k holds a Gaussian value for 2^k samples; the sum of 16 rows gives
    close to -3 dB/octave across the audio band at 16 kHz.
    """
    if n <= 0:
        raise ValueError("sample count must be positive")
    rng = np.random.default_rng(seed)
    total = np.zeros(n)
    for k in range(PINK_ROWS):
        hold = 1 << k
        total += np.repeat(rng.standard_normal(n // hold + 1), hold)[:n]
    return Waveform(samples=total, sample_rate=sample_rate, source_id=f"pink:{seed}")


def pick_segment(noise: Waveform, clip_len: int, seed: int) -> Waveform:
    """Contiguous clip_len segment at a seeded-uniform offset."""
    n = noise.samples.size
    if n < clip_len:
        raise ValueError(f"noise of {n} samples is shorter than the {clip_len}-sample clip")
    offset = int(np.random.default_rng(seed).integers(0, n - clip_len + 1))
    return Waveform(samples=noise.samples[offset : offset + clip_len].copy(),
                    sample_rate=noise.sample_rate,
                    source_id=f"{noise.source_id}@{offset}")


def snr_gain(signal: np.ndarray, noise: np.ndarray, snr_db: float) -> float:
    """Gain g with 10*log10(P_signal / P_{g*noise}) = snr_db (mean-square powers)."""
    p_s = float(np.mean(np.square(signal)))
    p_n = float(np.mean(np.square(noise)))
    if p_s == 0.0:
        raise ValueError("zero-power signal has no defined SNR")
    if p_n == 0.0:
        raise ValueError("zero-power noise cannot be scaled to a target SNR")
    return float(np.sqrt(p_s / (p_n * 10.0 ** (snr_db / 10.0))))


def mix_at_snr(signal: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """signal + g*noise at the exact target SNR, re-peak-normalized if it clips.

    Renormalizing (instead of hard-clipping) keeps the waveform shape intact
    for bit-level encodings.
    """
    if signal.samples.size != noise.samples.size:
        raise ValueError("signal and noise lengths differ")
    g = snr_gain(signal.samples, noise.samples, snr_db)
    mixed = signal.samples + g * noise.samples
    peak = float(np.max(np.abs(mixed)))
    if peak > 1.0:
        mixed = mixed / peak
    return Waveform(samples=mixed, sample_rate=signal.sample_rate,
                    source_id=signal.source_id, label=signal.label, normalized=True)


def clip_seed(master_seed: int, clip_id: str, condition: str) -> int:
    """Stable 64-bit per-clip seed."""
    digest = hashlib.sha256(f"{master_seed}:{clip_id}:{condition}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def noise_for_clip(spec: NoiseSpec, clip_len: int, seed: int, sample_rate: int = 16000,
                   background: Waveform | None = None) -> Waveform:
    if spec.kind == KIND_WHITE:
        return white_noise(clip_len, seed, sample_rate)
    if spec.kind == KIND_PINK:
        return pink_noise(clip_len, seed, sample_rate)
    if background is None:
        background = load_background(spec)
    return pick_segment(background, clip_len, seed)


def load_background(spec: NoiseSpec) -> Waveform:
    return normalize_peak(load_wav(spec.source), source_id=str(spec.source))


def mix_condition_clip(w: Waveform, spec: NoiseSpec, master_seed: int,
                       background: Waveform | None = None) -> tuple[Waveform, int]:
    """Deterministic noisy version of one clip under one condition."""
    seed = clip_seed(master_seed, w.source_id, spec.condition)
    noise = noise_for_clip(spec, w.samples.size, seed, w.sample_rate, background)
    return mix_at_snr(w, noise, spec.snr_db), seed


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    return np.clip(np.round(samples * 32767.0), -32768, 32767).astype(np.int16)


def synthesize_conditions(clips: list[tuple[str, str | None, Waveform]], specs: list[NoiseSpec],
                          master_seed: int, out_dir: str | Path) -> dict[str, Path]:
    """Write one WAV tree + manifest per condition; returns condition -> manifest.

    Output audio is re-quantized to PCM16.  Manifest columns: path, label,
    condition, snr_db, seed.
    """
    out_dir = Path(out_dir)
    manifests: dict[str, Path] = {}
    for spec in specs:
        background = load_background(spec) if spec.kind == KIND_BACKGROUND else None
        cond_dir = out_dir / spec.condition
        cond_dir.mkdir(parents=True, exist_ok=True)
        rows = []
        for source_id, label, w in clips:
            mixed, seed = mix_condition_clip(w, spec, master_seed, background)
            rel = f"{source_id.replace('/', '__')}.wav"
            write_wav(cond_dir / rel, to_pcm16(mixed.samples), mixed.sample_rate)
            rows.append(f"{spec.condition}/{rel}\t{label or ''}\t{spec.condition}\t{spec.snr_db:g}\t{seed}")
        manifest = out_dir / f"{spec.condition}.tsv"
        manifest.write_text("\n".join(rows) + "\n", encoding="utf-8")
        manifests[spec.condition] = manifest
    return manifests
