"""PCM audio loading, padding, peak normalization, and dataset scanning.

The canonical clip is 1 s of 16 kHz mono PCM16 (16000 samples); shorter
clips are zero-padded at the tail before any feature extraction.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CANONICAL_RATE = 16000
CANONICAL_LEN = 16000
NOISE_DIR = "_background_noise_"


class WavError(Exception):
    """Base class for WAV container problems."""


class WavHeaderError(WavError):
    """Not a RIFF/WAVE file, or the chunk structure is malformed."""


class WavEncodingError(WavError):
    """The stream is not mono 16-bit integer PCM."""


class WavTruncatedError(WavError):
    """The data chunk is shorter than its declared size."""


class DatasetError(Exception):
    """Empty dataset, bad manifest, or missing referenced files."""


@dataclass
class PcmClip:
    """Raw signed 16-bit samples exactly as stored on disk."""

    samples: np.ndarray  # int16
    sample_rate: int


@dataclass
class Waveform:
    """Floating-point mono clip in [-1, 1] with provenance."""

    samples: np.ndarray  # float64
    sample_rate: int
    source_id: str = ""
    label: str | None = None
    normalized: bool = False


def load_wav(path: str | Path) -> PcmClip:
    """Read a RIFF/WAVE file holding mono 16-bit PCM.

    No resampling or conversion: samples come back exactly as stored.
    Raises WavHeaderError / WavEncodingError / WavTruncatedError so callers
    can report each failure mode distinctly.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavHeaderError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + 16 > len(data):
                raise WavHeaderError(f"{path}: fmt chunk truncated")
            fmt = struct.unpack("<HHIIHH", data[body : body + 16])
        elif cid == b"data":
            if fmt is None:
                raise WavHeaderError(f"{path}: data chunk precedes fmt chunk")
            audio_format, channels, rate, _, _, bits = fmt
            if audio_format != 1:
                raise WavEncodingError(f"{path}: unsupported encoding (format code {audio_format}, want PCM)")
            if bits != 16:
                raise WavEncodingError(f"{path}: unsupported encoding ({bits}-bit, want 16-bit)")
            if channels != 1:
                raise WavEncodingError(f"{path}: unsupported encoding ({channels} channels, want mono)")
            if body + size > len(data):
                raise WavTruncatedError(f"{path}: data chunk declares {size} bytes, file has {len(data) - body}")
            samples = np.frombuffer(data[body : body + size], dtype="<i2").astype(np.int16)
            return PcmClip(samples=samples, sample_rate=int(rate))
        pos = body + size + (size & 1)  # chunks are word-aligned
    raise WavHeaderError(f"{path}: missing fmt/data chunk")


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int = CANONICAL_RATE) -> None:
    """Write mono PCM16; the exact inverse of load_wav for int16 input."""
    pcm = np.asarray(samples, dtype="<i2")
    payload = pcm.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, 1, sample_rate, sample_rate * 2, 2, 16,
        b"data", len(payload),
    )
    Path(path).write_bytes(header + payload)


def pad_or_trim(clip: PcmClip, target_len: int = CANONICAL_LEN) -> PcmClip:
    """Zero-pad at the tail or truncate the tail to exactly target_len."""
    if target_len <= 0:
        raise ValueError("target_len must be positive")
    n = len(clip.samples)
    if n >= target_len:
        out = clip.samples[:target_len].copy()
    else:
        out = np.zeros(target_len, dtype=np.int16)
        out[:n] = clip.samples
    return PcmClip(samples=out, sample_rate=clip.sample_rate)


def normalize_peak(clip: PcmClip, source_id: str = "", label: str | None = None) -> Waveform:
    """Divide by the peak |sample| so the output peak is exactly 1.0.

    All-zero input stays all-zero (no divide-by-zero).
    """
    x = clip.samples.astype(np.float64)
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak > 0:
        x = x / peak
    return Waveform(samples=x, sample_rate=clip.sample_rate, source_id=source_id, label=label, normalized=True)


def load_clip(path: str | Path, source_id: str = "", label: str | None = None,
              target_len: int = CANONICAL_LEN, expect_rate: int | None = CANONICAL_RATE) -> Waveform:
    """load -> rate check -> pad -> normalize, the standard ingest chain."""
    clip = load_wav(path)
    if expect_rate is not None and clip.sample_rate != expect_rate:
        raise WavEncodingError(f"{path}: sample rate {clip.sample_rate}, expected {expect_rate}")
    return normalize_peak(pad_or_trim(clip, target_len), source_id=source_id, label=label)


@dataclass
class DatasetEntry:
    source_id: str  # relative path without extension, e.g. "yes/a"
    label: str
    path: Path


def scan_dataset(root: str | Path, manifest: str | Path | None = None) -> list[DatasetEntry]:
    """Enumerate command-word clips under root, sorted by relative path.

    Without a manifest the label is the immediate parent directory name and
    the conventional background-noise directory is skipped.  A manifest is a
    two-column TSV of (relative path, label).
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")

    entries = []
    if manifest is not None:
        for lineno, line in enumerate(Path(manifest).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"{manifest}:{lineno}: expected 2 tab-separated columns")
            rel, label = parts
            path = root / rel
            if not path.is_file():
                raise DatasetError(f"{manifest}:{lineno}: missing file {path}")
            entries.append(DatasetEntry(_strip_ext(rel), label, path))
    else:
        for path in root.rglob("*.wav"):
            rel = path.relative_to(root)
            if NOISE_DIR in rel.parts or len(rel.parts) < 2:
                continue
            entries.append(DatasetEntry(_strip_ext(str(rel.as_posix())), rel.parts[-2], path))

    entries.sort(key=lambda e: e.source_id)
    if not entries:
        raise DatasetError(f"no clips found under {root}")
    return entries


def _strip_ext(rel: str) -> str:
    rel = rel.replace("\\", "/")
    return rel[: -len(Path(rel).suffix)] if Path(rel).suffix else rel


def split_dataset(entries: list[DatasetEntry], root: str | Path,
                  val_pct: float = 10.0, test_pct: float = 10.0) -> dict[str, list[DatasetEntry]]:
    """Partition into train/validation/test.

    Uses validation_list.txt / testing_list.txt at the dataset root when
    present; otherwise a deterministic per-file hash split at the given
    percentages (stable across runs and machines).
    """
    root = Path(root)
    val_list = root / "validation_list.txt"
    test_list = root / "testing_list.txt"
    splits: dict[str, list[DatasetEntry]] = {"train": [], "validation": [], "test": []}

    if val_list.is_file() and test_list.is_file():
        val = {_strip_ext(l.strip()) for l in val_list.read_text().splitlines() if l.strip()}
        test = {_strip_ext(l.strip()) for l in test_list.read_text().splitlines() if l.strip()}
        for e in entries:
            if e.source_id in test:
                splits["test"].append(e)
            elif e.source_id in val:
                splits["validation"].append(e)
            else:
                splits["train"].append(e)
        return splits

    for e in entries:
        digest = hashlib.sha1(e.source_id.encode("utf-8")).hexdigest()
        bucket = int(digest, 16) % 10000 / 100.0
        if bucket < test_pct:
            splits["test"].append(e)
        elif bucket < test_pct + val_pct:
            splits["validation"].append(e)
        else:
            splits["train"].append(e)
    return splits
