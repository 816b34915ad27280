"""Desk-scale posterior classifier.

Clips are summarized by time-pooled statistics (per-dimension mean and
population std), then classified by a linear softmax model trained with
momentum SGD under a warm-restart cosine learning-rate schedule.  The
model emits the same score-matrix files a large network would, so the
fusion stage downstream is agnostic to what produced them.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from bsrkit.audio_io import Waveform
from bsrkit.bsr import BitMatrix
from bsrkit.scores import ScoreMatrix
from bsrkit.spectral import FeatureMatrix


def pool(features) -> np.ndarray:
    """Per-dimension mean (+) per-dimension population std over time.

    Accepts a FeatureMatrix (frames x dims), a BitMatrix (T x 16 pulse
    channels), a Waveform (T x 1), or any time-major 2-D array.
    """
    if isinstance(features, FeatureMatrix):
        m = features.values
    elif isinstance(features, BitMatrix):
        m = features.bits.astype(np.float64)
    elif isinstance(features, Waveform):
        m = features.samples[:, None]
    else:
        m = np.asarray(features, dtype=np.float64)
        if m.ndim == 1:
            m = m[:, None]
    if m.shape[0] == 0:
        raise ValueError("cannot pool an empty time axis")
    return np.concatenate([m.mean(axis=0), m.std(axis=0)])


@dataclass
class SoftmaxModel:
    weights: np.ndarray  # classes x input
    bias: np.ndarray  # classes
    class_labels: list[str]


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 16
    momentum: float = 0.9
    lr0: float = 0.05
    restart_epochs: list[int] = field(default_factory=lambda: [5, 15, 35, 75, 155])
    restart_decay: float = 0.76
    seed: int = 0

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.restart_epochs[1:], self.restart_epochs)):
            raise ValueError("restart_epochs must be strictly increasing")
        if not 0 < self.restart_decay <= 1:
            raise ValueError("restart_decay must be in (0, 1]")


def sgdr_lr(epoch: int, cfg: TrainConfig) -> float:
    """Warm-restart cosine schedule.

    Period k runs between consecutive restart boundaries (0 and cfg.epochs
    bound the outside); its peak is lr0 * decay^k at the period start, then
    cosine-annealed toward zero.
    """
    if not 0 <= epoch < cfg.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs})")
    bounds = [0] + [b for b in cfg.restart_epochs if b < cfg.epochs]
    k = bisect_right(bounds, epoch) - 1
    start = bounds[k]
    end = bounds[k + 1] if k + 1 < len(bounds) else cfg.epochs
    peak = cfg.lr0 * cfg.restart_decay**k
    return peak * 0.5 * (1.0 + np.cos(np.pi * (epoch - start) / (end - start)))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: SoftmaxModel, x: np.ndarray) -> np.ndarray:
    """softmax(Wx + b); max-subtraction keeps it finite for any logits."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.weights.shape[1]:
        raise ValueError(f"input dim {x.shape[-1]} does not match model dim {model.weights.shape[1]}")
    return _softmax(x @ model.weights.T + model.bias)


def loss_and_grad(weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its analytic gradients for one batch."""
    p = _softmax(x @ weights.T + bias)
    n = x.shape[0]
    loss = float(-np.mean(np.log(np.maximum(p[np.arange(n), y], 1e-300))))
    g = p.copy()
    g[np.arange(n), y] -= 1.0
    g /= n
    return loss, g.T @ x, g.sum(axis=0)


def train(dataset: list[tuple[np.ndarray, str]], cfg: TrainConfig | None = None,
          validation: list[tuple[np.ndarray, str]] | None = None,
          on_epoch: Callable[[int, float, float], None] | None = None) -> SoftmaxModel:
    """Momentum-SGD cross-entropy training, deterministic per cfg.seed.

    Inputs are standardized internally with training-set statistics; the
    affine transform is folded back into the returned weights, so the model
    applies to raw pooled vectors.  With a validation set, the parameters
    with the best validation accuracy are returned; otherwise the final ones.
    """
    cfg = cfg or TrainConfig()
    if not dataset:
        raise ValueError("empty training set")
    labels = sorted({label for _, label in dataset})
    if len(labels) < 2:
        raise ValueError(f"need at least 2 classes, got {labels}")
    index = {lab: i for i, lab in enumerate(labels)}

    x = np.stack([v for v, _ in dataset]).astype(np.float64)
    y = np.array([index[lab] for _, lab in dataset])
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    xs = (x - mu) / sd

    n, dim = xs.shape
    w = np.zeros((len(labels), dim))
    b = np.zeros(len(labels))
    vw = np.zeros_like(w)
    vb = np.zeros_like(b)

    if validation:
        xv = (np.stack([v for v, _ in validation]) - mu) / sd
        yv = np.array([index[lab] for _, lab in validation])
        best = (-1.0, w.copy(), b.copy())

    rng = np.random.default_rng(cfg.seed)
    for epoch in range(cfg.epochs):
        lr = sgdr_lr(epoch, cfg)
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            loss, gw, gb = loss_and_grad(w, b, xs[batch], y[batch])
            if not np.isfinite(loss):
                raise ArithmeticError(f"loss became non-finite at epoch {epoch}")
            vw = cfg.momentum * vw - lr * gw
            vb = cfg.momentum * vb - lr * gb
            w += vw
            b += vb
        if validation:
            acc = float(np.mean(np.argmax(xv @ w.T + b, axis=1) == yv))
            if acc > best[0]:
                best = (acc, w.copy(), b.copy())
        if on_epoch is not None:
            epoch_loss, _, _ = loss_and_grad(w, b, xs, y)
            on_epoch(epoch, epoch_loss, lr)

    if validation:
        _, w, b = best
    # fold the standardization into the weights: W(x-mu)/sd + b = (W/sd)x + (b - W mu/sd)
    w_raw = w / sd[None, :]
    b_raw = b - w @ (mu / sd)
    return SoftmaxModel(weights=w_raw, bias=b_raw, class_labels=labels)


def score_dataset(model: SoftmaxModel, items: list[tuple[str, np.ndarray]]) -> ScoreMatrix:
    """One posterior row per utterance, rows ordered by utterance id."""
    if not items:
        raise ValueError("nothing to score")
    items = sorted(items, key=lambda it: it[0])
    x = np.stack([v for _, v in items]).astype(np.float64)
    probs = forward(model, x)
    return ScoreMatrix(utt_ids=[u for u, _ in items], class_labels=list(model.class_labels), probs=probs)


def save_model(model: SoftmaxModel, path: str | Path) -> None:
    """Versioned binary: magic SMX1, dims, labels, f64 weights then bias."""
    c, d = model.weights.shape
    blob = [b"SMX1", struct.pack("<II", c, d)]
    for lab in model.class_labels:
        raw = lab.encode("utf-8")
        blob.append(struct.pack("<I", len(raw)) + raw)
    blob.append(model.weights.astype("<f8").tobytes())
    blob.append(model.bias.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(blob))


def load_model(path: str | Path) -> SoftmaxModel:
    data = Path(path).read_bytes()
    if data[:4] != b"SMX1":
        raise ValueError(f"{path}: not an SMX1 model file")
    c, d = struct.unpack("<II", data[4:12])
    pos = 12
    labels = []
    for _ in range(c):
        (ln,) = struct.unpack("<I", data[pos : pos + 4])
        labels.append(data[pos + 4 : pos + 4 + ln].decode("utf-8"))
        pos += 4 + ln
    need = c * d * 8 + c * 8
    if len(data) - pos != need:
        raise ValueError(f"{path}: expected {need} parameter bytes, found {len(data) - pos}")
    weights = np.frombuffer(data[pos : pos + c * d * 8], dtype="<f8").reshape(c, d).copy()
    bias = np.frombuffer(data[pos + c * d * 8 :], dtype="<f8").copy()
    return SoftmaxModel(weights=weights, bias=bias, class_labels=labels)
