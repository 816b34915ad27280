"""Posterior score matrices and their TSV interchange format.

One row per utterance, one column per class; every row is a probability
distribution.  TSV layout: header ``utt_id<TAB>label1...labelK``, then one
row per utterance with probabilities at 9 significant digits.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-4


@dataclass
class ScoreMatrix:
    utt_ids: list[str]
    class_labels: list[str]
    probs: np.ndarray  # utterances x classes

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (len(self.utt_ids), len(self.class_labels)):
            raise ValueError(f"probs shape {self.probs.shape} does not match "
                             f"{len(self.utt_ids)} utterances x {len(self.class_labels)} classes")
        if len(set(self.utt_ids)) != len(self.utt_ids):
            raise ValueError("duplicate utterance ids")
        validate_rows(self.probs)

    def row(self, utt_id: str) -> np.ndarray:
        return self.probs[self.utt_ids.index(utt_id)]


def validate_rows(probs: np.ndarray) -> None:
    if probs.size == 0:
        return
    if np.any(probs < 0):
        raise ValueError("negative probability")
    sums = probs.sum(axis=1)
    worst = int(np.argmax(np.abs(sums - 1.0)))
    if abs(sums[worst] - 1.0) > ROW_SUM_TOL:
        raise ValueError(f"row {worst} sums to {sums[worst]:.6f}, outside 1 +- {ROW_SUM_TOL}")


def save_scores(m: ScoreMatrix, path: str | Path) -> None:
    lines = ["utt_id\t" + "\t".join(m.class_labels)]
    for utt_id, row in zip(m.utt_ids, m.probs):
        lines.append(utt_id + "\t" + "\t".join(f"{p:.9g}" for p in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_scores(path: str | Path) -> ScoreMatrix:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("utt_id\t"):
        raise ValueError(f"{path}: missing utt_id header row")
    labels = lines[0].split("\t")[1:]
    utt_ids, rows = [], []
    for lineno, line in enumerate(lines[1:], 2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != len(labels) + 1:
            raise ValueError(f"{path}:{lineno}: expected {len(labels) + 1} columns, got {len(parts)}")
        utt_ids.append(parts[0])
        rows.append([float(p) for p in parts[1:]])
    return ScoreMatrix(utt_ids=utt_ids, class_labels=labels, probs=np.array(rows))
