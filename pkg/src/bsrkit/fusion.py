"""Linear posterior score fusion and confusion analytics.

Fused scores are the convex combination sum_i w_i * f_i(X) of per-source
posterior rows (weights sum to 1, default 1/n), predictions the row
argmax.  Confusion matrices follow the axis convention: column = true
label, row = predicted label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from bsrkit.scores import ScoreMatrix

WEIGHT_SUM_TOL = 1e-9


@dataclass
class FusionSpec:
    sources: list[ScoreMatrix]
    weights: list[float] | None = None  # default: equal 1/n

    def __post_init__(self):
        if not self.sources:
            raise ValueError("need at least one score source")
        n = len(self.sources)
        if self.weights is None:
            self.weights = [1.0 / n] * n
        if len(self.weights) != n:
            raise ValueError(f"{len(self.weights)} weights for {n} sources")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {sum(self.weights)!r}, not 1")


def _aligned_probs(ref: ScoreMatrix, other: ScoreMatrix) -> np.ndarray:
    """Reorder other's rows/columns to ref's utterance and class order."""
    if set(other.class_labels) != set(ref.class_labels):
        raise ValueError("sources disagree on the class set")
    if set(other.utt_ids) != set(ref.utt_ids):
        missing = set(ref.utt_ids) - set(other.utt_ids)
        raise ValueError(f"sources disagree on utterances (e.g. missing {sorted(missing)[:3]})")
    rows = [other.utt_ids.index(u) for u in ref.utt_ids]
    cols = [other.class_labels.index(c) for c in ref.class_labels]
    return other.probs[np.ix_(rows, cols)]


def fuse(spec: FusionSpec) -> ScoreMatrix:
    """Weighted sum of aligned posterior matrices (rows stay distributions)."""
    ref = spec.sources[0]
    fused = np.zeros_like(ref.probs)
    for src, w in zip(spec.sources, spec.weights):
        fused += w * _aligned_probs(ref, src)
    return ScoreMatrix(utt_ids=list(ref.utt_ids), class_labels=list(ref.class_labels), probs=fused)


def predict(m: ScoreMatrix) -> list[str]:
    """Argmax label per utterance; ties go to the lowest class index."""
    return [m.class_labels[i] for i in np.argmax(m.probs, axis=1)]


def _check_truth(m: ScoreMatrix, truth: dict[str, str]) -> None:
    missing = [u for u in m.utt_ids if u not in truth]
    if missing:
        raise ValueError(f"no truth label for {missing[:3]}{'...' if len(missing) > 3 else ''}")


def accuracy(m: ScoreMatrix, truth: dict[str, str]) -> float:
    """Percent of utterances whose argmax matches the truth label."""
    _check_truth(m, truth)
    preds = predict(m)
    correct = sum(p == truth[u] for u, p in zip(m.utt_ids, preds))
    return 100.0 * correct / len(m.utt_ids)


@dataclass
class ConfusionMatrix:
    """counts[predicted][true]; total count equals the number scored."""

    counts: np.ndarray
    class_labels: list[str]

    def per_class_accuracy(self) -> np.ndarray:
        col = self.counts.sum(axis=0).astype(np.float64)
        with np.errstate(invalid="ignore"):
            return np.where(col > 0, np.diagonal(self.counts) / col, np.nan)


def confusion(m: ScoreMatrix, truth: dict[str, str]) -> ConfusionMatrix:
    _check_truth(m, truth)
    idx = {lab: i for i, lab in enumerate(m.class_labels)}
    counts = np.zeros((len(idx), len(idx)), dtype=np.int64)
    for u, p in zip(m.utt_ids, predict(m)):
        t = truth[u]
        if t not in idx:
            raise ValueError(f"truth label {t!r} for {u} is not a model class")
        counts[idx[p], idx[t]] += 1
    return ConfusionMatrix(counts=counts, class_labels=list(m.class_labels))


def confusion_to_csv(cm: ConfusionMatrix, path: str | Path) -> None:
    lines = ["predicted\\true," + ",".join(cm.class_labels)]
    for lab, row in zip(cm.class_labels, cm.counts):
        lines.append(lab + "," + ",".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def confusion_to_svg(cm: ConfusionMatrix, path: str | Path, cell: int = 24) -> None:
    """Standalone grayscale heatmap; darker cell = higher count."""
    n = len(cm.class_labels)
    margin = 90
    size = margin + n * cell + 10
    peak = max(1, int(cm.counts.max()))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'font-family="monospace" font-size="10">']
    for p in range(n):
        for t in range(n):
            shade = 255 - int(round(215 * cm.counts[p, t] / peak))
            parts.append(f'<rect x="{margin + t * cell}" y="{margin + p * cell}" width="{cell}" '
                         f'height="{cell}" fill="rgb({shade},{shade},{shade})" stroke="#999"/>')
            if cm.counts[p, t]:
                fill = "#fff" if shade < 128 else "#000"
                parts.append(f'<text x="{margin + t * cell + cell // 2}" y="{margin + p * cell + cell // 2 + 3}" '
                             f'text-anchor="middle" fill="{fill}">{int(cm.counts[p, t])}</text>')
    for i, lab in enumerate(cm.class_labels):
        parts.append(f'<text x="{margin + i * cell + cell // 2}" y="{margin - 6}" '
                     f'text-anchor="end" transform="rotate(-60 {margin + i * cell + cell // 2} {margin - 6})">{lab}</text>')
        parts.append(f'<text x="{margin - 6}" y="{margin + i * cell + cell // 2 + 3}" text-anchor="end">{lab}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


@dataclass
class ConfusionDiff:
    """Cell-level comparison of two confusion matrices over one class set."""

    class_labels: list[str]
    diagonal: list[str]  # per class: a_better / b_better / tie
    unique_a: list[tuple[str, str]] = field(default_factory=list)  # (pred, true) errors only in a
    unique_b: list[tuple[str, str]] = field(default_factory=list)


def confusion_diff(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionDiff:
    """Mark which matrix wins each diagonal cell and locate one-sided errors."""
    if a.class_labels != b.class_labels:
        raise ValueError("confusion matrices cover different class sets")
    if a.counts.sum() != b.counts.sum():
        raise ValueError("confusion matrices cover different utterance totals")
    acc_a = a.per_class_accuracy()
    acc_b = b.per_class_accuracy()
    diagonal = []
    for va, vb in zip(acc_a, acc_b):
        if np.isnan(va) and np.isnan(vb):
            diagonal.append("tie")
        elif np.isnan(vb) or va > vb:
            diagonal.append("a_better")
        elif np.isnan(va) or va < vb:
            diagonal.append("b_better")
        else:
            diagonal.append("tie")
    diff = ConfusionDiff(class_labels=list(a.class_labels), diagonal=diagonal)
    n = len(a.class_labels)
    for p in range(n):
        for t in range(n):
            if p == t:
                continue
            if a.counts[p, t] > 0 and b.counts[p, t] == 0:
                diff.unique_a.append((a.class_labels[p], a.class_labels[t]))
            elif b.counts[p, t] > 0 and a.counts[p, t] == 0:
                diff.unique_b.append((a.class_labels[p], a.class_labels[t]))
    return diff


def diff_to_tsv(diff: ConfusionDiff, path: str | Path) -> None:
    lines = ["cell\tmarker"]
    for lab, marker in zip(diff.class_labels, diff.diagonal):
        lines.append(f"diag:{lab}\t{marker}")
    for p, t in diff.unique_a:
        lines.append(f"err:pred={p},true={t}\tonly_a")
    for p, t in diff.unique_b:
        lines.append(f"err:pred={p},true={t}\tonly_b")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sweep_combinations(sources: list[tuple[str, ScoreMatrix]], truth: dict[str, str],
                       max_subset: int = 3) -> list[tuple[str, float]]:
    """Accuracy of every equal-weight fusion of 1..max_subset sources."""
    if not sources:
        raise ValueError("need at least one source")
    rows = []
    for size in range(1, min(max_subset, len(sources)) + 1):
        for subset in combinations(sources, size):
            fused = fuse(FusionSpec(sources=[sm for _, sm in subset]))
            rows.append(("&".join(name for name, _ in subset), accuracy(fused, truth)))
    return rows
