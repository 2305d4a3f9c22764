"""Evaluation metrics: argmax accuracy and the precision-recall curve.

The PR curve sweeps thresholds from the highest score down, collapsing tied
scores into one threshold group.  A point is recorded at every threshold
that picks up at least one positive (recall increases there); a leading
anchor repeats the first precision at recall 0.  The area is the trapezoidal
integral of precision over recall.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) points ordered by nondecreasing recall, plus area."""

    points: tuple[tuple[float, float], ...]
    auc: float

    @property
    def recalls(self) -> np.ndarray:
        return np.array([r for r, _ in self.points])

    @property
    def precisions(self) -> np.ndarray:
        return np.array([p for _, p in self.points])


def accuracy(probs: np.ndarray, true_labels) -> float:
    """Fraction of rows whose argmax (ties to the lowest index) is the label."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(true_labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[1] < 2:
        raise ValueError("probs must be 2-D with at least two classes")
    if labels.ndim != 1 or labels.shape[0] != probs.shape[0]:
        raise ValueError("one label per probability row required")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValueError("label index out of range")
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def as_class_probs(probs: np.ndarray) -> np.ndarray:
    """Widen single-column sigmoid outputs p to two-class rows [1-p, p]."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError("probs must be 2-D")
    if probs.shape[1] == 1:
        p = probs[:, 0]
        return np.column_stack([1.0 - p, p])
    return probs


def pr_curve(scores, labels) -> PRCurve:
    """Precision-recall curve and its trapezoidal area for binary labels."""
    scores = np.asarray(scores, dtype=np.float64)
    raw_labels = np.asarray(labels)
    if scores.ndim != 1 or raw_labels.ndim != 1 or scores.shape != raw_labels.shape:
        raise ValueError("scores and labels must be equal-length vectors")
    if scores.shape[0] < 1:
        raise ValueError("empty input")
    if np.any(np.isnan(scores)):
        raise ValueError("NaN scores")
    if not np.all((raw_labels == 0) | (raw_labels == 1)):
        raise ValueError("labels must be 0 or 1")
    labels = raw_labels.astype(np.int64)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.shape[0]:
        raise ValueError("PR curve needs at least one positive and one negative")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # last index of each tied-score group
    boundary = np.nonzero(np.diff(sorted_scores))[0]
    group_ends = np.concatenate([boundary, [scores.shape[0] - 1]])

    tp_cum = np.cumsum(sorted_labels)
    points: list[tuple[float, float]] = []
    tp_at_point: list[int] = []
    prev_tp = 0
    for end in group_ends:
        tp = int(tp_cum[end])
        if tp == prev_tp:
            continue  # no positive at this threshold, recall unchanged
        prev_tp = tp
        predicted_pos = int(end) + 1
        points.append((tp / n_pos, tp / predicted_pos))
        tp_at_point.append(tp)
    points.insert(0, (0.0, points[0][1]))
    tp_at_point.insert(0, 0)

    # trapezoid with integer recall steps factored out, so a constant
    # precision of 1.0 integrates to exactly 1.0
    num = 0.0
    for i in range(1, len(points)):
        num += (tp_at_point[i] - tp_at_point[i - 1]) * (points[i][1] + points[i - 1][1])
    auc = num / (2 * n_pos)
    return PRCurve(tuple(points), auc)


def pr_curve_to_csv(curve: PRCurve, path: str | Path) -> None:
    """Write `recall,precision` rows with a trailing `# auc=` comment line."""
    lines = ["recall,precision"]
    lines.extend(f"{r!r},{p!r}" for r, p in curve.points)
    lines.append(f"# auc={curve.auc!r}")
    Path(path).write_text("\n".join(lines) + "\n")
