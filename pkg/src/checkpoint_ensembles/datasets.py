"""Synthetic dataset generators, CSV ingestion and deterministic splitting.

gen_blobs places Gaussian clusters on a seed-derived integer lattice; with
clusters_per_class > 1 a class is spread over several modes, which makes the
decision problem multi-modal.  gen_imbalanced_binary produces a rare-positive
binary task whose class overlap grows with `hardness`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nnet import Batch, ModelSpec


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str

    def __post_init__(self) -> None:
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValueError("inputs must be (n, d) with one label per row")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if y.min() < 0 or y.max() >= self.class_count:
            raise ValueError("label outside [0, class_count)")
        if x.shape[0] < self.class_count:
            raise ValueError("need at least one sample per class")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def __eq__(self, other: object) -> bool:
        # name is a display label only
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2
    seed: int = 0
    stratified: bool = True

    def __post_init__(self) -> None:
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise ValueError("all split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {sum(fracs)}, expected 1")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def _distinct_lattice_points(rng: np.random.Generator, count: int, dims: int) -> np.ndarray:
    """`count` distinct integer points from a box just big enough to fit them."""
    side = max(2, math.ceil((4 * count) ** (1.0 / dims)))
    seen: set[tuple[int, ...]] = set()
    points = []
    while len(points) < count:
        cand = tuple(int(v) for v in rng.integers(0, side, size=dims))
        if cand in seen:
            continue
        seen.add(cand)
        points.append(cand)
    return np.array(points, dtype=np.float64)


def gen_blobs(
    classes: int,
    dims: int,
    per_class: int,
    spread: float,
    seed: int,
    clusters_per_class: int = 1,
) -> Dataset:
    """Gaussian clusters (std = spread) centered on distinct lattice points."""
    if classes < 2 or dims < 2 or per_class < 10:
        raise ValueError("need classes >= 2, dims >= 2, per_class >= 10")
    if spread <= 0 or clusters_per_class < 1:
        raise ValueError("spread must be positive and clusters_per_class >= 1")
    rng = np.random.default_rng(seed)
    centers = _distinct_lattice_points(rng, classes * clusters_per_class, dims)
    blocks = []
    labels = []
    for c in range(classes):
        counts = [per_class // clusters_per_class] * clusters_per_class
        for i in range(per_class % clusters_per_class):
            counts[i] += 1
        for j, m in enumerate(counts):
            center = centers[c * clusters_per_class + j]
            blocks.append(center + rng.normal(0.0, spread, size=(m, dims)))
            labels.extend([c] * m)
    name = f"blobs(c{classes}x{clusters_per_class},d{dims},n{per_class},s{spread},seed{seed})"
    return Dataset(np.vstack(blocks), np.array(labels), classes, name)


def gen_imbalanced_binary(
    n: int, positive_frac: float, hardness: float, seed: int
) -> Dataset:
    """Binary task with an exact positive count; overlap grows with hardness."""
    if not 0.0 < positive_frac <= 0.5:
        raise ValueError("positive_frac must lie in (0, 0.5]")
    if not 0.0 <= hardness <= 1.0:
        raise ValueError("hardness must lie in [0, 1]")
    if n * positive_frac < 10:
        raise ValueError("need at least 10 expected positives")
    dims = 4
    n_pos = int(round(n * positive_frac))
    n_neg = n - n_pos
    rng = np.random.default_rng(seed)
    separation = 6.0 * (1.0 - hardness)
    shift = separation / np.sqrt(dims)
    neg = rng.normal(0.0, 1.0, size=(n_neg, dims))
    pos = rng.normal(0.0, 1.0, size=(n_pos, dims)) + shift
    inputs = np.vstack([neg, pos])
    labels = np.concatenate([np.zeros(n_neg, dtype=np.int64), np.ones(n_pos, dtype=np.int64)])
    name = f"imbalanced(n{n},p{positive_frac},h{hardness},seed{seed})"
    return Dataset(inputs, labels, 2, name)


def load_csv(path: str | Path, label_column: str, has_header: bool = True) -> Dataset:
    """Numeric CSV -> Dataset; the label column must hold integers >= 0.

    With a header the label column is matched by name; without one,
    label_column must be a 0-based column index.  Parse errors name the
    offending 1-based line.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    start = 0
    if has_header:
        header = [h.strip() for h in rows[0]]
        if label_column in header:
            label_idx = header.index(label_column)
        else:
            raise ValueError(f"{path}: label column {label_column!r} not in header")
        start = 1
    else:
        try:
            label_idx = int(label_column)
        except ValueError:
            raise ValueError(
                f"{path}: without a header, label_column must be a column index"
            ) from None
    data_rows = rows[start:]
    if not data_rows:
        raise ValueError(f"{path}: no data rows")
    width = len(data_rows[0])
    if not 0 <= label_idx < width:
        raise ValueError(f"{path}: label column index {label_idx} out of range")
    features = []
    labels = []
    for offset, row in enumerate(data_rows):
        line_no = start + offset + 1
        if len(row) != width:
            raise ValueError(f"{path}: line {line_no}: ragged row ({len(row)} != {width})")
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            raise ValueError(f"{path}: line {line_no}: non-numeric cell") from None
        raw_label = values.pop(label_idx)
        if raw_label != int(raw_label) or raw_label < 0:
            raise ValueError(f"{path}: line {line_no}: label must be a non-negative integer")
        labels.append(int(raw_label))
        features.append(values)
    class_count = max(labels) + 1
    return Dataset(np.array(features), np.array(labels), class_count, path.stem)


def save_csv(ds: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Write the dataset with a header; floats use shortest round-trip repr."""
    path = Path(path)
    header = [f"f{i}" for i in range(ds.dim)] + [label_column]
    lines = [",".join(header)]
    for x, y in zip(ds.inputs, ds.labels):
        lines.append(",".join([repr(v) for v in x.tolist()] + [str(int(y))]))
    path.write_text("\n".join(lines) + "\n")


def _largest_remainder(total: int, fracs: tuple[float, ...]) -> list[int]:
    """Integer allocation of `total` proportional to fracs, sums exactly."""
    raw = [total * f for f in fracs]
    base = [int(v) for v in raw]
    short = total - sum(base)
    order = sorted(range(len(fracs)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint covering (train, val, test) partition, deterministic by seed."""
    fracs = (spec.train_frac, spec.val_frac, spec.test_frac)
    rng = np.random.default_rng(spec.seed)
    parts: list[list[int]] = [[], [], []]
    if spec.stratified:
        for c in range(ds.class_count):
            idx = np.nonzero(ds.labels == c)[0]
            idx = idx[rng.permutation(idx.shape[0])]
            counts = _largest_remainder(idx.shape[0], fracs)
            pos = 0
            for part, m in zip(parts, counts):
                part.extend(idx[pos : pos + m].tolist())
                pos += m
    else:
        perm = rng.permutation(ds.n)
        counts = _largest_remainder(ds.n, fracs)
        pos = 0
        for part, m in zip(parts, counts):
            part.extend(perm[pos : pos + m].tolist())
            pos += m
    names = ("train", "val", "test")
    out = []
    for part, part_name in zip(parts, names):
        if not part:
            raise ValueError(f"{part_name} part would be empty")
        sel = np.array(sorted(part))
        out.append(Dataset(ds.inputs[sel], ds.labels[sel], ds.class_count, f"{ds.name}:{part_name}"))
    return out[0], out[1], out[2]


def labels_to_targets(labels: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """One-hot rows for softmax output, a {0,1} column for sigmoid."""
    labels = np.asarray(labels, dtype=np.int64)
    if spec.output_activation == "sigmoid":
        if labels.max() > 1:
            raise ValueError("sigmoid output needs binary labels")
        return labels.reshape(-1, 1).astype(np.float64)
    onehot = np.zeros((labels.shape[0], spec.output_dim))
    if labels.max() >= spec.output_dim:
        raise ValueError("label outside model output range")
    onehot[np.arange(labels.shape[0]), labels] = 1.0
    return onehot


def batch_from_dataset(ds: Dataset, spec: ModelSpec) -> Batch:
    return Batch(ds.inputs, labels_to_targets(ds.labels, spec))
