"""Epoch-based SGD training with per-epoch snapshots and early stopping.

Every epoch ends with a validation score and a persisted weight checkpoint.
Training stops after `early_stop_rounds` epochs without a strictly better
validation score (ties do not reset the counter), or at `max_epochs`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nnet import (
    Batch,
    ModelSpec,
    check_batch,
    forward,
    gradient,
    init_weights,
    load_weights,
    loss,
    save_weights,
)

LOWER_BETTER = "lower_better"
HIGHER_BETTER = "higher_better"

TRACE_FILE = "trace.json"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int = 32
    max_epochs: int = 100
    early_stop_rounds: int = 10
    val_metric: str = "loss"
    shuffle_seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.early_stop_rounds < 1:
            raise ValueError("batch_size, max_epochs and early_stop_rounds must be >= 1")
        if self.val_metric not in ("loss", "accuracy"):
            raise ValueError(f"unknown val_metric {self.val_metric!r}")
        if self.shuffle_seed < 0:
            raise ValueError("shuffle_seed must be unsigned")

    @property
    def direction(self) -> str:
        return LOWER_BETTER if self.val_metric == "loss" else HIGHER_BETTER

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "early_stop_rounds": self.early_stop_rounds,
            "val_metric": self.val_metric,
            "shuffle_seed": self.shuffle_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Weights and validation score at the end of one epoch (1-based)."""

    epoch: int
    weights: np.ndarray
    val_score: float

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (
            self.epoch == other.epoch
            and self.val_score == other.val_score
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True, eq=False)
class TrainingTrace:
    """Ordered per-epoch snapshots of one run plus early-stop metadata."""

    spec: ModelSpec
    snapshots: tuple[Snapshot, ...]
    direction: str
    early_stop_rounds: int
    config: TrainConfig | None = None

    def __post_init__(self) -> None:
        snaps = tuple(sorted(self.snapshots, key=lambda s: s.epoch))
        if not snaps:
            raise ValueError("trace needs at least one snapshot")
        epochs = [s.epoch for s in snaps]
        if len(set(epochs)) != len(epochs):
            raise ValueError("duplicate epoch in trace")
        if self.direction not in (LOWER_BETTER, HIGHER_BETTER):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.early_stop_rounds < 1:
            raise ValueError("early_stop_rounds must be >= 1")
        for s in snaps:
            if not np.isfinite(s.val_score):
                raise ValueError(f"non-finite val score at epoch {s.epoch}")
        object.__setattr__(self, "snapshots", snaps)

    @property
    def n(self) -> int:
        return len(self.snapshots)

    @property
    def best_epoch(self) -> int:
        return best_epoch(self)

    def snapshot_at(self, epoch: int) -> Snapshot:
        for s in self.snapshots:
            if s.epoch == epoch:
                return s
        raise KeyError(f"no snapshot for epoch {epoch}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrainingTrace):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.direction == other.direction
            and self.early_stop_rounds == other.early_stop_rounds
            and self.snapshots == other.snapshots
        )


class NonFiniteLossError(RuntimeError):
    """Training diverged; carries the offending epoch and the trace so far."""

    def __init__(self, epoch: int, trace: TrainingTrace | None):
        super().__init__(f"non-finite loss/score at epoch {epoch}")
        self.epoch = epoch
        self.trace = trace


def _score_key(direction: str, score: float) -> float:
    return score if direction == LOWER_BETTER else -score


def best_epoch(trace: TrainingTrace) -> int:
    """Earliest epoch attaining the optimal validation score."""
    return min(
        trace.snapshots, key=lambda s: (_score_key(trace.direction, s.val_score), s.epoch)
    ).epoch


def order_by_score(trace: TrainingTrace) -> list[Snapshot]:
    """Snapshots best-first under the trace direction; ties favor earlier epochs."""
    return sorted(
        trace.snapshots, key=lambda s: (_score_key(trace.direction, s.val_score), s.epoch)
    )


def _val_accuracy(spec: ModelSpec, w: np.ndarray, val: Batch) -> float:
    probs = forward(spec, w, val.inputs)
    if spec.output_activation == "sigmoid":
        predicted = (probs[:, 0] > 0.5).astype(np.int64)
        truth = val.targets[:, 0].astype(np.int64)
    else:
        predicted = np.argmax(probs, axis=1)
        truth = np.argmax(val.targets, axis=1)
    return float(np.mean(predicted == truth))


def _ckpt_path(run_dir: Path, epoch: int) -> Path:
    return run_dir / f"epoch_{epoch}.ckpt"


def train(
    spec: ModelSpec,
    cfg: TrainConfig,
    train_batch: Batch,
    val_batch: Batch,
    run_dir: str | Path,
) -> TrainingTrace:
    """Minibatch SGD with per-epoch validation, snapshots and early stopping.

    Each completed epoch writes `epoch_<k>.ckpt` into run_dir; the finished
    trace is written as `trace.json`.  Raises NonFiniteLossError (carrying
    the partial trace) when the score diverges.
    """
    check_batch(spec, train_batch)
    check_batch(spec, val_batch)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(cfg.shuffle_seed)
    w = init_weights(spec)
    n_train = train_batch.n_samples
    direction = cfg.direction

    snapshots: list[Snapshot] = []
    best_so_far = None
    best_ep = 0
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n_train)
        with np.errstate(invalid="ignore"):  # divergence caught after the epoch
            for start in range(0, n_train, cfg.batch_size):
                idx = perm[start : start + cfg.batch_size]
                mini = Batch(train_batch.inputs[idx], train_batch.targets[idx])
                w = w - cfg.learning_rate * gradient(spec, w, mini)

        if not np.all(np.isfinite(w)):
            raise NonFiniteLossError(epoch, _partial_trace(spec, cfg, snapshots))
        if cfg.val_metric == "loss":
            score = loss(spec, w, val_batch)
        else:
            score = _val_accuracy(spec, w, val_batch)
        if not np.isfinite(score):
            raise NonFiniteLossError(epoch, _partial_trace(spec, cfg, snapshots))

        snapshots.append(Snapshot(epoch, w.copy(), score))
        save_weights(_ckpt_path(run_dir, epoch), w)

        key = _score_key(direction, score)
        if best_so_far is None or key < best_so_far:
            best_so_far = key
            best_ep = epoch
        if epoch - best_ep == cfg.early_stop_rounds:
            break

    trace = TrainingTrace(spec, tuple(snapshots), direction, cfg.early_stop_rounds, cfg)
    save_trace(run_dir, trace)
    return trace


def _partial_trace(
    spec: ModelSpec, cfg: TrainConfig, snapshots: list[Snapshot]
) -> TrainingTrace | None:
    if not snapshots:
        return None
    return TrainingTrace(spec, tuple(snapshots), cfg.direction, cfg.early_stop_rounds, cfg)


def save_trace(run_dir: str | Path, trace: TrainingTrace) -> None:
    run_dir = Path(run_dir)
    doc = {
        "spec": trace.spec.to_dict(),
        "direction": trace.direction,
        "early_stop_rounds": trace.early_stop_rounds,
        "best_epoch": trace.best_epoch,
        "total_epochs": trace.n,
        "epochs": [s.epoch for s in trace.snapshots],
        "val_scores": [s.val_score for s in trace.snapshots],
        "config": trace.config.to_dict() if trace.config else None,
    }
    (run_dir / TRACE_FILE).write_text(json.dumps(doc, indent=2) + "\n")


def load_trace(run_dir: str | Path) -> TrainingTrace:
    """Rebuild a TrainingTrace from trace.json plus the epoch checkpoints."""
    run_dir = Path(run_dir)
    doc = json.loads((run_dir / TRACE_FILE).read_text())
    spec = ModelSpec.from_dict(doc["spec"])
    snapshots = tuple(
        Snapshot(epoch, load_weights(_ckpt_path(run_dir, epoch)), score)
        for epoch, score in zip(doc["epochs"], doc["val_scores"])
    )
    cfg = TrainConfig.from_dict(doc["config"]) if doc.get("config") else None
    return TrainingTrace(spec, snapshots, doc["direction"], doc["early_stop_rounds"], cfg)
