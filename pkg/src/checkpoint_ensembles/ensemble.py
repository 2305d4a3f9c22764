"""Model-combination strategies over training traces.

Five ways to turn per-epoch checkpoints into a final predictor:

- MV: keep the single checkpoint with the best validation score.
- CE: average the output probabilities of the k best checkpoints.
- CS: average the weight vectors of the k best checkpoints into one model.
- LKS: average the weights of the best epoch and up to 4 preceding epochs.
- RIE: average the output probabilities of the MV checkpoints of several
  independent runs.

k defaults to min(early_stop_rounds + 5, best_epoch, total_epochs).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nnet import ModelSpec, forward, load_weights, save_weights
from .trainer import Snapshot, TrainingTrace, order_by_score

SINGLE_MODEL = "single_model"
PREDICTION_AVERAGE = "prediction_average"

MANIFEST_FILE = "predictor.json"
AVERAGED_WEIGHTS_FILE = "averaged.ckpt"

METHODS = ("MV", "CE", "CS", "LKS", "RIE")


@dataclass(frozen=True, eq=False)
class EnsemblePredictor:
    """Either one materialized model or a set whose predictions are averaged."""

    kind: str
    members: tuple[tuple[ModelSpec, np.ndarray], ...]

    def __post_init__(self) -> None:
        if self.kind not in (SINGLE_MODEL, PREDICTION_AVERAGE):
            raise ValueError(f"unknown predictor kind {self.kind!r}")
        members = tuple((spec, np.asarray(w, dtype=np.float64)) for spec, w in self.members)
        if not members:
            raise ValueError("predictor needs at least one member")
        if self.kind == SINGLE_MODEL and len(members) != 1:
            raise ValueError("single_model predictor must have exactly one member")
        spec0 = members[0][0]
        if any(not spec.same_architecture(spec0) for spec, _ in members[1:]):
            raise ValueError("all members must share one architecture")
        object.__setattr__(self, "members", members)

    @property
    def spec(self) -> ModelSpec:
        return self.members[0][0]

    @property
    def weights(self) -> np.ndarray:
        if self.kind != SINGLE_MODEL:
            raise ValueError("only single_model predictors expose one weight vector")
        return self.members[0][1]


def heuristic_k(a: int, b: int, n: int) -> int:
    """Checkpoint count heuristic: min(a + 5, b, n)."""
    if a < 1 or b < 1 or n < 1:
        raise ValueError("a, b and n must be positive")
    if b > n:
        raise ValueError(f"best epoch {b} exceeds total epochs {n}")
    return min(a + 5, b, n)


def _top_k(trace: TrainingTrace, k: int | None) -> list[Snapshot]:
    if k is None:
        k = heuristic_k(trace.early_stop_rounds, trace.best_epoch, trace.n)
    if not 1 <= k <= trace.n:
        raise ValueError(f"k={k} out of range for a {trace.n}-epoch trace")
    return order_by_score(trace)[:k]


def select_mv(trace: TrainingTrace) -> EnsemblePredictor:
    """Single checkpoint with the best validation score (earliest on ties)."""
    best = trace.snapshot_at(trace.best_epoch)
    return EnsemblePredictor(SINGLE_MODEL, ((trace.spec, best.weights),))


def build_ce(trace: TrainingTrace, k: int | None = None) -> EnsemblePredictor:
    """Prediction average of the k best-scoring checkpoints."""
    members = tuple((trace.spec, s.weights) for s in _top_k(trace, k))
    return EnsemblePredictor(PREDICTION_AVERAGE, members)


def average_weights(members: list[np.ndarray]) -> np.ndarray:
    """Elementwise arithmetic mean of equal-length weight vectors."""
    if not members:
        raise ValueError("nothing to average")
    arrs = [np.asarray(m, dtype=np.float64) for m in members]
    length = arrs[0].shape
    if any(a.shape != length for a in arrs):
        raise ValueError("weight vectors differ in length")
    return np.mean(np.stack(arrs), axis=0)


def build_cs(trace: TrainingTrace, k: int | None = None) -> EnsemblePredictor:
    """One model whose weights average the k best-scoring checkpoints."""
    snaps = _top_k(trace, k)
    w = average_weights([s.weights for s in snaps])
    return EnsemblePredictor(SINGLE_MODEL, ((trace.spec, w),))


def build_lks(trace: TrainingTrace) -> EnsemblePredictor:
    """One model averaging the best epoch and up to 4 immediately prior epochs."""
    b = trace.best_epoch
    epochs = range(b, max(1, b - 4) - 1, -1)
    w = average_weights([trace.snapshot_at(e).weights for e in epochs])
    return EnsemblePredictor(SINGLE_MODEL, ((trace.spec, w),))


def build_rie(traces: list[TrainingTrace]) -> EnsemblePredictor:
    """Prediction average of each run's MV checkpoint."""
    if not traces:
        raise ValueError("RIE needs at least one trace")
    spec0 = traces[0].spec
    if any(not t.spec.same_architecture(spec0) for t in traces[1:]):
        raise ValueError("RIE traces must share one architecture")
    members = tuple(select_mv(t).members[0] for t in traces)
    return EnsemblePredictor(PREDICTION_AVERAGE, members)


def predict(p: EnsemblePredictor, inputs: np.ndarray) -> np.ndarray:
    """Probabilities from the predictor; averages members in fixed order."""
    if p.kind == SINGLE_MODEL:
        spec, w = p.members[0]
        return forward(spec, w, inputs)
    outputs = np.stack([forward(spec, w, inputs) for spec, w in p.members])
    return np.mean(outputs, axis=0)


def member_epochs(trace: TrainingTrace, method: str, k: int | None = None) -> list[int]:
    """Epochs a method's members come from (same defaulting as the builders)."""
    method = method.upper()
    if method == "MV":
        return [trace.best_epoch]
    if method == "CE" or method == "CS":
        return [s.epoch for s in _top_k(trace, k)]
    if method == "LKS":
        b = trace.best_epoch
        return list(range(b, max(1, b - 4) - 1, -1))
    raise ValueError(f"no single-trace member epochs for method {method!r}")


def save_predictor(
    out_dir: str | Path,
    method: str,
    predictor: EnsemblePredictor,
    member_refs: list[tuple[str, int]],
    k: int,
) -> Path:
    """Write predictor.json (and the averaged weights for CS/LKS).

    member_refs are (run directory, epoch) pairs; run paths are stored
    relative to out_dir so the manifest can be relocated with its runs.
    """
    method = method.upper()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "method": method,
        "k": k,
        "spec": predictor.spec.to_dict(),
        "members": [{"run": run, "epoch": epoch} for run, epoch in member_refs],
    }
    if method in ("CS", "LKS"):
        save_weights(out_dir / AVERAGED_WEIGHTS_FILE, predictor.weights)
        doc["weights_file"] = AVERAGED_WEIGHTS_FILE
    path = out_dir / MANIFEST_FILE
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def load_predictor(manifest_path: str | Path) -> EnsemblePredictor:
    """Rebuild a predictor from its manifest and the referenced run files."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_FILE
    doc = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    spec = ModelSpec.from_dict(doc["spec"])
    method = doc["method"]
    if method in ("CS", "LKS"):
        w = load_weights(base / doc["weights_file"])
        return EnsemblePredictor(SINGLE_MODEL, ((spec, w),))
    members = []
    for ref in doc["members"]:
        run_dir = (base / ref["run"]).resolve()
        members.append((spec, load_weights(run_dir / f"epoch_{ref['epoch']}.ckpt")))
    kind = SINGLE_MODEL if method == "MV" else PREDICTION_AVERAGE
    return EnsemblePredictor(kind, tuple(members))
