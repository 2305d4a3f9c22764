"""Minimal dense feed-forward network on flat float64 weight vectors.

Weights live in a single 1-D array with a fixed canonical layout (per layer:
weight matrix row-major, then bias vector), so that averaging models is a
plain vector mean.  All functions here are pure and operate on numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOG_CLAMP = 1e-12  # probability clamp applied before any log()

WEIGHT_FILE_MAGIC = "CKPT1"


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of a dense net: layer sizes, activations, init seed."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "softmax"
    seed: int = 0

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least input and output dims")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be >= 1, got {sizes}")
        if self.hidden_activation != "relu":
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ("softmax", "sigmoid"):
            raise ValueError(f"unsupported output activation {self.output_activation!r}")
        if self.output_activation == "softmax" and sizes[-1] < 2:
            raise ValueError("softmax output needs >= 2 units")
        if self.output_activation == "sigmoid" and sizes[-1] != 1:
            raise ValueError("sigmoid output needs exactly 1 unit")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def layer_pairs(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per layer, input to output."""
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def same_architecture(self, other: "ModelSpec") -> bool:
        """Equality up to the init seed."""
        return (
            self.layer_sizes == other.layer_sizes
            and self.hidden_activation == other.hidden_activation
            and self.output_activation == other.output_activation
        )

    def n_params(self) -> int:
        return sum(fi * fo + fo for fi, fo in self.layer_pairs())

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            layer_sizes=tuple(d["layer_sizes"]),
            hidden_activation=d["hidden_activation"],
            output_activation=d["output_activation"],
            seed=int(d["seed"]),
        )


@dataclass(frozen=True, eq=False)
class Batch:
    """Paired inputs/targets: one-hot target rows for softmax, {0,1} for sigmoid."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.inputs, dtype=np.float64)
        t = np.asarray(self.targets, dtype=np.float64)
        if x.ndim != 2 or t.ndim != 2:
            raise ValueError("inputs and targets must be 2-D")
        if x.shape[0] != t.shape[0]:
            raise ValueError(f"row mismatch: inputs {x.shape[0]} vs targets {t.shape[0]}")
        if x.shape[0] < 1:
            raise ValueError("batch needs at least one sample")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(t)):
            raise ValueError("non-finite values in batch")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", t)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


def check_batch(spec: ModelSpec, batch: Batch) -> None:
    """Raise ValueError when the batch does not fit `spec`."""
    if batch.inputs.shape[1] != spec.input_dim:
        raise ValueError(
            f"input dim {batch.inputs.shape[1]} != spec input dim {spec.input_dim}"
        )
    if batch.targets.shape[1] != spec.output_dim:
        raise ValueError(
            f"target dim {batch.targets.shape[1]} != spec output dim {spec.output_dim}"
        )
    if spec.output_activation == "softmax":
        rows = batch.targets
        if not np.allclose(rows.sum(axis=1), 1.0) or not np.all(
            (rows == 0.0) | (rows == 1.0)
        ):
            raise ValueError("softmax targets must be one-hot rows")
    else:
        if not np.all((batch.targets == 0.0) | (batch.targets == 1.0)):
            raise ValueError("sigmoid targets must be 0 or 1")


def check_weights(spec: ModelSpec, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != spec.n_params():
        raise ValueError(f"weight vector length {w.shape} != {spec.n_params()} params")
    return w


def init_weights(spec: ModelSpec) -> np.ndarray:
    """Glorot-uniform weights, zero biases; deterministic given spec.seed."""
    rng = np.random.default_rng(spec.seed)
    parts = []
    for fi, fo in spec.layer_pairs():
        limit = math.sqrt(6.0 / (fi + fo))
        parts.append(rng.uniform(-limit, limit, size=(fi, fo)).ravel())
        parts.append(np.zeros(fo))
    return np.concatenate(parts)


def unpack_weights(spec: ModelSpec, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of (W, b) per layer; W has shape (fan_in, fan_out)."""
    w = check_weights(spec, w)
    out = []
    pos = 0
    for fi, fo in spec.layer_pairs():
        mat = w[pos : pos + fi * fo].reshape(fi, fo)
        pos += fi * fo
        bias = w[pos : pos + fo]
        pos += fo
        out.append((mat, bias))
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_pass(
    spec: ModelSpec, w: np.ndarray, inputs: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Returns (layer inputs h, hidden pre-activations z, output probs)."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"inputs shape {x.shape} does not match input dim {spec.input_dim}")
    layers = unpack_weights(spec, w)
    hs = [x]
    zs = []
    h = x
    # over/invalid silenced: divergent weights yield non-finite outputs that
    # callers detect; saturated sigmoids hit the correct 0/1 limits
    with np.errstate(over="ignore", invalid="ignore"):
        for mat, bias in layers[:-1]:
            z = h @ mat + bias
            zs.append(z)
            h = np.maximum(z, 0.0)
            hs.append(h)
        mat, bias = layers[-1]
        z_out = h @ mat + bias
        if spec.output_activation == "softmax":
            probs = _softmax(z_out)
        else:
            probs = 1.0 / (1.0 + np.exp(-z_out))
    return hs, zs, probs


def forward(spec: ModelSpec, w: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Predicted probabilities, shape (n_samples, output_dim)."""
    return _forward_pass(spec, w, inputs)[2]


def loss(spec: ModelSpec, w: np.ndarray, batch: Batch) -> float:
    """Mean cross-entropy (categorical for softmax, binary for sigmoid)."""
    check_batch(spec, batch)
    t = batch.targets
    with np.errstate(invalid="ignore"):
        p = np.clip(forward(spec, w, batch.inputs), LOG_CLAMP, 1.0 - LOG_CLAMP)
        if spec.output_activation == "softmax":
            per_sample = -np.sum(t * np.log(p), axis=1)
        else:
            per_sample = -(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)).ravel()
    return float(per_sample.mean())


def gradient(spec: ModelSpec, w: np.ndarray, batch: Batch) -> np.ndarray:
    """Analytic gradient of loss() w.r.t. the flat weight vector."""
    check_batch(spec, batch)
    hs, zs, probs = _forward_pass(spec, w, batch.inputs)
    layers = unpack_weights(spec, w)
    n = batch.n_samples
    grads: list[np.ndarray | None] = [None] * len(layers)
    with np.errstate(over="ignore", invalid="ignore"):
        # dL/dz at the output is (p - y)/n for both softmax-CE and sigmoid-BCE
        delta = (probs - batch.targets) / n
        for li in range(len(layers) - 1, -1, -1):
            h_in = hs[li]
            dw = h_in.T @ delta
            db = delta.sum(axis=0)
            grads[li] = np.concatenate([dw.ravel(), db])
            if li > 0:
                delta = (delta @ layers[li][0].T) * (zs[li - 1] > 0.0)
    return np.concatenate(grads)


def save_weights(path: str | Path, w: np.ndarray) -> None:
    """Write `CKPT1 <n>` then one shortest-repr decimal per line (lossless)."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError("expected a flat weight vector")
    lines = [f"{WEIGHT_FILE_MAGIC} {w.shape[0]}"]
    lines.extend(repr(v) for v in w.tolist())
    Path(path).write_text("\n".join(lines) + "\n")


def load_weights(path: str | Path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty weight file")
    header = text[0].split()
    if len(header) != 2 or header[0] != WEIGHT_FILE_MAGIC:
        raise ValueError(f"{path}: bad header {text[0]!r}")
    n = int(header[1])
    values = [float(line) for line in text[1 : n + 1]]
    if len(values) != n:
        raise ValueError(f"{path}: expected {n} values, found {len(values)}")
    w = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{path}: non-finite weight entries")
    return w
