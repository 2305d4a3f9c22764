"""Shared test builders."""

from __future__ import annotations

import numpy as np

from checkpoint_ensembles import ModelSpec, Snapshot, TrainingTrace

TINY_SPEC = ModelSpec(layer_sizes=(2, 2), output_activation="softmax", seed=0)


def make_trace(
    scores,
    direction: str = "lower_better",
    spec: ModelSpec = TINY_SPEC,
    weights=None,
    early_stop_rounds: int = 10,
) -> TrainingTrace:
    """Trace with prescribed validation scores; weights default to random."""
    rng = np.random.default_rng(1234)
    n_params = spec.n_params()
    snaps = []
    for i, score in enumerate(scores):
        if weights is not None:
            w = np.asarray(weights[i], dtype=np.float64)
        else:
            w = rng.normal(0.0, 1.0, n_params)
        snaps.append(Snapshot(i + 1, w, float(score)))
    return TrainingTrace(spec, tuple(snaps), direction, early_stop_rounds)
