"""Scikit-learn style classifier wrapping the checkpoint-combination methods.

fit() trains a small dense net with per-epoch checkpointing on an internal
train/validation split, then builds the requested final predictor (mv, ce,
cs, lks or rie).  Because the whole trace is kept, a fitted estimator can be
re-pointed at a different combination method without retraining.
"""

from __future__ import annotations

import tempfile

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from . import ensemble as ens
from .metrics import as_class_probs
from .nnet import Batch, ModelSpec
from .trainer import TrainConfig, TrainingTrace, train


class CheckpointEnsembleClassifier(BaseEstimator, ClassifierMixin):
    """Dense-net classifier whose final model combines epoch checkpoints.

    Parameters
    ----------
    method : {"mv", "ce", "cs", "lks", "rie"}
        How to turn recorded checkpoints into the final predictor.
    k : int or None
        Checkpoint count for ce/cs; None uses min(patience + 5, best epoch,
        total epochs).
    n_runs : int
        Independent training runs for rie (ignored otherwise).
    """

    def __init__(
        self,
        hidden_layer_sizes=(16,),
        method="ce",
        k=None,
        learning_rate=0.1,
        batch_size=32,
        max_epochs=100,
        early_stop_rounds=10,
        val_metric="accuracy",
        val_fraction=0.2,
        n_runs=5,
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.method = method
        self.k = k
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.early_stop_rounds = early_stop_rounds
        self.val_metric = val_metric
        self.val_fraction = val_fraction
        self.n_runs = n_runs
        self.random_state = random_state

    def _holdout(self, y_idx: np.ndarray, rng: np.random.Generator):
        """Stratified train/validation index split."""
        train_idx, val_idx = [], []
        for c in range(len(self.classes_)):
            idx = np.nonzero(y_idx == c)[0]
            idx = idx[rng.permutation(idx.shape[0])]
            n_val = max(1, int(round(idx.shape[0] * self.val_fraction)))
            if n_val >= idx.shape[0]:
                raise ValueError(
                    f"class {self.classes_[c]!r} too small for val_fraction="
                    f"{self.val_fraction}"
                )
            val_idx.extend(idx[:n_val].tolist())
            train_idx.extend(idx[n_val:].tolist())
        return np.array(sorted(train_idx)), np.array(sorted(val_idx))

    def _train_once(self, X, targets, train_idx, val_idx, seed: int) -> TrainingTrace:
        spec = ModelSpec(
            layer_sizes=(X.shape[1], *self.hidden_layer_sizes, len(self.classes_)),
            output_activation="softmax",
            seed=seed,
        )
        cfg = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            early_stop_rounds=self.early_stop_rounds,
            val_metric=self.val_metric,
            shuffle_seed=seed + 1,
        )
        with tempfile.TemporaryDirectory(prefix="ckpt_fit_") as tmp:
            return train(
                spec,
                cfg,
                Batch(X[train_idx], targets[train_idx]),
                Batch(X[val_idx], targets[val_idx]),
                tmp,
            )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        method = str(self.method).lower()
        if method not in ("mv", "ce", "cs", "lks", "rie"):
            raise ValueError(f"unknown method {self.method!r}")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        self.n_features_in_ = X.shape[1]
        targets = np.zeros((X.shape[0], len(self.classes_)))
        targets[np.arange(X.shape[0]), y_idx] = 1.0

        rng = np.random.default_rng(self.random_state)
        train_idx, val_idx = self._holdout(y_idx, rng)
        n_runs = self.n_runs if method == "rie" else 1
        self.traces_ = [
            self._train_once(X, targets, train_idx, val_idx, self.random_state + run)
            for run in range(n_runs)
        ]
        self.predictor_ = self._build(method)
        return self

    def _build(self, method: str) -> ens.EnsemblePredictor:
        trace = self.traces_[0]
        if method == "mv":
            return ens.select_mv(trace)
        if method == "ce":
            return ens.build_ce(trace, self.k)
        if method == "cs":
            return ens.build_cs(trace, self.k)
        if method == "lks":
            return ens.build_lks(trace)
        return ens.build_rie(self.traces_)

    def rebuild(self, method: str, k=None) -> "CheckpointEnsembleClassifier":
        """Swap the combination method using the already-recorded trace."""
        self._check_fitted()
        method = method.lower()
        if method == "rie" and len(self.traces_) < 2:
            raise ValueError("rie rebuild needs an estimator fitted with method='rie'")
        self.k = k if k is not None else self.k
        self.method = method
        self.predictor_ = self._build(method)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "predictor_"):
            raise NotFittedError("fit this estimator before predicting")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return as_class_probs(ens.predict(self.predictor_, X))

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]
