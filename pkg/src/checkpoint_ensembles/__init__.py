"""Checkpointed training for small dense nets plus model-combination methods
(MV, CE, CS, LKS, RIE) and the evaluation machinery to compare them."""

from .datasets import (
    Dataset,
    SplitSpec,
    batch_from_dataset,
    gen_blobs,
    gen_imbalanced_binary,
    load_csv,
    save_csv,
    split,
)
from .ensemble import (
    EnsemblePredictor,
    average_weights,
    build_ce,
    build_cs,
    build_lks,
    build_rie,
    heuristic_k,
    load_predictor,
    predict,
    save_predictor,
    select_mv,
)
from .estimator import CheckpointEnsembleClassifier
from .harness import ExperimentConfig, SweepRow, report, run_single, run_sweep
from .metrics import PRCurve, accuracy, as_class_probs, pr_curve, pr_curve_to_csv
from .nnet import (
    Batch,
    ModelSpec,
    forward,
    gradient,
    init_weights,
    load_weights,
    loss,
    save_weights,
)
from .stats import (
    BootstrapResult,
    TTestResult,
    ZeroVarianceError,
    bootstrap_metric,
    t_test_one_sample,
)
from .trainer import (
    NonFiniteLossError,
    Snapshot,
    TrainConfig,
    TrainingTrace,
    best_epoch,
    load_trace,
    order_by_score,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "BootstrapResult",
    "CheckpointEnsembleClassifier",
    "Dataset",
    "EnsemblePredictor",
    "ExperimentConfig",
    "ModelSpec",
    "NonFiniteLossError",
    "PRCurve",
    "Snapshot",
    "SplitSpec",
    "SweepRow",
    "TTestResult",
    "TrainConfig",
    "TrainingTrace",
    "ZeroVarianceError",
    "accuracy",
    "as_class_probs",
    "average_weights",
    "batch_from_dataset",
    "best_epoch",
    "bootstrap_metric",
    "build_ce",
    "build_cs",
    "build_lks",
    "build_rie",
    "forward",
    "gen_blobs",
    "gen_imbalanced_binary",
    "gradient",
    "heuristic_k",
    "init_weights",
    "load_csv",
    "load_predictor",
    "load_trace",
    "load_weights",
    "loss",
    "order_by_score",
    "pr_curve",
    "pr_curve_to_csv",
    "predict",
    "report",
    "run_single",
    "run_sweep",
    "save_csv",
    "save_predictor",
    "save_weights",
    "select_mv",
    "split",
    "t_test_one_sample",
    "train",
]
