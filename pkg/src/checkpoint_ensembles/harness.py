"""Experiment harness: single runs, learning-rate sweeps, summary tables.

A sweep trains one model per (learning rate, seed) cell, builds every
requested single-run combination method from the same trace (so per-cell
differences against MV are paired), optionally builds one RIE predictor per
rate from that rate's runs, and emits sweep.csv plus summary.json.  All
outputs are byte-deterministic for a fixed config.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ensemble as ens
from .datasets import Dataset, SplitSpec, batch_from_dataset, gen_blobs, gen_imbalanced_binary, load_csv, split
from .metrics import accuracy, as_class_probs, pr_curve
from .nnet import ModelSpec
from .stats import ZeroVarianceError, t_test_one_sample
from .trainer import NonFiniteLossError, TrainConfig, load_trace, train

SWEEP_FILE = "sweep.csv"
SUMMARY_FILE = "summary.json"
SWEEP_HEADER = "learning_rate,seed,method,metric,value,best_epoch,total_epochs,k_used"

METHOD_ORDER = {m: i for i, m in enumerate(ens.METHODS)}
METRIC_ORDER = {"accuracy": 0, "pr_auc": 1}

# offset separating the shuffle RNG stream from the init stream of a run
_SHUFFLE_SEED_OFFSET = 10_000_019

RIE_SEED_SENTINEL = -1  # seed column for aggregate RIE rows


@dataclass(frozen=True)
class ExperimentConfig:
    """One JSON document describing a full experiment.

    Only `dataset` and `output_dir` have no defaults.
    """

    dataset: dict
    output_dir: str
    hidden_layers: tuple[int, ...] = (16,)
    output_activation: str = "auto"
    train: TrainConfig = field(
        default_factory=lambda: TrainConfig(learning_rate=0.1, val_metric="accuracy")
    )
    split: SplitSpec = field(default_factory=SplitSpec)
    sweep: tuple[float, ...] = ()
    seeds_per_rate: int = 1
    methods: tuple[str, ...] = ens.METHODS
    rie_runs: int = 5
    eval_metrics: tuple[str, ...] = ("accuracy",)
    base_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        sweep = tuple(float(r) for r in self.sweep) or (self.train.learning_rate,)
        object.__setattr__(self, "sweep", sweep)
        methods = tuple(m.upper() for m in self.methods)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "eval_metrics", tuple(self.eval_metrics))
        if not methods or any(m not in ens.METHODS for m in methods):
            raise ValueError(f"methods must be a non-empty subset of {ens.METHODS}")
        if not self.eval_metrics or any(
            m not in ("accuracy", "pr_auc") for m in self.eval_metrics
        ):
            raise ValueError("eval_metrics must be a non-empty subset of accuracy/pr_auc")
        if self.seeds_per_rate < 1 or self.rie_runs < 1:
            raise ValueError("seeds_per_rate and rie_runs must be >= 1")
        if any(r <= 0 for r in self.sweep):
            raise ValueError("sweep rates must be positive")
        if self.base_seed < 0:
            raise ValueError("base_seed must be unsigned")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {
            "dataset", "output_dir", "model", "train", "split", "sweep",
            "seeds_per_rate", "methods", "rie_runs", "eval_metrics", "base_seed",
        }
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" not in doc:
            raise ValueError("config needs a dataset")
        if "output_dir" not in doc:
            raise ValueError("config needs an output_dir")
        model = doc.get("model", {})
        bad_model = set(model) - {"hidden_layers", "output_activation"}
        if bad_model:
            raise ValueError(f"unknown model keys: {sorted(bad_model)}")
        train_cfg = TrainConfig(
            **{"learning_rate": 0.1, "val_metric": "accuracy", **doc.get("train", {})}
        )
        return cls(
            dataset=doc["dataset"],
            output_dir=doc["output_dir"],
            hidden_layers=tuple(model.get("hidden_layers", (16,))),
            output_activation=model.get("output_activation", "auto"),
            train=train_cfg,
            split=SplitSpec(**doc.get("split", {})),
            sweep=tuple(doc.get("sweep", ())),
            seeds_per_rate=doc.get("seeds_per_rate", 1),
            methods=tuple(doc.get("methods", ens.METHODS)),
            rie_runs=doc.get("rie_runs", 5),
            eval_metrics=tuple(doc.get("eval_metrics", ("accuracy",))),
            base_seed=doc.get("base_seed", 0),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "output_dir": self.output_dir,
            "model": {
                "hidden_layers": list(self.hidden_layers),
                "output_activation": self.output_activation,
            },
            "train": self.train.to_dict(),
            "split": {
                "train_frac": self.split.train_frac,
                "val_frac": self.split.val_frac,
                "test_frac": self.split.test_frac,
                "seed": self.split.seed,
                "stratified": self.split.stratified,
            },
            "sweep": list(self.sweep),
            "seeds_per_rate": self.seeds_per_rate,
            "methods": list(self.methods),
            "rie_runs": self.rie_runs,
            "eval_metrics": list(self.eval_metrics),
            "base_seed": self.base_seed,
        }


@dataclass(frozen=True)
class SweepRow:
    learning_rate: float
    seed: int
    method: str
    metric: str
    value: float
    best_epoch: int
    total_epochs: int
    k_used: int

    def to_csv(self) -> str:
        return ",".join(
            [
                repr(self.learning_rate),
                str(self.seed),
                self.method,
                self.metric,
                repr(self.value),
                str(self.best_epoch),
                str(self.total_epochs),
                str(self.k_used),
            ]
        )

    def sort_key(self):
        return (
            self.learning_rate,
            self.seed,
            METHOD_ORDER[self.method],
            METRIC_ORDER[self.metric],
        )


@dataclass
class CellResult:
    learning_rate: float
    seed: int
    run_dir: str
    rows: list[SweepRow] = field(default_factory=list)
    convergence: dict[str, int] = field(default_factory=dict)
    error: str | None = None


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    d = dict(cfg.dataset)
    if "csv" in d:
        return load_csv(d["csv"], d.get("label_column", "label"), d.get("has_header", True))
    kind = d.pop("generator", "blobs")
    if kind == "blobs":
        return gen_blobs(**d)
    if kind == "imbalanced_binary":
        return gen_imbalanced_binary(**d)
    raise ValueError(f"unknown dataset generator {kind!r}")


def model_spec_for(cfg: ExperimentConfig, ds: Dataset, seed: int) -> ModelSpec:
    out_act = cfg.output_activation
    if out_act == "auto":
        out_act = "sigmoid" if ds.class_count == 2 else "softmax"
    out_dim = 1 if out_act == "sigmoid" else ds.class_count
    return ModelSpec(
        layer_sizes=(ds.dim, *cfg.hidden_layers, out_dim),
        output_activation=out_act,
        seed=seed,
    )


def _positive_scores(probs: np.ndarray) -> np.ndarray:
    if probs.shape[1] == 1:
        return probs[:, 0]
    if probs.shape[1] == 2:
        return probs[:, 1]
    raise ValueError("pr_auc needs a binary model output")


def evaluate_predictor(
    predictor: ens.EnsemblePredictor, test: Dataset, metric: str
) -> float:
    probs = ens.predict(predictor, test.inputs)
    if metric == "accuracy":
        return accuracy(as_class_probs(probs), test.labels)
    if metric == "pr_auc":
        return pr_curve(_positive_scores(probs), test.labels).auc
    raise ValueError(f"unknown metric {metric!r}")


def _rate_token(rate: float) -> str:
    return repr(float(rate))


def cell_dir(out_dir: str | Path, rate: float, seed: int) -> Path:
    return Path(out_dir) / "runs" / f"lr{_rate_token(rate)}_seed{seed}"


def run_cell(
    cfg: ExperimentConfig,
    rate: float,
    seed: int,
    train_ds: Dataset,
    val_ds: Dataset,
    test_ds: Dataset,
) -> CellResult:
    """Train one (rate, seed) cell and score every requested non-RIE method.

    Raises NonFiniteLossError when training diverges.
    """
    run_dir = cell_dir(cfg.output_dir, rate, seed)
    result = CellResult(rate, seed, str(run_dir))
    spec = model_spec_for(cfg, train_ds, seed)
    train_cfg = TrainConfig(
        learning_rate=rate,
        batch_size=cfg.train.batch_size,
        max_epochs=cfg.train.max_epochs,
        early_stop_rounds=cfg.train.early_stop_rounds,
        val_metric=cfg.train.val_metric,
        shuffle_seed=seed + _SHUFFLE_SEED_OFFSET,
    )
    trace = train(
        spec,
        train_cfg,
        batch_from_dataset(train_ds, spec),
        batch_from_dataset(val_ds, spec),
        run_dir,
    )

    b, n = trace.best_epoch, trace.n
    for method in cfg.methods:
        if method == "RIE":
            continue
        if method == "MV":
            predictor, k = ens.select_mv(trace), 1
        elif method == "CE":
            predictor = ens.build_ce(trace)
            k = len(predictor.members)
        elif method == "CS":
            predictor = ens.build_cs(trace)
            k = ens.heuristic_k(trace.early_stop_rounds, b, n)
        else:  # LKS
            predictor = ens.build_lks(trace)
            k = min(5, b)
        epochs = ens.member_epochs(trace, method)
        result.convergence[method] = max(epochs)
        refs = [("..", e) for e in epochs]
        ens.save_predictor(run_dir / method.lower(), method, predictor, refs, k)
        for metric in cfg.eval_metrics:
            value = evaluate_predictor(predictor, test_ds, metric)
            result.rows.append(SweepRow(rate, seed, method, metric, value, b, n, k))
    return result


def _run_cell_job(args: tuple) -> CellResult:
    """run_cell wrapper that records divergence instead of raising."""
    try:
        return run_cell(*args)
    except NonFiniteLossError as err:
        cfg, rate, seed = args[0], args[1], args[2]
        result = CellResult(rate, seed, str(cell_dir(cfg.output_dir, rate, seed)))
        result.error = str(err)
        return result


def _build_rie_rows(
    cfg: ExperimentConfig,
    rate: float,
    member_cells: list[CellResult],
    test_ds: Dataset,
    out_dir: Path,
) -> tuple[list[SweepRow], int]:
    traces = [load_trace(c.run_dir) for c in member_cells]
    predictor = ens.build_rie(traces)
    rie_dir = out_dir / "rie" / f"lr{_rate_token(rate)}"
    refs = []
    for c, t in zip(member_cells, traces):
        rel = Path(c.run_dir).resolve().relative_to(out_dir.resolve())
        refs.append((str(Path("..") / ".." / rel), t.best_epoch))
    ens.save_predictor(rie_dir, "RIE", predictor, refs, len(traces))
    sum_b = sum(t.best_epoch for t in traces)
    sum_n = sum(t.n for t in traces)
    rows = [
        SweepRow(
            rate,
            RIE_SEED_SENTINEL,
            "RIE",
            metric,
            evaluate_predictor(predictor, test_ds, metric),
            sum_b,
            sum_n,
            len(traces),
        )
        for metric in cfg.eval_metrics
    ]
    return rows, sum_b


def run_single(cfg: ExperimentConfig) -> tuple[Path, list[SweepRow]]:
    """One training run at the configured rate; writes rows for every
    requested non-RIE method (all from the same trace) to sweep.csv.

    Errors propagate after partial rows are flushed to disk.
    """
    ds = build_dataset(cfg)
    _check_metrics_fit(cfg, ds)
    train_ds, val_ds, test_ds = split(ds, cfg.split)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rate = cfg.train.learning_rate
    rows: list[SweepRow] = []
    try:
        result = run_cell(cfg, rate, cfg.base_seed, train_ds, val_ds, test_ds)
        rows = sorted(result.rows, key=SweepRow.sort_key)
        return Path(result.run_dir), rows
    finally:
        _write_sweep_csv(out_dir / SWEEP_FILE, rows)


def _check_metrics_fit(cfg: ExperimentConfig, ds: Dataset) -> None:
    if "pr_auc" in cfg.eval_metrics and ds.class_count != 2:
        raise ValueError("pr_auc needs a binary dataset")


def _write_sweep_csv(path: Path, rows: list[SweepRow]) -> None:
    lines = [SWEEP_HEADER] + [r.to_csv() for r in rows]
    path.write_text("\n".join(lines) + "\n")


def run_sweep(cfg: ExperimentConfig, jobs: int = 1) -> tuple[Path, Path]:
    """Full protocol: every (rate, seed) cell, optional per-rate RIE,
    sweep.csv plus summary.json with per-rate means and t-tests vs MV."""
    ds = build_dataset(cfg)
    _check_metrics_fit(cfg, ds)
    train_ds, val_ds, test_ds = split(ds, cfg.split)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rates = sorted(set(cfg.sweep))
    seeds = [cfg.base_seed + i for i in range(cfg.seeds_per_rate)]
    cell_args = [
        (cfg, rate, seed, train_ds, val_ds, test_ds) for rate in rates for seed in seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_job, cell_args))
    else:
        results = [_run_cell_job(args) for args in cell_args]

    by_cell = {(c.learning_rate, c.seed): c for c in results}
    rows: list[SweepRow] = []
    failures = []
    for c in results:
        if c.error is not None:
            failures.append(
                {"learning_rate": c.learning_rate, "seed": c.seed, "error": c.error}
            )
        rows.extend(c.rows)

    rie_epochs: dict[float, int] = {}
    if "RIE" in cfg.methods:
        for rate in rates:
            members = [
                by_cell[(rate, s)] for s in seeds if by_cell[(rate, s)].error is None
            ][: cfg.rie_runs]
            if not members:
                failures.append(
                    {
                        "learning_rate": rate,
                        "seed": RIE_SEED_SENTINEL,
                        "error": "no successful runs for RIE",
                    }
                )
                continue
            rie_rows, sum_b = _build_rie_rows(cfg, rate, members, test_ds, out_dir)
            rows.extend(rie_rows)
            rie_epochs[rate] = sum_b

    rows.sort(key=SweepRow.sort_key)
    sweep_path = out_dir / SWEEP_FILE
    _write_sweep_csv(sweep_path, rows)

    summary = _summarize(cfg, rates, rows, results, rie_epochs, failures)
    summary_path = out_dir / SUMMARY_FILE
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    return sweep_path, summary_path


def _summarize(
    cfg: ExperimentConfig,
    rates: list[float],
    rows: list[SweepRow],
    cells: list[CellResult],
    rie_epochs: dict[float, int],
    failures: list[dict],
) -> dict:
    methods = [m for m in ens.METHODS if m in cfg.methods]
    metrics = list(cfg.eval_metrics)
    value = {(r.learning_rate, r.seed, r.method, r.metric): r.value for r in rows}
    b_by_cell = {(r.learning_rate, r.seed): r.best_epoch for r in rows if r.method != "RIE"}

    per_rate: dict[str, dict] = {}
    for rate in rates:
        entry: dict[str, object] = {}
        for method in methods:
            method_entry: dict[str, object] = {}
            for metric in metrics:
                if method == "RIE":
                    vals = [
                        v
                        for (rt, sd, me, mt), v in value.items()
                        if rt == rate and me == "RIE" and mt == metric
                    ]
                else:
                    vals = [
                        value[(rate, s, method, metric)]
                        for s in _ok_seeds(cfg, cells, rate)
                    ]
                if vals:
                    method_entry[metric] = float(np.mean(vals))
            conv = _convergence_values(cfg, cells, rate, method, rie_epochs)
            if conv:
                method_entry["epochs_mean"] = float(np.mean(conv))
            if method_entry:
                entry[method] = method_entry
        if "MV" in entry and "CE" in entry:
            entry["gain"] = {
                metric: entry["CE"][metric] - entry["MV"][metric]
                for metric in metrics
                if metric in entry["CE"] and metric in entry["MV"]
            }
        bs = [b for (rt, _), b in b_by_cell.items() if rt == rate]
        if bs:
            entry["best_epoch_mean"] = float(np.mean(bs))
        per_rate[_rate_token(rate)] = entry

    t_tests: dict[str, dict] = {}
    mean_diffs: dict[str, dict] = {}
    if "MV" in cfg.methods:
        for method in methods:
            t_tests[method] = {}
            mean_diffs[method] = {}
            for metric in metrics:
                diffs = _diffs_vs_mv(cfg, cells, rates, value, method, metric)
                if not diffs:
                    t_tests[method][metric] = {"error": "no paired samples"}
                    continue
                mean_diffs[method][metric] = float(np.mean(diffs))
                try:
                    t_tests[method][metric] = t_test_one_sample(diffs).to_dict()
                except (ZeroVarianceError, ValueError) as err:
                    t_tests[method][metric] = {"error": str(err)}

    return {
        "config": cfg.to_dict(),
        "rates": rates,
        "methods": methods,
        "metrics": metrics,
        "per_rate": per_rate,
        "t_tests": t_tests,
        "mean_diffs": mean_diffs,
        "failures": failures,
    }


def _ok_seeds(cfg: ExperimentConfig, cells: list[CellResult], rate: float) -> list[int]:
    return [c.seed for c in cells if c.learning_rate == rate and c.error is None]


def _convergence_values(
    cfg: ExperimentConfig,
    cells: list[CellResult],
    rate: float,
    method: str,
    rie_epochs: dict[float, int],
) -> list[int]:
    if method == "RIE":
        return [rie_epochs[rate]] if rate in rie_epochs else []
    return [
        c.convergence[method]
        for c in cells
        if c.learning_rate == rate and c.error is None and method in c.convergence
    ]


def _diffs_vs_mv(
    cfg: ExperimentConfig,
    cells: list[CellResult],
    rates: list[float],
    value: dict,
    method: str,
    metric: str,
) -> list[float]:
    """Per-run (method - MV) differences pooled across the whole sweep.

    RIE has one value per rate; it is paired against each member run's MV."""
    diffs = []
    for rate in rates:
        seeds = _ok_seeds(cfg, cells, rate)
        if method == "RIE":
            key = (rate, RIE_SEED_SENTINEL, "RIE", metric)
            if key not in value:
                continue
            rie_val = value[key]
            for s in seeds[: cfg.rie_runs]:
                diffs.append(rie_val - value[(rate, s, "MV", metric)])
        else:
            for s in seeds:
                diffs.append(value[(rate, s, method, metric)] - value[(rate, s, "MV", metric)])
    return diffs


def report(output_dir: str | Path) -> str:
    """Render per-rate comparison tables from summary.json (no recomputation)."""
    summary_path = Path(output_dir) / SUMMARY_FILE
    if not summary_path.exists():
        raise FileNotFoundError(f"no {SUMMARY_FILE} in {output_dir}")
    doc = json.loads(summary_path.read_text())
    methods = [m for m in doc.get("methods", []) if m in ens.METHODS]
    if not methods:
        raise ValueError("nothing to report: no methods in summary")
    rates = doc["rates"]
    lines = []
    for metric in doc["metrics"]:
        lines.append(f"== {metric} ==")
        header = ["method".ljust(8)] + [f"{r:>10.4g}" for r in rates]
        lines.append("".join(header))
        for method in methods:
            cells = []
            for rate in rates:
                entry = doc["per_rate"][_rate_token(rate)].get(method, {})
                cells.append(f"{entry[metric]:>10.4f}" if metric in entry else " " * 10)
            lines.append(method.ljust(8) + "".join(cells))
        gain_cells = []
        has_gain = False
        for rate in rates:
            gain = doc["per_rate"][_rate_token(rate)].get("gain", {})
            if metric in gain:
                has_gain = True
                gain_cells.append(f"{gain[metric]:>10.4f}")
            else:
                gain_cells.append(" " * 10)
        if has_gain:
            lines.append("Gain".ljust(8) + "".join(gain_cells))
        epoch_cells = []
        for rate in rates:
            entry = doc["per_rate"][_rate_token(rate)]
            if "best_epoch_mean" in entry:
                epoch_cells.append(f"{entry['best_epoch_mean']:>10.1f}")
            else:
                epoch_cells.append(" " * 10)
        lines.append("Epoch".ljust(8) + "".join(epoch_cells))
        lines.append("")
    return "\n".join(lines)
