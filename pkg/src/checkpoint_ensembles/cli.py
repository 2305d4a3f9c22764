"""Command-line front end: train, sweep, report and eval subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import ensemble as ens
from .datasets import load_csv
from .harness import ExperimentConfig, report, run_single, run_sweep
from .metrics import accuracy, as_class_probs, pr_curve


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    doc = ExperimentConfig.from_json(args.config).to_dict()
    if args.out is not None:
        doc["output_dir"] = args.out
    if args.seed is not None:
        doc["base_seed"] = args.seed
    return ExperimentConfig.from_dict(doc)


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    run_dir, rows = run_single(cfg)
    print(f"run directory: {run_dir}")
    for row in rows:
        print(f"{row.method:<4} {row.metric:<9} {row.value:.6f} "
              f"(b={row.best_epoch}, n={row.total_epochs}, k={row.k_used})")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    sweep_path, summary_path = run_sweep(cfg, jobs=args.jobs)
    print(f"wrote {sweep_path}")
    print(f"wrote {summary_path}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    print(report(args.out), end="")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    predictor = ens.load_predictor(args.manifest)
    ds = load_csv(args.data, args.label_column, not args.no_header)
    if ds.dim != predictor.spec.input_dim:
        raise SystemExit(
            f"dataset has {ds.dim} features, predictor expects {predictor.spec.input_dim}"
        )
    probs = ens.predict(predictor, ds.inputs)
    class_probs = as_class_probs(probs)
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    pred_path = out_dir / "predictions.csv"
    header = [f"prob_{i}" for i in range(class_probs.shape[1])] + ["predicted"]
    lines = [",".join(header)]
    predicted = np.argmax(class_probs, axis=1)
    for row, label in zip(class_probs, predicted):
        lines.append(",".join([repr(v) for v in row.tolist()] + [str(int(label))]))
    pred_path.write_text("\n".join(lines) + "\n")
    print(f"wrote {pred_path}")
    if class_probs.shape[1] == ds.class_count:
        print(f"accuracy {accuracy(class_probs, ds.labels):.6f}")
        if ds.class_count == 2:
            scores = probs[:, 0] if probs.shape[1] == 1 else probs[:, 1]
            print(f"pr_auc {pr_curve(scores, ds.labels).auc:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="checkpoint-ensembles",
        description="Train checkpointed dense nets and compare combination methods",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="single training run")
    sweep_p = sub.add_parser("sweep", help="learning-rate sweep with repeated seeds")
    for p in (train_p, sweep_p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", help="override the config's output_dir")
        p.add_argument("--seed", type=int, help="override the config's base_seed")
    sweep_p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    train_p.set_defaults(func=_cmd_train)
    sweep_p.set_defaults(func=_cmd_sweep)

    report_p = sub.add_parser("report", help="render comparison tables")
    report_p.add_argument("--out", required=True, help="directory with summary.json")
    report_p.set_defaults(func=_cmd_report)

    eval_p = sub.add_parser("eval", help="apply a saved predictor to a CSV dataset")
    eval_p.add_argument("--manifest", required=True, help="predictor.json path")
    eval_p.add_argument("--data", required=True, help="CSV dataset path")
    eval_p.add_argument("--label-column", default="label")
    eval_p.add_argument("--no-header", action="store_true")
    eval_p.add_argument("--out", help="directory for predictions.csv")
    eval_p.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
