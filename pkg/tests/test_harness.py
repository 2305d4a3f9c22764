import json

import numpy as np
import pytest

from checkpoint_ensembles.harness import (
    ExperimentConfig,
    report,
    run_single,
    run_sweep,
)

BLOBS = {
    "generator": "blobs",
    "classes": 3,
    "dims": 4,
    "per_class": 60,
    "spread": 0.8,
    "seed": 11,
    "clusters_per_class": 2,
}

BINARY = {
    "generator": "imbalanced_binary",
    "n": 600,
    "positive_frac": 0.3,
    "hardness": 0.4,
    "seed": 5,
}


def config_doc(out_dir, **over):
    doc = {
        "dataset": BLOBS,
        "output_dir": str(out_dir),
        "model": {"hidden_layers": [6]},
        "train": {
            "learning_rate": 0.3,
            "batch_size": 16,
            "max_epochs": 15,
            "early_stop_rounds": 5,
            "val_metric": "accuracy",
        },
        "split": {"train_frac": 0.5, "val_frac": 0.2, "test_frac": 0.3, "seed": 2},
        "sweep": [0.1, 0.5],
        "seeds_per_rate": 2,
        "methods": ["MV", "CE", "CS", "LKS"],
        "eval_metrics": ["accuracy"],
    }
    doc.update(over)
    return doc


class TestExperimentConfig:
    def test_requires_dataset_and_output_dir(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"output_dir": "x"})
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"dataset": BLOBS})

    def test_everything_else_defaults(self):
        cfg = ExperimentConfig.from_dict({"dataset": BLOBS, "output_dir": "x"})
        assert cfg.methods == ("MV", "CE", "CS", "LKS", "RIE")
        assert cfg.rie_runs == 5
        assert cfg.seeds_per_rate == 1
        assert cfg.eval_metrics == ("accuracy",)
        assert cfg.sweep == (cfg.train.learning_rate,)

    def test_bad_method(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(
                {"dataset": BLOBS, "output_dir": "x", "methods": ["MV", "VOTE"]}
            )

    def test_empty_methods(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(
                {"dataset": BLOBS, "output_dir": "x", "methods": []}
            )

    def test_bad_metric(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(
                {"dataset": BLOBS, "output_dir": "x", "eval_metrics": ["roc_auc"]}
            )

    def test_pr_auc_needs_binary(self, tmp_path):
        cfg = ExperimentConfig.from_dict(
            config_doc(tmp_path, eval_metrics=["accuracy", "pr_auc"])
        )
        with pytest.raises(ValueError, match="binary"):
            run_single(cfg)


class TestRunSingle:
    def test_paired_rows_and_manifests(self, tmp_path):
        cfg = ExperimentConfig.from_dict(config_doc(tmp_path))
        run_dir, rows = run_single(cfg)
        assert len(rows) == 4
        bs = {r.best_epoch for r in rows}
        ns = {r.total_epochs for r in rows}
        assert len(bs) == 1 and len(ns) == 1
        assert {r.method for r in rows} == {"MV", "CE", "CS", "LKS"}
        mv = next(r for r in rows if r.method == "MV")
        assert mv.k_used == 1
        for method in ("mv", "ce", "cs", "lks"):
            assert (run_dir / method / "predictor.json").exists()
        assert (tmp_path / "sweep.csv").exists()

    def test_single_epoch_all_methods_equal(self, tmp_path):
        doc = config_doc(tmp_path)
        doc["train"]["max_epochs"] = 1
        cfg = ExperimentConfig.from_dict(doc)
        _, rows = run_single(cfg)
        values = {r.value for r in rows}
        assert len(values) == 1

    def test_rerun_identical_output(self, tmp_path):
        cfg = ExperimentConfig.from_dict(config_doc(tmp_path))
        run_single(cfg)
        first = (tmp_path / "sweep.csv").read_bytes()
        run_single(cfg)
        assert (tmp_path / "sweep.csv").read_bytes() == first


@pytest.fixture(scope="module")
def sweep_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    cfg = ExperimentConfig.from_dict(
        config_doc(out, methods=["MV", "CE", "CS", "LKS", "RIE"], rie_runs=2)
    )
    run_sweep(cfg)
    return out


class TestRunSweep:
    def test_row_count_formula(self, sweep_out):
        lines = (sweep_out / "sweep.csv").read_text().splitlines()
        # 2 rates x 2 seeds x 4 non-RIE methods x 1 metric + 2 rates x 1 RIE
        assert len(lines) - 1 == 2 * 2 * 4 * 1 + 2 * 1

    def test_rie_rows_sum_member_epochs(self, sweep_out):
        lines = (sweep_out / "sweep.csv").read_text().splitlines()[1:]
        rows = [ln.split(",") for ln in lines]
        for rate in ("0.1", "0.5"):
            mv_b = [int(r[5]) for r in rows if r[0] == rate and r[2] == "MV"]
            mv_n = [int(r[6]) for r in rows if r[0] == rate and r[2] == "MV"]
            rie = next(r for r in rows if r[0] == rate and r[2] == "RIE")
            assert int(rie[5]) == sum(mv_b)
            assert int(rie[6]) == sum(mv_n)
            assert int(rie[7]) == 2
            assert rie[1] == "-1"

    def test_summary_means_match_csv(self, sweep_out):
        lines = (sweep_out / "sweep.csv").read_text().splitlines()[1:]
        rows = [ln.split(",") for ln in lines]
        doc = json.loads((sweep_out / "summary.json").read_text())
        for rate in ("0.1", "0.5"):
            for method in ("MV", "CE"):
                vals = [
                    float(r[4]) for r in rows if r[0] == rate and r[2] == method
                ]
                assert abs(doc["per_rate"][rate][method]["accuracy"] - np.mean(vals)) < 1e-12
            gain = doc["per_rate"][rate]["gain"]["accuracy"]
            want = doc["per_rate"][rate]["CE"]["accuracy"] - doc["per_rate"][rate]["MV"]["accuracy"]
            assert abs(gain - want) < 1e-15

    def test_summary_mean_diff_matches_csv_recomputation(self, sweep_out):
        lines = (sweep_out / "sweep.csv").read_text().splitlines()[1:]
        rows = [ln.split(",") for ln in lines]
        doc = json.loads((sweep_out / "summary.json").read_text())
        diffs = []
        for rate in ("0.1", "0.5"):
            for seed in ("0", "1"):
                ce = next(float(r[4]) for r in rows if r[:3] == [rate, seed, "CE"])
                mv = next(float(r[4]) for r in rows if r[:3] == [rate, seed, "MV"])
                diffs.append(ce - mv)
        assert abs(doc["mean_diffs"]["CE"]["accuracy"] - np.mean(diffs)) < 1e-12

    def test_t_test_entries(self, sweep_out):
        doc = json.loads((sweep_out / "summary.json").read_text())
        mv_entry = doc["t_tests"]["MV"]["accuracy"]
        assert mv_entry == {"error": "zero variance in differences"}
        ce_entry = doc["t_tests"]["CE"]["accuracy"]
        assert ("error" in ce_entry) or ("p_value" in ce_entry)

    def test_determinism_byte_identical(self, tmp_path):
        doc = config_doc(tmp_path / "a", sweep=[0.2, 0.6], seeds_per_rate=2)
        run_sweep(ExperimentConfig.from_dict(doc))
        doc2 = config_doc(tmp_path / "b", sweep=[0.2, 0.6], seeds_per_rate=2)
        run_sweep(ExperimentConfig.from_dict(doc2))
        a = (tmp_path / "a" / "sweep.csv").read_bytes()
        b = (tmp_path / "b" / "sweep.csv").read_bytes()
        assert a == b

    def test_parallel_jobs_same_bytes(self, tmp_path):
        doc = config_doc(tmp_path / "serial", sweep=[0.2, 0.6])
        run_sweep(ExperimentConfig.from_dict(doc))
        doc2 = config_doc(tmp_path / "par", sweep=[0.2, 0.6])
        run_sweep(ExperimentConfig.from_dict(doc2), jobs=2)
        assert (tmp_path / "serial" / "sweep.csv").read_bytes() == (
            tmp_path / "par" / "sweep.csv"
        ).read_bytes()

    def test_failed_cell_recorded_not_fatal(self, tmp_path):
        doc = config_doc(tmp_path, sweep=[0.3, 1e9], methods=["MV", "CE"])
        doc["train"]["val_metric"] = "loss"
        run_sweep(ExperimentConfig.from_dict(doc))
        summary = json.loads((tmp_path / "summary.json").read_text())
        failed_rates = {f["learning_rate"] for f in summary["failures"]}
        assert 1e9 in failed_rates
        lines = (tmp_path / "sweep.csv").read_text().splitlines()[1:]
        assert all(ln.split(",")[0] == "0.3" for ln in lines)
        assert len(lines) == 2 * 2

    def test_pr_auc_on_binary_dataset(self, tmp_path):
        doc = config_doc(
            tmp_path,
            dataset=BINARY,
            eval_metrics=["accuracy", "pr_auc"],
            methods=["MV", "CE", "RIE"],
            sweep=[0.2],
            seeds_per_rate=2,
            rie_runs=2,
        )
        run_sweep(ExperimentConfig.from_dict(doc))
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        # 1 rate x 2 seeds x 2 methods x 2 metrics + 1 rate x 2 RIE metrics
        assert len(lines) - 1 == 1 * 2 * 2 * 2 + 1 * 2
        values = [float(ln.split(",")[4]) for ln in lines[1:]]
        assert all(np.isfinite(values))


class TestReport:
    def test_gain_row_from_crafted_summary(self, tmp_path):
        summary = {
            "rates": [0.1],
            "methods": ["MV", "CE"],
            "metrics": ["accuracy"],
            "per_rate": {
                "0.1": {
                    "MV": {"accuracy": 0.5, "epochs_mean": 4.0},
                    "CE": {"accuracy": 0.6, "epochs_mean": 6.0},
                    "gain": {"accuracy": 0.09999999999999998},
                    "best_epoch_mean": 4.0,
                }
            },
        }
        (tmp_path / "summary.json").write_text(json.dumps(summary))
        text = report(tmp_path)
        assert "Gain" in text and "0.1000" in text
        assert "Epoch" in text and "4.0" in text

    def test_no_methods_errors(self, tmp_path):
        (tmp_path / "summary.json").write_text(json.dumps({"methods": [], "rates": []}))
        with pytest.raises(ValueError, match="nothing to report"):
            report(tmp_path)

    def test_missing_summary(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            report(tmp_path)

    def test_regeneration_byte_identical(self, sweep_dir_with_summary):
        a = report(sweep_dir_with_summary)
        b = report(sweep_dir_with_summary)
        assert a == b


@pytest.fixture(scope="module")
def sweep_dir_with_summary(tmp_path_factory):
    out = tmp_path_factory.mktemp("rep")
    cfg = ExperimentConfig.from_dict(config_doc(out, sweep=[0.3], seeds_per_rate=2))
    run_sweep(cfg)
    return out
