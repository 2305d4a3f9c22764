"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest
from helpers import make_trace
from test_metrics import oracle_pr
from test_nnet import finite_difference, max_rel_error, random_case

from checkpoint_ensembles import (
    bootstrap_metric,
    build_ce,
    build_cs,
    build_lks,
    build_rie,
    heuristic_k,
    pr_curve,
    predict,
    select_mv,
    t_test_one_sample,
)
from checkpoint_ensembles.harness import ExperimentConfig, run_sweep
from checkpoint_ensembles.nnet import gradient


@contextmanager
def announce(number, name):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] criterion {number} ({name}): FAIL")
        raise
    elapsed = time.perf_counter() - start
    print(f"[ACCEPTANCE] criterion {number} ({name}): PASS ({elapsed:.1f}s)")


def test_criterion_1_degeneracy_suite():
    with announce(1, "degeneracy suite"):
        rng = np.random.default_rng(101)
        for trial in range(50):
            n = int(rng.integers(1, 15))
            scores = (rng.integers(0, 8, n) / 7.0).tolist()
            direction = "lower_better" if trial % 2 else "higher_better"
            trace = make_trace(scores, direction=direction)
            x = rng.normal(size=(5, trace.spec.input_dim))
            mv_pred = predict(select_mv(trace), x)
            assert np.array_equal(predict(build_ce(trace, 1), x), mv_pred)
            assert np.array_equal(build_cs(trace, 1).weights, select_mv(trace).weights)
            assert np.array_equal(predict(build_rie([trace]), x), mv_pred)
            # separate trace whose best epoch is 1 exercises the LKS window
            first_best = [0.0 if direction == "lower_better" else 1.0] + [
                0.5 for _ in range(n - 1)
            ]
            t2 = make_trace(first_best, direction=direction)
            assert t2.best_epoch == 1
            assert np.array_equal(build_lks(t2).weights, select_mv(t2).weights)


def test_criterion_2_k_heuristic_grid():
    with announce(2, "k heuristic exhaustive grid"):
        for a in range(1, 13):
            for n in range(1, 31):
                for b in range(1, n + 1):
                    assert heuristic_k(a, b, n) == min(a + 5, b, n)


def test_criterion_3_gradient_correctness():
    with announce(3, "gradient vs central differences"):
        rng = np.random.default_rng(303)
        worst = 0.0
        for _ in range(100):
            spec, w, batch = random_case(rng, max_params=50, max_batch=8)
            g = gradient(spec, w, batch)
            fd = finite_difference(spec, w, batch, h=1e-5)
            worst = max(worst, max_rel_error(g, fd))
        assert worst < 1e-4, f"max relative error {worst}"


def test_criterion_4_pr_auc_oracle_equivalence():
    with announce(4, "PR-AUC brute-force oracle"):
        rng = np.random.default_rng(404)
        for _ in range(200):
            n = int(rng.integers(2, 101))
            n_pos = max(1, int(np.ceil(0.1 * n)) + int(rng.integers(0, n // 2 + 1)))
            n_pos = min(n_pos, n - 1)
            labels = np.zeros(n, dtype=np.int64)
            labels[rng.choice(n, n_pos, replace=False)] = 1
            scores = rng.integers(0, 20, n) / 19.0  # ties included
            got = pr_curve(scores, labels)
            want_points, want_auc = oracle_pr(scores, labels)
            assert abs(got.auc - want_auc) <= 1e-12
            assert len(got.points) == len(want_points)
            for (gr, gp), (wr, wp) in zip(got.points, want_points):
                assert abs(gr - wr) <= 1e-12 and abs(gp - wp) <= 1e-12
        # perfectly ranked instances give exactly 1.0
        for _ in range(20):
            n_pos, n_neg = int(rng.integers(1, 30)), int(rng.integers(1, 30))
            scores = np.concatenate([rng.random(n_pos) + 1.5, rng.random(n_neg)])
            labels = np.concatenate([np.ones(n_pos, int), np.zeros(n_neg, int)])
            assert pr_curve(scores, labels).auc == 1.0


def test_criterion_5_t_test_validation():
    with announce(5, "t-test reference values and null calibration"):
        r = t_test_one_sample([1, 2, 3, 4, 5])
        assert abs(r.t_stat - 4.2426) < 1e-3
        assert abs(r.p_value - 0.0132) < 5e-4
        assert abs(r.ci_low - 1.0368) < 1e-3
        assert abs(r.ci_high - 4.9632) < 1e-3
        rng = np.random.default_rng(505)
        rejections = sum(
            t_test_one_sample(rng.standard_normal(10)).p_value < 0.05
            for _ in range(1000)
        )
        assert 0.03 <= rejections / 1000 <= 0.07, f"rate {rejections / 1000}"


@pytest.fixture(scope="module")
def directional_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("directional")
    doc = {
        "dataset": {
            "generator": "blobs",
            "classes": 3,
            "dims": 10,
            "per_class": 300,
            "spread": 0.9,
            "seed": 20,
            "clusters_per_class": 2,
        },
        "output_dir": str(out),
        "model": {"hidden_layers": [16]},
        "train": {
            "learning_rate": 0.1,
            "batch_size": 16,
            "max_epochs": 80,
            "early_stop_rounds": 10,
            "val_metric": "accuracy",
        },
        "split": {"train_frac": 0.4, "val_frac": 0.2, "test_frac": 0.4, "seed": 7},
        "sweep": [0.03, 0.1, 0.3, 1.0, 3.0],
        "seeds_per_rate": 10,
        "methods": ["MV", "CE", "RIE"],
        "rie_runs": 5,
        "eval_metrics": ["accuracy"],
    }
    _, summary_path = run_sweep(ExperimentConfig.from_dict(doc))
    return json.loads(summary_path.read_text())


def test_criterion_6_ce_beats_mv_directionally(directional_sweep):
    with announce(6, "CE - MV positive with CI excluding zero"):
        t = directional_sweep["t_tests"]["CE"]["accuracy"]
        mean_diff = directional_sweep["mean_diffs"]["CE"]["accuracy"]
        assert mean_diff > 0, f"mean CE - MV = {mean_diff}"
        assert t["ci_low"] > 0, f"CI [{t['ci_low']}, {t['ci_high']}] touches zero"


def test_criterion_7_rie_dominance(directional_sweep):
    with announce(7, "RIE captures at least CE-level benefit"):
        best = {}
        for method in ("MV", "CE", "RIE"):
            best[method] = max(
                entry[method]["accuracy"]
                for entry in directional_sweep["per_rate"].values()
                if method in entry
            )
        assert best["RIE"] >= best["CE"] - 0.005, best
        assert best["RIE"] >= best["MV"], best


def test_criterion_8_bootstrap_machinery():
    with announce(8, "bootstrap stddev scale and determinism"):
        scores = np.array([0.0, 1.0] * 500)
        labels = np.zeros(1000, dtype=np.int64)
        mean_metric = lambda s, l: float(s.mean())
        r1 = bootstrap_metric(scores, labels, mean_metric, B=50, seed=88)
        r2 = bootstrap_metric(scores, labels, mean_metric, B=50, seed=88)
        binomial_se = np.sqrt(0.25 / 1000)  # 0.0158
        assert binomial_se / 2 < r1.stddev < binomial_se * 2, r1.stddev
        assert np.array_equal(r1.replicates, r2.replicates)


def test_criterion_9_pipeline_determinism(tmp_path):
    with announce(9, "sweep reruns are byte-identical"):
        def one(out):
            doc = {
                "dataset": {
                    "generator": "blobs",
                    "classes": 3,
                    "dims": 10,
                    "per_class": 300,
                    "spread": 0.9,
                    "seed": 20,
                    "clusters_per_class": 2,
                },
                "output_dir": str(out),
                "model": {"hidden_layers": [16]},
                "train": {
                    "learning_rate": 0.1,
                    "batch_size": 16,
                    "max_epochs": 40,
                    "early_stop_rounds": 10,
                    "val_metric": "accuracy",
                },
                "split": {"train_frac": 0.4, "val_frac": 0.2, "test_frac": 0.4, "seed": 7},
                "sweep": [0.1, 1.0],
                "seeds_per_rate": 3,
                "methods": ["MV", "CE", "RIE"],
                "rie_runs": 3,
                "eval_metrics": ["accuracy"],
            }
            sweep_path, _ = run_sweep(ExperimentConfig.from_dict(doc))
            return sweep_path.read_bytes()

        assert one(tmp_path / "first") == one(tmp_path / "second")
