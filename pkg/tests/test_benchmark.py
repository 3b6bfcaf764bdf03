import csv
import json

import numpy as np
import pytest

from svfend.benchmark import (BenchmarkContext, BenchmarkError, METHOD_REGISTRY,
                              MajorityMethod, make_method, run_benchmark,
                              write_report_csv, write_report_json)
from svfend.splits import SplitSpec
from svfend.training import TrainConfig


@pytest.fixture(scope="module")
def ctx(synth_dataset, synth_dir):
    return BenchmarkContext(
        synth_dataset,
        cache_root=synth_dir,
        train_config=TrainConfig(epochs=3, patience=2, learning_rate=1e-3,
                                 batch_size=16, seed=0),
        model_overrides={"hidden_dim": 16, "coattn_heads": 2, "fusion_heads": 2},
        seed=0,
    )


class TestRegistry:
    def test_all_registered_methods_instantiate(self):
        for name in METHOD_REGISTRY:
            method = make_method(name)
            assert method.name == name
            assert method.modality_tag

    def test_unknown_method_lists_registered(self):
        with pytest.raises(BenchmarkError, match="registered"):
            make_method("bogus")

    def test_modality_tags(self):
        assert make_method("svfend").modality_tag == "ALL"
        assert make_method("svm_meta").modality_tag == "M"
        assert make_method("textcnn").modality_tag == "T&Tr"
        assert make_method("att_frames").modality_tag == "F"
        assert make_method("att_clips").modality_tag == "V"
        assert make_method("att_audio").modality_tag == "A"
        assert make_method("att_comments").modality_tag == "C"


class TestMajority:
    def test_constant_prediction(self, ctx, synth_dataset):
        ids = [s.sample_id for s in synth_dataset.samples]
        method = MajorityMethod()
        method.fit(ctx, ids[:10])
        predictions = method.predict(ctx, ids)
        assert len(set(predictions.tolist())) == 1

    def test_balanced_data_near_half(self, ctx, synth_dataset):
        ids = [s.sample_id for s in synth_dataset.samples]
        method = MajorityMethod()
        method.fit(ctx, ids)
        accuracy = (method.predict(ctx, ids) == ctx.labels(ids)).mean()
        assert abs(accuracy - 0.5) <= 0.1


class TestRunBenchmark:
    def test_cardinality_five_folds(self, ctx, synth_dataset):
        report = run_benchmark(["majority"], synth_dataset,
                               SplitSpec(kind="event_five_fold", seed=0), ctx)
        method = report.methods[0]
        assert len(method.folds) == 5
        assert not method.errors
        aggregate = method.aggregate()
        assert set(aggregate) == {"accuracy", "macro_precision", "macro_recall",
                                  "macro_f1"}

    def test_temporal_single_row(self, ctx, synth_dataset):
        report = run_benchmark(["majority", "svm_meta"], synth_dataset,
                               SplitSpec(kind="temporal"), ctx)
        for method in report.methods:
            assert [name for name, _ in method.folds] == ["test"]

    def test_svm_meta_perfect_on_separable(self, ctx, synth_dataset):
        report = run_benchmark(["svm_meta"], synth_dataset,
                               SplitSpec(kind="event_five_fold", seed=0), ctx)
        mean, _ = report.methods[0].aggregate()["accuracy"]
        assert mean == 1.0

    def test_method_failure_recorded_run_continues(self, ctx, synth_dataset):
        class Exploding(MajorityMethod):
            name = "exploding"
            def fit(self, *a, **k):
                raise RuntimeError("boom")

        METHOD_REGISTRY["exploding"] = Exploding
        try:
            report = run_benchmark(["exploding", "majority"], synth_dataset,
                                   SplitSpec(kind="event_five_fold", seed=0), ctx)
        finally:
            del METHOD_REGISTRY["exploding"]
        assert report.has_errors
        assert len(report.methods[0].errors) == 5
        assert not report.methods[1].errors
        assert len(report.methods[1].folds) == 5

    def test_aggregate_recomputable_from_folds(self, ctx, synth_dataset):
        report = run_benchmark(["svm_meta"], synth_dataset,
                               SplitSpec(kind="event_five_fold", seed=1), ctx)
        method = report.methods[0]
        values = [m.accuracy for _, m in method.folds]
        mean, std = method.aggregate()["accuracy"]
        assert mean == pytest.approx(np.mean(values))
        assert std == pytest.approx(np.std(values, ddof=1))


class TestNeuralMethods:
    def test_textcnn_runs(self, ctx, synth_dataset):
        report = run_benchmark(["textcnn"], synth_dataset,
                               SplitSpec(kind="event_five_fold", seed=0), ctx)
        assert not report.methods[0].errors
        assert len(report.methods[0].folds) == 5

    def test_att_comments_handles_missing_comments(self, ctx, synth_dataset):
        # ~30% of synthetic videos have no comments; the method must still
        # produce aligned predictions for every test sample
        report = run_benchmark(["att_comments"], synth_dataset,
                               SplitSpec(kind="event_five_fold", seed=0), ctx)
        assert not report.methods[0].errors

    def test_svfend_learns_separable_data(self, ctx, synth_dataset):
        config = TrainConfig(epochs=25, patience=25, learning_rate=2e-3,
                             batch_size=8, seed=0)
        local = BenchmarkContext(
            synth_dataset, cache_root=ctx.cache_root, train_config=config,
            model_overrides={"hidden_dim": 16, "coattn_heads": 2,
                             "fusion_heads": 2}, seed=0)
        report = run_benchmark(["svfend", "majority"], synth_dataset,
                               SplitSpec(kind="event_five_fold", seed=0), local)
        svfend_acc = report.methods[0].aggregate()["accuracy"][0]
        majority_acc = report.methods[1].aggregate()["accuracy"][0]
        assert not report.methods[0].errors
        assert svfend_acc > majority_acc


class TestReportFiles:
    def test_csv_structure(self, ctx, synth_dataset, tmp_path):
        report = run_benchmark(["majority", "svm_meta"], synth_dataset,
                               SplitSpec(kind="event_five_fold", seed=0), ctx)
        path = tmp_path / "r.csv"
        write_report_csv(report, path)
        rows = list(csv.DictReader(path.open()))
        assert len(rows) == 2 * 7  # 5 folds + mean + std per method
        folds = [r["fold"] for r in rows if r["method"] == "majority"]
        assert folds == ["0", "1", "2", "3", "4", "mean", "std"]
        for row in rows:
            assert 0.0 <= float(row["accuracy"]) <= 1.0

    def test_temporal_csv_has_no_std(self, ctx, synth_dataset, tmp_path):
        report = run_benchmark(["majority"], synth_dataset,
                               SplitSpec(kind="temporal"), ctx)
        path = tmp_path / "t.csv"
        write_report_csv(report, path)
        rows = list(csv.DictReader(path.open()))
        assert [r["fold"] for r in rows] == ["test"]

    def test_json_twin_carries_provenance(self, ctx, synth_dataset, tmp_path):
        report = run_benchmark(["majority"], synth_dataset,
                               SplitSpec(kind="event_five_fold", seed=3), ctx)
        path = tmp_path / "r.json"
        write_report_json(report, path)
        payload = json.loads(path.read_text())
        assert payload["provenance"]["split"] == {"kind": "event_five_fold", "seed": 3}
        assert payload["provenance"]["train_config"]["epochs"] == 3
        assert payload["methods"][0]["name"] == "majority"
        assert set(payload["methods"][0]["folds"]) == {"0", "1", "2", "3", "4"}
