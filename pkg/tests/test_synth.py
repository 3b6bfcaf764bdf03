import numpy as np
import pytest

from svfend.data import save_dataset
from svfend.synth import (SYNTH_CACHE_DIMS, generate_synthetic_dataset,
                          synthetic_cache_features, write_feature_caches)


def least_squares_accuracy(dataset, seed, separability, modality="frame") -> float:
    """Oracle: fit a least-squares separator on per-sample mean cache features."""
    rows, labels = [], []
    for s in dataset.samples:
        values = synthetic_cache_features(seed, s.sample_id, modality, s.label,
                                          separability)
        rows.append(values.mean(axis=0))
        labels.append(s.label)
    x = np.column_stack([np.asarray(rows), np.ones(len(rows))])
    y = 2.0 * np.asarray(labels) - 1.0
    w, *_ = np.linalg.lstsq(x, y, rcond=None)
    predictions = (x @ w > 0).astype(int)
    return float((predictions == np.asarray(labels)).mean())


class TestGenerate:
    def test_minimal_balanced(self):
        ds = generate_synthetic_dataset(2, 1, seed=7, separability=1.0)
        assert len(ds) == 2
        assert len(ds.events) == 2
        assert sorted(s.label for s in ds.samples) == [0, 1]

    def test_determinism_byte_identical(self, tmp_path):
        a = generate_synthetic_dataset(6, 3, seed=9, separability=0.4)
        b = generate_synthetic_dataset(6, 3, seed=9, separability=0.4)
        assert a == b
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(a, pa)
        save_dataset(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_different_seed_differs(self):
        a = generate_synthetic_dataset(4, 2, seed=1)
        b = generate_synthetic_dataset(4, 2, seed=2)
        assert a != b

    def test_publish_time_strictly_increasing(self):
        ds = generate_synthetic_dataset(8, 5, seed=3)
        times = [s.publish_time for s in ds.samples]
        assert all(t1 < t2 for t1, t2 in zip(times, times[1:]))

    def test_labels_balanced_per_event(self):
        ds = generate_synthetic_dataset(5, 4, seed=3)
        for ids in ds.events.values():
            labels = [s.label for s in ds.samples if s.sample_id in ids]
            assert labels.count(0) == labels.count(1)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_synthetic_dataset(1, 4, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic_dataset(4, 0, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic_dataset(4, 2, seed=0, separability=1.5)

    def test_all_samples_valid(self):
        from svfend.data import validate_sample
        ds = generate_synthetic_dataset(10, 4, seed=2, separability=0.7)
        for s in ds.samples:
            assert validate_sample(s) == []


class TestSeparability:
    def test_full_separability_linear_oracle(self):
        ds = generate_synthetic_dataset(10, 4, seed=3, separability=1.0)
        assert least_squares_accuracy(ds, 3, 1.0) == 1.0

    def test_zero_separability_plants_no_signal(self):
        # per-class means of the signal column coincide up to noise; at
        # separability 1 they differ by ~2.0
        for seed in range(3):
            ds = generate_synthetic_dataset(10, 4, seed=seed, separability=0.0)
            means = {0: [], 1: []}
            for s in ds.samples:
                values = synthetic_cache_features(seed, s.sample_id, "frame",
                                                  s.label, 0.0)
                means[s.label].append(values[:, 0].mean())
            gap = abs(np.mean(means[1]) - np.mean(means[0]))
            assert gap < 0.1

    def test_like_count_signal(self):
        ds = generate_synthetic_dataset(10, 4, seed=3, separability=1.0)
        fake = [s.like_count for s in ds.samples if s.label == 1]
        real = [s.like_count for s in ds.samples if s.label == 0]
        assert min(fake) > max(real)
        ds0 = generate_synthetic_dataset(10, 4, seed=3, separability=0.0)
        assert max(s.like_count for s in ds0.samples) <= 100


class TestCaches:
    def test_cache_content_deterministic(self):
        a = synthetic_cache_features(5, "x", "audio", 1, 0.8)
        b = synthetic_cache_features(5, "x", "audio", 1, 0.8)
        assert np.array_equal(a, b)
        assert a.shape[1] == SYNTH_CACHE_DIMS["audio"]

    def test_write_and_read_back(self, tmp_path):
        ds = generate_synthetic_dataset(3, 2, seed=4)
        n = write_feature_caches(ds, tmp_path, seed=4, separability=1.0)
        assert n == len(ds) * 3
        from svfend.encoders import read_feature_cache
        sample = ds.samples[0]
        values, manifest = read_feature_cache(tmp_path / sample.media_refs["frame"])
        expected = synthetic_cache_features(4, sample.sample_id, "frame",
                                            sample.label, 1.0)
        assert np.array_equal(values, expected)
        assert manifest["modality"] == "frame"
        assert manifest["shape"] == list(expected.shape)

    def test_doubt_comments_planted_at_rates(self):
        from svfend.analysis import doubt_ratio
        from svfend.baselines import default_lexicons
        ds = generate_synthetic_dataset(25, 4, seed=6, separability=0.0)
        patterns = [p.pattern for p in default_lexicons().doubt_patterns]
        ratios = doubt_ratio(ds, patterns)
        n_fake = sum(1 for s in ds.samples if s.label == 1)
        n_real = len(ds) - n_fake
        assert abs(ratios["fake"] - 0.18) <= 1.0 / n_fake
        assert abs(ratios["real"] - 0.04) <= 1.0 / n_real
