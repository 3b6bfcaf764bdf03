import numpy as np
import pytest

from svfend.data import Comment
from svfend.encoders import (EncodingError, FeatureSequence, HashStubEncoder,
                             SequenceCaps, StubSource, aggregate_clips,
                             aggregate_comments, build_bundle, cap_and_pad,
                             comment_weights, encode_modality, encode_text,
                             masked_mean, read_feature_cache, uniform_indices,
                             write_feature_cache)

from test_data import make_sample


def brute_force_comment_aggregate(vectors, likes):
    """Scalar oracle for the like-weighted comment sum."""
    k = len(likes)
    total = sum(likes)
    out = np.zeros(len(vectors[0]))
    for j in range(k):
        weight = (likes[j] + 1) / (total + k)
        for d in range(len(vectors[j])):
            out[d] += weight * vectors[j][d]
    return out


class TestEncodeText:
    def test_shape_contract(self):
        plugin = HashStubEncoder("text", 4)
        seq = encode_text("a", "", plugin)
        assert seq.native_length >= 1
        assert seq.dim == 4

    def test_deterministic(self):
        plugin = HashStubEncoder("text", 8)
        a = encode_text("storm at the bridge", "water rising", plugin)
        b = encode_text("storm at the bridge", "water rising", plugin)
        assert np.array_equal(a.values, b.values)

    def test_truncates_to_512(self):
        plugin = HashStubEncoder("text", 3)
        transcript = " ".join(f"w{i}" for i in range(600))
        seq = encode_text("", transcript, plugin)
        assert seq.native_length == 512
        assert seq.values.shape == (512, 3)

    def test_both_empty(self):
        plugin = HashStubEncoder("text", 4)
        seq = encode_text("", "", plugin)
        assert seq.valid_count == 0
        assert not seq.values.any()

    def test_separator_inserted_between_parts(self):
        plugin = HashStubEncoder("text", 4)
        both = encode_text("a", "b", plugin)
        assert both.native_length == 3  # a, [SEP], b
        title_only = encode_text("a", "", plugin)
        assert title_only.native_length == 1


class TestCapAndPad:
    def test_pad_50_to_83(self):
        seq = FeatureSequence.from_values(np.ones((50, 2), np.float32))
        out = cap_and_pad(seq, 83)
        assert out.values.shape == (83, 2)
        assert out.mask[:50].all() and not out.mask[50:].any()
        assert not out.values[50:].any()

    def test_identity_at_cap(self):
        values = np.random.default_rng(0).normal(size=(83, 3)).astype(np.float32)
        out = cap_and_pad(FeatureSequence.from_values(values), 83)
        assert np.array_equal(out.values, values)
        assert out.mask.all()

    def test_uniform_sampling_100_to_50(self):
        values = np.arange(100, dtype=np.float32)[:, None]
        out = cap_and_pad(FeatureSequence.from_values(values), 50)
        assert out.values[:, 0].tolist() == [float(i) for i in range(0, 100, 2)]

    def test_index_formula_exhaustive(self):
        for native in range(1, 120):
            for target in (1, 5, 23, 50, 83):
                idx = uniform_indices(native, target)
                # oracle: evaluate the definition directly
                expected = [int(np.floor(i * native / target)) for i in range(target)]
                assert idx == expected
                if native >= target:
                    assert all(a < b for a, b in zip(idx, idx[1:]))
                    assert idx[-1] < native

    def test_output_length_always_max_len(self):
        rng = np.random.default_rng(1)
        for native in (1, 7, 49, 84, 200):
            seq = FeatureSequence.from_values(
                rng.normal(size=(native, 2)).astype(np.float32))
            for cap in (1, 23, 83):
                assert cap_and_pad(seq, cap).values.shape[0] == cap


class TestAggregateComments:
    def test_zero_likes_mean(self):
        vec, present = aggregate_comments([[1, 0], [0, 1]], [0, 0])
        assert present
        assert np.allclose(vec, [0.5, 0.5])

    def test_single_comment_identity(self):
        for likes in (0, 5, 10**6):
            vec, _ = aggregate_comments([[0.25, -2.0]], [likes])
            assert np.allclose(vec, [0.25, -2.0])

    def test_likes_3_1(self):
        vec, _ = aggregate_comments([[1, 0], [0, 1]], [3, 1])
        assert np.allclose(vec, [4 / 6, 2 / 6], atol=1e-7)

    def test_against_scalar_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            k = int(rng.integers(1, 24))
            d = int(rng.integers(1, 8))
            vectors = rng.normal(size=(k, d))
            likes = rng.integers(0, 10**6, size=k).tolist()
            expected = brute_force_comment_aggregate(vectors.tolist(), likes)
            got, present = aggregate_comments(vectors, likes)
            assert present
            assert np.allclose(got, expected, atol=1e-6)
            weights = comment_weights(likes)
            assert abs(weights.sum() - 1.0) < 1e-6
            assert (weights > 0).all()

    def test_no_comments(self):
        vec, present = aggregate_comments(np.zeros((0, 3)), [], output_dim=3)
        assert not present
        assert not vec.any()

    def test_length_mismatch(self):
        with pytest.raises(EncodingError):
            aggregate_comments([[1, 0]], [1, 2])


class TestAggregateClips:
    def test_arithmetic_mean(self):
        seq = FeatureSequence.from_values(np.array([[2, 0], [0, 2]], np.float32))
        assert np.allclose(aggregate_clips(seq), [1, 1])

    def test_padding_excluded(self):
        values = np.array([[3.0, -1.0], [0.0, 0.0]], np.float32)
        seq = FeatureSequence(values, np.array([True, False]), 1)
        assert np.allclose(aggregate_clips(seq), [3.0, -1.0])

    def test_against_column_mean_oracle(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=(5, 3)).astype(np.float32)
        seq = FeatureSequence.from_values(values)
        oracle = [sum(values[t][d] for t in range(5)) / 5 for d in range(3)]
        assert np.allclose(aggregate_clips(seq), oracle, atol=1e-6)

    def test_all_masked_zero(self):
        seq = FeatureSequence(np.zeros((3, 2), np.float32), np.zeros(3, bool), 0)
        assert not aggregate_clips(seq).any()
        assert not masked_mean(np.ones((3, 2)), np.zeros(3, bool)).any()


class TestCacheIO:
    def test_round_trip(self, tmp_path):
        values = np.random.default_rng(0).normal(size=(10, 4096)).astype(np.float32)
        path = tmp_path / "f.f32"
        write_feature_cache(path, values, "frame")
        loaded, manifest = read_feature_cache(path)
        assert np.array_equal(loaded, values)
        assert manifest == {"modality": "frame", "shape": [10, 4096],
                            "dtype": "f32le", "source_plugin": "synthetic"}

    def test_audio_native_length_preserved(self, tmp_path):
        values = np.random.default_rng(1).normal(size=(60, 128)).astype(np.float32)
        path = tmp_path / "a.f32"
        write_feature_cache(path, values, "audio")
        plugin = HashStubEncoder("audio", 128)
        seq = encode_modality(path, plugin)
        assert seq.native_length == 60
        capped = cap_and_pad(seq, 50)
        assert capped.native_length == 60
        assert capped.values.shape == (50, 128)

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "a.f32"
        write_feature_cache(path, np.zeros((4, 8), np.float32), "audio")
        with pytest.raises(EncodingError, match="dim"):
            encode_modality(path, HashStubEncoder("audio", 16))

    def test_modality_mismatch(self, tmp_path):
        path = tmp_path / "a.f32"
        write_feature_cache(path, np.zeros((4, 8), np.float32), "frame")
        with pytest.raises(EncodingError, match="modality"):
            encode_modality(path, HashStubEncoder("audio", 8))

    def test_missing_cache(self, tmp_path):
        with pytest.raises(EncodingError, match="missing"):
            read_feature_cache(tmp_path / "nope.f32")


class TestEncodeModality:
    def test_empty_introduction(self):
        seq = encode_modality("", HashStubEncoder("user", 4))
        assert seq.valid_count == 0
        assert not seq.values.any()

    def test_stub_fallback_deterministic(self):
        plugin = HashStubEncoder("audio", 8)
        a = encode_modality(StubSource("sid"), plugin)
        b = encode_modality(StubSource("sid"), plugin)
        assert np.array_equal(a.values, b.values)
        assert 30 <= a.native_length <= 70

    def test_no_fallback_errors(self):
        plugin = HashStubEncoder("frame", 8, synthesize_missing=False)
        with pytest.raises(EncodingError, match="frame"):
            encode_modality(StubSource("sid"), plugin)


class TestBuildBundle:
    def test_shapes_at_default_caps(self, stub_plugins):
        sample = make_sample()
        bundle = build_bundle(sample, stub_plugins, SequenceCaps())
        assert bundle.text.values.shape == (512, 32)
        assert bundle.audio.values.shape == (50, 32)
        assert bundle.frames.values.shape == (83, 48)
        assert bundle.clip_vec.shape == (48,)

    def test_zero_comments_absent(self, stub_plugins):
        sample = make_sample(comments=(), comment_count=0)
        bundle = build_bundle(sample, stub_plugins, SequenceCaps())
        assert not bundle.presence["comment"]
        assert not bundle.comment_vec.any()

    def test_30_comments_selects_23_by_formula(self, stub_plugins):
        comments = tuple(Comment(text=f"comment {i}", like_count=i) for i in range(30))
        sample = make_sample(comments=comments, comment_count=30)
        bundle = build_bundle(sample, stub_plugins, SequenceCaps())
        selected = [comments[i] for i in uniform_indices(30, 23)]
        vectors = stub_plugins["comment"].token_features([c.text for c in selected])
        expected, _ = aggregate_comments(vectors, [c.like_count for c in selected])
        assert np.allclose(bundle.comment_vec, expected, atol=1e-6)

    def test_reproducible(self, stub_plugins, synth_dataset, synth_dir):
        sample = synth_dataset.samples[0]
        a = build_bundle(sample, stub_plugins, SequenceCaps(), cache_root=synth_dir)
        b = build_bundle(sample, stub_plugins, SequenceCaps(), cache_root=synth_dir)
        assert np.array_equal(a.text.values, b.text.values)
        assert np.array_equal(a.frames.values, b.frames.values)
        assert np.array_equal(a.comment_vec, b.comment_vec)

    def test_empty_introduction_absent_user(self, stub_plugins):
        from svfend.data import PublisherProfile
        sample = make_sample(publisher=PublisherProfile(verified=False, introduction=""))
        bundle = build_bundle(sample, stub_plugins, SequenceCaps())
        assert not bundle.presence["user"]
        assert not bundle.user_vec.any()

    def test_missing_plugin(self, stub_plugins):
        partial = {k: v for k, v in stub_plugins.items() if k != "audio"}
        with pytest.raises(EncodingError, match="audio"):
            build_bundle(make_sample(), partial, SequenceCaps())


class TestFeatureSequenceInvariants:
    def test_mask_must_be_prefix(self):
        with pytest.raises(EncodingError):
            FeatureSequence(np.zeros((3, 2), np.float32),
                            np.array([True, False, True]), 2)

    def test_stub_values_in_unit_range(self):
        plugin = HashStubEncoder("frame", 16)
        values = plugin.key_features("k", 20)
        assert values.min() >= -1.0 and values.max() < 1.0


class TestPluginRegistry:
    def test_build_by_name(self):
        from svfend.encoders import build_plugins
        plugins = build_plugins({"text": {"plugin": "hash_stub", "dim": 8},
                                 "audio": {"dim": 16}})
        assert plugins["text"].output_dim == 8
        assert plugins["audio"].output_dim == 16
        assert plugins["audio"].deterministic

    def test_unknown_plugin_name(self):
        from svfend.encoders import build_plugins
        with pytest.raises(EncodingError, match="registered"):
            build_plugins({"text": {"plugin": "bert", "dim": 768}})
