"""Feature extraction front-end: pluggable encoders, capping/padding, aggregation.

Each sample is turned into six fixed-contract inputs: per-token text features,
per-frame audio features, per-keyframe visual features, an averaged motion
(clip) vector, a like-weighted comment vector, and a publisher-introduction
vector. Pretrained encoders are opaque plug-ins; deterministic hash stubs
stand in for them in tests and synthetic runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MODALITIES = ("text", "audio", "frame", "clip", "comment", "user")

TEXT_SEPARATOR_TOKEN = "[SEP]"


class EncodingError(ValueError):
    """Missing media, malformed cache, or a plugin/modality mismatch."""


@dataclass
class SequenceCaps:
    """Maximum sequence lengths applied when bundles are built."""

    text: int = 512
    audio: int = 50
    frames: int = 83
    clips: int = 83
    comments: int = 23


@dataclass
class FeatureSequence:
    """Length-capped feature matrix [T, D] with a validity-prefix mask.

    ``native_length`` records the pre-capping length; padded rows are all-zero.
    """

    values: np.ndarray
    mask: np.ndarray
    native_length: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.ndim != 2 or self.mask.shape != (self.values.shape[0],):
            raise EncodingError(
                f"bad sequence shapes: values {self.values.shape}, mask {self.mask.shape}"
            )
        nvalid = int(self.mask.sum())
        if not np.array_equal(self.mask, np.arange(len(self.mask)) < nvalid):
            raise EncodingError("mask is not a valid-prefix mask")

    @classmethod
    def from_values(cls, values: np.ndarray, native_length: int | None = None) -> "FeatureSequence":
        values = np.asarray(values, dtype=np.float32)
        n = values.shape[0]
        return cls(values, np.ones(n, dtype=bool), n if native_length is None else native_length)

    @classmethod
    def empty(cls, dim: int, length: int = 1) -> "FeatureSequence":
        return cls(np.zeros((length, dim), np.float32), np.zeros(length, dtype=bool), 0)

    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])


@dataclass
class ModalityBundle:
    """The six per-sample model inputs plus per-modality presence flags."""

    sample_id: str
    text: FeatureSequence
    audio: FeatureSequence
    frames: FeatureSequence
    clip_vec: np.ndarray
    comment_vec: np.ndarray
    user_vec: np.ndarray
    presence: dict[str, bool] = field(default_factory=dict)


def _hash_unit(key: str) -> float:
    """Map a key to a deterministic value in [-1, 1) via a 64-bit hash."""
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2**63 - 1.0


def _hash_int(key: str, modulo: int) -> int:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % modulo


@dataclass(frozen=True)
class StubSource:
    """Stand-in raw input for media whose features were never extracted.

    The key (normally the sample id) seeds the hash stub; ``length`` overrides
    the stub's derived native length.
    """

    key: str
    length: int | None = None


# Native-length range a stub picks from when the raw media is unavailable.
_STUB_LENGTH_RANGES = {"audio": (30, 70), "frame": (40, 100), "clip": (40, 100)}


class HashStubEncoder:
    """Deterministic drop-in for a pretrained encoder.

    Feature value at (step, dim) is a 64-bit content hash mapped to [-1, 1),
    so identical raw input always yields identical features and no model
    weights are needed.
    """

    deterministic = True

    def __init__(self, modality: str, output_dim: int, synthesize_missing: bool = True):
        if modality not in MODALITIES:
            raise EncodingError(f"unknown modality: {modality}")
        self.modality = modality
        self.output_dim = output_dim
        self.synthesize_missing = synthesize_missing
        self.separator_token = TEXT_SEPARATOR_TOKEN if modality == "text" else None

    def _rows(self, keys: list[str]) -> np.ndarray:
        out = np.empty((len(keys), self.output_dim), dtype=np.float32)
        for t, key in enumerate(keys):
            for d in range(self.output_dim):
                out[t, d] = _hash_unit(f"{self.modality}|{t}|{d}|{key}")
        return out

    def token_features(self, tokens: list[str]) -> np.ndarray:
        return self._rows(tokens)

    def key_features(self, key: str, length: int) -> np.ndarray:
        return self._rows([key] * length)

    def stub_length(self, key: str) -> int:
        lo, hi = _STUB_LENGTH_RANGES.get(self.modality, (1, 1))
        return lo + _hash_int(f"{self.modality}|len|{key}", hi - lo + 1)


def default_stub_plugins(dims: dict[str, int] | None = None) -> dict[str, HashStubEncoder]:
    """A full set of hash-stub plugins; small dims keep desk-scale runs fast."""
    base = {"text": 32, "audio": 32, "frame": 48, "clip": 48, "comment": 32, "user": 32}
    if dims:
        base.update(dims)
    return {m: HashStubEncoder(m, base[m]) for m in MODALITIES}


# Plugins are configured by name; pretrained-model wrappers register here.
ENCODER_REGISTRY: dict[str, type] = {"hash_stub": HashStubEncoder}


def build_plugins(spec: dict[str, dict]) -> dict:
    """Instantiate one plugin per modality from {modality: {plugin, dim}}."""
    plugins = {}
    for modality, entry in spec.items():
        name = entry.get("plugin", "hash_stub")
        factory = ENCODER_REGISTRY.get(name)
        if factory is None:
            raise EncodingError(
                f"unknown encoder plugin {name!r}; registered: "
                f"{', '.join(sorted(ENCODER_REGISTRY))}")
        plugins[modality] = factory(modality, int(entry["dim"]))
    return plugins


# --- feature cache files -----------------------------------------------------

def write_feature_cache(path: str | Path, values: np.ndarray, modality: str,
                        source_plugin: str = "synthetic") -> None:
    """Write little-endian f32 row-major data plus a JSON sidecar manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise EncodingError(f"cache values must be [T, D], got shape {values.shape}")
    path.write_bytes(values.tobytes())
    manifest = {
        "modality": modality,
        "shape": [int(values.shape[0]), int(values.shape[1])],
        "dtype": "f32le",
        "source_plugin": source_plugin,
    }
    Path(str(path) + ".json").write_text(json.dumps(manifest), encoding="utf-8")


def read_feature_cache(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    manifest_path = Path(str(path) + ".json")
    if not path.is_file() or not manifest_path.is_file():
        raise EncodingError(f"feature cache or manifest missing: {path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("dtype") != "f32le":
        raise EncodingError(f"unsupported cache dtype: {manifest.get('dtype')}")
    t, d = manifest["shape"]
    data = np.frombuffer(path.read_bytes(), dtype="<f4")
    if data.size != t * d:
        raise EncodingError(f"cache size {data.size} does not match manifest shape [{t}, {d}]")
    return data.reshape(t, d).astype(np.float32), manifest


# --- encoding operations -----------------------------------------------------

def tokenize(text: str) -> list[str]:
    return text.split()


def encode_text(title: str, transcript: str, plugin, max_tokens: int = 512) -> FeatureSequence:
    """Encode title ++ transcript as one token sequence, truncated to ``max_tokens``."""
    if plugin.modality != "text":
        raise EncodingError(f"text encoding requires a text plugin, got {plugin.modality}")
    tokens = tokenize(title)
    transcript_tokens = tokenize(transcript)
    if tokens and transcript_tokens and plugin.separator_token:
        tokens.append(plugin.separator_token)
    tokens.extend(transcript_tokens)
    if not tokens:
        return FeatureSequence.empty(plugin.output_dim)
    tokens = tokens[:max_tokens]
    return FeatureSequence.from_values(plugin.token_features(tokens))


def encode_modality(raw, plugin) -> FeatureSequence:
    """Encode one non-text modality.

    ``raw`` is a cache path or feature array for audio/frame/clip, a list of
    comment texts for comment, the introduction string for user, or a
    :class:`StubSource` when no media was extracted and the plugin may
    synthesize features.
    """
    modality = plugin.modality
    if modality == "text":
        raise EncodingError("use encode_text for the text modality")
    if modality == "comment":
        texts = list(raw)
        if not texts:
            return FeatureSequence.empty(plugin.output_dim, length=0)
        return FeatureSequence.from_values(plugin.token_features(texts))
    if modality == "user":
        introduction = str(raw)
        if not introduction.strip():
            return FeatureSequence.empty(plugin.output_dim)
        return FeatureSequence.from_values(plugin.key_features(introduction, 1))

    # audio / frame / clip
    if isinstance(raw, StubSource):
        if not plugin.synthesize_missing:
            raise EncodingError(f"missing media for modality {modality!r} and plugin has no stub fallback")
        length = raw.length or plugin.stub_length(raw.key)
        return FeatureSequence.from_values(plugin.key_features(raw.key, length))
    if isinstance(raw, (str, Path)):
        values, manifest = read_feature_cache(raw)
        if manifest.get("modality") != modality:
            raise EncodingError(
                f"cache modality {manifest.get('modality')!r} does not match plugin {modality!r}"
            )
        if values.shape[1] != plugin.output_dim:
            raise EncodingError(
                f"{modality} cache dim {values.shape[1]} does not match plugin dim {plugin.output_dim}"
            )
        return FeatureSequence.from_values(values)
    values = np.asarray(raw, dtype=np.float32)
    if values.ndim != 2 or values.shape[1] != plugin.output_dim:
        raise EncodingError(f"{modality} features must be [T, {plugin.output_dim}], got {values.shape}")
    return FeatureSequence.from_values(values)


def uniform_indices(native: int, target: int) -> list[int]:
    """Strictly increasing subsample indices: floor(i * native / target)."""
    return [i * native // target for i in range(target)]


def cap_and_pad(seq: FeatureSequence, max_len: int) -> FeatureSequence:
    """Uniform-sample down to ``max_len`` steps, or zero-pad up to it."""
    if max_len < 1:
        raise EncodingError("max_len must be >= 1")
    valid = seq.values[seq.mask]
    n = valid.shape[0]
    if n > max_len:
        valid = valid[uniform_indices(n, max_len)]
        n = max_len
    out = np.zeros((max_len, seq.dim), dtype=np.float32)
    out[:n] = valid
    mask = np.arange(max_len) < n
    return FeatureSequence(out, mask, seq.native_length)


def comment_weights(like_counts) -> np.ndarray:
    """Like-proportional comment weights (l_j + 1) / (sum(l) + k); they sum to 1."""
    likes = np.asarray(like_counts, dtype=np.float64)
    if likes.ndim != 1 or likes.size == 0:
        raise EncodingError("like_counts must be a non-empty vector")
    return (likes + 1.0) / (likes.sum() + likes.size)


def aggregate_comments(comment_vectors, like_counts, output_dim: int | None = None
                       ) -> tuple[np.ndarray, bool]:
    """Like-weighted sum of comment vectors; (zero vector, False) when there are none."""
    vectors = np.asarray(comment_vectors, dtype=np.float64)
    k = 0 if vectors.size == 0 else vectors.shape[0]
    if k == 0:
        if output_dim is None:
            raise EncodingError("output_dim required to aggregate zero comments")
        return np.zeros(output_dim, dtype=np.float32), False
    if vectors.ndim != 2:
        raise EncodingError("comment vectors must share one dimension")
    if len(like_counts) != k:
        raise EncodingError(f"{k} comment vectors but {len(like_counts)} like counts")
    weights = comment_weights(like_counts)
    return (weights[:, None] * vectors).sum(axis=0).astype(np.float32), True


def masked_mean(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Column mean over mask-true rows; an all-false mask yields zeros."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.zeros(values.shape[1], dtype=np.float32)
    return values[mask].mean(axis=0).astype(np.float32)


def aggregate_clips(seq: FeatureSequence) -> np.ndarray:
    """Average the motion-feature sequence over valid steps."""
    return masked_mean(seq.values, seq.mask)


def build_bundle(sample, plugins: dict, caps: SequenceCaps | None = None,
                 cache_root: str | Path | None = None) -> ModalityBundle:
    """Assemble the six model inputs for one sample.

    ``plugins`` must cover all six modalities (hash stubs permitted).
    ``cache_root`` resolves relative ``media_refs`` paths.
    """
    caps = caps or SequenceCaps()
    missing = set(MODALITIES) - set(plugins)
    if missing:
        raise EncodingError(f"plugins missing for modalities: {sorted(missing)}")
    presence: dict[str, bool] = {}

    text_seq = encode_text(sample.title, sample.transcript, plugins["text"], max_tokens=caps.text)
    presence["text"] = text_seq.valid_count > 0
    text_seq = cap_and_pad(text_seq, caps.text)

    def media_seq(modality: str, cap: int) -> FeatureSequence:
        plugin = plugins[modality]
        ref = sample.media_refs.get(modality)
        if ref is not None:
            path = Path(ref)
            if not path.is_absolute() and cache_root is not None:
                path = Path(cache_root) / path
            seq = encode_modality(path, plugin)
        else:
            seq = encode_modality(StubSource(sample.sample_id), plugin)
        presence[modality] = seq.valid_count > 0
        return cap_and_pad(seq, cap)

    audio_seq = media_seq("audio", caps.audio)
    frame_seq = media_seq("frame", caps.frames)
    clip_seq = media_seq("clip", caps.clips)
    clip_vec = aggregate_clips(clip_seq)

    comments = list(sample.comments)
    if len(comments) > caps.comments:
        comments = [comments[i] for i in uniform_indices(len(comments), caps.comments)]
    comment_plugin = plugins["comment"]
    if comments:
        vectors = encode_modality([c.text for c in comments], comment_plugin).values
        comment_vec, has_comments = aggregate_comments(
            vectors, [c.like_count for c in comments], comment_plugin.output_dim)
    else:
        comment_vec, has_comments = aggregate_comments(
            np.zeros((0, comment_plugin.output_dim)), [], comment_plugin.output_dim)
    presence["comment"] = has_comments

    user_seq = encode_modality(sample.publisher.introduction, plugins["user"])
    presence["user"] = user_seq.valid_count > 0
    user_vec = user_seq.values[0] if presence["user"] else np.zeros(
        plugins["user"].output_dim, dtype=np.float32)

    return ModalityBundle(
        sample_id=sample.sample_id,
        text=text_seq,
        audio=audio_seq,
        frames=frame_seq,
        clip_vec=clip_vec,
        comment_vec=comment_vec,
        user_vec=user_vec,
        presence=presence,
    )
