"""Deterministic synthetic datasets for desk-scale experiments.

``separability`` controls how much label signal is planted: at 1.0 a fixed
linear rule on the cached media features (and on the like-count metadata)
predicts labels perfectly; at 0.0 features carry no label information.
Everything is a pure function of the arguments, so repeated generation is
byte-identical.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .data import Comment, Dataset, NewsVideoSample, PublisherProfile
from .encoders import write_feature_cache

SYNTH_CACHE_DIMS = {"audio": 32, "frame": 48, "clip": 48}
_CACHE_LENGTH_RANGES = {"audio": (30, 70), "frame": (40, 100), "clip": (40, 100)}

# Fraction of fake/real videos that get one doubt-expressing comment planted.
DOUBT_RATE_FAKE = 0.18
DOUBT_RATE_REAL = 0.04

# Margin added to the first cache dimension at separability 1; noise stays in
# [-0.25, 0.25], so the planted classes never overlap.
_SIGNAL_SCALE = 1.0
_NOISE_SCALE = 0.25
# Metadata signals planted at separability 1: fake videos collect more likes,
# fake publishers upload fewer videos and follow more accounts.
_LIKE_SIGNAL = 10_000
_VIDEO_COUNT_SIGNAL = 300
_FOLLOW_SIGNAL = 5_000

_TITLE_WORDS = (
    "storm flood bridge market rescue festival river police school crowd "
    "video footage night traffic harbor mountain farm tower station signal"
).split()
_EMOTION_WORDS = ("amazing", "terrible", "scary", "lovely", "shocking", "sad")
_COMMENT_TEXTS = (
    "nice clip", "so sad", "where was this", "stay safe everyone",
    "incredible scenes", "hope all are ok", "saw this yesterday",
    "what a lovely view", "terrible news", "sharing this now",
)
_DOUBT_TEXTS = ("really ?", "fake !", "is this true ?", "looks fake to me")
_INTRODUCTIONS = (
    "", "local news watcher", "daily clips from the harbor",
    "official city updates", "", "weather and traffic reports",
)


def _derive_seed(*parts) -> int:
    key = "|".join(str(p) for p in parts)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def synthetic_cache_features(seed: int, sample_id: str, modality: str, label: int,
                             separability: float) -> np.ndarray:
    """Feature cache content for one sample/modality; pure in all arguments."""
    if modality not in SYNTH_CACHE_DIMS:
        raise ValueError(f"no synthetic cache for modality {modality!r}")
    rng = np.random.default_rng(_derive_seed(seed, sample_id, modality))
    lo, hi = _CACHE_LENGTH_RANGES[modality]
    length = int(rng.integers(lo, hi + 1))
    values = rng.uniform(-_NOISE_SCALE, _NOISE_SCALE,
                         size=(length, SYNTH_CACHE_DIMS[modality]))
    values[:, 0] += (2 * label - 1) * separability * _SIGNAL_SCALE
    return values.astype(np.float32)


def _make_text(rng: np.random.Generator, n_words: int) -> str:
    words = [str(rng.choice(_TITLE_WORDS)) for _ in range(n_words)]
    if rng.random() < 0.3:
        words.append(str(rng.choice(_EMOTION_WORDS)))
    text = " ".join(words)
    mark = rng.random()
    if mark < 0.2:
        text += " ?"
    elif mark < 0.4:
        text += " !"
    return text


def _make_comments(rng: np.random.Generator, publish_time: int) -> list[Comment]:
    if rng.random() < 0.3:
        return []
    k = int(rng.integers(1, 6))
    comments = []
    for _ in range(k):
        comments.append(Comment(
            text=str(rng.choice(_COMMENT_TEXTS)),
            like_count=int(rng.integers(0, 50)),
            reviewed_time=publish_time + int(rng.integers(60, 86_400)),
            reply_count=int(rng.integers(0, 4)),
        ))
    return comments


def generate_synthetic_dataset(n_events: int, samples_per_event: int, seed: int,
                               separability: float = 1.0) -> Dataset:
    """Build a balanced event-grouped dataset with a plantable label signal."""
    if n_events < 2 or samples_per_event < 1:
        raise ValueError("need n_events >= 2 and samples_per_event >= 1")
    if not 0.0 <= separability <= 1.0:
        raise ValueError("separability must be in [0, 1]")
    rng = np.random.default_rng(_derive_seed("dataset", seed, n_events,
                                             samples_per_event, separability))
    samples: list[NewsVideoSample] = []
    publish_time = 1_600_000_000
    for e in range(n_events):
        event_id = f"event-{e:04d}"
        event_cover = int(rng.integers(0, 2**64, dtype=np.uint64))
        for s in range(samples_per_event):
            label = (e + s) % 2
            sample_id = f"{event_id}-v{s:02d}"
            publish_time += int(rng.integers(1, 50_000))
            comments = _make_comments(rng, publish_time)
            base_likes = int(rng.integers(0, 101))
            like_count = base_likes + round(separability * _LIKE_SIGNAL) * label
            reuse_p = 0.6 if label == 1 else 0.15
            if rng.random() < reuse_p:
                cover_hash = event_cover
            else:
                cover_hash = int(rng.integers(0, 2**64, dtype=np.uint64))
            verified = bool(rng.random() < (0.2 if label == 1 else 0.7))
            publisher = PublisherProfile(
                verified=verified,
                introduction=str(rng.choice(_INTRODUCTIONS)),
                ip_location=None if rng.random() < 0.3 else f"region-{int(rng.integers(0, 8))}",
                fan_count=int(10 ** rng.uniform(1, 6)),
                follow_count=int(rng.integers(0, 2_000))
                + round(separability * _FOLLOW_SIGNAL) * label,
                total_like_count=int(rng.integers(0, 500_000)),
                video_count=int(rng.integers(1, 50))
                + round(separability * _VIDEO_COUNT_SIGNAL) * (1 - label),
            )
            quality = float(np.round(rng.uniform(2.0, 9.0), 3)) if rng.random() < 0.5 else None
            samples.append(NewsVideoSample(
                sample_id=sample_id,
                event_id=event_id,
                title=_make_text(rng, int(rng.integers(3, 8))),
                transcript="" if rng.random() < 0.2 else _make_text(rng, int(rng.integers(10, 40))),
                publish_time=publish_time,
                label=label,
                like_count=like_count,
                star_count=int(rng.integers(0, 300)),
                comment_count=len(comments),
                comments=tuple(comments),
                publisher=publisher,
                media_refs={m: f"caches/{sample_id}.{m}.f32" for m in SYNTH_CACHE_DIMS},
                quality_score=quality,
                cover_hash=cover_hash,
            ))

    samples = _plant_doubt_comments(samples, rng)
    return Dataset.from_samples(samples)


def _plant_doubt_comments(samples: list[NewsVideoSample],
                          rng: np.random.Generator) -> list[NewsVideoSample]:
    """Append one doubtful comment to an exact share of fake/real videos."""
    planted: dict[int, str] = {}
    for label, rate in ((1, DOUBT_RATE_FAKE), (0, DOUBT_RATE_REAL)):
        indices = [i for i, s in enumerate(samples) if s.label == label]
        count = round(rate * len(indices))
        order = rng.permutation(len(indices))
        for pos in order[:count]:
            planted[indices[pos]] = str(rng.choice(_DOUBT_TEXTS))
    out = []
    for i, sample in enumerate(samples):
        if i not in planted:
            out.append(sample)
            continue
        doubt = Comment(
            text=planted[i],
            like_count=int(rng.integers(0, 10)),
            reviewed_time=sample.publish_time + 3600,
            reply_count=0,
        )
        comments = sample.comments + (doubt,)
        out.append(NewsVideoSample(
            **{**sample.__dict__, "comments": comments, "comment_count": len(comments)}
        ))
    return out


def write_feature_caches(dataset: Dataset, root: str | Path, seed: int,
                         separability: float = 1.0) -> int:
    """Materialize every sample's media_refs under ``root``; returns file count."""
    root = Path(root)
    written = 0
    for sample in dataset.samples:
        for modality, ref in sample.media_refs.items():
            values = synthetic_cache_features(seed, sample.sample_id, modality,
                                              sample.label, separability)
            write_feature_cache(root / ref, values, modality)
            written += 1
    return written
