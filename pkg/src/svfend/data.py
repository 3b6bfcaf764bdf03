"""Dataset schema, validation, and line-delimited JSON IO for short news video corpora.

A dataset is a flat UTF-8 file with one JSON object per line. Media features
(audio/frame/clip tensors) are never stored inline; samples reference external
feature-cache files through ``media_refs``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

LABEL_REAL = 0
LABEL_FAKE = 1
MAX_COMMENTS = 100

# Top-level JSON keys allowed in a dataset record.
_SAMPLE_KEYS = {
    "sample_id", "event_id", "title", "transcript", "publish_time", "label",
    "like_count", "star_count", "comment_count", "comments", "publisher",
    "media_refs", "quality_score", "cover_hash",
}
_COMMENT_KEYS = {"text", "like_count", "reviewed_time", "reply_count"}
_PUBLISHER_KEYS = {
    "verified", "introduction", "ip_location", "fan_count", "follow_count",
    "total_like_count", "video_count",
}


class DatasetError(ValueError):
    """Unreadable file, malformed record, or invariant violation in strict mode."""


@dataclass(frozen=True)
class Comment:
    text: str
    like_count: int
    reviewed_time: int | None = None
    reply_count: int | None = None


@dataclass(frozen=True)
class PublisherProfile:
    verified: bool
    introduction: str = ""
    ip_location: str | None = None
    fan_count: int = 0
    follow_count: int = 0
    total_like_count: int = 0
    video_count: int = 0


@dataclass(frozen=True)
class NewsVideoSample:
    sample_id: str
    event_id: str
    title: str
    transcript: str
    publish_time: int
    label: int
    like_count: int
    star_count: int
    comment_count: int
    comments: tuple[Comment, ...]
    publisher: PublisherProfile
    media_refs: dict[str, str] = field(default_factory=dict)
    quality_score: float | None = None
    cover_hash: int | None = None


@dataclass(frozen=True)
class Dataset:
    """Immutable sample collection plus the derived event -> sample-id index."""

    samples: tuple[NewsVideoSample, ...]
    events: dict[str, tuple[str, ...]]
    skipped_records: int = field(default=0, compare=False)

    @classmethod
    def from_samples(
        cls, samples: list[NewsVideoSample] | tuple[NewsVideoSample, ...],
        skipped_records: int = 0,
    ) -> "Dataset":
        seen: set[str] = set()
        events: dict[str, list[str]] = {}
        for s in samples:
            if s.sample_id in seen:
                raise DatasetError(f"duplicate sample_id: {s.sample_id}")
            seen.add(s.sample_id)
            events.setdefault(s.event_id, []).append(s.sample_id)
        return cls(
            samples=tuple(samples),
            events={e: tuple(ids) for e, ids in events.items()},
            skipped_records=skipped_records,
        )

    def __len__(self) -> int:
        return len(self.samples)

    def by_id(self) -> dict[str, NewsVideoSample]:
        return {s.sample_id: s for s in self.samples}

    def subset(self, sample_ids) -> list[NewsVideoSample]:
        index = self.by_id()
        return [index[i] for i in sample_ids]


def validate_sample(sample: NewsVideoSample) -> list[str]:
    """Return all invariant violations for one sample; empty list means valid."""
    violations = []
    if not sample.sample_id:
        violations.append("sample_id is empty")
    if not sample.event_id:
        violations.append("event_id is empty")
    if sample.label not in (LABEL_REAL, LABEL_FAKE):
        violations.append("label not in {0,1}")
    if sample.publish_time <= 0:
        violations.append("publish_time not > 0")
    for name in ("like_count", "star_count", "comment_count"):
        if getattr(sample, name) < 0:
            violations.append(f"{name} < 0")
    if len(sample.comments) > MAX_COMMENTS:
        violations.append(f"comments exceed {MAX_COMMENTS}")
    for i, c in enumerate(sample.comments):
        if c.like_count < 0:
            violations.append(f"comments[{i}].like_count < 0")
        if c.reply_count is not None and c.reply_count < 0:
            violations.append(f"comments[{i}].reply_count < 0")
    pub = sample.publisher
    for name in ("fan_count", "follow_count", "total_like_count", "video_count"):
        if getattr(pub, name) < 0:
            violations.append(f"publisher.{name} < 0")
    return violations


def _require_keys(raw: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise DatasetError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(raw)
    if missing:
        raise DatasetError(f"{where}: missing keys {sorted(missing)}")


def sample_from_record(raw: dict) -> NewsVideoSample:
    """Build a sample from one parsed JSON record, checking the schema shape."""
    _require_keys(raw, _SAMPLE_KEYS, _SAMPLE_KEYS - {"quality_score", "cover_hash"}, "record")
    comments = []
    for j, c in enumerate(raw["comments"]):
        _require_keys(c, _COMMENT_KEYS, {"text", "like_count"}, f"comments[{j}]")
        comments.append(Comment(
            text=str(c["text"]),
            like_count=int(c["like_count"]),
            reviewed_time=None if c.get("reviewed_time") is None else int(c["reviewed_time"]),
            reply_count=None if c.get("reply_count") is None else int(c["reply_count"]),
        ))
    p = raw["publisher"]
    _require_keys(p, _PUBLISHER_KEYS, _PUBLISHER_KEYS - {"ip_location"}, "publisher")
    publisher = PublisherProfile(
        verified=bool(p["verified"]),
        introduction=str(p["introduction"]),
        ip_location=None if p.get("ip_location") is None else str(p["ip_location"]),
        fan_count=int(p["fan_count"]),
        follow_count=int(p["follow_count"]),
        total_like_count=int(p["total_like_count"]),
        video_count=int(p["video_count"]),
    )
    cover_hash = raw.get("cover_hash")
    if isinstance(cover_hash, str):
        cover_hash = int(cover_hash, 16)
    return NewsVideoSample(
        sample_id=str(raw["sample_id"]),
        event_id=str(raw["event_id"]),
        title=str(raw["title"]),
        transcript=str(raw["transcript"]),
        publish_time=int(raw["publish_time"]),
        label=int(raw["label"]),
        like_count=int(raw["like_count"]),
        star_count=int(raw["star_count"]),
        comment_count=int(raw["comment_count"]),
        comments=tuple(comments),
        publisher=publisher,
        media_refs=dict(raw["media_refs"]),
        quality_score=None if raw.get("quality_score") is None else float(raw["quality_score"]),
        cover_hash=None if cover_hash is None else int(cover_hash),
    )


def sample_to_record(sample: NewsVideoSample) -> dict:
    """Inverse of :func:`sample_from_record`; optional fields are omitted when None."""
    comments = []
    for c in sample.comments:
        rec = {"text": c.text, "like_count": c.like_count}
        if c.reviewed_time is not None:
            rec["reviewed_time"] = c.reviewed_time
        if c.reply_count is not None:
            rec["reply_count"] = c.reply_count
        comments.append(rec)
    pub = {
        "verified": sample.publisher.verified,
        "introduction": sample.publisher.introduction,
        "fan_count": sample.publisher.fan_count,
        "follow_count": sample.publisher.follow_count,
        "total_like_count": sample.publisher.total_like_count,
        "video_count": sample.publisher.video_count,
    }
    if sample.publisher.ip_location is not None:
        pub["ip_location"] = sample.publisher.ip_location
    record = {
        "sample_id": sample.sample_id,
        "event_id": sample.event_id,
        "title": sample.title,
        "transcript": sample.transcript,
        "publish_time": sample.publish_time,
        "label": sample.label,
        "like_count": sample.like_count,
        "star_count": sample.star_count,
        "comment_count": sample.comment_count,
        "comments": comments,
        "publisher": pub,
        "media_refs": dict(sample.media_refs),
    }
    if sample.quality_score is not None:
        record["quality_score"] = sample.quality_score
    if sample.cover_hash is not None:
        record["cover_hash"] = f"{sample.cover_hash:016x}"
    return record


def load_dataset(path: str | Path, strict: bool = True) -> Dataset:
    """Load a line-delimited dataset file.

    In strict mode any malformed line or invariant violation aborts with the
    line number; otherwise offending records are skipped and counted in
    ``Dataset.skipped_records``.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    samples: list[NewsVideoSample] = []
    seen: set[str] = set()
    skipped = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                sample = sample_from_record(raw)
                violations = validate_sample(sample)
                if violations:
                    raise DatasetError("; ".join(violations))
                if sample.sample_id in seen:
                    raise DatasetError(f"duplicate sample_id: {sample.sample_id}")
            except (ValueError, KeyError, TypeError) as exc:
                if strict:
                    raise DatasetError(f"{path}:{lineno}: {exc}") from exc
                skipped += 1
                logger.warning("skipping record at %s:%d: %s", path, lineno, exc)
                continue
            seen.add(sample.sample_id)
            samples.append(sample)
    return Dataset.from_samples(samples, skipped_records=skipped)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write one JSON object per line; key order is fixed so output is stable."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for sample in dataset.samples:
            fh.write(json.dumps(sample_to_record(sample), ensure_ascii=False))
            fh.write("\n")
