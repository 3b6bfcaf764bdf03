"""Exploratory corpus analyses: key-sentence extraction, perceptual-hash
deduplication, lexicon emotion profiles, doubtful-comment ratios, and
likes-vs-fans statistics."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.fft import dctn

from .baselines import word_tokens
from .data import Dataset

EMOTIONS = ("joy", "like", "anger", "sadness", "fear", "disgust", "surprise")

HASH_BITS = 64
_PHASH_RESIZE = 32
_PHASH_BLOCK = 8


class AnalysisError(ValueError):
    """Invalid pattern, empty image, or malformed analysis input."""


# --- key-sentence extraction ------------------------------------------------------

@dataclass
class ExtractionPattern:
    """A prioritized claim-extraction regex; ``group`` selects the captured claim."""

    pattern: str
    group: int = 1
    description: str = ""

    def __post_init__(self):
        try:
            self.compiled = re.compile(self.pattern)
        except re.error as exc:
            raise AnalysisError(f"invalid pattern {self.pattern!r}: {exc}") from exc
        if self.group > self.compiled.groups:
            raise AnalysisError(
                f"pattern {self.pattern!r} has no capture group {self.group}")


def load_patterns(path: str | Path) -> list[ExtractionPattern]:
    """One pattern per line; line order is priority; '#' lines are comments."""
    patterns = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        group = 1 if re.compile(line).groups >= 1 else 0
        patterns.append(ExtractionPattern(pattern=line, group=group))
    return patterns


def default_patterns() -> list[ExtractionPattern]:
    with resources.as_file(resources.files("svfend") / "patterns"
                           / "default_patterns.txt") as path:
        return load_patterns(path)


def extract_key_sentences(articles, patterns) -> list[tuple[int, str]]:
    """First matching pattern wins per article; non-matching articles are omitted."""
    results = []
    for idx, article in enumerate(articles):
        for pattern in patterns:
            match = pattern.compiled.search(article)
            if match:
                results.append((idx, match.group(pattern.group).strip()))
                break
    return results


# --- perceptual hashing -------------------------------------------------------------

def _resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = image.shape

    def axis_coords(n_out, n_in):
        coords = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
        return np.clip(coords, 0, n_in - 1)

    ys = axis_coords(out_h, h)
    xs = axis_coords(out_w, w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = image[np.ix_(y0, x0)] * (1 - wx) + image[np.ix_(y0, x1)] * wx
    bottom = image[np.ix_(y1, x0)] * (1 - wx) + image[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bottom * wy


def phash(image) -> int:
    """64-bit perceptual hash of a grayscale image.

    The image is resized to 32x32, transformed with a type-II DCT, and the
    top-left 8x8 low-frequency block is thresholded at the median of its 63 AC
    coefficients. The DC coefficient carries no bit, which makes the hash
    exactly invariant to constant brightness shifts.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise AnalysisError("phash needs a non-empty 2-D grayscale image")
    resized = _resize_bilinear(image, _PHASH_RESIZE, _PHASH_RESIZE)
    coeffs = dctn(resized, type=2, norm="ortho")
    block = coeffs[:_PHASH_BLOCK, :_PHASH_BLOCK].flatten()
    ac = block[1:]
    median = np.median(ac)
    value = 0
    for coeff in ac:
        value = (value << 1) | int(coeff > median)
    return value


def hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


def cluster_duplicates(hashes, threshold: int) -> list[list[int]]:
    """Single-linkage clusters under Hamming distance <= threshold (union-find)."""
    if not 0 <= threshold <= HASH_BITS:
        raise AnalysisError(f"threshold must be in [0, {HASH_BITS}]")
    hashes = list(hashes)
    parent = list(range(len(hashes)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(hashes)):
        for j in range(i + 1, len(hashes)):
            if hamming(hashes[i], hashes[j]) <= threshold:
                parent[find(j)] = find(i)
    groups: dict[int, list[int]] = {}
    for i in range(len(hashes)):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def duplication_rate(clusters, n_items: int | None = None) -> float:
    """1 - #clusters / #items: 0 when everything is unique."""
    n = n_items if n_items is not None else sum(len(c) for c in clusters)
    return 1.0 - len(clusters) / n if n else 0.0


def duplication_by_label(dataset: Dataset, threshold: int) -> dict[str, float]:
    """Per-class cover-image duplication rate; samples without a hash are skipped."""
    rates = {}
    for name, label in (("real", 0), ("fake", 1)):
        hashes = [s.cover_hash for s in dataset.samples
                  if s.label == label and s.cover_hash is not None]
        rates[name] = duplication_rate(cluster_duplicates(hashes, threshold), len(hashes))
    return rates


# --- lexicon emotion profile ----------------------------------------------------------

def load_emotion_lexicon(path: str | Path) -> dict[str, tuple[str, float]]:
    """TSV lines of word <TAB> emotion <TAB> intensity."""
    lexicon = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, emotion, intensity = line.split("\t")
        if emotion not in EMOTIONS:
            raise AnalysisError(f"unknown emotion type: {emotion}")
        lexicon[word.lower()] = (emotion, float(intensity))
    return lexicon


def default_emotion_lexicon() -> dict[str, tuple[str, float]]:
    with resources.as_file(resources.files("svfend") / "lexicons"
                           / "emotion_words.tsv") as path:
        return load_emotion_lexicon(path)


def emotion_profile(text: str, lexicon: dict[str, tuple[str, float]]) -> np.ndarray:
    """Per-emotion intensity sums over matched tokens, normalized by token count."""
    if not lexicon:
        raise AnalysisError("emotion lexicon is empty")
    tokens = word_tokens(text)
    profile = np.zeros(len(EMOTIONS), dtype=np.float64)
    if not tokens:
        return profile
    index = {e: i for i, e in enumerate(EMOTIONS)}
    for token in tokens:
        entry = lexicon.get(token)
        if entry:
            profile[index[entry[0]]] += entry[1]
    return profile / len(tokens)


def title_emotion_by_label(dataset: Dataset, lexicon) -> dict[str, np.ndarray]:
    """Mean title emotion profile per class."""
    out = {}
    for name, label in (("real", 0), ("fake", 1)):
        profiles = [emotion_profile(s.title, lexicon)
                    for s in dataset.samples if s.label == label]
        out[name] = np.mean(profiles, axis=0) if profiles else np.zeros(len(EMOTIONS))
    return out


# --- social-context statistics ----------------------------------------------------------

def doubt_ratio(dataset: Dataset, doubt_patterns) -> dict[str, float]:
    """Fraction of videos per class with at least one doubt-matching comment."""
    compiled = [p if isinstance(p, re.Pattern) else re.compile(p, re.IGNORECASE)
                for p in doubt_patterns]
    out = {}
    for name, label in (("fake", 1), ("real", 0)):
        videos = [s for s in dataset.samples if s.label == label]
        if not videos:
            out[name] = 0.0
            continue
        hits = sum(1 for s in videos
                   if any(p.search(c.text) for c in s.comments for p in compiled))
        out[name] = hits / len(videos)
    return out


@dataclass(frozen=True)
class FanBinStat:
    bin_index: int
    fan_low: float
    fan_high: float
    label: int
    count: int
    mean_like_count: float


def likes_vs_fans(dataset: Dataset, fan_bins) -> list[FanBinStat]:
    """Mean like count per (publisher-fan bin, label); empty bins have count 0."""
    boundaries = list(fan_bins)
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
        raise AnalysisError("fan_bins boundaries must be strictly increasing")
    edges = [-np.inf] + boundaries + [np.inf]
    stats = []
    for b in range(len(edges) - 1):
        for label in (0, 1):
            likes = [s.like_count for s in dataset.samples
                     if s.label == label and edges[b] <= s.publisher.fan_count < edges[b + 1]]
            stats.append(FanBinStat(
                bin_index=b,
                fan_low=float(edges[b]),
                fan_high=float(edges[b + 1]),
                label=label,
                count=len(likes),
                mean_like_count=float(np.mean(likes)) if likes else 0.0,
            ))
    return stats


def title_term_frequencies(dataset: Dataset) -> dict[str, Counter]:
    """Raw per-class term counts over titles (word-cloud source data)."""
    out = {"real": Counter(), "fake": Counter()}
    for s in dataset.samples:
        out["fake" if s.label == 1 else "real"].update(word_tokens(s.title))
    return out


def publish_hour_distribution(dataset: Dataset, tz_offset_hours: int = 8
                              ) -> dict[str, list[int]]:
    """Per-class counts of publishing hour-of-day.

    Timestamps are unix seconds UTC; the default offset matches the source
    platforms' timezone.
    """
    out = {"real": [0] * 24, "fake": [0] * 24}
    for s in dataset.samples:
        hour = ((s.publish_time + tz_offset_hours * 3600) // 3600) % 24
        out["fake" if s.label == 1 else "real"][int(hour)] += 1
    return out


def ip_location_tally(dataset: Dataset) -> list[tuple[str, int, int]]:
    """(location, label, count) rows over publisher IP locations; map rendering
    is out of scope, the tally is emitted as CSV by the CLI."""
    counts: Counter = Counter()
    for s in dataset.samples:
        location = s.publisher.ip_location
        if location:
            counts[(location, s.label)] += 1
    return sorted((loc, label, n) for (loc, label), n in counts.items())
