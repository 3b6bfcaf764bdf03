"""Single-modality baselines: hand-crafted features + linear SVM, Text-CNN,
and attention-pooling classifiers over feature sequences."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import torch
from sklearn.svm import LinearSVC
from torch import nn

from .data import NewsVideoSample

_WORD_RE = re.compile(r"[\w']+", re.UNICODE)

NGRAM_BUCKETS = 256
FEATURE_GROUPS = ("metadata", "text", "comment")


class BaselineError(ValueError):
    """Bad inputs to a baseline: unfitted vocabulary, empty lexicon, shape errors."""


def word_tokens(text: str) -> list[str]:
    return [t.lower() for t in _WORD_RE.findall(text)]


# --- lexicons -----------------------------------------------------------------

@dataclass(frozen=True)
class LexiconSet:
    positive: frozenset
    negative: frozenset
    clickbait: tuple
    modal_particles: frozenset
    first_person: frozenset
    third_person: frozenset
    personal_pronouns: frozenset
    doubt_patterns: tuple
    swear_words: frozenset
    psycho_categories: dict


def read_lexicon_lines(path: str | Path) -> list[str]:
    """One entry per line, '#' starts a comment, blank lines ignored."""
    lines = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        entry = raw.split("#", 1)[0].strip()
        if entry:
            lines.append(entry)
    return lines


def load_lexicons(directory: str | Path) -> LexiconSet:
    directory = Path(directory)

    def words(name):
        return frozenset(w.lower() for w in read_lexicon_lines(directory / name))

    categories: dict[str, set] = {}
    for line in read_lexicon_lines(directory / "psycho_categories.tsv"):
        category, word = line.split("\t")
        categories.setdefault(category, set()).add(word.lower())
    return LexiconSet(
        positive=words("positive.txt"),
        negative=words("negative.txt"),
        clickbait=tuple(p.lower() for p in read_lexicon_lines(directory / "clickbait.txt")),
        modal_particles=words("modal_particles.txt"),
        first_person=words("first_person.txt"),
        third_person=words("third_person.txt"),
        personal_pronouns=words("personal_pronouns.txt"),
        doubt_patterns=tuple(re.compile(p, re.IGNORECASE)
                             for p in read_lexicon_lines(directory / "doubt_patterns.txt")),
        swear_words=words("swear_words.txt"),
        psycho_categories={k: frozenset(v) for k, v in sorted(categories.items())},
    )


def default_lexicons() -> LexiconSet:
    with resources.as_file(resources.files("svfend") / "lexicons") as path:
        return load_lexicons(path)


# --- tf-idf vocabulary ---------------------------------------------------------

class TfidfVocab:
    """Tf-idf vocabulary fitted on the training split only.

    idf = ln((1 + n_docs) / (1 + df)) + 1; rows are L2-normalized. Terms below
    ``min_df`` document frequency are dropped.
    """

    def __init__(self, min_df: int = 5):
        self.min_df = min_df
        self.vocabulary: dict[str, int] = {}
        self.doc_freq: dict[str, int] = {}
        self.n_docs = 0
        self.fitted = False

    def fit(self, documents) -> "TfidfVocab":
        df: dict[str, int] = {}
        self.n_docs = 0
        for doc in documents:
            self.n_docs += 1
            for term in set(word_tokens(doc)):
                df[term] = df.get(term, 0) + 1
        kept = sorted(t for t, c in df.items() if c >= self.min_df)
        self.vocabulary = {t: i for i, t in enumerate(kept)}
        self.doc_freq = {t: df[t] for t in kept}
        self.fitted = True
        return self

    @property
    def size(self) -> int:
        return len(self.vocabulary)

    def _idf(self, term: str) -> float:
        return math.log((1 + self.n_docs) / (1 + self.doc_freq[term])) + 1.0

    def transform_one(self, text: str) -> np.ndarray:
        if not self.fitted:
            raise BaselineError("tf-idf vocabulary not fitted")
        row = np.zeros(self.size, dtype=np.float64)
        for term in word_tokens(text):
            idx = self.vocabulary.get(term)
            if idx is not None:
                row[idx] += 1.0
        for term, idx in self.vocabulary.items():
            if row[idx]:
                row[idx] *= self._idf(term)
        norm = np.linalg.norm(row)
        return row / norm if norm else row

    def to_dict(self) -> dict:
        return {
            "min_df": self.min_df,
            "n_docs": self.n_docs,
            "terms": {t: {"index": i, "df": self.doc_freq[t]}
                      for t, i in self.vocabulary.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TfidfVocab":
        vocab = cls(min_df=data["min_df"])
        vocab.n_docs = data["n_docs"]
        vocab.vocabulary = {t: v["index"] for t, v in data["terms"].items()}
        vocab.doc_freq = {t: v["df"] for t, v in data["terms"].items()}
        vocab.fitted = True
        return vocab

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TfidfVocab":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- hand-crafted features ------------------------------------------------------

def _sentiment_polarity(tokens, lexicons) -> tuple[int, int, float]:
    pos = sum(1 for t in tokens if t in lexicons.positive)
    neg = sum(1 for t in tokens if t in lexicons.negative)
    return pos, neg, (pos - neg) / (pos + neg + 1)


def _char_ngram_buckets(text: str) -> np.ndarray:
    """Character bigram + trigram counts hashed into a fixed bucket block."""
    counts = np.zeros(NGRAM_BUCKETS, dtype=np.float64)
    squashed = text.lower()
    for n in (2, 3):
        for i in range(len(squashed) - n + 1):
            gram = squashed[i:i + n]
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=4).digest()
            counts[int.from_bytes(digest, "little") % NGRAM_BUCKETS] += 1.0
    return counts


def _metadata_features(sample: NewsVideoSample) -> list[tuple[str, float]]:
    pub = sample.publisher
    return [
        ("meta_comment_count", float(sample.comment_count)),
        ("meta_like_count", float(sample.like_count)),
        # no media duration in the schema; kept as a constant placeholder column
        ("meta_duration_seconds", 0.0),
        ("meta_publisher_video_count", float(pub.video_count)),
        ("meta_follower_following_ratio", (pub.fan_count + 1) / (pub.follow_count + 1)),
    ]


def _text_stats(text: str, lexicons: LexiconSet, prefix: str) -> list[tuple[str, float]]:
    tokens = word_tokens(text)
    pos, neg, polarity = _sentiment_polarity(tokens, lexicons)
    lowered = text.lower()
    q = text.count("?") + text.count("？")
    e = text.count("!") + text.count("！")
    return [
        (f"{prefix}_length", float(len(text))),
        (f"{prefix}_word_count", float(len(tokens))),
        (f"{prefix}_has_question", float(q > 0)),
        (f"{prefix}_has_exclamation", float(e > 0)),
        (f"{prefix}_question_count", float(q)),
        (f"{prefix}_exclamation_count", float(e)),
        (f"{prefix}_has_first_person", float(any(t in lexicons.first_person for t in tokens))),
        (f"{prefix}_has_third_person", float(any(t in lexicons.third_person for t in tokens))),
        (f"{prefix}_positive_count", float(pos)),
        (f"{prefix}_negative_count", float(neg)),
        (f"{prefix}_has_colon", float(":" in text or "：" in text)),
        (f"{prefix}_has_clickbait", float(any(p in lowered for p in lexicons.clickbait))),
        (f"{prefix}_sentiment_polarity", polarity),
        (f"{prefix}_modal_particle_count",
         float(sum(1 for t in tokens if t in lexicons.modal_particles))),
        (f"{prefix}_personal_pronoun_count",
         float(sum(1 for t in tokens if t in lexicons.personal_pronouns))),
    ]


def _text_features(sample, lexicons, vocab: TfidfVocab | None) -> list[tuple[str, float]]:
    full = sample.title if not sample.transcript else f"{sample.title} {sample.transcript}"
    features = _text_stats(full, lexicons, "text")
    if vocab is None:
        raise BaselineError("tf-idf vocabulary not fitted (text group)")
    tfidf = vocab.transform_one(full)
    features.extend((f"text_tfidf_{i}", float(v)) for i, v in enumerate(tfidf))
    ngrams = _char_ngram_buckets(full)
    features.extend((f"text_ngram_{i}", float(v)) for i, v in enumerate(ngrams))
    tokens = word_tokens(full)
    for category, words in lexicons.psycho_categories.items():
        features.append((f"text_psycho_{category}",
                         float(sum(1 for t in tokens if t in words))))
    return features


def comment_fakeness_ratio(comments, doubt_patterns) -> float:
    if not comments:
        return 0.0
    hits = sum(1 for c in comments if any(p.search(c.text) for p in doubt_patterns))
    return hits / len(comments)


def _comment_features(sample, lexicons, vocab: TfidfVocab | None) -> list[tuple[str, float]]:
    comments = list(sample.comments)
    if vocab is None:
        raise BaselineError("tf-idf vocabulary not fitted (comment group)")
    features: list[tuple[str, float]] = [
        ("comment_present", float(bool(comments))),
        ("comment_fakeness_ratio", comment_fakeness_ratio(comments, lexicons.doubt_patterns)),
    ]
    if comments:
        swear = sum(1 for c in comments
                    if any(t in lexicons.swear_words for t in word_tokens(c.text)))
        conversation = sum(1 for c in comments if (c.reply_count or 0) >= 1)
        features.append(("comment_inappropriateness_ratio", swear / len(comments)))
        features.append(("comment_conversation_ratio", conversation / len(comments)))
    else:
        features.append(("comment_inappropriateness_ratio", 0.0))
        features.append(("comment_conversation_ratio", 0.0))
    top3 = sorted(range(len(comments)), key=lambda i: (-comments[i].like_count, i))[:3]
    for rank in range(3):
        if rank < len(top3):
            c = comments[top3[rank]]
            tokens = word_tokens(c.text)
            _, _, polarity = _sentiment_polarity(tokens, lexicons)
            modal = sum(1 for t in tokens if t in lexicons.modal_particles)
            pronoun = sum(1 for t in tokens if t in lexicons.personal_pronouns)
            length = float(len(c.text))
        else:
            polarity = modal = pronoun = length = 0.0
        features.extend([
            (f"comment_top{rank}_polarity", float(polarity)),
            (f"comment_top{rank}_modal_count", float(modal)),
            (f"comment_top{rank}_pronoun_count", float(pronoun)),
            (f"comment_top{rank}_length", length),
        ])
    joined = " ".join(c.text for c in comments)
    tfidf = vocab.transform_one(joined) if comments else np.zeros(vocab.size)
    features.extend((f"comment_tfidf_{i}", float(v)) for i, v in enumerate(tfidf))
    return features


def extract_handcrafted(sample: NewsVideoSample, groups, lexicons: LexiconSet,
                        text_vocab: TfidfVocab | None = None,
                        comment_vocab: TfidfVocab | None = None,
                        ) -> tuple[tuple[str, ...], np.ndarray]:
    """Named feature vector for the requested groups, in a stable order."""
    unknown = set(groups) - set(FEATURE_GROUPS)
    if unknown:
        raise BaselineError(f"unknown feature groups: {sorted(unknown)}")
    features: list[tuple[str, float]] = []
    if "metadata" in groups:
        features.extend(_metadata_features(sample))
    if "text" in groups:
        features.extend(_text_features(sample, lexicons, text_vocab))
    if "comment" in groups:
        features.extend(_comment_features(sample, lexicons, comment_vocab))
    names = tuple(n for n, _ in features)
    return names, np.array([v for _, v in features], dtype=np.float64)


def fit_group_vocabs(samples, groups, min_df: int = 5
                     ) -> tuple[TfidfVocab | None, TfidfVocab | None]:
    """Fit the text/comment tf-idf vocabularies on training samples only."""
    text_vocab = comment_vocab = None
    if "text" in groups:
        docs = [f"{s.title} {s.transcript}" for s in samples]
        text_vocab = TfidfVocab(min_df=min_df).fit(docs)
    if "comment" in groups:
        docs = [" ".join(c.text for c in s.comments) for s in samples]
        comment_vocab = TfidfVocab(min_df=min_df).fit(docs)
    return text_vocab, comment_vocab


def handcrafted_matrix(samples, groups, lexicons, text_vocab=None, comment_vocab=None
                       ) -> tuple[tuple[str, ...], np.ndarray]:
    rows = []
    names: tuple[str, ...] = ()
    for sample in samples:
        names, row = extract_handcrafted(sample, groups, lexicons, text_vocab, comment_vocab)
        rows.append(row)
    return names, np.vstack(rows)


# --- linear SVM adapter ----------------------------------------------------------

@dataclass
class LinearSvmModel:
    """LinearSVC behind per-column L2 normalization fitted on the training data."""

    column_norms: np.ndarray
    clf: LinearSVC

    def normalize(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) / self.column_norms

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.clf.predict(self.normalize(features)).astype(int)


def train_svm(features: np.ndarray, labels, seed: int = 0) -> LinearSvmModel:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if len(set(labels.tolist())) < 2:
        raise BaselineError("training labels contain a single class")
    norms = np.sqrt((features ** 2).sum(axis=0))
    norms[norms == 0.0] = 1.0
    clf = LinearSVC(random_state=seed, max_iter=20_000)
    clf.fit(features / norms, labels)
    return LinearSvmModel(column_norms=norms, clf=clf)


# --- neural baselines --------------------------------------------------------------

class TextCNN(nn.Module):
    """Convolutional text classifier: parallel filter banks, masked max-over-time."""

    def __init__(self, input_dim: int, widths=(3, 4, 5), kernels_per_width: int = 14,
                 classes: int = 2):
        super().__init__()
        self.widths = tuple(widths)
        self.convs = nn.ModuleList(
            nn.Conv1d(input_dim, kernels_per_width, w) for w in self.widths)
        self.fc = nn.Linear(kernels_per_width * len(self.widths), classes)

    def forward(self, values: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if values.shape[1] < max(self.widths):
            raise BaselineError(
                f"sequence length {values.shape[1]} shorter than widest filter {max(self.widths)}")
        x = values.transpose(1, 2)
        pooled = []
        for conv, width in zip(self.convs, self.widths):
            z = torch.relu(conv(x))
            window_valid = mask.unfold(1, width, 1).all(dim=-1)
            z = z.masked_fill(~window_valid[:, None, :], float("-inf"))
            part = z.max(dim=-1).values
            has_window = window_valid.any(dim=-1)
            part = torch.where(has_window[:, None], part, torch.zeros_like(part))
            pooled.append(part)
        return torch.softmax(self.fc(torch.cat(pooled, dim=1)), dim=-1)


class AttentionPoolClassifier(nn.Module):
    """Score each step with a learned vector, softmax over valid steps, classify."""

    def __init__(self, input_dim: int, classes: int = 2):
        super().__init__()
        self.score = nn.Parameter(torch.randn(input_dim) / math.sqrt(input_dim))
        self.fc = nn.Linear(input_dim, classes)

    def attention_weights(self, values: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if not bool(mask.any(dim=1).all()):
            raise BaselineError("attention pooling needs at least one valid step per sequence")
        scores = values @ self.score
        scores = scores.masked_fill(~mask, -1e9)
        return torch.softmax(scores, dim=-1)

    def forward(self, values: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        weights = self.attention_weights(values, mask)
        pooled = (weights[..., None] * values).sum(dim=1)
        return torch.softmax(self.fc(pooled), dim=-1)
