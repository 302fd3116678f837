"""Question text to TF-IDF features: encoding, preprocessing, vocabulary, weights."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .porter import stem
from .types import Question

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_MIN_TOKEN_LEN = 2


class Encoding(str, Enum):
    """How question and choice texts are concatenated into one document."""

    QUESTION_ONLY = "question_only"
    QUESTION_CORRECT = "question_correct"
    QUESTION_FULL = "question_full"


def _load_stopwords() -> frozenset[str]:
    text = resources.files("irtext").joinpath("data/stopwords_en.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


STOPWORDS = _load_stopwords()


def encode(question: Question, encoding: Encoding) -> str:
    """Build the raw input text for one question under the given encoding."""
    encoding = Encoding(encoding)
    if encoding is Encoding.QUESTION_ONLY:
        return question.text
    if encoding is Encoding.QUESTION_CORRECT:
        parts = [question.text] + [c.text for c in question.choices if c.is_correct]
    else:
        parts = [question.text] + [c.text for c in question.choices]
    return " ".join(parts)


def preprocess(raw: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop stop words, stem, drop short tokens."""
    tokens = _TOKEN_RE.findall(raw.lower())
    out = []
    for tok in tokens:
        if tok in STOPWORDS:
            continue
        stemmed = stem(tok)
        if len(stemmed) >= _MIN_TOKEN_LEN:
            out.append(stemmed)
    return out


@dataclass(frozen=True)
class Vocabulary:
    """Top-ranked stemmed tokens with corpus statistics for TF-IDF."""

    tokens: tuple[str, ...]
    index: dict[str, int]
    corpus_size: int
    doc_frequency: dict[str, int]

    def __len__(self) -> int:
        return len(self.tokens)

    def fingerprint(self) -> str:
        """Stable hash of the vocabulary contents, stored with trained models."""
        payload = json.dumps(
            {
                "n_d": self.corpus_size,
                "tokens": [[t, self.doc_frequency[t]] for t in self.tokens],
            },
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def build_vocabulary(corpus: Sequence[list[str]], n_w: int) -> Vocabulary:
    """Keep the n_w most frequent tokens by total occurrence count.

    Ties are broken lexicographically so the ranking is deterministic.
    """
    if len(corpus) == 0:
        raise ValueError("corpus must be non-empty")
    if n_w < 1:
        raise ValueError(f"n_w must be >= 1, got {n_w}")
    totals: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    for doc in corpus:
        totals.update(doc)
        doc_freq.update(set(doc))
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = tuple(tok for tok, _ in ranked[:n_w])
    return Vocabulary(
        tokens=kept,
        index={tok: i for i, tok in enumerate(kept)},
        corpus_size=len(corpus),
        doc_frequency={tok: doc_freq[tok] for tok in kept},
    )


def tfidf(tokens: Iterable[str], vocab: Vocabulary) -> np.ndarray:
    """TF-IDF weights: count(w,d) * (ln((N_d+1)/(count(w,C)+1)) + 1), unnormalized."""
    vec = np.zeros(len(vocab.tokens), dtype=np.float64)
    counts = Counter(tokens)
    for tok, count in counts.items():
        col = vocab.index.get(tok)
        if col is None:
            continue
        idf = math.log((vocab.corpus_size + 1) / (vocab.doc_frequency[tok] + 1)) + 1.0
        vec[col] = count * idf
    return vec


def featurize_questions(
    questions: Sequence[Question], encoding: Encoding, vocab: Vocabulary
) -> np.ndarray:
    """Feature matrix with one row per question, columns in vocabulary order."""
    rows = [tfidf(preprocess(encode(q, encoding)), vocab) for q in questions]
    if not rows:
        return np.zeros((0, len(vocab.tokens)), dtype=np.float64)
    return np.vstack(rows)


def build_vocabulary_for_questions(
    questions: Sequence[Question], encoding: Encoding, n_w: int
) -> Vocabulary:
    return build_vocabulary([preprocess(encode(q, encoding)) for q in questions], n_w)


def write_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    obj = {
        "n_d": vocab.corpus_size,
        "tokens": [{"t": t, "df": vocab.doc_frequency[t]} for t in vocab.tokens],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, ensure_ascii=False)
        f.write("\n")


def read_vocabulary(path: str | Path) -> Vocabulary:
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    tokens = tuple(entry["t"] for entry in obj["tokens"])
    return Vocabulary(
        tokens=tokens,
        index={tok: i for i, tok in enumerate(tokens)},
        corpus_size=int(obj["n_d"]),
        doc_frequency={entry["t"]: int(entry["df"]) for entry in obj["tokens"]},
    )


def write_feature_matrix(
    item_ids: Sequence[str], matrix: np.ndarray, vocab: Vocabulary, path: str | Path
) -> None:
    """CSV with item_id first, then one column per vocabulary token in rank order."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["item_id", *vocab.tokens])
        for item_id, row in zip(item_ids, matrix):
            writer.writerow([item_id, *[repr(float(v)) for v in row]])


def read_feature_matrix(path: str | Path) -> tuple[list[str], np.ndarray, list[str]]:
    """Returns (item_ids, matrix, token_columns)."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        tokens = header[1:]
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    matrix = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(tokens)))
    return ids, matrix, tokens
