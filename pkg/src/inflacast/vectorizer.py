"""Unigram TF-IDF features for the baseline classifiers."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

FORMAT_TAG = "inflacast-tfidf"
FORMAT_VERSION = 1
_WORD_RE = re.compile(r"\w+")


@dataclass(frozen=True)
class VectorizerConfig:
    lowercase: bool = True
    min_token_len: int = 2
    max_vocab: int = 50_000


def tokenize(text: str, lowercase: bool = True, min_len: int = 2) -> list[str]:
    """Maximal runs of word characters, at least ``min_len`` long."""
    if lowercase:
        text = text.lower()
    return [t for t in _WORD_RE.findall(text) if len(t) >= min_len]


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    weights: np.ndarray
    dim: int

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.weights, self.weights)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.weights
        return out

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.weights.tolist()))


@dataclass
class Vocabulary:
    term_index: dict[str, int]
    df: np.ndarray
    n_docs: int

    def __len__(self) -> int:
        return len(self.term_index)

    @property
    def terms(self) -> list[str]:
        out = [""] * len(self.term_index)
        for t, i in self.term_index.items():
            out[i] = t
        return out


@dataclass
class TfidfModel:
    vocabulary: Vocabulary
    idf: np.ndarray
    config: VectorizerConfig = field(default_factory=VectorizerConfig)

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def tokens(self, text: str) -> list[str]:
        return tokenize(text, self.config.lowercase, self.config.min_token_len)

    def vector_from_tokens(self, tokens: Iterable[str]) -> SparseVector:
        counts = Counter(self.vocabulary.term_index[t] for t in tokens if t in self.vocabulary.term_index)
        if not counts:
            return SparseVector(np.zeros(0, dtype=np.int64), np.zeros(0), self.dim)
        idx = np.array(sorted(counts), dtype=np.int64)
        w = np.array([counts[i] for i in idx], dtype=float) * self.idf[idx]
        return SparseVector(idx, w / np.linalg.norm(w), self.dim)

    def transform(self, doc: str) -> SparseVector:
        return self.vector_from_tokens(self.tokens(doc))

    def transform_many(self, docs: Iterable[str]) -> sp.csr_matrix:
        return to_csr([self.transform(d) for d in docs], self.dim)


def fit(docs: Sequence[str], config: VectorizerConfig = VectorizerConfig()) -> TfidfModel:
    if len(docs) == 0:
        raise ValueError("cannot fit on an empty corpus")
    tf: Counter[str] = Counter()
    df: Counter[str] = Counter()
    for d in docs:
        toks = tokenize(d, config.lowercase, config.min_token_len)
        tf.update(toks)
        df.update(set(toks))
    if not tf:
        raise ValueError("corpus contains no tokens")
    kept = sorted(tf, key=lambda t: (-tf[t], t))[: config.max_vocab]
    terms = sorted(kept)
    vocab = Vocabulary(
        term_index={t: i for i, t in enumerate(terms)},
        df=np.array([df[t] for t in terms], dtype=np.int64),
        n_docs=len(docs),
    )
    idf = np.log((1.0 + vocab.n_docs) / (1.0 + vocab.df)) + 1.0
    return TfidfModel(vocab, idf, config)


def transform(m: TfidfModel, doc: str) -> SparseVector:
    return m.transform(doc)


def to_csr(vectors: Sequence[SparseVector], dim: int) -> sp.csr_matrix:
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        if v.dim != dim:
            raise ValueError(f"vector dimension {v.dim} != {dim}")
        indptr[i + 1] = indptr[i] + len(v.indices)
    if vectors:
        indices = np.concatenate([v.indices for v in vectors]).astype(np.int64)
        data = np.concatenate([v.weights for v in vectors]).astype(float)
    else:
        indices, data = np.zeros(0, dtype=np.int64), np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def save(m: TfidfModel, path: str | Path) -> None:
    c = m.config
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"#{FORMAT_TAG} v{FORMAT_VERSION} n_docs={m.vocabulary.n_docs} "
            f"lowercase={int(c.lowercase)} min_token_len={c.min_token_len} max_vocab={c.max_vocab}\n"
        )
        fh.write("term,index,df,idf\n")
        for t, i in sorted(m.vocabulary.term_index.items(), key=lambda kv: kv[1]):
            fh.write(f"{t},{i},{int(m.vocabulary.df[i])},{float(m.idf[i])!r}\n")


def load(path: str | Path) -> TfidfModel:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        parts = header.lstrip("#").split()
        if not parts or parts[0] != FORMAT_TAG:
            raise ValueError(f"{path}: not a tfidf model file")
        if parts[1] != f"v{FORMAT_VERSION}":
            raise ValueError(f"{path}: unsupported version {parts[1]}")
        meta = dict(p.split("=", 1) for p in parts[2:])
        if fh.readline().strip() != "term,index,df,idf":
            raise ValueError(f"{path}: bad column header")
        term_index, dfs, idfs = {}, [], []
        for line in fh:
            term, idx, df, idf = line.rstrip("\n").rsplit(",", 3)
            term_index[term] = int(idx)
            dfs.append(int(df))
            idfs.append(float(idf))
    config = VectorizerConfig(
        lowercase=bool(int(meta["lowercase"])),
        min_token_len=int(meta["min_token_len"]),
        max_vocab=int(meta["max_vocab"]),
    )
    vocab = Vocabulary(term_index, np.array(dfs, dtype=np.int64), int(meta["n_docs"]))
    return TfidfModel(vocab, np.array(idfs), config)


__all__ = [
    "SparseVector", "TfidfModel", "Vocabulary", "VectorizerConfig",
    "fit", "load", "save", "to_csr", "tokenize", "transform",
]
