"""Character-level byte-pair-style subword tokenizer.

Text is lowercased and whitespace-collapsed, then split on spaces; each word
is prefixed with ``WORD_START`` so decoding can restore the spaces. Merges
are learned greedily: the most frequent adjacent pair wins, ties go to the
lexicographically smallest pair.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIALS = (PAD, UNK, CLS, SEP)
PAD_ID, UNK_ID, CLS_ID, SEP_ID = range(4)
WORD_START = "▁"

MAGIC = "INFLACAST-TOKENIZER"
VERSION = 1


class TokenizerError(ValueError):
    pass


def normalize(text: str) -> str:
    return " ".join(text.lower().split())


def _words(text: str) -> list[str]:
    return [WORD_START + w for w in normalize(text).split(" ") if w]


@dataclass
class SubwordTokenizer:
    merges: list[tuple[str, str]]
    vocab: dict[str, int]
    _ranks: dict[tuple[str, str], int] = field(init=False, repr=False)
    _cache: dict[str, list[str]] = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self.inverse = {i: t for t, i in self.vocab.items()}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def split_word(self, word: str) -> list[str]:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        parts = list(word)
        while len(parts) > 1:
            ranked = [(self._ranks.get(p, len(self._ranks)), i) for i, p in enumerate(zip(parts, parts[1:]))]
            rank, i = min(ranked)
            if rank == len(self._ranks):
                break
            parts[i:i + 2] = [parts[i] + parts[i + 1]]
        self._cache[word] = parts
        return parts

    def word_pieces(self, text: str) -> list[list[str]]:
        return [self.split_word(w) for w in _words(text)]

    def piece_ids(self, pieces: Iterable[str]) -> list[int]:
        return [self.vocab.get(p, UNK_ID) for p in pieces]

    def tokenize(self, text: str) -> list[int]:
        return [i for w in self.word_pieces(text) for i in self.piece_ids(w)]

    def decode(self, ids: Iterable[int]) -> str:
        out = []
        for i in ids:
            tok = self.inverse.get(int(i), UNK)
            if tok in (PAD, CLS, SEP):
                continue
            out.append(tok)
        return "".join(out).replace(WORD_START, " ").strip()

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{MAGIC} v{VERSION}\n")
            vocab = sorted(self.vocab.items(), key=lambda kv: kv[1])
            json.dump({"merges": [list(m) for m in self.merges], "vocab": [t for t, _ in vocab]},
                      fh, ensure_ascii=False)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "SubwordTokenizer":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if header != [MAGIC, f"v{VERSION}"]:
                raise TokenizerError(f"{path}: not a tokenizer file")
            d = json.loads(fh.read())
        return cls(merges=[tuple(m) for m in d["merges"]], vocab={t: i for i, t in enumerate(d["vocab"])})


def train_tokenizer(corpus: Sequence[str], vocab_size: int = 8000) -> SubwordTokenizer:
    if not corpus:
        raise TokenizerError("corpus is empty")
    word_freq = Counter(w for text in corpus for w in _words(text))
    alphabet = sorted({ch for w in word_freq for ch in w})
    base = len(SPECIALS) + len(alphabet)
    if vocab_size < base:
        raise TokenizerError(
            f"vocab_size={vocab_size} is below the base alphabet plus specials ({base})"
        )
    vocab = {t: i for i, t in enumerate(SPECIALS)}
    for ch in alphabet:
        vocab[ch] = len(vocab)

    words = [(list(w), f) for w, f in sorted(word_freq.items())]
    merges: list[tuple[str, str]] = []
    while len(vocab) < vocab_size:
        pairs: Counter[tuple[str, str]] = Counter()
        for parts, f in words:
            for p in zip(parts, parts[1:]):
                pairs[p] += f
        if not pairs:
            break
        best = min(pairs, key=lambda p: (-pairs[p], p))
        merged = best[0] + best[1]
        merges.append(best)
        if merged not in vocab:
            vocab[merged] = len(vocab)
        for parts, _ in words:
            i = 0
            while i < len(parts) - 1:
                if parts[i] == best[0] and parts[i + 1] == best[1]:
                    parts[i:i + 2] = [merged]
                i += 1
    return SubwordTokenizer(merges=merges, vocab=vocab)


def encode(tok: SubwordTokenizer, text: str, max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """``[CLS] pieces [SEP]`` truncated from the tail to ``max_len`` and right-padded."""
    if max_len < 2:
        raise ValueError("max_len must be >= 2")
    body = tok.tokenize(text)[: max_len - 2]
    ids = [CLS_ID, *body, SEP_ID]
    mask = [1] * len(ids)
    pad = max_len - len(ids)
    return (np.array(ids + [PAD_ID] * pad, dtype=np.int64), np.array(mask + [0] * pad, dtype=np.int64))


def encode_batch(tok: SubwordTokenizer, texts: Sequence[str], max_len: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = [encode(tok, t, max_len) for t in texts]
    if not pairs:
        return np.zeros((0, max_len), dtype=np.int64), np.zeros((0, max_len), dtype=np.int64)
    return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])
