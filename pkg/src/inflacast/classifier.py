"""Text-in, probability-out wrappers around the baselines and the encoder.

A wrapper also knows how to split a text into the units that attribution
reports on and how to score a text with some of those units removed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import baselines, encoder, vectorizer
from .baselines.logreg import sigmoid
from .encoder.tokenizer import CLS_ID, PAD_ID, SEP_ID, normalize

BASELINE_KINDS = ("logreg", "tree", "forest", "gbm")
ENCODER_PREFIX = "encoder-"
_LOGIT_CLIP = 1e-12


def parse_model_name(name: str) -> tuple[str, int | None]:
    """``logreg`` -> ("logreg", None); ``encoder-128`` -> ("encoder", 128)."""
    if name in BASELINE_KINDS:
        return name, None
    if name.startswith(ENCODER_PREFIX):
        try:
            max_len = int(name[len(ENCODER_PREFIX):])
        except ValueError:
            raise ValueError(f"unknown model {name!r}") from None
        if max_len in encoder.MAX_LEN_VARIANTS:
            return "encoder", max_len
    raise ValueError(f"unknown model {name!r}")


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, _LOGIT_CLIP, 1.0 - _LOGIT_CLIP)
    return np.log(p) - np.log1p(-p)


@dataclass
class BaselineClassifier:
    kind: str
    model: Any
    tfidf: vectorizer.TfidfModel
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.kind

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        return self.model.predict_proba(self.tfidf.transform_many(texts))

    def tokens(self, text: str) -> list[str]:
        return self.tfidf.tokens(text)

    def coalition_values(self, tokens: Sequence[str], masks: np.ndarray, output: str = "proba") -> np.ndarray:
        """Score each row of ``masks``; tokens outside the coalition are removed from the counts."""
        vecs = [self.tfidf.vector_from_tokens([t for t, keep in zip(tokens, row) if keep]) for row in masks]
        X = vectorizer.to_csr(vecs, self.tfidf.dim)
        if output == "proba":
            return self.model.predict_proba(X)
        if output == "logit":
            if hasattr(self.model, "decision_function"):
                return self.model.decision_function(X)
            return _logit(self.model.predict_proba(X))
        raise ValueError(f"unknown output {output!r}")

    def save(self, path: str | Path) -> None:
        path = Path(path)
        vec_path = path.with_suffix(".tfidf")
        vectorizer.save(self.tfidf, vec_path)
        baselines.save_model(self.model, path, extra={"vectorizer": vec_path.name, "params": self.params})


@dataclass
class EncoderClassifier:
    model: encoder.EncoderModel
    tokenizer: encoder.SubwordTokenizer
    curve: encoder.LossCurve | None = None

    @property
    def kind(self) -> str:
        return "encoder"

    @property
    def name(self) -> str:
        return f"{ENCODER_PREFIX}{self.model.cfg.max_len}"

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        ids, mask = encoder.encode_batch(self.tokenizer, texts, self.model.cfg.max_len)
        return encoder.predict_proba(self.model, ids, mask)

    def tokens(self, text: str) -> list[str]:
        """Whitespace-separated words of the normalized text."""
        return [w for w in normalize(text).split(" ") if w]

    def _layout(self, tokens: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """Full-input ids and, per position, the index of the word it came from (-1 for specials)."""
        L = self.model.cfg.max_len
        ids, owner = [CLS_ID], [-1]
        for w_i, w in enumerate(tokens):
            pieces = self.tokenizer.piece_ids(self.tokenizer.split_word("▁" + w))
            ids.extend(pieces)
            owner.extend([w_i] * len(pieces))
        ids, owner = ids[: L - 1], owner[: L - 1]
        ids.append(SEP_ID)
        owner.append(-1)
        pad = L - len(ids)
        return np.array(ids + [PAD_ID] * pad), np.array(owner + [-2] * pad)

    def coalition_values(self, tokens: Sequence[str], masks: np.ndarray, output: str = "proba",
                         batch_size: int = 256) -> np.ndarray:
        """Score each row of ``masks``; removed words become [PAD] with attention mask 0."""
        ids, owner = self._layout(tokens)
        masks = np.asarray(masks, dtype=bool)
        keep = np.ones((len(masks), len(ids)), dtype=bool)
        word_pos = owner >= 0
        keep[:, word_pos] = masks[:, owner[word_pos]]
        keep[:, owner == -2] = False
        batch_ids = np.where(keep, ids[None, :], PAD_ID)
        batch_mask = keep.astype(np.int64)
        out = []
        for s in range(0, len(masks), batch_size):
            logits, _ = encoder.forward(self.model, batch_ids[s:s + batch_size], batch_mask[s:s + batch_size])
            logits = logits.astype(float)
            if output == "proba":
                out.append(encoder.model.softmax(logits)[:, 1])
            elif output == "logit":
                out.append(logits[:, 1] - logits[:, 0])
            else:
                raise ValueError(f"unknown output {output!r}")
        return np.concatenate(out) if out else np.zeros(0)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tok_path = path.with_suffix(".tok")
        self.tokenizer.save(tok_path)
        encoder.save_checkpoint(self.model, path, extra={"tokenizer": tok_path.name})


Classifier = BaselineClassifier | EncoderClassifier


def fit_baseline(kind: str, texts: Sequence[str], y: Sequence[int], params: dict[str, Any] | None = None,
                 vec_config: vectorizer.VectorizerConfig = vectorizer.VectorizerConfig()) -> BaselineClassifier:
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline {kind!r}")
    params = dict(baselines.REPORTED_PARAMS[kind] if params is None else params)
    tfidf = vectorizer.fit(list(texts), vec_config)
    model = baselines.TRAINERS[kind](tfidf.transform_many(texts), np.asarray(y), **params)
    return BaselineClassifier(kind, model, tfidf, params)


def fit_encoder(
    train_texts: Sequence[str],
    train_y: Sequence[int],
    val_texts: Sequence[str],
    val_y: Sequence[int],
    max_len: int = 128,
    model_config: dict[str, Any] | None = None,
    train_config: encoder.TrainConfig = encoder.TrainConfig(),
    tokenizer_vocab: int = 8000,
) -> EncoderClassifier:
    tok = encoder.train_tokenizer(list(train_texts), vocab_size=tokenizer_vocab)
    cfg = encoder.EncoderConfig(**{**(model_config or {}), "vocab_size": tok.vocab_size, "max_len": max_len})
    model = encoder.EncoderModel.init(cfg, seed=train_config.seed)

    def enc(texts, y):
        ids, mask = encoder.encode_batch(tok, texts, max_len)
        return encoder.Encoded(ids, mask, np.asarray(y, dtype=np.int64))

    model, curve = encoder.train(model, enc(train_texts, train_y), enc(val_texts, val_y), train_config)
    return EncoderClassifier(model, tok, curve)


def load_classifier(path: str | Path) -> Classifier:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    if encoder.checkpoint.is_checkpoint(path):
        model, extra = encoder.load_checkpoint(path, with_extra=True)
        tok = encoder.SubwordTokenizer.load(path.parent / extra["tokenizer"])
        return EncoderClassifier(model, tok)
    if baselines.persist.is_baseline_file(path):
        model, extra = baselines.load_model(path, with_extra=True)
        tfidf = vectorizer.load(path.parent / extra["vectorizer"])
        return BaselineClassifier(baselines.persist.model_kind(model), model, tfidf, extra.get("params", {}))
    raise ValueError(f"{path}: unrecognised model file")


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


__all__ = [
    "BASELINE_KINDS", "BaselineClassifier", "Classifier", "EncoderClassifier", "fit_baseline",
    "fit_encoder", "load_classifier", "parse_model_name", "sigmoid", "timed",
]
