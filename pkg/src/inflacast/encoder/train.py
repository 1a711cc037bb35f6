from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import EncoderModel, cross_entropy, forward, is_no_decay, loss_and_grads, softmax
from .optim import AdamW
from .tokenizer import SubwordTokenizer, encode

logger = logging.getLogger(__name__)


class Encoded(NamedTuple):
    ids: np.ndarray
    mask: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def take(self, idx) -> "Encoded":
        return Encoded(self.ids[idx], self.mask[idx], self.labels[idx])


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 5
    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class LossCurve:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def rows(self) -> list[tuple[int, float, float]]:
        return [(i + 1, t, v) for i, (t, v) in enumerate(zip(self.train_loss, self.val_loss))]


def evaluate_loss(m: EncoderModel, data: Encoded, batch_size: int = 256) -> float:
    if len(data) == 0:
        return float("nan")
    total = 0.0
    for s in range(0, len(data), batch_size):
        chunk = data.take(slice(s, s + batch_size))
        logits, _ = forward(m, chunk.ids, chunk.mask)
        total += cross_entropy(logits, chunk.labels)[0] * len(chunk)
    return total / len(data)


def train(m: EncoderModel, train_data: Encoded, val_data: Encoded, tc: TrainConfig = TrainConfig()):
    """AdamW fine-tuning at a constant learning rate for exactly ``tc.epochs`` epochs.

    The training loss reported for an epoch is the sample-weighted mean of the
    minibatch losses seen during it (dropout on); the validation loss is
    computed afterwards with dropout off. ``m`` is updated in place and
    returned together with the curve.
    """
    if len(train_data) == 0:
        raise ValueError("training split is empty")
    opt = AdamW(m.params, lr=tc.learning_rate, betas=tc.betas, eps=tc.eps,
                weight_decay=tc.weight_decay, no_decay=is_no_decay)
    curve = LossCurve()
    n = len(train_data)
    for epoch in range(tc.epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng([tc.seed, epoch]).permutation(n)
        drop_rng = np.random.default_rng([tc.seed, epoch, 1])
        total = 0.0
        for s in range(0, n, tc.batch_size):
            batch = train_data.take(order[s:s + tc.batch_size])
            loss, grads = loss_and_grads(m, batch.ids, batch.mask, batch.labels, rng=drop_rng)
            opt.step(grads)
            total += loss * len(batch)
        curve.train_loss.append(total / n)
        curve.val_loss.append(evaluate_loss(m, val_data))
        curve.seconds.append(time.perf_counter() - t0)
        logger.info("epoch %d: train %.4f val %.4f (%.1fs)", epoch + 1, curve.train_loss[-1],
                    curve.val_loss[-1], curve.seconds[-1])
    return m, curve


def predict(m: EncoderModel, tok: SubwordTokenizer, text: str) -> float:
    ids, mask = encode(tok, text, m.cfg.max_len)
    logits, _ = forward(m, ids[None], mask[None])
    return float(softmax(logits)[0, 1])
