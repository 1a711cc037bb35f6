"""Transformer-encoder text classifier trained from scratch with AdamW."""

from .checkpoint import load_checkpoint, save_checkpoint
from .model import (
    MAX_LEN_VARIANTS,
    EncoderConfig,
    EncoderError,
    EncoderModel,
    backward,
    cross_entropy,
    forward,
    loss_and_grads,
    predict_proba,
)
from .optim import AdamW
from .tokenizer import SubwordTokenizer, TokenizerError, encode, encode_batch, train_tokenizer
from .train import Encoded, LossCurve, TrainConfig, evaluate_loss, predict, train

__all__ = [
    "AdamW", "Encoded", "EncoderConfig", "EncoderError", "EncoderModel", "LossCurve",
    "MAX_LEN_VARIANTS", "SubwordTokenizer", "TokenizerError", "TrainConfig", "backward",
    "cross_entropy", "encode", "encode_batch", "evaluate_loss", "forward", "load_checkpoint",
    "loss_and_grads", "predict", "predict_proba", "save_checkpoint", "train", "train_tokenizer",
]
