"""A small pre-norm transformer encoder with hand-written backpropagation.

Shapes: B batch, T sequence length, D model width, H heads, E = D / H.
The [CLS] position (index 0) passes through a final layer norm and a linear
head producing two logits.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

MAX_LEN_VARIANTS = (64, 128, 256, 512)
_LN_EPS = 1e-5
_GELU_C = np.sqrt(2.0 / np.pi)


class EncoderError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 8000
    max_len: int = 128
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    dropout_rate: float = 0.1
    dtype: str = "float32"
    allow_any_max_len: bool = False

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads:
            raise EncoderError("d_model must be divisible by n_heads")
        if self.max_len not in MAX_LEN_VARIANTS and not self.allow_any_max_len:
            raise EncoderError(f"max_len must be one of {MAX_LEN_VARIANTS} (or set allow_any_max_len)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise EncoderError("dropout_rate must lie in [0, 1)")
        if self.max_len < 2:
            raise EncoderError("max_len must be >= 2")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def parameter_shapes(cfg: EncoderConfig) -> dict[str, tuple[int, ...]]:
    D, F = cfg.d_model, cfg.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (cfg.vocab_size, D),
        "pos_emb": (cfg.max_len, D),
    }
    for i in range(cfg.n_layers):
        p = f"layer{i}."
        shapes.update({
            p + "ln1.gamma": (D,), p + "ln1.beta": (D,),
            p + "attn.wq": (D, D), p + "attn.bq": (D,),
            p + "attn.wk": (D, D), p + "attn.bk": (D,),
            p + "attn.wv": (D, D), p + "attn.bv": (D,),
            p + "attn.wo": (D, D), p + "attn.bo": (D,),
            p + "ln2.gamma": (D,), p + "ln2.beta": (D,),
            p + "ffn.w1": (D, F), p + "ffn.b1": (F,),
            p + "ffn.w2": (F, D), p + "ffn.b2": (D,),
        })
    shapes.update({"ln_f.gamma": (D,), "ln_f.beta": (D,), "head.w": (D, 2), "head.b": (2,)})
    return shapes


def is_no_decay(name: str) -> bool:
    """Biases and layer-norm parameters are exempt from weight decay."""
    leaf = name.rsplit(".", 1)[-1]
    return leaf in ("gamma", "beta") or leaf.startswith("b")


class EncoderModel:
    def __init__(self, cfg: EncoderConfig, params: dict[str, np.ndarray]):
        shapes = parameter_shapes(cfg)
        if set(params) != set(shapes):
            raise EncoderError("parameter names do not match the configuration")
        for name, shape in shapes.items():
            if params[name].shape != shape:
                raise EncoderError(f"{name}: shape {params[name].shape} != {shape}")
        self.cfg = cfg
        self.params = params

    @classmethod
    def init(cls, cfg: EncoderConfig, seed: int = 0, std: float = 0.02) -> "EncoderModel":
        rng = np.random.default_rng(seed)
        dtype = np.dtype(cfg.dtype)
        params = {}
        for name, shape in parameter_shapes(cfg).items():
            leaf = name.rsplit(".", 1)[-1]
            if leaf == "gamma":
                arr = np.ones(shape)
            elif is_no_decay(name):
                arr = np.zeros(shape)
            else:
                arr = rng.normal(0.0, std, size=shape)
            params[name] = arr.astype(dtype)
        return cls(cfg, params)

    def copy(self) -> "EncoderModel":
        return EncoderModel(self.cfg, {k: v.copy() for k, v in self.params.items()})

    def astype(self, dtype: str) -> "EncoderModel":
        cfg = EncoderConfig(**{**self.cfg.to_dict(), "dtype": dtype})
        return EncoderModel(cfg, {k: v.astype(dtype) for k, v in self.params.items()})

    @property
    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())


# ---------------------------------------------------------------------------
# primitive layers: each forward returns (out, cache); backward maps d_out -> grads


def layer_norm(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + _LN_EPS)
    xhat = xc * inv
    return xhat * gamma + beta, (xhat, inv, gamma)


def layer_norm_backward(dy, cache):
    xhat, inv, gamma = cache
    axes = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma
    n = xhat.shape[-1]
    dx = inv / n * (n * dxhat - dxhat.sum(-1, keepdims=True) - xhat * (dxhat * xhat).sum(-1, keepdims=True))
    return dx, dgamma, dbeta


def gelu(u):
    t = np.tanh(_GELU_C * (u + 0.044715 * u ** 3))
    return 0.5 * u * (1.0 + t), t


def gelu_backward(dy, u, t):
    dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * u * u)
    return dy * (0.5 * (1.0 + t) + 0.5 * u * dt)


def _dropout(x, rate, rng):
    if rate == 0.0 or rng is None:
        return x, None
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * keep, keep


def softmax(s, axis=-1):
    m = np.max(s, axis=axis, keepdims=True)
    e = np.exp(s - m)
    return e / e.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------


def forward(m: EncoderModel, ids: np.ndarray, mask: np.ndarray, rng: np.random.Generator | None = None):
    """Logits (B, 2) and the cache needed by :func:`backward`.

    Dropout is active only when ``rng`` is given. Keys with mask 0 get a
    score of -inf before the softmax, so padding never reaches real tokens.
    """
    cfg, P = m.cfg, m.params
    ids = np.asarray(ids)
    mask = np.asarray(mask)
    if ids.ndim != 2 or ids.shape != mask.shape:
        raise EncoderError("ids and mask must be matching (batch, length) arrays")
    B, T = ids.shape
    if T > cfg.max_len:
        raise EncoderError(f"sequence length {T} exceeds max_len {cfg.max_len}")
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise EncoderError("token id out of range")
    if T == 0 or not mask[:, 0].all():
        raise EncoderError("position 0 ([CLS]) must be unmasked")
    D, H = cfg.d_model, cfg.n_heads
    E = D // H
    scale = 1.0 / np.sqrt(E)
    rate = cfg.dropout_rate

    key_bias = np.where(mask[:, None, None, :] > 0, 0.0, -np.inf).astype(P["tok_emb"].dtype)
    x = P["tok_emb"][ids] + P["pos_emb"][:T]
    x, drop0 = _dropout(x, rate, rng)
    layers = []
    for i in range(cfg.n_layers):
        p = f"layer{i}."
        c: dict[str, Any] = {}
        a_in, c["ln1"] = layer_norm(x, P[p + "ln1.gamma"], P[p + "ln1.beta"])
        c["a_in"] = a_in

        def heads(w, b):
            return (a_in @ P[p + w] + P[p + b]).reshape(B, T, H, E).transpose(0, 2, 1, 3)

        q, k, v = heads("attn.wq", "attn.bq"), heads("attn.wk", "attn.bk"), heads("attn.wv", "attn.bv")
        probs = softmax(q @ k.transpose(0, 1, 3, 2) * scale + key_bias)
        ctx = (probs @ v).transpose(0, 2, 1, 3).reshape(B, T, D)
        o = ctx @ P[p + "attn.wo"] + P[p + "attn.bo"]
        o, c["drop1"] = _dropout(o, rate, rng)
        c.update(q=q, k=k, v=v, probs=probs, ctx=ctx)
        x = x + o

        f_in, c["ln2"] = layer_norm(x, P[p + "ln2.gamma"], P[p + "ln2.beta"])
        u = f_in @ P[p + "ffn.w1"] + P[p + "ffn.b1"]
        g, tanh_u = gelu(u)
        o2 = g @ P[p + "ffn.w2"] + P[p + "ffn.b2"]
        o2, c["drop2"] = _dropout(o2, rate, rng)
        c.update(f_in=f_in, u=u, tanh_u=tanh_u, g=g)
        x = x + o2
        layers.append(c)

    cls_vec, ln_f = layer_norm(x[:, 0], P["ln_f.gamma"], P["ln_f.beta"])
    logits = cls_vec @ P["head.w"] + P["head.b"]
    cache = dict(ids=ids, mask=mask, B=B, T=T, drop0=drop0, layers=layers, ln_f=ln_f, cls_vec=cls_vec,
                 scale=scale)
    return logits, cache


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    labels = np.asarray(labels)
    probs = softmax(logits)
    n = len(labels)
    logp = logits - logits.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(n), labels].mean())
    d = probs.copy()
    d[np.arange(n), labels] -= 1.0
    return loss, d / n


def backward(m: EncoderModel, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    cfg, P = m.cfg, m.params
    B, T = cache["B"], cache["T"]
    D, H = cfg.d_model, cfg.n_heads
    E = D // H
    grads = {k: np.zeros_like(v) for k, v in P.items()}

    grads["head.w"] = cache["cls_vec"].T @ dlogits
    grads["head.b"] = dlogits.sum(axis=0)
    dcls = dlogits @ P["head.w"].T
    dcls, grads["ln_f.gamma"], grads["ln_f.beta"] = layer_norm_backward(dcls, cache["ln_f"])
    dx = np.zeros((B, T, D), dtype=dlogits.dtype)
    dx[:, 0] = dcls

    for i in reversed(range(cfg.n_layers)):
        p = f"layer{i}."
        c = cache["layers"][i]
        # feed-forward branch
        do2 = dx if c["drop2"] is None else dx * c["drop2"]
        grads[p + "ffn.w2"] = c["g"].reshape(-1, cfg.d_ff).T @ do2.reshape(-1, D)
        grads[p + "ffn.b2"] = do2.sum(axis=(0, 1))
        dg = do2 @ P[p + "ffn.w2"].T
        du = gelu_backward(dg, c["u"], c["tanh_u"])
        grads[p + "ffn.w1"] = c["f_in"].reshape(-1, D).T @ du.reshape(-1, cfg.d_ff)
        grads[p + "ffn.b1"] = du.sum(axis=(0, 1))
        df_in = du @ P[p + "ffn.w1"].T
        d_ln2, grads[p + "ln2.gamma"], grads[p + "ln2.beta"] = layer_norm_backward(df_in, c["ln2"])
        dx = dx + d_ln2

        # attention branch
        do = dx if c["drop1"] is None else dx * c["drop1"]
        grads[p + "attn.wo"] = c["ctx"].reshape(-1, D).T @ do.reshape(-1, D)
        grads[p + "attn.bo"] = do.sum(axis=(0, 1))
        dctx = (do @ P[p + "attn.wo"].T).reshape(B, T, H, E).transpose(0, 2, 1, 3)
        probs, q, k, v = c["probs"], c["q"], c["k"], c["v"]
        dprobs = dctx @ v.transpose(0, 1, 3, 2)
        dv = probs.transpose(0, 1, 3, 2) @ dctx
        ds = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True)) * cache["scale"]
        dq = ds @ k
        dk = ds.transpose(0, 1, 3, 2) @ q
        a_in = c["a_in"].reshape(-1, D)
        da_in = np.zeros((B * T, D), dtype=dx.dtype)
        for name, dh in (("q", dq), ("k", dk), ("v", dv)):
            dflat = dh.transpose(0, 2, 1, 3).reshape(-1, D)
            grads[p + f"attn.w{name}"] = a_in.T @ dflat
            grads[p + f"attn.b{name}"] = dflat.sum(axis=0)
            da_in += dflat @ P[p + f"attn.w{name}"].T
        d_ln1, grads[p + "ln1.gamma"], grads[p + "ln1.beta"] = layer_norm_backward(
            da_in.reshape(B, T, D), c["ln1"])
        dx = dx + d_ln1

    if cache["drop0"] is not None:
        dx = dx * cache["drop0"]
    np.add.at(grads["tok_emb"], cache["ids"], dx)
    grads["pos_emb"][:T] = dx.sum(axis=0)
    return grads


def loss_and_grads(m: EncoderModel, ids, mask, labels, rng=None) -> tuple[float, dict[str, np.ndarray]]:
    logits, cache = forward(m, ids, mask, rng)
    loss, dlogits = cross_entropy(logits, labels)
    return loss, backward(m, cache, dlogits)


def loss(m: EncoderModel, ids, mask, labels) -> float:
    logits, _ = forward(m, ids, mask)
    return cross_entropy(logits, labels)[0]


def predict_proba(m: EncoderModel, ids, mask, batch_size: int = 256) -> np.ndarray:
    """Class-1 probabilities, evaluated in chunks without dropout."""
    out = []
    for s in range(0, len(ids), batch_size):
        logits, _ = forward(m, ids[s:s + batch_size], mask[s:s + batch_size])
        out.append(softmax(logits)[:, 1])
    return np.concatenate(out) if out else np.zeros(0)
