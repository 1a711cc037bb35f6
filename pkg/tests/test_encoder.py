import time
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inflacast import encoder
from inflacast.encoder import (
    AdamW, Encoded, EncoderConfig, EncoderError, EncoderModel, TrainConfig, TokenizerError,
)
from inflacast.encoder.model import forward, is_no_decay, loss, loss_and_grads, softmax
from inflacast.encoder.tokenizer import CLS_ID, PAD_ID, SEP_ID, UNK_ID, SPECIALS, WORD_START, normalize
from inflacast.fixtures import FALLING, RISING, SUBJECTS


def micro_cfg(**kw):
    base = dict(vocab_size=50, max_len=8, d_model=8, n_heads=2, n_layers=1, d_ff=16,
                dropout_rate=0.0, dtype="float64", allow_any_max_len=True)
    base.update(kw)
    return EncoderConfig(**base)


def random_batch(cfg, B, seed):
    rng = np.random.default_rng(seed)
    ids = rng.integers(4, cfg.vocab_size, size=(B, cfg.max_len))
    ids[:, 0] = CLS_ID
    lengths = rng.integers(2, cfg.max_len + 1, size=B)
    mask = (np.arange(cfg.max_len)[None, :] < lengths[:, None]).astype(np.int64)
    ids = np.where(mask > 0, ids, PAD_ID)
    return ids, mask, rng.integers(0, 2, size=B)


# --- tokenizer -----------------------------------------------------------------

def test_tokenizer_single_merge():
    tok = encoder.train_tokenizer(["aaaa"], vocab_size=len(SPECIALS) + 2 + 1)
    assert tok.merges == [("a", "a")]


def test_tokenizer_no_merges_at_base_size():
    tok = encoder.train_tokenizer(["abc ab"], vocab_size=len(SPECIALS) + 4)
    assert tok.merges == []
    assert tok.split_word(WORD_START + "abc") == [WORD_START, "a", "b", "c"]


def test_tokenizer_too_small():
    with pytest.raises(TokenizerError):
        encoder.train_tokenizer(["abc"], vocab_size=5)


def _greedy_oracle(corpus, n_merges):
    words = Counter(tuple(WORD_START + w) for text in corpus for w in normalize(text).split(" ") if w)
    merges = []
    for _ in range(n_merges):
        pairs = Counter()
        for w, f in words.items():
            for a, b in zip(w, w[1:]):
                pairs[(a, b)] += f
        if not pairs:
            break
        top = max(pairs.values())
        best = min(p for p, c in pairs.items() if c == top)
        merges.append(best)
        new = Counter()
        for w, f in words.items():
            out, i = [], 0
            while i < len(w):
                if i + 1 < len(w) and (w[i], w[i + 1]) == best:
                    out.append(w[i] + w[i + 1])
                    i += 2
                else:
                    out.append(w[i])
                    i += 1
            new[tuple(out)] += f
        words = new
    return merges


def test_tokenizer_matches_greedy_oracle():
    rng = np.random.default_rng(0)
    pool = SUBJECTS + RISING + FALLING + ["и", "не", "а", "сегодня"]
    corpus = [" ".join(rng.choice(pool, size=int(rng.integers(3, 9)))) for _ in range(200)]
    tok = encoder.train_tokenizer(corpus, vocab_size=300)
    assert tok.merges == _greedy_oracle(corpus, len(tok.merges))
    assert all(i < tok.vocab_size for i in tok.tokenize(" ".join(corpus[:5])))


@pytest.fixture(scope="module")
def small_tok():
    corpus = ["цены выросли сегодня", "тарифы не снизились а выросли", "бензин подешевел"]
    return encoder.train_tokenizer(corpus, vocab_size=120)


def test_encode_empty(small_tok):
    ids, mask = encoder.encode(small_tok, "", 8)
    assert ids.tolist() == [CLS_ID, SEP_ID] + [PAD_ID] * 6
    assert mask.tolist() == [1, 1, 0, 0, 0, 0, 0, 0]


def test_encode_truncates(small_tok):
    ids, mask = encoder.encode(small_tok, "цены выросли сегодня " * 20, 16)
    assert len(ids) == 16 and ids[-1] == SEP_ID and ids[0] == CLS_ID and mask.all()


@given(st.lists(st.sampled_from(["цены", "выросли", "сегодня", "бензин", "не", "а", "тарифы"]), max_size=8))
def test_decode_roundtrip(small_tok, words):
    text = " ".join(words)
    assert small_tok.decode(small_tok.tokenize(text)) == normalize(text)


def test_unseen_characters_map_to_unk(small_tok):
    assert UNK_ID in small_tok.tokenize("ёж")


def test_tokenizer_save_load(tmp_path, small_tok):
    small_tok.save(tmp_path / "t.tok")
    back = encoder.SubwordTokenizer.load(tmp_path / "t.tok")
    assert back.merges == small_tok.merges and back.vocab == small_tok.vocab


# --- config and forward ------------------------------------------------------------

def test_config_validation():
    with pytest.raises(EncoderError):
        EncoderConfig(max_len=100)
    with pytest.raises(EncoderError):
        EncoderConfig(d_model=10, n_heads=4)
    assert EncoderConfig(max_len=100, allow_any_max_len=True).max_len == 100


def test_forward_shape():
    m = EncoderModel.init(micro_cfg(d_model=16), seed=0)
    ids, mask, _ = random_batch(m.cfg, 2, 0)
    logits, _ = forward(m, ids, mask)
    assert logits.shape == (2, 2) and np.isfinite(logits).all()


def test_forward_rejects_bad_ids():
    m = EncoderModel.init(micro_cfg(), seed=0)
    ids, mask, _ = random_batch(m.cfg, 2, 0)
    ids[0, 1] = m.cfg.vocab_size
    with pytest.raises(EncoderError):
        forward(m, ids, mask)


def test_padding_content_invariance():
    m = EncoderModel.init(micro_cfg(), seed=1, std=0.5)
    ids = np.array([[CLS_ID, 9, SEP_ID, 0, 0, 0, 0, 0]])
    mask = (ids != 0).astype(int)
    mask[0, 0] = 1
    junk = ids.copy()
    junk[0, 3:] = [17, 23, 5, 41, 30]
    a, _ = forward(m, ids, mask)
    b, _ = forward(m, junk, mask)
    assert np.array_equal(a, b)


def _oracle_forward(P, ids, mask, D, H):
    """Loop-based reference for one layer, written independently of the vectorised code."""
    def ln(x, g, b):
        mu = sum(x) / len(x)
        var = sum((xi - mu) ** 2 for xi in x) / len(x)
        return [(xi - mu) / np.sqrt(var + 1e-5) * gi + bi for xi, gi, bi in zip(x, g, b)]

    def matvec(x, W, b):
        return [sum(x[i] * W[i][j] for i in range(len(x))) + b[j] for j in range(len(b))]

    def gelu(u):
        return 0.5 * u * (1 + np.tanh(np.sqrt(2 / np.pi) * (u + 0.044715 * u ** 3)))

    T = len(ids)
    E = D // H
    x = [list(P["tok_emb"][t] + P["pos_emb"][i]) for i, t in enumerate(ids)]
    p = "layer0."
    a = [ln(r, P[p + "ln1.gamma"], P[p + "ln1.beta"]) for r in x]
    q = [matvec(r, P[p + "attn.wq"], P[p + "attn.bq"]) for r in a]
    k = [matvec(r, P[p + "attn.wk"], P[p + "attn.bk"]) for r in a]
    v = [matvec(r, P[p + "attn.wv"], P[p + "attn.bv"]) for r in a]
    ctx = [[0.0] * D for _ in range(T)]
    for h in range(H):
        sl = range(h * E, (h + 1) * E)
        for i in range(T):
            scores = [sum(q[i][d] * k[j][d] for d in sl) / np.sqrt(E) if mask[j] else -np.inf for j in range(T)]
            mx = max(scores)
            w = [np.exp(s - mx) for s in scores]
            z = sum(w)
            for d in sl:
                ctx[i][d] = sum(w[j] / z * v[j][d] for j in range(T))
    o = [matvec(r, P[p + "attn.wo"], P[p + "attn.bo"]) for r in ctx]
    x = [[xi + oi for xi, oi in zip(r, s)] for r, s in zip(x, o)]
    f = [ln(r, P[p + "ln2.gamma"], P[p + "ln2.beta"]) for r in x]
    u = [[gelu(val) for val in matvec(r, P[p + "ffn.w1"], P[p + "ffn.b1"])] for r in f]
    o2 = [matvec(r, P[p + "ffn.w2"], P[p + "ffn.b2"]) for r in u]
    x = [[xi + oi for xi, oi in zip(r, s)] for r, s in zip(x, o2)]
    cls = ln(x[0], P["ln_f.gamma"], P["ln_f.beta"])
    return matvec(cls, P["head.w"], P["head.b"])


@pytest.mark.parametrize("heads", [1, 2])
def test_forward_matches_loop_oracle(heads):
    cfg = micro_cfg(n_heads=heads)
    m = EncoderModel.init(cfg, seed=3, std=0.4)
    rng = np.random.default_rng(1)
    for name in m.params:  # non-trivial layer-norm and bias values
        if is_no_decay(name):
            m.params[name] = m.params[name] + rng.normal(0, 0.3, m.params[name].shape)
    ids, mask, _ = random_batch(cfg, 3, 4)
    logits, _ = forward(m, ids, mask)
    for b in range(3):
        ref = _oracle_forward(m.params, ids[b], mask[b], cfg.d_model, heads)
        assert np.allclose(logits[b], ref, atol=1e-6)


def test_attention_rows_are_distributions():
    m = EncoderModel.init(micro_cfg(n_layers=2), seed=0, std=0.3)
    ids, mask, _ = random_batch(m.cfg, 4, 2)
    _, cache = forward(m, ids, mask)
    for layer in cache["layers"]:
        probs = layer["probs"]
        assert np.allclose(probs.sum(-1), 1.0, atol=1e-6)
        assert (probs[np.broadcast_to(mask[:, None, None, :] == 0, probs.shape)] == 0).all()


def test_batch_equivariance():
    m = EncoderModel.init(micro_cfg(), seed=0, std=0.3)
    ids, mask, _ = random_batch(m.cfg, 5, 3)
    perm = np.array([3, 0, 4, 1, 2])
    a, _ = forward(m, ids, mask)
    b, _ = forward(m, ids[perm], mask[perm])
    assert np.allclose(a[perm], b, atol=1e-12)


# --- gradients -----------------------------------------------------------------

def _rel_err(a, n):
    return np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-8)


def test_gradient_check_all_parameters():
    cfg = micro_cfg()
    m = EncoderModel.init(cfg, seed=0, std=0.5)
    ids, mask, y = random_batch(cfg, 3, 0)
    _, grads = loss_and_grads(m, ids, mask, y)
    h = 1e-4
    worst = 0.0
    for name, p in m.params.items():
        num = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + h
            lp = loss(m, ids, mask, y)
            p[i] = old - h
            lm = loss(m, ids, mask, y)
            p[i] = old
            num[i] = (lp - lm) / (2 * h)
        worst = max(worst, float(_rel_err(grads[name], num).max()))
    assert worst < 1e-3


def test_saturated_prediction_has_tiny_gradient():
    cfg = micro_cfg()
    m = EncoderModel.init(cfg, seed=0, std=0.1)
    m.params["head.b"][:] = [-40.0, 40.0]
    ids, mask, _ = random_batch(cfg, 4, 1)
    _, grads = loss_and_grads(m, ids, mask, np.ones(4, dtype=int))
    assert max(float(np.abs(g).max()) for g in grads.values()) < 1e-12


def test_one_step_decreases_loss():
    cfg = micro_cfg()
    m = EncoderModel.init(cfg, seed=2, std=0.3)
    ids, mask, y = random_batch(cfg, 6, 5)
    before, grads = loss_and_grads(m, ids, mask, y)
    for k in m.params:
        m.params[k] -= 1e-2 * grads[k]
    assert loss(m, ids, mask, y) < before


# --- optimizer -----------------------------------------------------------------

def test_adamw_decoupled_decay_and_exemptions():
    params = {"w": np.array([1.0, -2.0]), "layer0.attn.bq": np.array([3.0])}
    opt = AdamW(params, lr=0.1, weight_decay=0.5, no_decay=is_no_decay)
    opt.step({"w": np.array([0.0, 0.0]), "layer0.attn.bq": np.array([0.0])})
    # zero gradient: only the decay moves w, and the bias is exempt
    assert np.allclose(params["w"], [1.0 * 0.95, -2.0 * 0.95])
    assert params["layer0.attn.bq"][0] == 3.0
    opt = AdamW({"w": np.array([1.0])}, lr=0.1, weight_decay=0.0)
    opt.step({"w": np.array([4.0])})
    # first bias-corrected Adam step has magnitude lr
    assert opt.params["w"][0] == pytest.approx(0.9, abs=1e-6)


def test_no_decay_names():
    assert is_no_decay("layer0.ln1.gamma") and is_no_decay("ln_f.beta") and is_no_decay("head.b")
    assert not is_no_decay("layer1.attn.wq") and not is_no_decay("tok_emb") and not is_no_decay("head.w")


# --- training --------------------------------------------------------------------

def _separable(n, seed):
    rng = np.random.default_rng(seed)
    texts, labels = [], []
    for _ in range(n):
        lab = int(rng.integers(0, 2))
        verb = (RISING if lab else FALLING)[int(rng.integers(4))]
        texts.append(f"{SUBJECTS[int(rng.integers(len(SUBJECTS)))]} {verb}")
        labels.append(lab)
    return texts, np.array(labels)


def _encoded(tok, texts, y, max_len):
    ids, mask = encoder.encode_batch(tok, texts, max_len)
    return Encoded(ids, mask, y)


@pytest.fixture(scope="module")
def separable_data():
    texts, y = _separable(250, 0)
    tok = encoder.train_tokenizer(texts[:200], vocab_size=200)
    return tok, _encoded(tok, texts[:200], y[:200], 64), _encoded(tok, texts[200:], y[200:], 64)


def _small_model(tok, seed=7):
    return EncoderModel.init(EncoderConfig(vocab_size=tok.vocab_size, max_len=64, d_model=32, n_heads=2,
                                           n_layers=1, d_ff=64), seed=seed)


def test_training_curve_on_separable_data(separable_data):
    tok, tr, va = separable_data
    m, curve = encoder.train(_small_model(tok), tr, va, TrainConfig(epochs=5, learning_rate=1e-3, seed=7))
    assert len(curve.train_loss) == 5 and len(curve.rows()) == 5
    assert all(b <= a for a, b in zip(curve.val_loss, curve.val_loss[1:]))
    assert curve.train_loss[-1] < curve.train_loss[0]


def test_zero_lr_leaves_model_unchanged(separable_data):
    tok, tr, va = separable_data
    m0 = _small_model(tok)
    ref = m0.copy()
    m, curve = encoder.train(m0, tr, va, TrainConfig(epochs=2, learning_rate=0.0))
    assert all(np.array_equal(m.params[k], ref.params[k]) for k in ref.params)
    assert curve.val_loss[0] == curve.val_loss[1]


def test_training_deterministic(separable_data):
    tok, tr, va = separable_data
    tc = TrainConfig(epochs=2, learning_rate=1e-3, seed=3)
    _, c1 = encoder.train(_small_model(tok), tr, va, tc)
    _, c2 = encoder.train(_small_model(tok), tr, va, tc)
    assert c1.train_loss == c2.train_loss and c1.val_loss == c2.val_loss


def test_empty_train_split_errors(separable_data):
    tok, tr, va = separable_data
    with pytest.raises(ValueError):
        encoder.train(_small_model(tok), tr.take(slice(0, 0)), va)


def test_predict_zero_head_is_half(small_tok):
    m = EncoderModel.init(EncoderConfig(vocab_size=small_tok.vocab_size, max_len=64, d_model=16, n_heads=2,
                                        n_layers=1, d_ff=32), seed=0)
    m.params["head.w"][:] = 0.0
    assert encoder.predict(m, small_tok, "цены выросли") == 0.5
    m = EncoderModel.init(m.cfg, seed=1)
    assert encoder.predict(m, small_tok, "цены выросли") == encoder.predict(m, small_tok, "цены выросли")


def test_step_time_grows_with_max_len(small_tok):
    """Cost ordering across the four length variants, measured on one optimisation step."""
    times = []
    for L in encoder.MAX_LEN_VARIANTS:
        cfg = EncoderConfig(vocab_size=small_tok.vocab_size, max_len=L, d_model=32, n_heads=2, n_layers=1, d_ff=64)
        m = EncoderModel.init(cfg, seed=0)
        rng = np.random.default_rng(0)
        ids = rng.integers(4, cfg.vocab_size, size=(8, L))
        ids[:, 0] = CLS_ID
        mask = np.ones_like(ids)
        y = rng.integers(0, 2, 8)
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            loss_and_grads(m, ids, mask, y)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    assert times == sorted(times)


# --- checkpoint --------------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    m = EncoderModel.init(micro_cfg(), seed=0)
    encoder.save_checkpoint(m, tmp_path / "a.ckpt", extra={"tokenizer": "a.tok"})
    back, extra = encoder.load_checkpoint(tmp_path / "a.ckpt", with_extra=True)
    assert extra == {"tokenizer": "a.tok"}
    assert back.cfg == m.cfg
    assert all(np.array_equal(back.params[k], m.params[k]) for k in m.params)
    encoder.save_checkpoint(back, tmp_path / "b.ckpt", extra={"tokenizer": "a.tok"})
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
