"""Shapley-value token attributions for a single prediction.

The players are the tokens of one text. A coalition keeps some tokens and
removes the rest; its value is the class-1 probability (or logit) of the
model on what is left. Small inputs are solved exactly over all coalitions,
longer ones by permutation sampling.
"""

from __future__ import annotations

import csv
import html
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

ValueFn = Callable[[np.ndarray], np.ndarray]


class AttributionError(ValueError):
    pass


@dataclass(frozen=True)
class ExplainConfig:
    exact_max_tokens: int = 12
    n_permutations: int = 2000
    seed: int = 0
    antithetic: bool = False
    output: str = "proba"

    def __post_init__(self) -> None:
        if self.output not in ("proba", "logit"):
            raise ValueError(f"output must be 'proba' or 'logit', got {self.output!r}")
        if self.n_permutations < 1:
            raise ValueError("n_permutations must be >= 1")


@dataclass
class Attribution:
    tokens: list[str]
    phi: list[float]
    base_value: float
    fx: float
    method: str
    output: str = "proba"

    @property
    def efficiency_gap(self) -> float:
        return abs(sum(self.phi) - (self.fx - self.base_value))


def game_for(model, tokens: Sequence[str], output: str = "proba") -> ValueFn:
    """Value function over boolean masks of shape (m, n) for a wrapped classifier."""
    toks = list(tokens)
    return lambda masks: np.asarray(model.coalition_values(toks, masks, output=output), dtype=float)


def value_function(model, tokens: Sequence[str], subset: Sequence[bool], output: str = "proba") -> float:
    return float(game_for(model, tokens, output)(np.asarray([subset], dtype=bool))[0])


def _bits_to_masks(codes: np.ndarray, n: int) -> np.ndarray:
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def exact_shapley(game: ValueFn, n: int, max_players: int = 12) -> tuple[np.ndarray, float, float]:
    """Exact values from all 2**n coalitions; returns (phi, v(empty), v(all))."""
    if n > max_players:
        raise AttributionError(f"{n} tokens exceeds the exact limit of {max_players}")
    if n == 0:
        v = float(game(np.zeros((1, 0), dtype=bool))[0])
        return np.zeros(0), v, v
    codes = np.arange(1 << n)
    v = game(_bits_to_masks(codes, n))
    size = np.array([bin(c).count("1") for c in codes])
    w = np.array([math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n) if s < n else 0.0
                  for s in range(n + 1)])
    phi = np.empty(n)
    for i in range(n):
        without = codes[(codes >> i) & 1 == 0]
        phi[i] = np.sum(w[size[without]] * (v[without | (1 << i)] - v[without]))
    return phi, float(v[0]), float(v[-1])


def sampled_shapley(game: ValueFn, n: int, n_permutations: int = 2000, seed: int = 0,
                    antithetic: bool = False, batch: int = 4096) -> tuple[np.ndarray, float, float]:
    """Permutation-sampling estimate, then a uniform shift so the values sum to v(all) - v(empty).

    Permutations are drawn from one seeded generator in order; with
    ``antithetic`` every odd draw is the reverse of the one before it.
    Distinct coalitions are scored once.
    """
    rng = np.random.default_rng(seed)
    perms = np.empty((n_permutations, n), dtype=np.int64)
    for p in range(n_permutations):
        perms[p] = perms[p - 1][::-1] if antithetic and p % 2 == 1 else rng.permutation(n)
    # chain masks: row k of permutation p holds the first k players of p
    chains = np.zeros((n_permutations, n + 1, n), dtype=bool)
    for k in range(1, n + 1):
        chains[:, k] = chains[:, k - 1]
        chains[np.arange(n_permutations), k, perms[:, k - 1]] = True
    flat = chains.reshape(-1, n)
    uniq, inverse = np.unique(np.packbits(flat, axis=1), axis=0, return_inverse=True)
    uniq_masks = np.unpackbits(uniq, axis=1, count=n).astype(bool) if n else np.zeros((len(uniq), 0), bool)
    values = np.concatenate([game(uniq_masks[s:s + batch]) for s in range(0, len(uniq_masks), batch)])
    v = values[inverse.reshape(-1)].reshape(n_permutations, n + 1)
    empty, full = float(v[0, 0]), float(v[0, -1])
    phi = np.zeros(n)
    np.add.at(phi, perms.reshape(-1), np.diff(v, axis=1).reshape(-1))
    phi /= n_permutations
    if n:
        phi += ((full - empty) - phi.sum()) / n
    return phi, empty, full


def shapley_exact(model, tokens: Sequence[str], cfg: ExplainConfig = ExplainConfig()) -> Attribution:
    phi, base, fx = exact_shapley(game_for(model, tokens, cfg.output), len(tokens), cfg.exact_max_tokens)
    return Attribution(list(tokens), phi.tolist(), base, fx, "exact", cfg.output)


def shapley_sampled(model, tokens: Sequence[str], cfg: ExplainConfig = ExplainConfig()) -> Attribution:
    phi, base, fx = sampled_shapley(game_for(model, tokens, cfg.output), len(tokens),
                                    cfg.n_permutations, cfg.seed, cfg.antithetic)
    return Attribution(list(tokens), phi.tolist(), base, fx, "sampled", cfg.output)


def explain(model, text: str, cfg: ExplainConfig = ExplainConfig()) -> Attribution:
    """Exact when the text has at most ``cfg.exact_max_tokens`` tokens, sampled otherwise."""
    tokens = model.tokens(text)
    if len(tokens) <= cfg.exact_max_tokens:
        return shapley_exact(model, tokens, cfg)
    return shapley_sampled(model, tokens, cfg)


def _intensities(phi: Sequence[float]) -> np.ndarray:
    a = np.abs(np.asarray(phi, dtype=float))
    top = a.max() if a.size else 0.0
    return a / top if top > 0 else np.zeros_like(a)


def render_html(att: Attribution) -> str:
    """Red background for tokens pushing toward class 1, blue for class 0, opacity |phi|/max|phi|."""
    spans = []
    for tok, phi, alpha in zip(att.tokens, att.phi, _intensities(att.phi)):
        if phi > 0:
            cls, color = "pos", f"rgba(220,20,20,{alpha:.4f})"
        elif phi < 0:
            cls, color = "neg", f"rgba(20,60,220,{alpha:.4f})"
        else:
            cls, color = "zero", "transparent"
        spans.append(f'<span class="{cls}" data-phi="{phi:.6g}" title="{phi:+.6f}" '
                     f'style="background-color:{color}">{html.escape(tok)}</span>')
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>attribution</title></head><body>\n"
        f"<p>f(x) = {att.fx:.6f}; base = {att.base_value:.6f}; output = {att.output}; "
        f"method = {att.method}</p>\n<p>" + " ".join(spans) + "</p>\n</body></html>\n"
    )


def render_ansi(att: Attribution) -> str:
    out = []
    for tok, phi, alpha in zip(att.tokens, att.phi, _intensities(att.phi)):
        fade = int(round(255 * (1 - alpha)))
        if phi > 0:
            rgb = (255, fade, fade)
        elif phi < 0:
            rgb = (fade, fade, 255)
        else:
            out.append(tok)
            continue
        out.append(f"\x1b[48;2;{rgb[0]};{rgb[1]};{rgb[2]}m\x1b[30m{tok}\x1b[0m")
    return " ".join(out)


def render_report(att: Attribution, out_base: str | Path) -> dict[str, Path]:
    """Write ``<base>.html``, ``<base>.csv`` (token,phi) and ``<base>.json``."""
    base = Path(out_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    paths = {k: base.with_name(base.name + "." + k) for k in ("html", "csv", "json")}
    paths["html"].write_text(render_html(att), encoding="utf-8")
    with open(paths["csv"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["token", "phi"])
        for tok, phi in zip(att.tokens, att.phi):
            w.writerow([tok, repr(float(phi))])
    with open(paths["json"], "w", encoding="utf-8") as fh:
        json.dump(asdict(att), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def read_phi_csv(path: str | Path) -> tuple[list[str], list[float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [r["token"] for r in rows], [float(r["phi"]) for r in rows]
