"""Seeded synthetic inputs for desk-scale runs.

Three artefacts are produced: a group population, a monthly inflation series
with planted alternating extrema, and post corpora whose texts depend on the
month's trend. The negation sub-corpus is built from pairs of posts that use
exactly the same words in a different order and carry opposite labels, so no
unigram model can separate the pair members.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corpus import GroupRecord, PostRecord, filter_groups, write_groups, write_posts
from .labeler import Breakpoint, InflationSeries, Kind, assign_labels, write_series
from .months import CORPUS_END, CORPUS_START, Month

SUBJECTS = ["цены", "тарифы", "продукты", "бензин", "стройматериалы", "квартиры", "овощи", "лекарства"]
RISING = ["выросли", "подорожали", "повысились", "увеличились"]
FALLING = ["снизились", "подешевели", "упали", "уменьшились"]
NEGATOR = "не"
NEUTRAL = [
    "омск", "сегодня", "магазин", "рынок", "неделя", "месяц", "город", "новости", "район",
    "покупатели", "продавцы", "жители", "сеть", "прилавки", "очереди", "зарплата", "пенсия",
    "дача", "урожай", "погода", "транспорт", "услуги", "коммуналка", "аптека", "молоко",
    "хлеб", "сахар", "мясо", "рубль", "курс", "банк", "кредит", "ипотека", "ремонт",
]
RISING_CUES = ["подорожание", "дороже", "инфляция", "рост", "наценка", "дорого", "инфляционной", "стоимость"]
FALLING_CUES = ["скидки", "дешевле", "акция", "распродажа", "снижение", "выгодно", "дешево", "предложение"]

SCALES = {
    "small": {"groups": 2000, "posts": 2000, "negation": 2000},
    "medium": {"groups": 10000, "posts": 10000, "negation": 4000},
}


@dataclass
class FixtureTruth:
    seed: int
    planted_breakpoints: list[int]
    planted_kinds: list[str]
    negation_plain_rate: float
    negation_f1_ceiling: float
    files: dict[str, str] = field(default_factory=dict)


def make_groups(n: int, seed: int = 42, unavailable_rate: float = 0.04) -> list[GroupRecord]:
    """Power-law membership, shares skewed toward small percentages."""
    rng = np.random.default_rng(seed)
    totals = np.minimum((150 * (rng.pareto(1.1, size=n) + 1)).astype(int), 5_000_000)
    shares = rng.beta(0.6, 6.0, size=n)
    regional = np.minimum(np.floor(totals * shares).astype(int), totals)
    available = rng.random(n) >= unavailable_rate
    width = len(str(n))
    return [
        GroupRecord(f"g{i:0{width}d}", int(totals[i]), int(regional[i]), bool(available[i]))
        for i in range(n)
    ]


def plant_breakpoints(length: int, rng: np.random.Generator, min_gap: int = 6, max_gap: int = 18,
                      margin: int = 3) -> list[Breakpoint]:
    idx = []
    pos = margin + int(rng.integers(0, max_gap - min_gap + 1))
    while pos < length - margin:
        idx.append(pos)
        pos += int(rng.integers(min_gap, max_gap + 1))
    first = Kind.MAXIMUM if rng.random() < 0.5 else Kind.MINIMUM
    kinds = [first if k % 2 == 0 else first.opposite for k in range(len(idx))]
    start = CORPUS_START
    return [Breakpoint(i, start.shift(i), kd) for i, kd in zip(idx, kinds)]


def make_series(rng: np.random.Generator, start: Month = CORPUS_START, end: Month = CORPUS_END):
    """Monthly readings that are strictly monotone between planted extrema."""
    n = end - start + 1
    bps = plant_breakpoints(n, rng)
    levels = {}
    for bp in bps:
        levels[bp.index] = rng.uniform(0.9, 1.6) if bp.kind is Kind.MAXIMUM else rng.uniform(-0.3, 0.3)
    values = np.empty(n)
    anchors = [bp.index for bp in bps]
    for i in anchors:
        values[i] = levels[i]

    def fill(a: int, b: int) -> None:
        # strictly monotone interior between anchors a and b
        steps = rng.dirichlet(np.ones(b - a) * 2.0)
        values[a + 1:b] = values[a] + (values[b] - values[a]) * np.cumsum(steps)[:-1]

    for a, b in zip(anchors, anchors[1:]):
        fill(a, b)
    # head: move toward the first extremum, tail: move away from the last one
    first, last = bps[0], bps[-1]
    head_dir = -1.0 if first.kind is Kind.MAXIMUM else 1.0
    for i in range(first.index - 1, -1, -1):
        values[i] = values[i + 1] + head_dir * rng.uniform(0.02, 0.08)
    tail_dir = -1.0 if last.kind is Kind.MAXIMUM else 1.0
    for i in range(last.index + 1, n):
        values[i] = values[i - 1] + tail_dir * rng.uniform(0.02, 0.08)
    return InflationSeries(start, tuple(np.round(values, 6))), bps


def _words(rng: np.random.Generator, pool: list[str], k: int) -> list[str]:
    return [pool[int(j)] for j in rng.integers(0, len(pool), size=k)]


def main_post_text(label: int, rng: np.random.Generator, cue_purity: float = 0.8) -> str:
    words = _words(rng, NEUTRAL, int(rng.integers(3, 8)))
    words.append(SUBJECTS[int(rng.integers(len(SUBJECTS)))])
    for _ in range(int(rng.integers(1, 3))):
        own = rng.random() < cue_purity
        pool = RISING_CUES if (label == 1) == own else FALLING_CUES
        words.append(pool[int(rng.integers(len(pool)))])
    rng.shuffle(words)
    return " ".join(words)


def negation_pair(rng: np.random.Generator) -> tuple[tuple[str, int], tuple[str, int]]:
    """Two posts with identical word multisets and opposite labels.

    Either ``<subject> не <x> а <y>`` or ``<subject> <y> а не <x>``: the trend
    word that is not negated, ``y``, sets the label.
    """
    subj = SUBJECTS[int(rng.integers(len(SUBJECTS)))]
    up = RISING[int(rng.integers(len(RISING)))]
    down = FALLING[int(rng.integers(len(FALLING)))]
    pre = _words(rng, NEUTRAL, int(rng.integers(0, 4)))
    post = _words(rng, NEUTRAL, int(rng.integers(0, 3)))
    negated_first = rng.random() < 0.5

    def text(x: str, y: str) -> str:
        core = [NEGATOR, x, "а", y] if negated_first else [y, "а", NEGATOR, x]
        return " ".join([*pre, subj, *core, *post])

    return (text(down, up), 1), (text(up, down), 0)


def plain_post(rng: np.random.Generator) -> tuple[str, int]:
    label = int(rng.integers(0, 2))
    subj = SUBJECTS[int(rng.integers(len(SUBJECTS)))]
    verb = (RISING if label == 1 else FALLING)[int(rng.integers(4))]
    pre = _words(rng, NEUTRAL, int(rng.integers(0, 4)))
    return " ".join([*pre, subj, verb]), label


def bow_f1_ceiling(plain_rate: float) -> float:
    """Best expected macro-F1 of any unigram-count classifier on the negation sub-corpus.

    Plain posts are separable by their words; each negation pair shares one
    count vector and splits evenly between the classes, so a unigram rule can
    only choose the fraction ``q`` of negation posts it calls rising. Both
    classes are balanced. The maximum over ``q`` is taken on a fine grid.
    """
    c = plain_rate
    q = np.linspace(0.0, 1.0, 100_001)
    tp = c / 2 + (1 - c) * q / 2
    fp = (1 - c) * q / 2
    fn = (1 - c) * (1 - q) / 2
    tn = c / 2 + (1 - c) * (1 - q) / 2
    f1_pos = 2 * tp / (2 * tp + fp + fn)
    f1_neg = 2 * tn / (2 * tn + fn + fp)
    return float(np.max((f1_pos + f1_neg) / 2))


def make_negation_corpus(n: int, rng: np.random.Generator, plain_rate: float = 0.2) -> list[tuple[str, int]]:
    n_plain = int(round(n * plain_rate))
    n_pairs = (n - n_plain) // 2
    docs: list[tuple[str, int]] = []
    for _ in range(n_pairs):
        docs.extend(negation_pair(rng))
    docs.extend(plain_post(rng) for _ in range(n_plain))
    order = rng.permutation(len(docs))
    return [docs[i] for i in order]


def _months_by_label(labels: tuple[int, ...], start: Month) -> dict[int, list[Month]]:
    out: dict[int, list[Month]] = {0: [], 1: []}
    for i, lab in enumerate(labels):
        out[lab].append(start.shift(i))
    return out


def generate(out_dir: str | Path, seed: int = 1, scale: str = "small", plain_rate: float = 0.2) -> FixtureTruth:
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; choose from {sorted(SCALES)}")
    sizes = SCALES[scale]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ss = np.random.SeedSequence(seed)
    g_seed, s_seed, p_seed, n_seed = (int(x) for x in ss.generate_state(4))

    groups = make_groups(sizes["groups"], seed=g_seed)
    write_groups(out / "groups.csv", groups)

    series, bps = make_series(np.random.default_rng(s_seed))
    write_series(out / "inflation.csv", series)
    tl = assign_labels(series, bps)
    by_label = _months_by_label(tl.labels, series.start_month)

    # posts come from groups that pass the default filters where possible
    kept = [g.group_id for g in filter_groups(groups)] or [g.group_id for g in groups]
    rng = np.random.default_rng(p_seed)
    posts = []
    for i in range(sizes["posts"]):
        month = series.start_month.shift(int(rng.integers(len(series))))
        label = tl.label_for(month)
        posts.append(PostRecord(f"p{i:06d}", kept[int(rng.integers(len(kept)))],
                                main_post_text(label, rng), month))
    write_posts(out / "posts.jsonl", posts)

    rng = np.random.default_rng(n_seed)
    neg_posts = []
    for i, (text, label) in enumerate(make_negation_corpus(sizes["negation"], rng, plain_rate)):
        months = by_label[label]
        month = months[int(rng.integers(len(months)))]
        neg_posts.append(PostRecord(f"n{i:06d}", kept[int(rng.integers(len(kept)))], text, month))
    write_posts(out / "negation_posts.jsonl", neg_posts)

    truth = FixtureTruth(
        seed=seed,
        planted_breakpoints=[bp.index for bp in bps],
        planted_kinds=[bp.kind.value for bp in bps],
        negation_plain_rate=plain_rate,
        negation_f1_ceiling=bow_f1_ceiling(plain_rate),
        files={"groups": "groups.csv", "series": "inflation.csv", "posts": "posts.jsonl",
               "negation_posts": "negation_posts.jsonl"},
    )
    with open(out / "fixture_truth.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(truth), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return truth
