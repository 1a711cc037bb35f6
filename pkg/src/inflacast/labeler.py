"""Trend labeling from a monthly inflation series.

Relative extrema are found with a strict neighbourhood comparison, close
pairs are thinned, and every month is assigned to the trend segment that
ends at the next surviving extremum: 1 when inflation climbs toward a
maximum, 0 when it falls toward a minimum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import PostRecord
from .months import Month


class Kind(str, Enum):
    MINIMUM = "minimum"
    MAXIMUM = "maximum"

    @property
    def opposite(self) -> "Kind":
        return Kind.MAXIMUM if self is Kind.MINIMUM else Kind.MINIMUM


class LabelingError(ValueError):
    pass


@dataclass(frozen=True)
class InflationSeries:
    start_month: Month
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise ValueError("inflation series is empty")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_month(self) -> Month:
        return self.start_month.shift(len(self.values) - 1)

    def month_at(self, index: int) -> Month:
        return self.start_month.shift(index)

    def index_of(self, month: Month) -> int:
        return month - self.start_month

    def shifted(self, c: float) -> "InflationSeries":
        return InflationSeries(self.start_month, tuple(v + c for v in self.values))


@dataclass(frozen=True)
class Breakpoint:
    index: int
    month: Month
    kind: Kind


@dataclass(frozen=True)
class ExtremaConfig:
    order: int = 1
    merge_window_months: int = 3

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.merge_window_months < 0:
            raise ValueError("merge_window_months must be >= 0")


@dataclass(frozen=True)
class TrendLabeling:
    series: InflationSeries
    labels: tuple[int, ...]
    breakpoints: tuple[Breakpoint, ...]
    segment_ids: tuple[int, ...] = field(default=())

    def label_for(self, month: Month) -> int:
        i = self.series.index_of(month)
        if not 0 <= i < len(self.labels):
            raise LabelingError(
                f"month {month} outside labeled range "
                f"{self.series.start_month}..{self.series.end_month}"
            )
        return self.labels[i]

    def as_map(self) -> dict[Month, int]:
        return {self.series.month_at(i): lab for i, lab in enumerate(self.labels)}


def find_raw_extrema(s: InflationSeries, order: int = 1) -> list[Breakpoint]:
    """Strict relative extrema; the window is clipped at the series ends and
    the two endpoints themselves are never reported."""
    n = len(s)
    if order < 1:
        raise ValueError("order must be >= 1")
    if n <= 2 * order:
        raise LabelingError(f"series of length {n} too short for order {order}")
    v = np.asarray(s.values)
    out = []
    for i in range(1, n - 1):
        lo, hi = max(0, i - order), min(n, i + order + 1)
        nb = np.concatenate([v[lo:i], v[i + 1:hi]])
        if np.all(v[i] > nb):
            out.append(Breakpoint(i, s.month_at(i), Kind.MAXIMUM))
        elif np.all(v[i] < nb):
            out.append(Breakpoint(i, s.month_at(i), Kind.MINIMUM))
    return out


def _more_extreme(a: Breakpoint, b: Breakpoint, v: Sequence[float]) -> Breakpoint:
    # ties keep the earlier point
    if a.kind is Kind.MAXIMUM:
        return b if v[b.index] > v[a.index] else a
    return b if v[b.index] < v[a.index] else a


def smooth_extrema(
    raw: Sequence[Breakpoint], s: InflationSeries, cfg: ExtremaConfig = ExtremaConfig()
) -> list[Breakpoint]:
    """Thin extrema that sit closer than ``cfg.merge_window_months``.

    The earliest offending pair loses whichever member lies closer to the
    series mean (ties drop the later one). Same-kind runs left behind are then
    collapsed to their most extreme member so kinds alternate.
    """
    bps = sorted(raw, key=lambda b: b.index)
    v = s.values
    mean = float(np.mean(v))
    w = cfg.merge_window_months

    while True:
        for k in range(len(bps) - 1):
            a, b = bps[k], bps[k + 1]
            if b.index - a.index < w:
                if abs(v[b.index] - mean) > abs(v[a.index] - mean):
                    del bps[k]
                else:
                    del bps[k + 1]
                break
        else:
            break

    out: list[Breakpoint] = []
    for bp in bps:
        if out and out[-1].kind is bp.kind:
            out[-1] = _more_extreme(out[-1], bp, v)
        else:
            out.append(bp)
    return out


def detect_breakpoints(s: InflationSeries, cfg: ExtremaConfig = ExtremaConfig()) -> list[Breakpoint]:
    return smooth_extrema(find_raw_extrema(s, cfg.order), s, cfg)


def assign_labels(s: InflationSeries, bps: Sequence[Breakpoint]) -> TrendLabeling:
    if not bps:
        raise LabelingError("no breakpoints: trend direction undefined")
    for a, b in zip(bps, bps[1:]):
        if b.index <= a.index or b.kind is a.kind:
            raise LabelingError("breakpoints must be sorted and alternate in kind")

    n = len(s)
    labels = np.empty(n, dtype=int)
    segs = np.empty(n, dtype=int)
    start = 0
    for seg, bp in enumerate(bps):
        labels[start:bp.index + 1] = 1 if bp.kind is Kind.MAXIMUM else 0
        segs[start:bp.index + 1] = seg
        start = bp.index + 1
    # the trend reverses after the last extremum
    labels[start:] = 1 if bps[-1].kind is Kind.MINIMUM else 0
    segs[start:] = len(bps)
    return TrendLabeling(
        series=s,
        labels=tuple(int(x) for x in labels),
        breakpoints=tuple(bps),
        segment_ids=tuple(int(x) for x in segs),
    )


def label_series(s: InflationSeries, cfg: ExtremaConfig = ExtremaConfig()) -> TrendLabeling:
    return assign_labels(s, detect_breakpoints(s, cfg))


def label_posts(posts: Iterable[PostRecord], tl: TrendLabeling) -> list[tuple[PostRecord, int]]:
    return [(p, tl.label_for(p.month)) for p in posts]


# ---------------------------------------------------------------------------
# file I/O


def read_series(path: str | Path) -> InflationSeries:
    months: list[Month] = []
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"month", "value_pct"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header month,value_pct")
        for row in reader:
            months.append(Month.parse(row["month"]))
            values.append(float(row["value_pct"].replace(",", ".")))
    if not months:
        raise ValueError(f"{path}: no rows")
    order = sorted(range(len(months)), key=lambda i: months[i])
    months = [months[i] for i in order]
    values = [values[i] for i in order]
    for a, b in zip(months, months[1:]):
        if b - a != 1:
            raise ValueError(f"{path}: months not consecutive at {a} -> {b}")
    return InflationSeries(months[0], tuple(values))


def write_series(path: str | Path, s: InflationSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "value_pct"])
        for i, v in enumerate(s.values):
            w.writerow([str(s.month_at(i)), repr(float(v))])


def write_labeling(path: str | Path, tl: TrendLabeling) -> None:
    kinds = {bp.index: bp.kind.value for bp in tl.breakpoints}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "label", "segment_id", "breakpoint_kind_if_any"])
        for i, lab in enumerate(tl.labels):
            w.writerow([str(tl.series.month_at(i)), lab, tl.segment_ids[i], kinds.get(i, "")])


def write_breakpoints(path: str | Path, bps: Iterable[Breakpoint], s: InflationSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "month", "kind", "value_pct"])
        for bp in bps:
            w.writerow([bp.index, str(bp.month), bp.kind.value, repr(s.values[bp.index])])
