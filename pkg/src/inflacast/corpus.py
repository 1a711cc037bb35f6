"""Group filtering and post ingestion.

Groups are kept when they have enough members and a large enough share of
members registered in the target region. Posts are read from line-delimited
JSON and clipped to the corpus window.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .months import CORPUS_END, CORPUS_START, Month, MonthFormatError

logger = logging.getLogger(__name__)


class NotComputable(ValueError):
    """Relative representation is undefined for this group."""


class IngestError(ValueError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


@dataclass(frozen=True)
class GroupRecord:
    group_id: str
    total_members: int
    regional_members: int
    available: bool = True

    def __post_init__(self) -> None:
        if self.total_members < 0 or self.regional_members < 0:
            raise ValueError(f"negative member count in group {self.group_id}")
        if self.available and self.regional_members > self.total_members:
            raise ValueError(
                f"group {self.group_id}: regional_members > total_members"
            )


@dataclass(frozen=True)
class PostRecord:
    post_id: str
    group_id: str
    text: str
    month: Month


@dataclass(frozen=True)
class FilterConfig:
    min_members: int = 2000
    min_share_pct: float = 20.0

    def __post_init__(self) -> None:
        if self.min_members < 1:
            raise ValueError("min_members must be >= 1")
        if not 0.0 <= self.min_share_pct <= 100.0:
            raise ValueError("min_share_pct must lie in [0, 100]")


def is_computable(g: GroupRecord) -> bool:
    return g.available and g.total_members > 0


def relative_representation(g: GroupRecord) -> float:
    """Percentage of a group's members registered in the region."""
    if not is_computable(g):
        raise NotComputable(
            f"group {g.group_id}: share undefined "
            f"(available={g.available}, total={g.total_members})"
        )
    return 100.0 * g.regional_members / g.total_members


def filter_groups(groups: Iterable[GroupRecord], cfg: FilterConfig = FilterConfig()) -> list[GroupRecord]:
    """Apply the member-count filter, then the share filter. Both bounds inclusive.

    Result is ordered by share descending, ties by ascending ``group_id``.
    """
    kept = []
    for g in groups:
        if not g.available or g.total_members < cfg.min_members:
            continue
        share = relative_representation(g)
        if share >= cfg.min_share_pct:
            kept.append((share, g))
    kept.sort(key=lambda sg: (-sg[0], sg[1].group_id))
    return [g for _, g in kept]


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    log_counts: np.ndarray | None = None

    def rows(self) -> list[tuple]:
        out = []
        for i, c in enumerate(self.counts):
            row = (float(self.edges[i]), float(self.edges[i + 1]), int(c))
            if self.log_counts is not None:
                row += (float(self.log_counts[i]),)
            out.append(row)
        return out


def share_histogram(groups: Iterable[GroupRecord], bins: int = 100, log_scale: bool = False) -> Histogram:
    if bins < 1:
        raise ValueError("bins must be >= 1")
    shares = np.array([relative_representation(g) for g in groups if is_computable(g)], dtype=float)
    counts, edges = np.histogram(shares, bins=bins, range=(0.0, 100.0))
    log_counts = np.log10(counts + 1.0) if log_scale else None
    return Histogram(edges=edges, counts=counts.astype(np.int64), log_counts=log_counts)


@dataclass(frozen=True)
class SweepResult:
    thresholds: list[int]
    counts: list[int]

    @property
    def max_relative_change(self) -> float:
        """(max - min) / max of surviving counts over the sweep; 0 when nothing survives."""
        hi = max(self.counts)
        if hi == 0:
            return 0.0
        return (hi - min(self.counts)) / hi

    def rows(self) -> list[tuple[int, int]]:
        return list(zip(self.thresholds, self.counts))


def robustness_sweep(
    groups: Sequence[GroupRecord],
    lo: int = 1500,
    hi: int = 2500,
    steps: int = 11,
    min_share_pct: float = FilterConfig.min_share_pct,
) -> SweepResult:
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if lo == hi:
        thresholds = [lo]
    else:
        thresholds = sorted({int(round(t)) for t in np.linspace(lo, hi, steps)})
    counts = [
        len(filter_groups(groups, FilterConfig(min_members=t, min_share_pct=min_share_pct)))
        for t in thresholds
    ]
    return SweepResult(thresholds=thresholds, counts=counts)


# ---------------------------------------------------------------------------
# file I/O

GROUP_HEADER = ["group_id", "total_members", "regional_members", "available"]
_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def read_groups(path: str | Path) -> list[GroupRecord]:
    groups = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(GROUP_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            available = _parse_bool(row["available"])
            total = row["total_members"].strip()
            regional = row["regional_members"].strip()
            groups.append(
                GroupRecord(
                    group_id=row["group_id"],
                    total_members=int(total) if total else 0,
                    regional_members=int(regional) if regional else 0,
                    available=available,
                )
            )
    return groups


def write_groups(path: str | Path, groups: Iterable[GroupRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUP_HEADER)
        for g in groups:
            w.writerow([g.group_id, g.total_members, g.regional_members, int(g.available)])


def parse_post_line(line: str) -> PostRecord:
    """Parse one JSON line; raises ValueError/MonthFormatError on bad input."""
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    for key in ("post_id", "group_id", "text", "month"):
        if key not in obj:
            raise ValueError(f"missing key {key!r}")
    text = obj["text"]
    if not isinstance(text, str):
        raise ValueError("text must be a string")
    return PostRecord(
        post_id=str(obj["post_id"]),
        group_id=str(obj["group_id"]),
        text=text,
        month=Month.parse(str(obj["month"])),
    )


def ingest_posts(
    path: str | Path,
    window: tuple[Month, Month] = (CORPUS_START, CORPUS_END),
    keep_empty: bool = False,
    strict: bool = True,
) -> list[PostRecord]:
    """Read posts from a JSONL file.

    Records outside ``window`` (inclusive) and empty texts are dropped, and
    duplicate ``post_id`` values keep their first occurrence. In strict mode
    the first malformed line raises :class:`IngestError`; otherwise bad lines
    are skipped with a warning. A bad month string is always an error.
    """
    lo, hi = window
    seen: set[str] = set()
    out: list[PostRecord] = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                post = parse_post_line(line)
            except MonthFormatError as exc:
                raise IngestError(lineno, str(exc)) from exc
            except (ValueError, TypeError) as exc:
                if strict:
                    raise IngestError(lineno, str(exc)) from exc
                skipped += 1
                continue
            if not lo <= post.month <= hi:
                continue
            if not keep_empty and not post.text.strip():
                continue
            if post.post_id in seen:
                continue
            seen.add(post.post_id)
            out.append(post)
    if skipped:
        logger.warning("%s: skipped %d malformed lines", path, skipped)
    return out


def write_posts(path: str | Path, posts: Iterable[PostRecord], labels: Iterable[int] | None = None) -> None:
    label_iter = iter(labels) if labels is not None else None
    with open(path, "w", encoding="utf-8") as fh:
        for p in posts:
            rec = {"post_id": p.post_id, "group_id": p.group_id, "text": p.text, "month": str(p.month)}
            if label_iter is not None:
                rec["label"] = int(next(label_iter))
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def share_or_nan(g: GroupRecord) -> float:
    return relative_representation(g) if is_computable(g) else math.nan
