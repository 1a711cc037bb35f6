"""Calendar-month arithmetic shared by the corpus and labeling code."""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timezone

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


class MonthFormatError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Month:
    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise MonthFormatError(f"month out of range: {self.month}")

    @classmethod
    def parse(cls, text: str) -> "Month":
        m = _MONTH_RE.match(text.strip())
        if m is None:
            raise MonthFormatError(f"expected YYYY-MM, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_timestamp(cls, ts: float) -> "Month":
        # UTC bucketing, never local time
        dt = datetime.fromtimestamp(ts, tz=timezone.utc)
        return cls(dt.year, dt.month)

    @classmethod
    def from_ordinal(cls, n: int) -> "Month":
        return cls(n // 12, n % 12 + 1)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    def shift(self, n: int) -> "Month":
        return Month.from_ordinal(self.ordinal + n)

    def __sub__(self, other: "Month") -> int:
        return self.ordinal - other.ordinal

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


CORPUS_START = Month(2010, 1)
CORPUS_END = Month(2022, 5)


def month_range(start: Month, end: Month) -> list[Month]:
    """Inclusive list of months from ``start`` to ``end``."""
    return [start.shift(k) for k in range(end - start + 1)]
