"""Calendar quarters: the time axis of every series in the pipeline."""

from __future__ import annotations

import datetime as dt
import functools
import re
from dataclasses import dataclass

_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")

# Last (month, day) of each quarter, used when emitting quarter_end dates.
_QUARTER_END = {1: (3, 31), 2: (6, 30), 3: (9, 30), 4: (12, 31)}


@functools.total_ordering
@dataclass(frozen=True)
class Quarter:
    """A calendar quarter, totally ordered; the successor of Q4 is next year's Q1."""

    year: int
    index: int

    def __post_init__(self) -> None:
        if not 1 <= self.index <= 4:
            raise ValueError(f"quarter index must be 1..4, got {self.index}")

    @classmethod
    def from_date(cls, d: dt.date) -> "Quarter":
        return cls(d.year, (d.month - 1) // 3 + 1)

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        """Parse the canonical form, e.g. '2015Q3'."""
        m = _QUARTER_RE.match(text.strip())
        if m is None:
            raise ValueError(f"not a quarter label: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    def next(self) -> "Quarter":
        if self.index == 4:
            return Quarter(self.year + 1, 1)
        return Quarter(self.year, self.index + 1)

    def prev(self) -> "Quarter":
        if self.index == 1:
            return Quarter(self.year - 1, 4)
        return Quarter(self.year, self.index - 1)

    def end_date(self) -> dt.date:
        month, day = _QUARTER_END[self.index]
        return dt.date(self.year, month, day)

    def __lt__(self, other: "Quarter") -> bool:
        return (self.year, self.index) < (other.year, other.index)

    def __str__(self) -> str:
        return f"{self.year}Q{self.index}"


def quarter_range(first: Quarter, count: int) -> list[Quarter]:
    """`count` consecutive quarters starting at `first`."""
    out = [first]
    for _ in range(count - 1):
        out.append(out[-1].next())
    return out
