"""Domain records, the fiscal calendar and weekly aggregation.

All week numbers in the package are *absolute* fiscal weeks: week 1 is the
first week of the earliest configured fiscal year and the count keeps running
across year boundaries (week 53 is week 1 of the second year).
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, timedelta
from decimal import Decimal
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import RangeError, ValidationError

CENT = Decimal("0.01")


class Segment(str, enum.Enum):
    CSB = "CSB"
    COMMERCIAL = "Commercial"
    ENTERPRISE = "Enterprise"

    @classmethod
    def parse(cls, value: str | Segment) -> Segment:
        if isinstance(value, Segment):
            return value
        for seg in cls:
            if seg.value == value:
                return seg
        raise ValidationError(f"unknown segment {value!r}; expected one of {[s.value for s in cls]}")


# Fixed ordering used by every one-hot encoding of the segment.
SEGMENTS: tuple[Segment, ...] = (Segment.CSB, Segment.COMMERCIAL, Segment.ENTERPRISE)


def to_money(value) -> Decimal:
    """Quantize to cents. Floats go through ``repr`` so 0.1 stays 0.10."""
    if isinstance(value, float):
        value = repr(value)
    return Decimal(value).quantize(CENT)


@dataclass(frozen=True)
class Invoice:
    invoice_id: str
    customer_id: str
    segment: Segment
    issue_date: date
    due_date: date
    amount: Decimal
    payment_date: date | None = None
    payment_terms_days: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segment", Segment.parse(self.segment))
        object.__setattr__(self, "amount", to_money(self.amount))
        if self.due_date < self.issue_date:
            raise ValidationError(f"invoice {self.invoice_id}: due_date precedes issue_date")
        if self.amount <= 0:
            raise ValidationError(f"invoice {self.invoice_id}: amount must be positive")
        if self.payment_date is not None and self.payment_date < self.issue_date:
            raise ValidationError(f"invoice {self.invoice_id}: payment_date precedes issue_date")
        if self.payment_terms_days < 0:
            raise ValidationError(f"invoice {self.invoice_id}: negative payment terms")

    @property
    def is_closed(self) -> bool:
        return self.payment_date is not None

    @property
    def days_to_close(self) -> int | None:
        if self.payment_date is None:
            return None
        return (self.payment_date - self.issue_date).days

    def closed_by(self, cutoff: date) -> bool:
        return self.payment_date is not None and self.payment_date <= cutoff

    def as_open(self) -> Invoice:
        return Invoice(
            self.invoice_id, self.customer_id, self.segment, self.issue_date,
            self.due_date, self.amount, None, self.payment_terms_days,
        )


class FiscalWeek(NamedTuple):
    fiscal_year: int
    quarter: int
    week_in_quarter: int
    absolute_week: int


@dataclass(frozen=True)
class FiscalCalendar:
    """Fixed 4 x 13-week fiscal calendar starting at ``fiscal_year_start``.

    The fiscal year label is the calendar year of the day the fiscal year
    starts. ``n_years`` bounds the valid range.
    """

    fiscal_year_start: date
    n_years: int = 50
    weeks_per_quarter: int = 13
    quarters_per_year: int = 4

    def __post_init__(self):
        if self.weeks_per_quarter < 1 or self.quarters_per_year < 1 or self.n_years < 1:
            raise ValidationError("calendar dimensions must be positive")

    @property
    def weeks_per_year(self) -> int:
        return self.weeks_per_quarter * self.quarters_per_year

    @property
    def last_week(self) -> int:
        return self.n_years * self.weeks_per_year

    @property
    def end_date(self) -> date:
        return self.last_date_of(self.last_week)

    def _check_week(self, week: int) -> None:
        if not 1 <= week <= self.last_week:
            raise RangeError(f"week {week} outside calendar range 1..{self.last_week}")

    def absolute_week(self, day: date) -> int:
        offset = (day - self.fiscal_year_start).days
        if offset < 0:
            raise RangeError(f"{day} precedes calendar start {self.fiscal_year_start}")
        week = offset // 7 + 1
        if week > self.last_week:
            raise RangeError(f"{day} is past the calendar end {self.end_date}")
        return week

    def week_of(self, day: date) -> FiscalWeek:
        return self.describe(self.absolute_week(day))

    def describe(self, week: int) -> FiscalWeek:
        self._check_week(week)
        year_idx, week_in_year = divmod(week - 1, self.weeks_per_year)
        quarter, wiq = divmod(week_in_year, self.weeks_per_quarter)
        year_start = self.first_date_of(year_idx * self.weeks_per_year + 1)
        return FiscalWeek(year_start.year, quarter + 1, wiq + 1, week)

    def quarter_of(self, week: int) -> int:
        self._check_week(week)
        return ((week - 1) % self.weeks_per_year) // self.weeks_per_quarter + 1

    def is_q4(self, week: int) -> bool:
        return self.quarter_of(week) == self.quarters_per_year

    def week_in_year(self, week: int) -> int:
        self._check_week(week)
        return (week - 1) % self.weeks_per_year + 1

    def year_index(self, week: int) -> int:
        self._check_week(week)
        return (week - 1) // self.weeks_per_year

    def first_date_of(self, week: int) -> date:
        self._check_week(week)
        return self.fiscal_year_start + timedelta(days=7 * (week - 1))

    def last_date_of(self, week: int) -> date:
        return self.first_date_of(week) + timedelta(days=6)

    def q4_mask(self, weeks: Iterable[int]) -> np.ndarray:
        return np.array([self.is_q4(int(w)) for w in weeks], dtype=bool)


class WeeklySeries:
    """Gapless weekly series: ``values[i]`` belongs to week ``start + i``.

    Immutable; the value array is read-only. An empty series has no weeks.
    """

    __slots__ = ("_start", "_values")

    def __init__(self, start: int, values: Sequence[float] | np.ndarray):
        arr = np.array(values, dtype=float).reshape(-1)
        arr.setflags(write=False)
        self._start = int(start)
        self._values = arr

    @classmethod
    def empty(cls) -> WeeklySeries:
        return cls(0, [])

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[int, float]]) -> WeeklySeries:
        """Build from (week, value) pairs; duplicate weeks are summed and gaps filled with 0."""
        sums: dict[int, float] = defaultdict(float)
        for week, value in entries:
            sums[int(week)] += float(value)
        if not sums:
            return cls.empty()
        lo, hi = min(sums), max(sums)
        values = np.zeros(hi - lo + 1)
        for week, value in sums.items():
            values[week - lo] = value
        return cls(lo, values)

    @property
    def start(self) -> int:
        return self._start

    @property
    def end(self) -> int:
        return self._start + len(self._values) - 1

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def weeks(self) -> np.ndarray:
        return np.arange(self._start, self._start + len(self._values))

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(w), float(v)) for w, v in zip(self.weeks, self._values)]

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return iter(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeeklySeries):
            return NotImplemented
        if len(self) == 0 and len(other) == 0:
            return True
        return self._start == other._start and np.array_equal(self._values, other._values)

    def __repr__(self) -> str:
        if not len(self):
            return "WeeklySeries(empty)"
        return f"WeeklySeries(weeks {self.start}..{self.end}, n={len(self)})"

    def __contains__(self, week: int) -> bool:
        return len(self) > 0 and self._start <= week <= self.end

    def __getitem__(self, week: int) -> float:
        if week not in self:
            raise RangeError(f"week {week} outside series span {self!r}")
        return float(self._values[week - self._start])

    def get(self, week: int, default: float = 0.0) -> float:
        return self[week] if week in self else default

    def window(self, lo: int, hi: int) -> WeeklySeries:
        """Values for weeks lo..hi inclusive; weeks outside the span are 0."""
        if hi < lo:
            return WeeklySeries.empty()
        out = np.zeros(hi - lo + 1)
        if len(self):
            a, b = max(lo, self.start), min(hi, self.end)
            if a <= b:
                out[a - lo:b - lo + 1] = self._values[a - self.start:b - self.start + 1]
        return WeeklySeries(lo, out)

    def slice(self, lo: int | None = None, hi: int | None = None) -> WeeklySeries:
        """Restrict to the intersection of the span with lo..hi."""
        if not len(self):
            return self
        lo = self.start if lo is None else max(lo, self.start)
        hi = self.end if hi is None else min(hi, self.end)
        if hi < lo:
            return WeeklySeries.empty()
        return WeeklySeries(lo, self._values[lo - self.start:hi - self.start + 1])

    def take(self, weeks: Sequence[int] | np.ndarray) -> np.ndarray:
        weeks = np.asarray(weeks, dtype=int)
        if len(weeks) and (weeks.min() < self.start or weeks.max() > self.end):
            raise RangeError(f"requested weeks {weeks.min()}..{weeks.max()} exceed {self!r}")
        return self._values[weeks - self.start]

    def map(self, fn) -> WeeklySeries:
        return WeeklySeries(self._start, fn(self._values))

    def total(self) -> float:
        return float(np.sum(self._values))

    def concat(self, other: WeeklySeries) -> WeeklySeries:
        """Append a series that starts the week after this one ends."""
        if not len(self):
            return other
        if not len(other):
            return self
        if other.start != self.end + 1:
            raise ValidationError(f"cannot append {other!r} to {self!r}: not contiguous")
        return WeeklySeries(self._start, np.concatenate([self._values, other.values]))

    def to_list(self) -> list[float]:
        return [float(v) for v in self._values]


@dataclass(frozen=True)
class WeeklyTotals:
    """Exact per-week decimal totals backing an aggregated series."""

    totals: dict[int, Decimal] = field(default_factory=dict)

    def series(self) -> WeeklySeries:
        return WeeklySeries.from_entries((w, float(v)) for w, v in self.totals.items())

    def total(self) -> Decimal:
        return sum(self.totals.values(), Decimal(0))


def weekly_totals(payments: Iterable[tuple[date, Decimal | float]], cal: FiscalCalendar) -> WeeklyTotals:
    sums: dict[int, Decimal] = defaultdict(Decimal)
    for day, amount in payments:
        sums[cal.absolute_week(day)] += amount if isinstance(amount, Decimal) else to_money(amount)
    return WeeklyTotals(dict(sums))


def aggregate_weekly(payments: Iterable[tuple[date, Decimal | float]], cal: FiscalCalendar) -> WeeklySeries:
    """Sum payments per fiscal week, zero-filling weeks without payments.

    Sums are accumulated in ``Decimal`` and converted to float once per week.
    """
    return weekly_totals(payments, cal).series()


def realized_payments(invoices: Iterable[Invoice], cutoff: date | None = None) -> list[tuple[date, Decimal]]:
    return [
        (inv.payment_date, inv.amount)
        for inv in invoices
        if inv.payment_date is not None and (cutoff is None or inv.payment_date <= cutoff)
    ]
