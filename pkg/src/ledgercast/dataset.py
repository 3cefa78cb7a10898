from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Any, Mapping

from .core import FiscalCalendar, Invoice, WeeklySeries, aggregate_weekly, realized_payments
from .errors import DataError
from . import io as csvio


@dataclass(frozen=True)
class Dataset:
    """Invoices plus named weekly support series on one fiscal calendar.

    ``observation_end`` is the last day the data describes; anything dated
    later is unknown. ``truth`` carries planted generator parameters and is
    ignored by equality.
    """

    invoices: tuple[Invoice, ...]
    support: Mapping[str, WeeklySeries]
    calendar: FiscalCalendar
    observation_end: date | None = None
    truth: Mapping[str, Any] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "invoices", tuple(self.invoices))
        object.__setattr__(self, "support", dict(sorted(self.support.items())))
        if self.observation_end is None:
            object.__setattr__(self, "observation_end", self._latest_date())

    def _latest_date(self) -> date | None:
        days = []
        for inv in self.invoices:
            days.append(inv.issue_date)
            if inv.payment_date is not None:
                days.append(inv.payment_date)
        weeks = [s.end for s in self.support.values() if len(s)]
        if weeks:
            days.append(self.calendar.last_date_of(max(weeks)))
        if not days:
            return None
        return self.calendar.last_date_of(self.calendar.absolute_week(max(days)))

    @property
    def last_week(self) -> int:
        if self.observation_end is None:
            raise DataError("dataset is empty")
        return self.calendar.absolute_week(self.observation_end)

    @property
    def first_week(self) -> int:
        """First week with a realized payment."""
        paid = [inv.payment_date for inv in self.invoices if inv.payment_date is not None]
        if not paid:
            raise DataError("dataset has no realized payments")
        return self.calendar.absolute_week(min(paid))

    def collections(self, cutoff: date | None = None) -> WeeklySeries:
        """Realized weekly collections up to ``cutoff`` (default: everything)."""
        return aggregate_weekly(realized_payments(self.invoices, cutoff), self.calendar)

    def as_of(self, week: int) -> Dataset:
        """The dataset as it looked at the end of ``week``.

        Invoices issued later are removed, later payments are hidden and
        support series are cut at ``week``.
        """
        cutoff = self.calendar.last_date_of(week)
        invoices = []
        for inv in self.invoices:
            if inv.issue_date > cutoff:
                continue
            if inv.payment_date is not None and inv.payment_date > cutoff:
                inv = inv.as_open()
            invoices.append(inv)
        support = {name: s.slice(None, week) for name, s in self.support.items()}
        return replace(self, invoices=tuple(invoices), support=support,
                       observation_end=cutoff, truth=None)

    def export(self, directory: str | Path) -> tuple[Path, Path]:
        directory = Path(directory)
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DataError(f"cannot create {directory}: {exc}") from exc
        return (
            csvio.write_invoices_csv(self.invoices, directory / "invoices.csv"),
            csvio.write_support_csv(self.support, self.calendar, directory / "support.csv"),
        )


def load_dataset(directory: str | Path, cal: FiscalCalendar) -> Dataset:
    directory = Path(directory)
    return read_dataset(directory / "invoices.csv", directory / "support.csv", cal)


def read_dataset(invoices_csv: str | Path, support_csv: str | Path, cal: FiscalCalendar) -> Dataset:
    invoices = csvio.read_invoices_csv(invoices_csv)
    support = csvio.read_support_csv(support_csv, cal)
    return Dataset(tuple(invoices), support, cal)
