"""Timestamp audit for walk-forward runs.

Every stage reports the data it consumed; the audit keeps the latest fiscal
week seen per (origin, stage). Any week after the origin is a leak.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..core import FiscalCalendar, Invoice, WeeklySeries


@dataclass(frozen=True)
class Access:
    origin: int
    stage: str
    latest_week: int | None
    n_items: int

    @property
    def leaked(self) -> bool:
        return self.latest_week is not None and self.latest_week > self.origin


class LeakageAudit:
    def __init__(self, cal: FiscalCalendar):
        self.cal = cal
        self.accesses: list[Access] = []

    def record(self, origin: int, stage: str, invoices: Iterable[Invoice] = (),
               series: Iterable[WeeklySeries] = (), weeks: Iterable[int] = ()) -> None:
        latest: int | None = None
        n = 0

        def bump(w: int) -> None:
            nonlocal latest
            latest = w if latest is None else max(latest, w)

        for inv in invoices:
            n += 1
            bump(self.cal.absolute_week(inv.issue_date))
            if inv.payment_date is not None:
                bump(self.cal.absolute_week(inv.payment_date))
        for s in series:
            if len(s):
                n += 1
                bump(s.end)
        for w in weeks:
            n += 1
            bump(int(w))
        self.accesses.append(Access(origin, stage, latest, n))

    @property
    def violations(self) -> list[Access]:
        return [a for a in self.accesses if a.leaked]

    def stages(self) -> list[str]:
        return sorted({a.stage for a in self.accesses})

    def summary(self) -> dict:
        return {
            "n_accesses": len(self.accesses),
            "stages": self.stages(),
            "violations": [
                {"origin": a.origin, "stage": a.stage, "latest_week": a.latest_week} for a in self.violations
            ],
        }
