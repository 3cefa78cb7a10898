"""Rolling-window collections that fold predicted closures of open invoices
into the realized weekly series.

At an anchor week the books are cut at the anchor's last day. Payments on or
before the cut are realized. Invoices issued by then but still unpaid get a
predicted close date and are booked into that week, provided it falls no
later than ``anchor + window_len``. A prediction that is already in the past
(the invoice is overdue by the model's own estimate) is booked into the
anchor week itself, which then mixes realized and predicted money.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import date
from decimal import Decimal
from typing import Protocol, Sequence

import numpy as np

from .core import FiscalCalendar, Invoice, WeeklySeries, weekly_totals
from .errors import RangeError, ValidationError


class Provenance(str, enum.Enum):
    REALIZED = "realized"
    PREDICTED = "predicted"
    MIXED = "mixed"


class CloseDatePredictor(Protocol):
    def close_dates(self, invoices: Sequence[Invoice]) -> dict[str, date]: ...


@dataclass(frozen=True)
class WindowedRegressor:
    window_len: int
    anchor_week: int
    series: WeeklySeries
    provenance: tuple[Provenance, ...]

    def provenance_of(self, week: int) -> Provenance:
        if week not in self.series:
            raise RangeError(f"week {week} outside {self.series!r}")
        return self.provenance[week - self.series.start]

    @property
    def predicted_total(self) -> float:
        return float(sum(v for v, p in zip(self.series.values, self.provenance) if p is not Provenance.REALIZED))


def open_at(invoices: Sequence[Invoice], cutoff: date) -> list[Invoice]:
    """Invoices issued on or before ``cutoff`` and not yet paid at ``cutoff``."""
    return [
        inv for inv in invoices
        if inv.issue_date <= cutoff and (inv.payment_date is None or inv.payment_date > cutoff)
    ]


def simulate_partial(invoices: Sequence[Invoice], predictor: CloseDatePredictor, anchor_week: int,
                     window_len: int, cal: FiscalCalendar, first_week: int | None = None) -> WindowedRegressor:
    """Realized collections up to ``anchor_week`` plus predicted closures after it.

    The series covers ``first_week`` (default: the first week with a payment)
    through ``anchor_week + window_len``. Payments dated after the anchor are
    treated as unknown even if the invoices carry them.
    """
    if window_len < 0:
        raise ValidationError("window_len must be >= 0")
    cutoff = cal.last_date_of(anchor_week)
    realized = [(inv.payment_date, inv.amount) for inv in invoices
                if inv.payment_date is not None and inv.payment_date <= cutoff]
    if first_week is None:
        if not realized:
            raise RangeError(f"no payments on or before anchor week {anchor_week}")
        first_week = cal.absolute_week(min(d for d, _ in realized))
    if anchor_week < first_week:
        raise RangeError(f"anchor week {anchor_week} precedes first data week {first_week}")
    end = anchor_week + window_len

    realized_tot = weekly_totals(realized, cal).totals
    predicted_tot: dict[int, Decimal] = {}
    pending = open_at(invoices, cutoff)
    if pending and window_len > 0:
        dates = predictor.close_dates(pending)
        for inv in pending:
            week = max(cal.absolute_week(dates[inv.invoice_id]), anchor_week)
            if week <= end:  # later closures tail off the window
                predicted_tot[week] = predicted_tot.get(week, Decimal(0)) + inv.amount

    n = end - first_week + 1
    values = np.zeros(n)
    prov = []
    for i in range(n):
        w = first_week + i
        r, p = realized_tot.get(w), predicted_tot.get(w)
        if p is None:
            values[i] = float(r) if r is not None else 0.0
            prov.append(Provenance.REALIZED if w <= anchor_week else Provenance.PREDICTED)
        else:
            values[i] = float(p + (r or Decimal(0)))
            prov.append(Provenance.MIXED if r is not None else Provenance.PREDICTED)
    return WindowedRegressor(window_len, anchor_week, WeeklySeries(first_week, values), tuple(prov))


def rollback_anchors(anchor_week: int, window_len: int, n_windows: int, data_start: int = 1) -> list[int]:
    """``[anchor, anchor - L, anchor - 2L, ...]`` stopping before ``data_start``."""
    if n_windows < 1:
        raise ValidationError("n_windows must be >= 1")
    if window_len < 1:
        raise ValidationError("window_len must be >= 1")
    return [a for a in (anchor_week - k * window_len for k in range(n_windows)) if a >= data_start]


def build_regressors(invoices: Sequence[Invoice], predictor: CloseDatePredictor, cal: FiscalCalendar,
                     anchor_week: int, short_len: int = 4, long_len: int = 13,
                     first_week: int | None = None) -> tuple[WindowedRegressor, WindowedRegressor]:
    """Short- and long-window regressors at ``anchor_week``."""
    return (
        simulate_partial(invoices, predictor, anchor_week, short_len, cal, first_week),
        simulate_partial(invoices, predictor, anchor_week, long_len, cal, first_week),
    )


def blocked_history(invoices: Sequence[Invoice], predictor: CloseDatePredictor, cal: FiscalCalendar,
                    origin: int, window_len: int, horizon: int, first_week: int) -> WeeklySeries:
    """Window regressor over history and the next ``horizon`` weeks.

    History is cut into blocks ``(a, a + horizon]`` with ``a = origin - k *
    horizon``. Each block holds what a simulation anchored at ``a`` would have
    put there: predicted closures of the invoices open at ``a``, and zero past
    ``a + window_len``. The block after ``origin`` is the live forecast. Each
    block therefore carries the same lead structure as the forecast block.
    The series starts at the first week of the earliest block whose anchor is
    on or after ``first_week``.
    """
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    anchors = rollback_anchors(origin, horizon, origin, first_week)
    if not anchors:
        raise RangeError(f"origin {origin} precedes first data week {first_week}")
    lo = anchors[-1] + 1
    values = np.zeros(origin + horizon - lo + 1)
    for a in anchors:
        sim = simulate_partial(invoices, predictor, a, window_len, cal, first_week).series
        span = np.arange(a + 1, a + horizon + 1)
        values[span - lo] = [sim.get(int(w)) for w in span]
    return WeeklySeries(lo, values)
