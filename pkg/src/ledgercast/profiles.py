"""Customer behaviour features computed from closed invoices."""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence

import numpy as np

from .core import Invoice, Segment
from .errors import MissingDataError

RECENT_WINDOW_DAYS = 90
DECAY_HALF_LIFE_DAYS = 90.0
DECAY_RATE = math.log(2.0) / DECAY_HALF_LIFE_DAYS


@dataclass(frozen=True)
class CustomerProfile:
    customer_id: str
    segment: Segment
    mean_delay_days: float
    recency_weighted_delay_days: float
    avg_payment: float
    payment_std: float
    recent_speed_to_pay_days: float
    n_invoices: int
    as_of: date
    cold_start: bool = False


def payment_delay(invoice: Invoice) -> int:
    """Days between payment and due date; negative means paid early."""
    if invoice.payment_date is None:
        raise MissingDataError(f"invoice {invoice.invoice_id} is open; no payment delay")
    return (invoice.payment_date - invoice.due_date).days


def average_payment(payments: Sequence[float]) -> float:
    if len(payments) == 0:
        raise MissingDataError("average_payment needs at least one payment")
    return math.fsum(float(p) for p in payments) / len(payments)


def payment_std(payments: Sequence[float]) -> float:
    """Population standard deviation (divisor N)."""
    if len(payments) == 0:
        raise MissingDataError("payment_std needs at least one payment")
    mean = average_payment(payments)
    return math.sqrt(math.fsum((float(p) - mean) ** 2 for p in payments) / len(payments))


def recent_speed_to_pay(invoices: Iterable[Invoice], as_of: date | None = None) -> float:
    """Mean delay over payments in the 90 days up to the latest payment.

    The window is anchored at the customer's own most recent payment, not at
    ``as_of``; ``as_of`` only filters out payments that have not happened yet.
    """
    closed = [inv for inv in invoices if inv.payment_date is not None
              and (as_of is None or inv.payment_date <= as_of)]
    if not closed:
        raise MissingDataError("recent_speed_to_pay needs a closed invoice")
    latest = max(inv.payment_date for inv in closed)
    recent = [payment_delay(inv) for inv in closed if (latest - inv.payment_date).days < RECENT_WINDOW_DAYS]
    return math.fsum(recent) / len(recent)


def _profile_from_arrays(customer_id, segment, as_of, pay_ord, delays, amounts) -> CustomerProfile:
    age = as_of.toordinal() - pay_ord
    weights = np.exp(-DECAY_RATE * age)
    recent = (pay_ord.max() - pay_ord) < RECENT_WINDOW_DAYS
    mean_amt = float(np.mean(amounts))
    return CustomerProfile(
        customer_id=customer_id,
        segment=segment,
        mean_delay_days=float(np.mean(delays)),
        recency_weighted_delay_days=float(np.sum(weights * delays) / np.sum(weights)),
        avg_payment=mean_amt,
        payment_std=float(np.sqrt(np.mean((amounts - mean_amt) ** 2))),
        recent_speed_to_pay_days=float(np.mean(delays[recent])),
        n_invoices=int(len(delays)),
        as_of=as_of,
    )


def cold_start_profile(customer_id: str, segment: Segment, as_of: date,
                       fallback: CustomerProfile | None = None) -> CustomerProfile:
    """Profile for a customer without closed history.

    Values come from ``fallback`` (normally segment medians); without one they
    are NaN and left to downstream imputation.
    """
    nan = float("nan")
    src = fallback
    return CustomerProfile(
        customer_id=customer_id,
        segment=segment,
        mean_delay_days=src.mean_delay_days if src else nan,
        recency_weighted_delay_days=src.recency_weighted_delay_days if src else nan,
        avg_payment=src.avg_payment if src else nan,
        payment_std=src.payment_std if src else nan,
        recent_speed_to_pay_days=src.recent_speed_to_pay_days if src else nan,
        n_invoices=0,
        as_of=as_of,
        cold_start=True,
    )


def build_profile(invoices: Sequence[Invoice], as_of: date,
                  fallback: CustomerProfile | None = None) -> CustomerProfile:
    """Profile of one customer from invoices paid on or before ``as_of``."""
    if not invoices:
        raise MissingDataError("build_profile needs the customer's invoices")
    customer_id, segment = invoices[0].customer_id, invoices[0].segment
    closed = [inv for inv in invoices if inv.payment_date is not None and inv.payment_date <= as_of]
    if not closed:
        return cold_start_profile(customer_id, segment, as_of, fallback)
    return _profile_from_arrays(
        customer_id, segment, as_of,
        np.array([inv.payment_date.toordinal() for inv in closed]),
        np.array([payment_delay(inv) for inv in closed], dtype=float),
        np.array([float(inv.amount) for inv in closed]),
    )


class ProfileBook:
    """Point-in-time profiles for every customer of a set of invoices.

    ``at(customer, as_of)`` only looks at payments dated on or before
    ``as_of``; cold-start customers get their segment's median profile over
    the customers that do have history at that date.
    """

    def __init__(self, invoices: Iterable[Invoice]):
        by_customer: dict[str, list[Invoice]] = defaultdict(list)
        self.segments: dict[str, Segment] = {}
        for inv in invoices:
            self.segments.setdefault(inv.customer_id, inv.segment)
            if inv.payment_date is not None:
                by_customer[inv.customer_id].append(inv)
        self._hist = {}
        for cust, invs in by_customer.items():
            invs.sort(key=lambda inv: (inv.payment_date, inv.invoice_id))
            self._hist[cust] = (
                np.array([inv.payment_date.toordinal() for inv in invs]),
                np.array([payment_delay(inv) for inv in invs], dtype=float),
                np.array([float(inv.amount) for inv in invs]),
            )
        self._cache: dict[tuple[str, int], CustomerProfile] = {}
        self._fallback_cache: dict[tuple[Segment, int], CustomerProfile | None] = {}

    def _history_at(self, customer_id: str, day: int):
        hist = self._hist.get(customer_id)
        if hist is None:
            return None
        k = bisect_right(hist[0], day)
        if k == 0:
            return None
        return hist[0][:k], hist[1][:k], hist[2][:k]

    def _own_profile(self, customer_id: str, as_of: date) -> CustomerProfile | None:
        key = (customer_id, as_of.toordinal())
        if key in self._cache:
            return self._cache[key]
        hist = self._history_at(customer_id, as_of.toordinal())
        prof = None
        if hist is not None:
            prof = _profile_from_arrays(customer_id, self.segments[customer_id], as_of, *hist)
        self._cache[key] = prof
        return prof

    def segment_fallback(self, segment: Segment, as_of: date) -> CustomerProfile | None:
        key = (segment, as_of.toordinal())
        if key not in self._fallback_cache:
            profs = [
                p for cust, seg in self.segments.items() if seg == segment
                for p in [self._own_profile(cust, as_of)] if p is not None
            ]
            fallback = None
            if profs:
                med = lambda attr: float(np.median([getattr(p, attr) for p in profs]))  # noqa: E731
                fallback = CustomerProfile(
                    customer_id=f"<{segment.value} median>",
                    segment=segment,
                    mean_delay_days=med("mean_delay_days"),
                    recency_weighted_delay_days=med("recency_weighted_delay_days"),
                    avg_payment=med("avg_payment"),
                    payment_std=med("payment_std"),
                    recent_speed_to_pay_days=med("recent_speed_to_pay_days"),
                    n_invoices=0,
                    as_of=as_of,
                )
            self._fallback_cache[key] = fallback
        return self._fallback_cache[key]

    def at(self, customer_id: str, as_of: date, segment: Segment | None = None) -> CustomerProfile:
        prof = self._own_profile(customer_id, as_of)
        if prof is not None:
            return prof
        seg = self.segments.get(customer_id, segment)
        if seg is None:
            raise MissingDataError(f"unknown customer {customer_id} and no segment given")
        return cold_start_profile(customer_id, seg, as_of, self.segment_fallback(seg, as_of))

    def for_invoice(self, invoice: Invoice) -> CustomerProfile:
        """Profile as of the invoice's issue date (never sees later payments)."""
        return self.at(invoice.customer_id, invoice.issue_date, invoice.segment)
