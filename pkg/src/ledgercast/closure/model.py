"""Invoice closure model: feature encoding plus boosted trees on days-to-close."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Any, Iterable, Sequence

import numpy as np

from ..core import SEGMENTS, FiscalCalendar, Invoice, Segment
from ..errors import DataError, StateError, ValidationError
from ..profiles import CustomerProfile, ProfileBook
from .gbt import GbtModel, GbtParams, fit_gbt

FEATURE_VERSION = 1
FEATURE_NAMES: tuple[str, ...] = (
    "amount",
    "payment_terms_days",
    "mean_delay_days",
    "recency_weighted_delay_days",
    "avg_payment",
    "payment_std",
    "recent_speed_to_pay_days",
    "issue_week_in_quarter",
    "is_q4",
    "segment_CSB",
    "segment_Commercial",
    "segment_Enterprise",
    "cold_start",
)
PROFILE_FIELDS = FEATURE_NAMES[2:7]


def encode(invoice: Invoice, profile: CustomerProfile, cal: FiscalCalendar) -> np.ndarray:
    """Feature vector in ``FEATURE_NAMES`` order. Missing profile values stay NaN."""
    if profile.as_of > invoice.issue_date:
        raise ValidationError(
            f"profile as of {profile.as_of} is later than invoice {invoice.invoice_id} issue date"
        )
    seg = invoice.segment
    if not isinstance(seg, Segment) or seg not in SEGMENTS:
        raise ValidationError(f"unknown segment {seg!r}")
    fw = cal.week_of(invoice.issue_date)
    onehot = [1.0 if seg == s else 0.0 for s in SEGMENTS]
    return np.array(
        [float(invoice.amount), float(invoice.payment_terms_days)]
        + [float(getattr(profile, f)) for f in PROFILE_FIELDS]
        + [float(fw.week_in_quarter), 1.0 if fw.quarter == cal.quarters_per_year else 0.0]
        + onehot
        + [1.0 if profile.cold_start else 0.0]
    )


def encode_many(invoices: Sequence[Invoice], book: ProfileBook, cal: FiscalCalendar) -> np.ndarray:
    if not invoices:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.vstack([encode(inv, book.for_invoice(inv), cal) for inv in invoices])


@dataclass
class ClosureModel:
    """Fitted closure model. Predicts days from issue to payment."""

    gbt: GbtModel
    medians: list[float]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    feature_version: int = FEATURE_VERSION
    n_train: int = 0

    def impute(self, X: np.ndarray) -> np.ndarray:
        X = np.array(X, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[None, :]
        bad = ~np.isfinite(X)
        if bad.any():
            X[bad] = np.take(self.medians, np.nonzero(bad)[1])
        return X

    def predict_days(self, X: np.ndarray) -> np.ndarray:
        return self.gbt.predict(self.impute(X))

    def to_dict(self) -> dict[str, Any]:
        return {
            "feature_version": self.feature_version,
            "feature_names": list(self.feature_names),
            "medians": [None if not math.isfinite(m) else m for m in self.medians],
            "n_train": self.n_train,
            "gbt": self.gbt.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ClosureModel:
        if d.get("feature_version") != FEATURE_VERSION:
            raise ValidationError(f"unsupported closure feature version {d.get('feature_version')}")
        return cls(
            gbt=GbtModel.from_dict(d["gbt"]),
            medians=[float("nan") if m is None else float(m) for m in d["medians"]],
            feature_names=tuple(d["feature_names"]),
            feature_version=int(d["feature_version"]),
            n_train=int(d.get("n_train", 0)),
        )


def fit_matrix(X: np.ndarray, y: np.ndarray, params: GbtParams = GbtParams()) -> ClosureModel:
    X = np.asarray(X, dtype=float)
    with np.errstate(all="ignore"):
        medians = [float(np.nanmedian(col)) if np.isfinite(col).any() else 0.0 for col in X.T]
    model = ClosureModel(gbt=None, medians=medians, n_train=len(y))  # type: ignore[arg-type]
    model.gbt = fit_gbt(model.impute(X), y, params)
    return model


def fit(rows: Iterable[tuple[np.ndarray, float]], params: GbtParams = GbtParams()) -> ClosureModel:
    """Fit on (feature vector, days_to_close) rows."""
    rows = list(rows)
    if not rows:
        raise DataError("no training rows for the closure model")
    X = np.vstack([r[0] for r in rows])
    y = np.array([r[1] for r in rows], dtype=float)
    return fit_matrix(X, y, params)


def fit_from_invoices(invoices: Sequence[Invoice], book: ProfileBook, cal: FiscalCalendar,
                      params: GbtParams = GbtParams(), cutoff: date | None = None) -> ClosureModel:
    """Train on invoices closed on or before ``cutoff``."""
    closed = [inv for inv in invoices if inv.payment_date is not None
              and (cutoff is None or inv.payment_date <= cutoff)]
    if len(closed) < 2 * params.min_samples_leaf:
        raise DataError(f"only {len(closed)} closed invoices; closure model needs {2 * params.min_samples_leaf}")
    X = encode_many(closed, book, cal)
    y = np.array([inv.days_to_close for inv in closed], dtype=float)
    return fit_matrix(X, y, params)


def close_date_from_days(invoice: Invoice, days: float) -> date:
    """issue_date + round(max(0, days)); half-days round up."""
    d = max(0.0, float(days))
    return invoice.issue_date + timedelta(days=int(math.floor(d + 0.5)))


def predict_close_date(model: ClosureModel | None, invoice: Invoice, profile: CustomerProfile,
                       cal: FiscalCalendar) -> date:
    if model is None or getattr(model, "gbt", None) is None:
        raise StateError("closure model is not fitted")
    days = model.predict_days(encode(invoice, profile, cal)[None, :])[0]
    return close_date_from_days(invoice, days)


def predict_close_dates(model: ClosureModel, invoices: Sequence[Invoice], book: ProfileBook,
                        cal: FiscalCalendar) -> dict[str, date]:
    if model is None or getattr(model, "gbt", None) is None:
        raise StateError("closure model is not fitted")
    if not invoices:
        return {}
    days = model.predict_days(encode_many(invoices, book, cal))
    return {inv.invoice_id: close_date_from_days(inv, d) for inv, d in zip(invoices, days)}


@dataclass
class ClosurePredictor:
    """Adapter giving windows a uniform ``close_dates(invoices)`` call.

    Wraps either a fitted :class:`ClosureModel` (with its profile book) or a
    fixed mapping of invoice id to close date, which is how tests plug in
    perfect foresight.
    """

    model: ClosureModel | None = None
    book: ProfileBook | None = None
    cal: FiscalCalendar | None = None
    fixed: dict[str, date] = field(default_factory=dict)

    def close_dates(self, invoices: Sequence[Invoice]) -> dict[str, date]:
        missing = [inv for inv in invoices if inv.invoice_id not in self.fixed]
        if missing:
            if self.model is None:
                raise StateError("no closure model and no fixed close date for some invoices")
            self.fixed.update(predict_close_dates(self.model, missing, self.book, self.cal))
        return {inv.invoice_id: self.fixed[inv.invoice_id] for inv in invoices}
