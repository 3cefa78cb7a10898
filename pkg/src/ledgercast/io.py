"""CSV interchange for invoices and support series.

invoices.csv::

    invoice_id,customer_id,segment,issue_date,due_date,amount,payment_date,payment_terms_days

``payment_date`` is empty for open invoices. Dates are ISO-8601, amounts use
a decimal point and no thousands separators.

support.csv::

    date,series_name,value

Rows are aggregated to fiscal weeks on read, so daily or weekly rows both work.
"""

from __future__ import annotations

import csv
from datetime import date
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Mapping

from .core import FiscalCalendar, Invoice, WeeklySeries
from .errors import DataError, IngestionError, LedgercastError

INVOICE_COLUMNS = (
    "invoice_id", "customer_id", "segment", "issue_date", "due_date",
    "amount", "payment_date", "payment_terms_days",
)
SUPPORT_COLUMNS = ("date", "series_name", "value")


def write_invoices_csv(invoices: Iterable[Invoice], path: str | Path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(INVOICE_COLUMNS)
            for inv in invoices:
                writer.writerow([
                    inv.invoice_id, inv.customer_id, inv.segment.value,
                    inv.issue_date.isoformat(), inv.due_date.isoformat(),
                    f"{inv.amount:.2f}",
                    inv.payment_date.isoformat() if inv.payment_date else "",
                    inv.payment_terms_days,
                ])
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    return path


def write_support_csv(support: Mapping[str, WeeklySeries], cal: FiscalCalendar, path: str | Path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SUPPORT_COLUMNS)
            for name in sorted(support):
                for week, value in support[name].entries:
                    writer.writerow([cal.first_date_of(week).isoformat(), name, repr(value)])
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    return path


def _open_rows(path: Path, expected: tuple[str, ...]):
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != expected:
        fh.close()
        raise IngestionError(f"{path.name}: bad header", [f"expected {','.join(expected)}, got {header}"])
    return fh, reader


def read_invoices_csv(path: str | Path) -> list[Invoice]:
    path = Path(path)
    fh, reader = _open_rows(path, INVOICE_COLUMNS)
    invoices, problems, seen = [], [], set()
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(INVOICE_COLUMNS):
                problems.append(f"line {lineno}: expected {len(INVOICE_COLUMNS)} fields, got {len(row)}")
                continue
            inv_id, cust, seg, issue, due, amount, paid, terms = (c.strip() for c in row)
            try:
                inv = Invoice(
                    invoice_id=inv_id,
                    customer_id=cust,
                    segment=seg,
                    issue_date=date.fromisoformat(issue),
                    due_date=date.fromisoformat(due),
                    amount=Decimal(amount),
                    payment_date=date.fromisoformat(paid) if paid else None,
                    payment_terms_days=int(terms),
                )
            except (ValueError, InvalidOperation, LedgercastError) as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            if inv_id in seen:
                problems.append(f"line {lineno}: duplicate invoice_id {inv_id}")
                continue
            seen.add(inv_id)
            invoices.append(inv)
    if problems:
        raise IngestionError(f"{path.name}: {len(problems)} invalid row(s)", problems)
    return invoices


def read_support_csv(path: str | Path, cal: FiscalCalendar) -> dict[str, WeeklySeries]:
    path = Path(path)
    fh, reader = _open_rows(path, SUPPORT_COLUMNS)
    rows: dict[str, list[tuple[int, float]]] = {}
    problems = []
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                problems.append(f"line {lineno}: expected 3 fields, got {len(row)}")
                continue
            try:
                day = date.fromisoformat(row[0].strip())
                value = float(row[2])
                week = cal.absolute_week(day)
            except (ValueError, LedgercastError) as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            name = row[1].strip()
            if not name:
                problems.append(f"line {lineno}: empty series_name")
                continue
            rows.setdefault(name, []).append((week, value))
    if problems:
        raise IngestionError(f"{path.name}: {len(problems)} invalid row(s)", problems)
    return {name: WeeklySeries.from_entries(entries) for name, entries in sorted(rows.items())}
