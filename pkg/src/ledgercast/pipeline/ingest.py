from __future__ import annotations

from pathlib import Path

from ..core import FiscalCalendar
from ..dataset import Dataset
from ..errors import ConfigError, DataError
from ..io import read_invoices_csv, read_support_csv


def ingest(invoices_csv: str | Path, support_csv: str | Path | None, cal: FiscalCalendar,
           require_support: bool = True) -> Dataset:
    """Read and validate both CSV files into a :class:`Dataset`.

    Only the pure univariate baseline may run without support data.
    """
    invoices = read_invoices_csv(invoices_csv)
    if not invoices:
        raise DataError(f"{Path(invoices_csv).name}: no invoices")
    support = read_support_csv(support_csv, cal) if support_csv is not None else {}
    if require_support and not support:
        raise DataError("at least one support series required")
    return Dataset(tuple(invoices), support, cal)


def ingest_config(config) -> Dataset:
    d = config.data
    if not d.invoices:
        raise ConfigError("data.invoices is not set")
    pure = config.variant == "h1" and config.baseline.pure
    if not d.support and not pure:
        raise ConfigError("data.support is not set")
    for p in (d.invoices, d.support):
        if p and not Path(p).exists():
            raise ConfigError(f"data file {p} does not exist")
    return ingest(d.invoices, d.support, config.calendar.build(), require_support=not pure)
