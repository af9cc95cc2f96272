"""Daily adjusted-close price files and their validation.

Input files are UTF-8 CSV with the exact header ``date,adj_close``, ISO dates
and ``.`` as the decimal separator. Weekend/holiday gaps are fine; the rest
of the toolkit works on the index axis, not the calendar.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HEADER = ("date", "adj_close")


class DataError(ValueError):
    """Raised when an input file or series violates the data contract."""


@dataclass(frozen=True)
class PriceSeries:
    ticker: str
    dates: tuple[dt.date, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.array(self.closes, dtype=np.float64)
        closes.setflags(write=False)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", tuple(self.dates))

    def __len__(self) -> int:
        return len(self.closes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PriceSeries):
            return NotImplemented
        return (
            self.ticker == other.ticker
            and self.dates == other.dates
            and np.array_equal(self.closes, other.closes)
        )

    def __hash__(self):
        return hash((self.ticker, self.dates, self.closes.tobytes()))

    def with_closes(self, closes) -> "PriceSeries":
        return PriceSeries(self.ticker, self.dates, np.asarray(closes, dtype=np.float64))


@dataclass(frozen=True)
class ValidationError:
    row: int
    kind: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    row_count: int
    errors: list[ValidationError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_series(series: PriceSeries) -> ValidationReport:
    """Enumerate every invariant violation of ``series``.

    Row indices in the report are 0-based positions in the series.
    """
    errors = []
    n_dates, n_closes = len(series.dates), len(series.closes)
    if n_dates != n_closes:
        errors.append(ValidationError(
            -1, "length_mismatch", f"{n_dates} dates but {n_closes} closes"))
    n = min(n_dates, n_closes)
    if n < 2:
        errors.append(ValidationError(-1, "too_short", f"need at least 2 rows, got {n}"))
    for i in range(n):
        c = float(series.closes[i])
        if not math.isfinite(c):
            errors.append(ValidationError(i, "non_finite_price", f"non-finite price at index {i}"))
        elif c <= 0:
            errors.append(ValidationError(i, "non_positive_price", f"non-positive price at index {i}"))
        if i > 0:
            prev, cur = series.dates[i - 1], series.dates[i]
            if cur == prev:
                errors.append(ValidationError(i, "duplicate_date", f"duplicate date {cur} at index {i}"))
            elif cur < prev:
                errors.append(ValidationError(
                    i, "non_increasing_date", f"dates not strictly increasing at index {i}"))
    return ValidationReport(row_count=n_closes, errors=errors)


def parse_price_csv(path, ticker: str | None = None) -> PriceSeries:
    """Read a ``date,adj_close`` file into a validated :class:`PriceSeries`.

    Errors name the 1-based data row (the header is row 0). The ticker
    defaults to the file stem.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise DataError(f"malformed header {header!r}; expected 'date,adj_close'")
        dates: list[dt.date] = []
        closes: list[float] = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"expected 2 fields at row {row_no}, got {len(row)}")
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"unparsable date {row[0]!r} at row {row_no}") from None
            try:
                price = float(row[1])
            except ValueError:
                raise DataError(f"unparsable number {row[1]!r} at row {row_no}") from None
            if not math.isfinite(price):
                raise DataError(f"non-finite price at row {row_no}")
            if price <= 0:
                raise DataError(f"non-positive price at row {row_no}")
            if dates and day <= dates[-1]:
                raise DataError(f"dates not strictly increasing at row {row_no}")
            dates.append(day)
            closes.append(price)
    if len(closes) < 2:
        raise DataError(f"need at least 2 data rows, got {len(closes)}")
    return PriceSeries(ticker or path.stem, dates, np.array(closes))


def write_price_csv(series: PriceSeries, path) -> None:
    # repr() of a float round-trips exactly
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("date,adj_close\n")
        for day, close in zip(series.dates, series.closes):
            fh.write(f"{day.isoformat()},{float(close)!r}\n")
