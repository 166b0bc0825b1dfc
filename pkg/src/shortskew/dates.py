"""Day-resolution date helpers and calendar window arithmetic.

All dates are carried as ``numpy.datetime64`` values with day resolution.
"""

from __future__ import annotations

import datetime as _dt

import numpy as np

from .errors import DomainError

DAY = "datetime64[D]"

_WINDOW_MONTHS = {"quarter": 3, "half_year": 6, "year": 12}


def to_day(value) -> np.datetime64:
    """Coerce a string, ``date``, ``datetime`` or datetime64 to ``datetime64[D]``."""
    if isinstance(value, np.datetime64):
        return value.astype(DAY)
    if isinstance(value, _dt.datetime):
        value = value.date()
    if isinstance(value, _dt.date):
        return np.datetime64(value.isoformat(), "D")
    if isinstance(value, str):
        return np.datetime64(value.strip().replace("/", "-"), "D")
    raise TypeError(f"cannot interpret {value!r} as a date")


def to_days(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype.kind == "M":
        return arr.astype(DAY)
    return np.array([to_day(v) for v in arr], dtype=DAY)


def month_floor(day: np.datetime64, months: int) -> np.datetime64:
    """First day of the ``months``-long calendar block containing ``day``.

    Blocks are aligned to January, so ``months=3`` gives calendar quarters.
    """
    m = to_day(day).astype("datetime64[M]").astype(np.int64)
    return np.datetime64(int(m - m % months), "M").astype(DAY)


def add_months(day: np.datetime64, months: int) -> np.datetime64:
    """Shift a first-of-month date by whole months."""
    m = to_day(day).astype("datetime64[M]")
    return (m + np.timedelta64(months, "M")).astype(DAY)


def window_months(windowing: str) -> int:
    try:
        return _WINDOW_MONTHS[windowing]
    except KeyError:
        raise DomainError(
            f"unknown windowing {windowing!r}; expected one of {sorted(_WINDOW_MONTHS)}"
        ) from None


def calendar_windows(start, end, windowing: str = "quarter") -> list[tuple[np.datetime64, np.datetime64]]:
    """Non-overlapping calendar windows covering ``[start, end]``.

    Returns ``(first_day, last_day)`` pairs, both inclusive, for every calendar
    quarter (or half-year) that intersects the period. Windows are clipped to
    the period, so a period ending mid-window yields a final partial window.

    >>> len(calendar_windows("2006-01-01", "2014-03-31", "quarter"))
    33
    >>> len(calendar_windows("2006-01-01", "2014-03-31", "half_year"))
    17
    """
    start, end = to_day(start), to_day(end)
    if end < start:
        raise DomainError(f"period end {end} precedes start {start}")
    months = window_months(windowing)
    out = []
    lo = month_floor(start, months)
    while lo <= end:
        hi = add_months(lo, months)
        out.append((max(lo, start), min(hi - np.timedelta64(1, "D"), end)))
        lo = hi
    return out
