"""Ingestion, validation and calendar alignment of daily market data.

CSV inputs (header row mandatory, UTF-8, ISO-8601 dates)::

    prices.csv    stock_id,date,close
    factors.csv   date,mkt,smb,hml
    turnover.csv  stock_id,date,turnover
    meta.csv      stock_id,industry_code
    events.csv    effective_date,stock_id,action

Prices are assumed to be split/dividend adjusted already.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .dates import DAY, to_day, to_days
from .errors import (
    DomainError,
    DuplicateError,
    EmptyInputError,
    InsufficientDataError,
    SchemaError,
)
from .events import ACTIONS, ShortSaleEvent

logger = logging.getLogger(__name__)

RETURN_KINDS = ("raw", "excess", "normalized")
FACTOR_NAMES = ("mkt", "smb", "hml")

SCHEMAS = {
    "prices": ("stock_id", "date", "close"),
    "factors": ("date",) + FACTOR_NAMES,
    "turnover": ("stock_id", "date", "turnover"),
    "meta": ("stock_id", "industry_code"),
    "events": ("effective_date", "stock_id", "action"),
}


def _frozen(arr, dtype=None) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TradingCalendar:
    dates: np.ndarray

    def __post_init__(self):
        dates = _frozen(to_days(self.dates), DAY)
        if dates.size == 0:
            raise EmptyInputError("trading calendar is empty")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DomainError("trading calendar dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return self.dates.size

    def between(self, start, end) -> np.ndarray:
        """Trading dates in the inclusive range ``[start, end]``."""
        lo, hi = to_day(start), to_day(end)
        return self.dates[(self.dates >= lo) & (self.dates <= hi)]


@dataclass(frozen=True)
class _DatedSeries:
    stock_id: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = _frozen(to_days(self.dates), DAY)
        values = _frozen(self.values, float)
        if dates.shape != values.shape[:1]:
            raise DomainError(f"{self.stock_id}: {dates.size} dates but {values.shape[0]} values")
        if dates.size > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DomainError(f"{self.stock_id}: dates must be strictly increasing")
        object.__setattr__(self, "stock_id", str(self.stock_id))
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.dates.size

    def _mask(self, start, end) -> np.ndarray:
        m = np.ones(self.dates.shape, dtype=bool)
        if start is not None:
            m &= self.dates >= to_day(start)
        if end is not None:
            m &= self.dates <= to_day(end)
        return m


@dataclass(frozen=True)
class PriceSeries(_DatedSeries):
    def __post_init__(self):
        super().__post_init__()
        if np.any(~np.isfinite(self.values)) or np.any(self.values <= 0):
            raise DomainError(f"{self.stock_id}: prices must be finite and strictly positive")

    @property
    def prices(self) -> np.ndarray:
        return self.values


@dataclass(frozen=True)
class TurnoverSeries(_DatedSeries):
    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            raise DomainError(f"{self.stock_id}: turnover must be non-negative")

    def window(self, start=None, end=None) -> "TurnoverSeries":
        m = self._mask(start, end)
        return TurnoverSeries(self.stock_id, self.dates[m], self.values[m])


@dataclass(frozen=True)
class ReturnSeries(_DatedSeries):
    """Daily returns of one stock; ``kind`` is raw, excess or normalized."""

    kind: str = "raw"

    def __post_init__(self):
        super().__post_init__()
        if self.kind not in RETURN_KINDS:
            raise DomainError(f"kind must be one of {RETURN_KINDS}, got {self.kind!r}")

    def window(self, start=None, end=None) -> "ReturnSeries":
        m = self._mask(start, end)
        return ReturnSeries(self.stock_id, self.dates[m], self.values[m], self.kind)

    def with_values(self, values, kind: str | None = None) -> "ReturnSeries":
        return ReturnSeries(self.stock_id, self.dates, values, kind or self.kind)


@dataclass(frozen=True)
class FactorSeries:
    dates: np.ndarray
    values: np.ndarray
    names: tuple[str, ...] = FACTOR_NAMES

    def __post_init__(self):
        dates = _frozen(to_days(self.dates), DAY)
        values = _frozen(np.atleast_2d(np.asarray(self.values, float)).reshape(dates.size, -1))
        if values.shape[1] != len(self.names):
            raise DomainError(f"expected {len(self.names)} factor columns, got {values.shape[1]}")
        if dates.size > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DomainError("factor dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.dates.size


@dataclass(frozen=True)
class StockMeta:
    stock_id: str
    industry_code: str
    listing_date: np.datetime64 | None = None


@dataclass(frozen=True)
class RowDiagnostic:
    """A rejected input row."""

    source: str
    line: int
    stock_id: str | None
    date: str | None
    reason: str


@dataclass(frozen=True)
class Dataset:
    """Immutable, calendar-aligned collection of all inputs."""

    calendar: TradingCalendar
    prices: Mapping[str, PriceSeries]
    factors: FactorSeries
    turnover: Mapping[str, TurnoverSeries] = field(default_factory=dict)
    meta: Mapping[str, StockMeta] = field(default_factory=dict)
    events: tuple[ShortSaleEvent, ...] = ()
    diagnostics: tuple[RowDiagnostic, ...] = ()

    @property
    def stock_ids(self) -> list[str]:
        return sorted(self.prices)

    def gap_counts(self) -> dict[str, int]:
        """Trading days missing between each stock's first and last price."""
        out = {}
        for sid, ps in self.prices.items():
            span = self.calendar.between(ps.dates[0], ps.dates[-1])
            out[sid] = int(span.size - ps.dates.size)
        return out

    def returns(self, method: str = "log") -> dict[str, ReturnSeries]:
        return {
            sid: compute_returns(ps, method)
            for sid, ps in sorted(self.prices.items())
            if len(ps) >= 2
        }

    def canonical_dict(self) -> dict:
        def series(s):
            return [[str(d), repr(float(v))] for d, v in zip(s.dates, s.values)]

        return {
            "calendar": [str(d) for d in self.calendar.dates],
            "prices": {k: series(v) for k, v in sorted(self.prices.items())},
            "factors": {
                "names": list(self.factors.names),
                "rows": [[str(d)] + [repr(float(x)) for x in row]
                         for d, row in zip(self.factors.dates, self.factors.values)],
            },
            "turnover": {k: series(v) for k, v in sorted(self.turnover.items())},
            "meta": {k: [m.industry_code, None if m.listing_date is None else str(m.listing_date)]
                     for k, m in sorted(self.meta.items())},
            "events": [[str(e.effective_date), e.stock_id, e.action] for e in self.events],
            "diagnostics": [[d.source, d.line, d.stock_id, d.date, d.reason] for d in self.diagnostics],
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":")).encode()

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()


# --------------------------------------------------------------------------- #
# ingestion

# optional inputs may legitimately hold a header and nothing else
_MAY_BE_EMPTY = ("turnover", "meta", "events")


def _read_table(path, kind: str) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyInputError(f"{path}: file is empty") from None
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in SCHEMAS[kind] if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing required column(s) {missing} for {kind}.csv")
    if frame.empty and kind not in _MAY_BE_EMPTY:
        raise EmptyInputError(f"{path}: no data rows")
    for col in frame.columns:
        frame[col] = frame[col].str.strip()
    # header is line 1
    frame["_line"] = np.arange(2, len(frame) + 2)
    return frame


def _parse_dates(frame: pd.DataFrame, col: str) -> pd.Series:
    return pd.to_datetime(frame[col], format="%Y-%m-%d", errors="coerce")


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.nan


def _parse_floats(frame: pd.DataFrame, col: str) -> pd.Series:
    # float() is correctly rounded; pandas' fast parser can be off by an ulp,
    # which would break bit-exact CSV round trips
    return frame[col].map(_to_float).astype(float)


def _reject(diags: list, source: str, rows: pd.DataFrame, reason: str, date_col: str = "date") -> None:
    for _, row in rows.iterrows():
        diags.append(RowDiagnostic(
            source=source,
            line=int(row["_line"]),
            stock_id=row.get("stock_id") or None,
            date=row.get(date_col) or None,
            reason=reason,
        ))


def _check_duplicates(frame: pd.DataFrame, keys: list[str], source: str) -> None:
    dup = frame.duplicated(subset=keys, keep="first")
    if dup.any():
        row = frame.loc[dup].iloc[0]
        key = ", ".join(f"{k}={row[k]}" for k in keys)
        raise DuplicateError(f"{source}: duplicate key ({key}) at line {int(row['_line'])}")


def _dated_series(frame: pd.DataFrame, value_col: str, cls):
    out = {}
    for sid, grp in frame.sort_values(["stock_id", "_date"]).groupby("stock_id", sort=True):
        out[sid] = cls(sid, grp["_date"].to_numpy().astype(DAY), grp[value_col].to_numpy())
    return out


def _load_prices(path, diags) -> dict[str, PriceSeries]:
    frame = _read_table(path, "prices")
    frame["_date"] = _parse_dates(frame, "date")
    frame["_close"] = _parse_floats(frame, "close")
    bad_date = frame["_date"].isna()
    _reject(diags, "prices", frame[bad_date], "unparseable date")
    frame = frame[~bad_date]
    bad_px = ~(np.isfinite(frame["_close"]) & (frame["_close"] > 0))
    _reject(diags, "prices", frame[bad_px], "non-positive or non-numeric price")
    frame = frame[~bad_px]
    _check_duplicates(frame, ["stock_id", "date"], "prices")
    if frame.empty:
        raise EmptyInputError(f"{path}: no valid price rows")
    return _dated_series(frame, "_close", PriceSeries)


def _load_factors(path, diags) -> FactorSeries:
    frame = _read_table(path, "factors")
    frame["_date"] = _parse_dates(frame, "date")
    bad = frame["_date"].isna()
    _reject(diags, "factors", frame[bad], "unparseable date")
    frame = frame[~bad]
    vals = np.column_stack([_parse_floats(frame, c).to_numpy(float) for c in FACTOR_NAMES]) \
        if len(frame) else np.empty((0, 3))
    bad = ~np.isfinite(vals).all(axis=1)
    _reject(diags, "factors", frame[bad], "non-numeric factor value")
    frame, vals = frame[~bad], vals[~bad]
    _check_duplicates(frame, ["date"], "factors")
    order = np.argsort(frame["_date"].to_numpy(), kind="stable")
    return FactorSeries(frame["_date"].to_numpy().astype(DAY)[order], vals[order])


def _load_turnover(path, diags) -> dict[str, TurnoverSeries]:
    frame = _read_table(path, "turnover")
    frame["_date"] = _parse_dates(frame, "date")
    frame["_to"] = _parse_floats(frame, "turnover")
    bad = frame["_date"].isna()
    _reject(diags, "turnover", frame[bad], "unparseable date")
    frame = frame[~bad]
    bad = ~(np.isfinite(frame["_to"]) & (frame["_to"] >= 0))
    _reject(diags, "turnover", frame[bad], "negative or non-numeric turnover")
    frame = frame[~bad]
    _check_duplicates(frame, ["stock_id", "date"], "turnover")
    return _dated_series(frame, "_to", TurnoverSeries)


def _load_meta(path, industries) -> dict[str, StockMeta]:
    frame = _read_table(path, "meta")
    _check_duplicates(frame, ["stock_id"], "meta")
    has_listing = "listing_date" in frame.columns
    allowed = None if industries is None else {str(c) for c in industries}
    out = {}
    for _, row in frame.iterrows():
        code = row["industry_code"]
        if allowed is not None and code not in allowed:
            raise SchemaError(f"meta line {int(row['_line'])}: industry_code {code!r} "
                              f"not in configured set {sorted(allowed)}")
        listing = to_day(row["listing_date"]) if has_listing and row["listing_date"] else None
        out[row["stock_id"]] = StockMeta(row["stock_id"], code, listing)
    return out


def _load_events(path, diags) -> tuple[ShortSaleEvent, ...]:
    frame = _read_table(path, "events")
    frame["_date"] = _parse_dates(frame, "effective_date")
    bad = frame["_date"].isna()
    _reject(diags, "events", frame[bad], "unparseable date", date_col="effective_date")
    frame = frame[~bad]
    frame["action"] = frame["action"].str.lower()
    bad = ~frame["action"].isin(ACTIONS)
    _reject(diags, "events", frame[bad], "action must be add or delete", date_col="effective_date")
    frame = frame[~bad]
    _check_duplicates(frame, ["effective_date", "stock_id", "action"], "events")
    return tuple(
        ShortSaleEvent(d, s, a)
        for d, s, a in zip(frame["_date"].to_numpy().astype(DAY), frame["stock_id"], frame["action"])
    )


def ingest_dataset(price_file, factor_file, turnover_file=None, meta_file=None,
                   events_file=None, industries: Iterable[str] | None = None) -> Dataset:
    """Read and validate the CSV inputs into an immutable :class:`Dataset`.

    Rows with unparseable dates or non-positive prices are dropped and listed
    in ``Dataset.diagnostics``; structural problems raise.

    Raises
    ------
    SchemaError
        A required column is missing.
    DuplicateError
        A (stock_id, date) key appears twice.
    EmptyInputError
        A file has no data rows.
    """
    diags: list[RowDiagnostic] = []
    prices = _load_prices(price_file, diags)
    factors = _load_factors(factor_file, diags)
    turnover = _load_turnover(turnover_file, diags) if turnover_file else {}
    meta = _load_meta(meta_file, industries) if meta_file else {}
    events = _load_events(events_file, diags) if events_file else ()

    all_dates = np.unique(np.concatenate(
        [ps.dates for ps in prices.values()] + [factors.dates]
    ))
    calendar = TradingCalendar(all_dates)
    for d in diags:
        logger.warning("rejected %s line %d (%s, %s): %s", d.source, d.line, d.stock_id, d.date, d.reason)
    return Dataset(calendar, prices, factors, turnover, meta, events, tuple(diags))


def load_dataset_dir(directory, industries=None) -> Dataset:
    """Ingest ``prices.csv``, ``factors.csv`` etc. from one directory."""
    d = Path(directory)
    opt = lambda name: d / name if (d / name).exists() else None  # noqa: E731
    return ingest_dataset(d / "prices.csv", d / "factors.csv", opt("turnover.csv"),
                          opt("meta.csv"), opt("events.csv"), industries=industries)


def write_dataset(dataset: Dataset, directory) -> dict[str, Path]:
    """Write a dataset back out in the ingestion CSV schemas."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {name: d / f"{name}.csv" for name in SCHEMAS}

    def dump(name, header, rows):
        with open(paths[name], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    dump("prices", SCHEMAS["prices"], (
        (sid, str(dt), repr(float(p)))
        for sid, ps in sorted(dataset.prices.items()) for dt, p in zip(ps.dates, ps.values)
    ))
    dump("factors", SCHEMAS["factors"], (
        [str(dt)] + [repr(float(x)) for x in row]
        for dt, row in zip(dataset.factors.dates, dataset.factors.values)
    ))
    dump("turnover", SCHEMAS["turnover"], (
        (sid, str(dt), repr(float(v)))
        for sid, ts in sorted(dataset.turnover.items()) for dt, v in zip(ts.dates, ts.values)
    ))
    dump("meta", SCHEMAS["meta"], ((m.stock_id, m.industry_code) for _, m in sorted(dataset.meta.items())))
    dump("events", SCHEMAS["events"], (
        (str(e.effective_date), e.stock_id, e.action) for e in dataset.events
    ))
    return paths


# --------------------------------------------------------------------------- #
# returns

def compute_returns(prices: PriceSeries, method: str = "log") -> ReturnSeries:
    """Daily returns from consecutive available prices.

    Returns across a trading halt span the gap. The output is dated at the
    later price and has one fewer observation than ``prices``.
    """
    if len(prices) < 2:
        raise InsufficientDataError(f"{prices.stock_id}: need at least 2 prices, got {len(prices)}")
    p = prices.values
    if method == "log":
        r = np.log(p[1:] / p[:-1])
    elif method == "simple":
        r = p[1:] / p[:-1] - 1.0
    else:
        raise DomainError(f"method must be 'log' or 'simple', got {method!r}")
    return ReturnSeries(prices.stock_id, prices.dates[1:], r, "raw")


def aggregate_returns(r: ReturnSeries, k: int) -> ReturnSeries:
    """Sum non-overlapping blocks of ``k`` log returns; a trailing partial block is dropped.

    Each aggregated return is dated at the last day of its block.
    """
    if int(k) != k or k < 1:
        raise DomainError(f"interval length must be a positive integer, got {k}")
    k = int(k)
    if k == 1:
        return r
    n = len(r) // k
    vals = r.values[: n * k].reshape(n, k).sum(axis=1)
    dates = r.dates[k - 1: n * k: k]
    return ReturnSeries(r.stock_id, dates, vals, r.kind)


def write_returns_csv(series: Mapping[str, ReturnSeries], path, value_name: str = "value") -> Path:
    """Long-format ``stock_id,date,<value_name>`` table of several return series."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("stock_id", "date", value_name))
        for sid, s in sorted(series.items()):
            w.writerows((sid, str(d), repr(float(v))) for d, v in zip(s.dates, s.values))
    return path


def read_returns_csv(path, kind: str) -> dict[str, ReturnSeries]:
    frame = pd.read_csv(path, dtype={"stock_id": str, "date": str}, float_precision="round_trip")
    if frame.shape[1] != 3 or list(frame.columns[:2]) != ["stock_id", "date"]:
        raise SchemaError(f"{path}: expected columns stock_id,date,<value>")
    value = frame.columns[2]
    out = {}
    for sid, grp in frame.groupby("stock_id", sort=True):
        out[sid] = ReturnSeries(sid, grp["date"].to_numpy(), grp[value].to_numpy(float), kind)
    return out
