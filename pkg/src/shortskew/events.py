"""Designated short-sale list: event replay, group membership, shortable dummy.

The list is rebuilt as a state machine from dated ``add``/``delete`` events.
Membership intervals are half-open, ``[effective_date, delete_date)``: a stock
is shortable on the day it is added and no longer on the day it is deleted.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .dates import DAY, to_day, to_days
from .errors import DomainError, InconsistentEventError

ACTIONS = ("add", "delete")

# Same-date ordering: deletes are applied before adds.
_ACTION_ORDER = {"delete": 0, "add": 1}

# (effective date, no. added, no. deleted, no. on list) for the Chinese
# designated list, March 2010 to December 2013.
TABLE1_ROWS: tuple[tuple[str, int, int, int], ...] = (
    ("2010-03-31", 90, 0, 90),
    ("2010-07-01", 5, 5, 90),
    ("2010-07-29", 1, 1, 90),
    ("2011-12-05", 189, 1, 278),
    ("2012-06-04", 2, 0, 280),
    ("2012-10-29", 1, 0, 281),
    ("2013-01-31", 276, 0, 557),
    ("2013-03-06", 0, 1, 556),
    ("2013-03-07", 0, 1, 555),
    ("2013-03-26", 0, 2, 553),
    ("2013-03-29", 1, 2, 552),
    ("2013-04-10", 1, 0, 553),
    ("2013-04-24", 1, 0, 554),
    ("2013-05-02", 0, 1, 553),
    ("2013-05-03", 0, 1, 552),
    ("2013-05-27", 1, 0, 553),
    ("2013-07-25", 1, 0, 554),
    ("2013-08-05", 0, 2, 552),
    ("2013-09-16", 205, 0, 757),
    ("2013-12-04", 1, 0, 758),
)
TABLE1_TOTALS = (775, 17, 758)


@dataclass(frozen=True)
class ShortSaleEvent:
    effective_date: np.datetime64
    stock_id: str
    action: str

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise DomainError(f"action must be one of {ACTIONS}, got {self.action!r}")
        object.__setattr__(self, "effective_date", to_day(self.effective_date))
        object.__setattr__(self, "stock_id", str(self.stock_id))


@dataclass(frozen=True)
class ListTimeline:
    """Replayed designated list.

    Attributes
    ----------
    intervals : mapping of stock id to a tuple of ``(start, end)`` pairs
        Half-open membership intervals; ``end`` is ``None`` while the stock is
        still on the list.
    change_dates : ndarray of datetime64[D]
        Distinct event dates in ascending order.
    counts : ndarray of int
        Number of stocks on the list at the end of each ``change_dates`` day.
    added, deleted : ndarray of int
        Number of adds and deletes applied on each ``change_dates`` day.
    """

    intervals: Mapping[str, tuple[tuple[np.datetime64, np.datetime64 | None], ...]]
    change_dates: np.ndarray
    counts: np.ndarray
    added: np.ndarray = field(repr=False)
    deleted: np.ndarray = field(repr=False)

    @property
    def stocks(self) -> list[str]:
        return sorted(self.intervals)

    def count_on(self, date) -> int:
        """List size at the end of ``date`` from the running counts."""
        i = np.searchsorted(self.change_dates, to_day(date), side="right")
        return 0 if i == 0 else int(self.counts[i - 1])

    def members_on(self, date) -> list[str]:
        """Stocks whose membership interval covers ``date``."""
        d = to_day(date)
        return sorted(s for s in self.intervals if self.is_member(s, d))

    def is_member(self, stock_id: str, date) -> bool:
        d = to_day(date)
        for lo, hi in self.intervals.get(stock_id, ()):
            if lo <= d and (hi is None or d < hi):
                return True
        return False

    def member_mask(self, stock_id: str, dates) -> np.ndarray:
        """Boolean membership of ``stock_id`` on each of ``dates``."""
        dates = to_days(dates)
        mask = np.zeros(dates.shape, dtype=bool)
        for lo, hi in self.intervals.get(stock_id, ()):
            cover = dates >= lo
            if hi is not None:
                cover &= dates < hi
            mask |= cover
        return mask

    def first_added(self, stock_id: str) -> np.datetime64 | None:
        spans = self.intervals.get(stock_id)
        return spans[0][0] if spans else None

    def summary_rows(self) -> list[tuple[np.datetime64, int, int, int]]:
        """Table-1 style rows: (date, added, deleted, on list)."""
        return [
            (d, int(a), int(x), int(c))
            for d, a, x, c in zip(self.change_dates, self.added, self.deleted, self.counts)
        ]


def _sorted_events(events: Iterable[ShortSaleEvent]) -> list[ShortSaleEvent]:
    return sorted(events, key=lambda e: (e.effective_date, _ACTION_ORDER[e.action]))


def replay_events(events: Iterable[ShortSaleEvent]) -> ListTimeline:
    """Replay add/delete events into a :class:`ListTimeline`.

    Events are stably sorted by date with deletes ahead of adds on the same
    day, so a one-for-one swap never inflates the intraday count.

    Raises
    ------
    InconsistentEventError
        On a delete of a stock not on the list, or an add of one already on it.
    """
    open_since: dict[str, np.datetime64] = {}
    spans: dict[str, list[tuple[np.datetime64, np.datetime64 | None]]] = {}
    dates: list[np.datetime64] = []
    added: list[int] = []
    deleted: list[int] = []
    counts: list[int] = []

    for ev in _sorted_events(events):
        if not dates or dates[-1] != ev.effective_date:
            dates.append(ev.effective_date)
            added.append(0)
            deleted.append(0)
            counts.append(counts[-1] if counts else 0)
        if ev.action == "add":
            if ev.stock_id in open_since:
                raise InconsistentEventError(ev.stock_id, ev.effective_date, "add")
            open_since[ev.stock_id] = ev.effective_date
            added[-1] += 1
            counts[-1] += 1
        else:
            if ev.stock_id not in open_since:
                raise InconsistentEventError(ev.stock_id, ev.effective_date, "delete")
            start = open_since.pop(ev.stock_id)
            spans.setdefault(ev.stock_id, []).append((start, ev.effective_date))
            deleted[-1] += 1
            counts[-1] -= 1

    for stock_id, start in open_since.items():
        spans.setdefault(stock_id, []).append((start, None))

    intervals = {s: tuple(sorted(v, key=lambda p: p[0])) for s, v in sorted(spans.items())}
    return ListTimeline(
        intervals=intervals,
        change_dates=np.array(dates, dtype=DAY),
        counts=np.array(counts, dtype=np.int64),
        added=np.array(added, dtype=np.int64),
        deleted=np.array(deleted, dtype=np.int64),
    )


def events_from_counts(rows=TABLE1_ROWS, prefix: str = "L") -> list[ShortSaleEvent]:
    """Expand aggregate (date, added, deleted, ...) rows into stock-level events.

    Adds create fresh anonymous ids ``{prefix}0001, ...``; deletes remove the
    longest-standing members first. Useful when only published counts exist.
    """
    on_list: list[str] = []
    out: list[ShortSaleEvent] = []
    serial = 0
    for row in rows:
        date, n_add, n_del = to_day(row[0]), int(row[1]), int(row[2])
        if n_del > len(on_list):
            raise DomainError(f"{date}: cannot delete {n_del} stocks from a list of {len(on_list)}")
        for stock_id in on_list[:n_del]:
            out.append(ShortSaleEvent(date, stock_id, "delete"))
        del on_list[:n_del]
        for _ in range(n_add):
            serial += 1
            stock_id = f"{prefix}{serial:04d}"
            on_list.append(stock_id)
            out.append(ShortSaleEvent(date, stock_id, "add"))
    return out


def assign_groups(timeline: ListTimeline, universe: Iterable[str], as_of) -> dict[str, int]:
    """Group 1 if the stock was on the list at least once by ``as_of``, else group 2."""
    as_of = to_day(as_of)
    groups = {}
    for stock_id in universe:
        first = timeline.first_added(stock_id)
        groups[stock_id] = 1 if first is not None and first <= as_of else 2
    return groups


def shortable_days(stock_id: str, window, timeline: ListTimeline, calendar) -> tuple[int, int]:
    """(shortable trading days, total trading days) within an inclusive window."""
    lo, hi = to_day(window[0]), to_day(window[1])
    days = np.asarray(getattr(calendar, "dates", calendar)).astype(DAY)
    days = days[(days >= lo) & (days <= hi)]
    return int(timeline.member_mask(stock_id, days).sum()), int(days.size)


def shortable_dummy(stock_id: str, window, timeline: ListTimeline, calendar) -> int:
    """1 if the stock is shortable on strictly more than half the window's trading days."""
    n_short, n_total = shortable_days(stock_id, window, timeline, calendar)
    if n_total == 0:
        raise DomainError(f"window {window[0]}..{window[1]} contains no trading days")
    return int(2 * n_short > n_total)
