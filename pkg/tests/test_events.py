import numpy as np
import pytest

from shortskew.errors import DomainError, InconsistentEventError
from shortskew.events import (
    TABLE1_ROWS,
    TABLE1_TOTALS,
    ShortSaleEvent,
    assign_groups,
    events_from_counts,
    replay_events,
    shortable_days,
    shortable_dummy,
)


def ev(date, sid, action):
    return ShortSaleEvent(np.datetime64(date), sid, action)


@pytest.fixture
def timeline():
    return replay_events([
        ev("2010-03-31", "A", "add"),
        ev("2010-03-31", "B", "add"),
        ev("2010-07-01", "B", "delete"),
        ev("2010-07-01", "C", "add"),
        ev("2011-01-04", "B", "add"),
    ])


def test_membership_half_open(timeline):
    assert timeline.is_member("B", "2010-06-30")
    assert not timeline.is_member("B", "2010-07-01")
    assert timeline.is_member("C", "2010-07-01")
    assert not timeline.is_member("A", "2010-03-30")
    assert timeline.is_member("B", "2012-01-01")
    assert timeline.intervals["B"] == (
        (np.datetime64("2010-03-31"), np.datetime64("2010-07-01")),
        (np.datetime64("2011-01-04"), None),
    )


def test_counts_and_rows(timeline):
    assert timeline.count_on("2010-03-30") == 0
    assert timeline.count_on("2010-03-31") == 2
    assert timeline.count_on("2010-12-31") == 2
    assert timeline.count_on("2011-06-01") == 3
    rows = timeline.summary_rows()
    assert [r[1:] for r in rows] == [(2, 0, 2), (1, 1, 2), (1, 0, 3)]
    assert timeline.members_on("2010-08-01") == ["A", "C"]


def test_same_day_swap_applies_delete_first():
    # delete listed after add in input order; replay still succeeds
    tl = replay_events([ev("2010-01-04", "X", "add"), ev("2010-02-01", "X", "add"),
                        ev("2010-02-01", "X", "delete")])
    assert tl.is_member("X", "2010-02-01")
    assert tl.intervals["X"][0] == (np.datetime64("2010-01-04"), np.datetime64("2010-02-01"))


def test_inconsistent_events_raise():
    with pytest.raises(InconsistentEventError) as exc:
        replay_events([ev("2010-01-04", "X", "delete")])
    assert exc.value.stock_id == "X"
    with pytest.raises(InconsistentEventError):
        replay_events([ev("2010-01-04", "X", "add"), ev("2010-01-05", "X", "add")])


def test_bad_action_rejected():
    with pytest.raises(DomainError):
        ShortSaleEvent(np.datetime64("2010-01-04"), "X", "suspend")


def test_table1_replay_reproduces_counts():
    tl = replay_events(events_from_counts(TABLE1_ROWS))
    got = [(str(d), a, x, c) for d, a, x, c in tl.summary_rows()]
    assert got == [r for r in TABLE1_ROWS]
    assert (int(tl.added.sum()), int(tl.deleted.sum()), int(tl.counts[-1])) == TABLE1_TOTALS


def test_events_from_counts_rejects_impossible_deletes():
    with pytest.raises(DomainError):
        events_from_counts([("2010-01-04", 1, 2, 0)])


def test_assign_groups(timeline):
    g = assign_groups(timeline, ["A", "C", "Z"], "2010-06-30")
    assert g == {"A": 1, "C": 2, "Z": 2}
    g = assign_groups(timeline, ["A", "C", "Z"], "2013-12-31")
    assert g == {"A": 1, "C": 1, "Z": 2}


def test_shortable_dummy_strict_majority():
    days = np.arange(np.datetime64("2010-01-01"), np.datetime64("2010-01-11"))  # 10 days
    tl = replay_events([ev("2010-01-06", "H", "add"), ev("2010-01-05", "M", "add")])
    assert shortable_days("H", (days[0], days[-1]), tl, days) == (5, 10)
    assert shortable_dummy("H", (days[0], days[-1]), tl, days) == 0  # exactly half
    assert shortable_dummy("M", (days[0], days[-1]), tl, days) == 1
    assert shortable_dummy("nobody", (days[0], days[-1]), tl, days) == 0


def test_shortable_dummy_empty_window():
    tl = replay_events([])
    with pytest.raises(DomainError):
        shortable_dummy("A", ("2010-01-01", "2010-01-31"), tl, np.array([], dtype="datetime64[D]"))
