import numpy as np
import pytest

from shortskew.dates import add_months, calendar_windows, month_floor, to_day, window_months
from shortskew.errors import ConfigError, DomainError


def test_to_day_accepts_strings_and_datetime64():
    assert to_day("2010-03-31") == np.datetime64("2010-03-31")
    assert to_day(np.datetime64("2010-03-31T15:00")) == np.datetime64("2010-03-31")


def test_month_floor_and_add_months():
    d = to_day("2011-08-17")
    assert month_floor(d, 3) == np.datetime64("2011-07-01")
    assert month_floor(d, 6) == np.datetime64("2011-07-01")
    assert month_floor(d, 12) == np.datetime64("2011-01-01")
    assert add_months(np.datetime64("2011-07-01"), -48) == np.datetime64("2007-07-01")


@pytest.mark.parametrize("windowing, n", [("quarter", 33), ("half_year", 17), ("year", 9)])
def test_window_counts_over_study_period(windowing, n):
    w = calendar_windows("2006-01-01", "2014-03-31", windowing)
    assert len(w) == n
    assert w[0][0] == np.datetime64("2006-01-01")
    assert w[-1][1] == np.datetime64("2014-03-31")


def test_windows_are_contiguous_and_disjoint():
    w = calendar_windows("2006-01-01", "2014-03-31", "half_year")
    for (a, b), (c, _) in zip(w[:-1], w[1:]):
        assert b < c
        assert c - b == np.timedelta64(1, "D")
    # last half-year window is the partial Q1 2014
    assert w[-1] == (np.datetime64("2014-01-01"), np.datetime64("2014-03-31"))


def test_unknown_windowing_rejected():
    with pytest.raises((ConfigError, DomainError)):
        window_months("fortnight")
