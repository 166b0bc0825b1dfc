import numpy as np
import pytest

from shortskew.events import ShortSaleEvent, replay_events
from shortskew.marketdata import ReturnSeries
from shortskew.pipeline import event_split, run_core, split_at
from shortskew.simulator import regime_experiment_config, simulate_market


def series(sid, start="2009-01-01", n=800):
    d = np.arange(np.datetime64(start), np.datetime64(start) + n)
    return ReturnSeries(sid, d, np.random.default_rng(len(sid)).normal(size=n))


def test_split_at_is_exclusive_inclusive():
    s = series("A")
    before, after = split_at(s, "2010-01-01")
    assert before.dates[-1] == np.datetime64("2009-12-31")
    assert after.dates[0] == np.datetime64("2010-01-01")
    assert len(before) + len(after) == len(s)


def test_event_split_groups():
    tl = replay_events([ShortSaleEvent(np.datetime64("2010-09-30"), "A", "add")])
    parts = event_split({"A": series("A"), "B": series("B")}, tl, as_of="2014-03-31",
                        policy_start="2010-03-31")
    assert len(parts["g1_before"]) == 1 and len(parts["g2_after"]) == 1
    assert parts["g1_after"][0].dates[0] == np.datetime64("2010-09-30")
    assert parts["g2_after"][0].dates[0] == np.datetime64("2010-03-31")


@pytest.fixture(scope="module")
def core():
    sim = simulate_market(regime_experiment_config(n_stocks=12, seed=4))
    return sim, run_core(sim.dataset)


def test_run_core(core):
    sim, res = core
    assert len(res.egarch.fits) == 12
    assert set(res.summary) == {"skew_raw", "skew_excess", "skew_normalized", "leverage_xi1",
                                "corr_raw", "corr_excess"}
    # full-sample leverage sits between the two true regimes
    xi = np.array([r["leverage_xi1"] for r in res.per_stock.values()])
    assert -0.05 < np.median(xi) < 0.2
    first = res.excess.excess["S000"].dates[0]
    assert first == np.datetime64("2006-01-02")  # first business day of 2006
