import numpy as np
import pytest

from shortskew.errors import InsufficientDataError, SingularDesignError, UnderdeterminedError
from shortskew.factor_model import filter_min_obs, ols_fit, require_obs, rolling_excess_returns
from shortskew.marketdata import FactorSeries, ReturnSeries


def business_days(start, end):
    d = np.arange(np.datetime64(start), np.datetime64(end))
    return d[np.is_busday(d)]


def test_ols_matches_normal_equations():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(300), rng.standard_normal((300, 3))])
    y = X @ [0.001, 1.2, -0.3, 0.5] + 0.01 * rng.standard_normal(300)
    res = ols_fit(y, X)
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    np.testing.assert_allclose(res.coef, beta, rtol=1e-10)
    np.testing.assert_allclose(X.T @ res.resid, 0, atol=1e-12)
    assert res.df_resid == 296 and res.rank == 4


def test_ols_errors():
    X = np.ones((3, 3))
    with pytest.raises(UnderdeterminedError):
        ols_fit(np.zeros(3), X)
    X = np.column_stack([np.ones(10), np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(SingularDesignError):
        ols_fit(np.arange(10.0), X)


def synthetic(n_years=6, beta=(1.1, 0.4, -0.2), alpha=0.0002, seed=3):
    rng = np.random.default_rng(seed)
    dates = business_days("2004-01-01", f"{2004 + n_years}-01-01")
    F = 0.01 * rng.standard_normal((dates.size, 3))
    eps = 0.02 * rng.standard_normal(dates.size)
    y = alpha + F @ np.asarray(beta) + eps
    return ReturnSeries("S", dates, y), FactorSeries(dates, F), eps


def test_rolling_recovers_betas_and_is_out_of_sample():
    stock, factors, eps = synthetic()
    res = rolling_excess_returns(stock, factors)
    # first emitted quarter starts four years after the first joint quarter
    assert res.excess.dates[0] == np.datetime64("2008-01-01")
    assert len(res.fits) == 8
    for f in res.fits:
        assert f.estimation_window[1] < f.quarter[0]
        np.testing.assert_allclose(f.betas, [1.1, 0.4, -0.2], atol=0.15)
    # excess returns are close to the true innovations
    m = np.isin(stock.dates, res.excess.dates)
    assert np.corrcoef(res.excess.values, eps[m])[0, 1] > 0.99


def test_each_quarter_uses_its_own_fit():
    stock, factors, _ = synthetic()
    res = rolling_excess_returns(stock, factors)
    fit = res.fits[2]
    q0, q1 = fit.quarter
    w = res.excess.window(q0, q1)
    m = (stock.dates >= q0) & (stock.dates <= q1)
    expected = stock.values[m] - fit.alpha - factors.values[m] @ fit.betas
    np.testing.assert_allclose(w.values, expected, rtol=1e-12)


def test_sparse_windows_are_skipped():
    stock, factors, _ = synthetic()
    keep = np.ones(len(stock), dtype=bool)
    keep[::2] = False  # about 500 obs per four years: still fine
    thin = ReturnSeries("S", stock.dates[keep], stock.values[keep])
    res = rolling_excess_returns(thin, factors, min_obs=600)
    assert len(res.excess) == 0
    assert res.skipped and "< 600" in res.skipped[0][1]


def test_short_history_produces_nothing():
    stock, factors, _ = synthetic(n_years=3)
    res = rolling_excess_returns(stock, factors)
    assert len(res.excess) == 0 and res.fits == []


def test_min_obs_filter_is_strict():
    r = ReturnSeries("S", business_days("2010-01-01", "2010-12-31")[:60], np.zeros(60), "excess")
    assert not filter_min_obs(r, 60)
    assert filter_min_obs(r, 59)
    with pytest.raises(InsufficientDataError):
        require_obs(r, 60)
