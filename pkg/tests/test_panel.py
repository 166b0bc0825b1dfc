from dataclasses import replace

import numpy as np
import pytest

from oracles import dummy_ols, make_panel
from shortskew.errors import CollinearityError, DomainError, InsufficientDataError
from shortskew.panel import (
    DEPENDENTS,
    PanelSample,
    absorb,
    fe_ols,
    fe_rank,
    fits_to_json,
    read_samples,
    report_table,
    window_label,
    write_samples,
)


@pytest.fixture(scope="module")
def panel():
    return make_panel(400, 4, 6, seed=7)


def test_fe_ols_matches_dummy_oracle(panel):
    fit = fe_ols(panel, "skew_raw")
    ref = dummy_ols(panel, "skew_raw")
    np.testing.assert_allclose(fit.coef, ref["coef"], rtol=1e-9)
    np.testing.assert_allclose(fit.tstat, ref["t"], rtol=1e-9)
    assert fit.adj_r2 == pytest.approx(ref["adj_r2"], rel=1e-9)
    assert fit.F == pytest.approx(ref["F"], rel=1e-7)
    assert fit.df_resid == ref["df"]


def test_fe_ols_matches_statsmodels(panel):
    sm = pytest.importorskip("statsmodels.api")
    y = np.array([s.skew_raw for s in panel])
    X = np.array([[s.T, s.r, s.sigma, s.v, s.u] for s in panel])
    inds = sorted({s.industry_code for s in panel})
    wins = sorted({s.window for s in panel})
    D = np.column_stack([[s.industry_code == c for c in inds[1:]] for s in panel]).T
    W = np.column_stack([[s.window == w for w in wins[1:]] for s in panel]).T
    design = sm.add_constant(np.column_stack([D, W, X]).astype(float))
    res = sm.OLS(y, design).fit()
    fit = fe_ols(panel, "skew_raw")
    np.testing.assert_allclose(fit.coef, res.params[-5:], rtol=1e-9)
    np.testing.assert_allclose(fit.se, res.bse[-5:], rtol=1e-9)
    assert fit.adj_r2 == pytest.approx(res.rsquared_adj, rel=1e-9)
    assert fit.F == pytest.approx(res.fvalue, rel=1e-7)
    cl = sm.OLS(y, design).fit(cov_type="cluster",
                               cov_kwds={"groups": np.unique([s.stock_id for s in panel],
                                                             return_inverse=True)[1]})
    fitc = fe_ols(panel, "skew_raw", cluster="stock")
    np.testing.assert_allclose(fitc.se, cl.bse[-5:], rtol=1e-8)


def test_recovers_true_slopes():
    fit = fe_ols(make_panel(4000, 5, 8, seed=1), "skew_normalized")
    err = np.abs(fit.coef - [0.3, -1.0, 2.0, 0.1, -0.2])
    assert np.all(err <= 4 * fit.se), (fit.coef, fit.se)


def test_without_effects(panel):
    fit = fe_ols(panel, "skew_raw", industry_effects=False, time_effects=False)
    X = np.column_stack([np.ones(len(panel))] + [[getattr(s, r) for s in panel] for r in fit.regressors])
    y = np.array([s.skew_raw for s in panel])
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    np.testing.assert_allclose(fit.coef, beta[1:], rtol=1e-9)
    assert fit.fe_rank == 1 and fit.as_dict()["n_time_dummies"] == 0


def test_fe_rank_connected_components():
    ind = np.array(["a", "a", "b", "b", "c"])
    win = np.array([0, 1, 0, 1, 2])
    # {a, b, 0, 1} and {c, 2} are separate components
    assert fe_rank([ind, win]) == 3 + 3 - 2
    D = np.column_stack([np.eye(3)[[0, 0, 1, 1, 2]], np.eye(3)[[0, 1, 0, 1, 2]]])
    assert fe_rank([ind, win]) == np.linalg.matrix_rank(D)


def test_absorb_is_a_projection(panel):
    ind = np.array([s.industry_code for s in panel])
    win = np.array([s.window for s in panel])
    y = np.random.default_rng(0).normal(size=len(panel))
    r = absorb(y, [ind, win])
    np.testing.assert_allclose(absorb(r, [ind, win]), r, atol=1e-12)
    for g in np.unique(ind):
        assert abs(r[ind == g].sum()) < 1e-10


def test_collinear_regressor_named(panel):
    # u identical to v makes u spanned by v
    bad = [replace(s, u=s.v) for s in panel]
    with pytest.raises(CollinearityError) as exc:
        fe_ols(bad, "skew_raw")
    assert exc.value.column == "u"
    # v constant within industry is absorbed by industry effects
    by_ind = [replace(s, v=int(s.industry_code in ("I0", "I1")), u=0) for s in panel]
    with pytest.raises(CollinearityError):
        fe_ols(by_ind, "skew_raw", regressors=("T", "r", "sigma", "v"))


def test_input_errors(panel):
    with pytest.raises(InsufficientDataError):
        fe_ols([], "skew_raw")
    with pytest.raises(DomainError):
        fe_ols(panel, "kurtosis")
    with pytest.raises(DomainError):
        fe_ols(panel, "skew_raw", cluster="industry")
    with pytest.raises(DomainError):
        replace(panel[0], v=0, u=1)


def test_nan_dependents_dropped(panel):
    holed = [replace(s, leverage_xi1=float("nan")) if i % 10 == 0 else s for i, s in enumerate(panel)]
    fit = fe_ols(holed, "leverage_xi1")
    assert fit.n_obs == len(panel) - len(panel[::10])


def test_report_and_json(panel):
    fits = [fe_ols(panel, d) for d in DEPENDENTS]
    text = report_table(fits)
    for label in ("turnover rate", "short sale practiced", "R-square adjusted", "F-statistics"):
        assert label in text
    assert text.count("YES") == 2 * len(DEPENDENTS)
    js = fits_to_json(fits, windowing="quarter")
    assert '"n_time_dummies"' in js and '"windowing": "quarter"' in js


def test_samples_csv_round_trip(panel, tmp_path):
    p = write_samples(panel[:20], tmp_path / "s.csv")
    assert read_samples(p) == panel[:20]


def test_window_label():
    assert window_label("quarter", "2013-07-01") == "2013Q3"
    assert window_label("half_year", "2013-07-01") == "2013H2"
