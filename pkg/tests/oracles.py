"""Independent reference implementations used by the tests.

Everything here is deliberately naive: explicit loops, explicit dummy
matrices, textbook formulas. Speed is irrelevant.
"""

import math

import numpy as np
from scipy import stats as sps

from shortskew.panel import PanelSample


def skewness_bruteforce(x):
    n = len(x)
    m = math.fsum(x) / n
    m2 = math.fsum((v - m) ** 2 for v in x) / n
    m3 = math.fsum((v - m) ** 3 for v in x) / n
    return m3 / m2 ** 1.5


def pearson_bruteforce(x, y):
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def ols_normal_equations(y, X):
    X = np.asarray(X, float)
    return np.linalg.solve(X.T @ X, X.T @ np.asarray(y, float))


def make_panel(n=500, n_industries=5, n_windows=8, seed=0, beta=(0.3, -1.0, 2.0, 0.1, -0.2)):
    """Synthetic stock-window panel with known fixed effects and slopes."""
    rng = np.random.default_rng(seed)
    n_stocks = max(n // n_windows, 1) * 2
    stock_ind = rng.integers(0, n_industries, n_stocks)
    stock_v = rng.random(n_stocks) < 0.5
    a_ind = rng.normal(0, 1, n_industries)
    g_win = rng.normal(0, 1, n_windows)
    samples = []
    for i in range(n):
        s = int(rng.integers(0, n_stocks))
        w = int(rng.integers(0, n_windows))
        v = int(stock_v[s])
        u = int(v and rng.random() < 0.5)
        T, r, sig = rng.gamma(2, 0.01), rng.normal(0, 0.1), rng.gamma(3, 0.01)
        x = np.array([T, r, sig, v, u])
        y = a_ind[stock_ind[s]] + g_win[w] + x @ np.asarray(beta) + rng.normal(0, 0.5)
        samples.append(PanelSample(
            stock_id=f"S{s:03d}", window=w, window_start="", window_end="",
            industry_code=f"I{stock_ind[s]}", n_obs=60,
            skew_raw=float(y), skew_excess=float(y), skew_normalized=float(y),
            leverage_xi1=float(y), corr_raw=float(y), corr_excess=float(y),
            T=float(T), r=float(r), sigma=float(sig), v=v, u=u,
        ))
    return samples


def dummy_ols(samples, dependent, regressors=("T", "r", "sigma", "v", "u")):
    """Full-dummy OLS: intercept, industry and window dummies (first level dropped)."""
    y = np.array([getattr(s, dependent) for s in samples], float)
    X = np.array([[getattr(s, r) for r in regressors] for s in samples], float)
    inds = sorted({s.industry_code for s in samples})
    wins = sorted({s.window for s in samples})
    D_ind = np.array([[s.industry_code == c for c in inds[1:]] for s in samples], float)
    D_win = np.array([[s.window == w for w in wins[1:]] for s in samples], float)
    full = np.column_stack([np.ones(len(y)), D_ind, D_win, X])
    rank = np.linalg.matrix_rank(full)
    beta, *_ = np.linalg.lstsq(full, y, rcond=None)
    resid = y - full @ beta
    n, p = full.shape
    df = n - rank
    s2 = resid @ resid / df
    cov = s2 * np.linalg.pinv(full.T @ full)
    k = X.shape[1]
    coef = beta[-k:]
    se = np.sqrt(np.diag(cov)[-k:])
    sst = np.sum((y - y.mean()) ** 2)
    ssr = resid @ resid
    r2 = 1 - ssr / sst
    adj = 1 - (1 - r2) * (n - 1) / df
    F = ((sst - ssr) / (rank - 1)) / (ssr / df)
    return {"coef": coef, "se": se, "t": coef / se, "adj_r2": adj, "F": F,
            "p": 2 * sps.t.sf(np.abs(coef / se), df), "df": df}
