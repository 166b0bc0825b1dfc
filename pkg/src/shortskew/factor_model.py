"""Three-factor model on rolling calendar windows and out-of-sample excess returns.

For each calendar quarter the model ``y = alpha + b1*mkt + b2*smb + b3*hml`` is
fitted by OLS on the trailing ``window_years`` of joint stock/factor days, and
the residuals of the *following* quarter are emitted as excess returns.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dates import add_months, month_floor
from .errors import InsufficientDataError, SingularDesignError, UnderdeterminedError
from .marketdata import FactorSeries, ReturnSeries

logger = logging.getLogger(__name__)

MIN_WINDOW_OBS = 200
MIN_EXCESS_OBS = 60


@dataclass(frozen=True)
class OLSResult:
    coef: np.ndarray
    resid: np.ndarray
    fitted: np.ndarray
    rank: int
    ssr: float
    df_resid: int

    @property
    def nobs(self) -> int:
        return self.resid.size

    @property
    def sigma2(self) -> float:
        return self.ssr / self.df_resid


def ols_fit(y, X) -> OLSResult:
    """Least squares via column-pivoted QR.

    ``X`` must already contain the intercept column if one is wanted.

    Raises
    ------
    UnderdeterminedError
        ``rows(X) <= cols(X)``.
    SingularDesignError
        ``X`` is numerically rank deficient.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if n <= k:
        raise UnderdeterminedError(f"{n} observations for {k} coefficients")
    Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < k:
        raise SingularDesignError(f"design matrix has rank {rank} < {k} columns")
    coef = np.empty(k)
    coef[piv] = scipy.linalg.solve_triangular(R, Q.T @ y)
    fitted = X @ coef
    resid = y - fitted
    return OLSResult(coef, resid, fitted, rank, float(resid @ resid), n - k)


@dataclass(frozen=True)
class FactorFit:
    """One rolling-window fit and the quarter it was applied to."""

    alpha: float
    betas: np.ndarray
    estimation_window: tuple[np.datetime64, np.datetime64]
    n_obs: int
    quarter: tuple[np.datetime64, np.datetime64]


@dataclass(frozen=True)
class RollingResult:
    excess: ReturnSeries
    fits: list[FactorFit]
    skipped: list[tuple[np.datetime64, str]] = field(default_factory=list)


def _design(f: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(len(f)), f])


def rolling_excess_returns(stock: ReturnSeries, factors: FactorSeries, window_years: int = 4,
                           step_months: int = 3, min_obs: int = MIN_WINDOW_OBS) -> RollingResult:
    """Out-of-sample residuals of rolling three-factor fits.

    Quarter boundaries are calendar quarters. The first quarter emitted is the
    first whose trailing ``window_years`` window starts on or after the
    quarter containing the stock's first joint observation. Quarters whose
    window holds fewer than ``min_obs`` joint days, or whose design is
    singular, are skipped and listed in ``skipped``.
    """
    dates, si, fi = np.intersect1d(stock.dates, factors.dates, assume_unique=True,
                                   return_indices=True)
    y = stock.values[si]
    F = factors.values[fi]
    empty = ReturnSeries(stock.stock_id, dates[:0], y[:0], "excess")
    if dates.size == 0:
        return RollingResult(empty, [], [])

    months = 12 * window_years
    q = add_months(month_floor(dates[0], step_months), months)
    last = month_floor(dates[-1], step_months)
    out_dates, out_vals, fits, skipped = [], [], [], []
    while q <= last:
        q_end = add_months(q, step_months)
        w_lo = add_months(q, -months)
        est = (dates >= w_lo) & (dates < q)
        tgt = (dates >= q) & (dates < q_end)
        if tgt.any():
            n_est = int(est.sum())
            if n_est < min_obs:
                skipped.append((q, f"{n_est} joint observations in window < {min_obs}"))
            else:
                try:
                    res = ols_fit(y[est], _design(F[est]))
                except SingularDesignError as exc:
                    skipped.append((q, f"singular design: {exc}"))
                else:
                    eps = y[tgt] - _design(F[tgt]) @ res.coef
                    out_dates.append(dates[tgt])
                    out_vals.append(eps)
                    fits.append(FactorFit(
                        alpha=float(res.coef[0]), betas=res.coef[1:].copy(),
                        estimation_window=(w_lo, q - np.timedelta64(1, "D")),
                        n_obs=n_est, quarter=(q, q_end - np.timedelta64(1, "D")),
                    ))
        q = q_end

    for qs, why in skipped:
        logger.info("%s: quarter %s skipped (%s)", stock.stock_id, qs, why)
    if not out_dates:
        return RollingResult(empty, fits, skipped)
    excess = ReturnSeries(stock.stock_id, np.concatenate(out_dates), np.concatenate(out_vals), "excess")
    return RollingResult(excess, fits, skipped)


def filter_min_obs(series: ReturnSeries, min_obs: int = MIN_EXCESS_OBS) -> bool:
    """Keep a stock only if it has strictly more than ``min_obs`` excess returns."""
    return len(series) > min_obs


def require_obs(series: ReturnSeries, min_obs: int = MIN_EXCESS_OBS) -> ReturnSeries:
    if not filter_min_obs(series, min_obs):
        raise InsufficientDataError(f"{series.stock_id}: {len(series)} observations, need > {min_obs}")
    return series
