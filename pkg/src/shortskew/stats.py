"""Asymmetry statistics and the cross-sectional tests used to summarize them."""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import (
    DegenerateSampleError,
    InsufficientDataError,
    UndefinedStatisticError,
)
from .marketdata import ReturnSeries, aggregate_returns

# Column order and labels of the per-stock summary table.
TABLE2_COLUMNS = (
    ("skew_raw", "skewness raw"),
    ("skew_excess", "skewness excess"),
    ("skew_normalized", "skewness normalized"),
    ("leverage_xi1", "leverage coefficient"),
    ("corr_raw", "ret-vol corr raw"),
    ("corr_excess", "ret-vol corr excess"),
)


def _vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise UndefinedStatisticError("input contains non-finite values")
    return x


def skewness(x, bias: bool = True) -> float:
    """Third central moment over the cubed standard deviation.

    With ``bias=True`` (default) moments use 1/n weights, ``m3 / m2**1.5``.
    ``bias=False`` applies the usual ``sqrt(n(n-1))/(n-2)`` correction.
    """
    x = _vector(x)
    n = x.size
    if n < 3:
        raise InsufficientDataError(f"skewness needs at least 3 observations, got {n}")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if not m2 > 0 or m2 <= (np.finfo(float).eps * np.max(np.abs(x))) ** 2:
        raise UndefinedStatisticError("skewness undefined for zero-variance data")
    g = np.mean(d ** 3) / m2 ** 1.5
    if not bias:
        g *= math.sqrt(n * (n - 1)) / (n - 2)
    return float(g)


def pearson(x, y) -> float:
    """Pearson correlation by the two-pass (centered) formula."""
    x, y = _vector(x), _vector(y)
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if not (sxx > 0 and syy > 0):
        raise UndefinedStatisticError("correlation undefined when either argument has zero variance")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def return_volatility_correlation(r) -> float:
    """Correlation of returns with their absolute value, a same-day volatility proxy."""
    r = _vector(r)
    if r.size < 3:
        raise InsufficientDataError(f"need at least 3 observations, got {r.size}")
    return pearson(r, np.abs(r))


def significance_stars(p: float) -> str:
    if not np.isfinite(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    n: int
    mean: float

    @property
    def stars(self) -> str:
        return significance_stars(self.p)

    def __iter__(self):
        yield self.t
        yield self.p
        yield self.stars


def one_sample_t_test(x, null_mean: float = 0.0) -> TTestResult:
    """Two-sided one-sample t-test with n-1 degrees of freedom."""
    x = _vector(x)
    n = x.size
    if n < 2:
        raise InsufficientDataError(f"t-test needs at least 2 observations, got {n}")
    sd = x.std(ddof=1)
    if not sd > 0:
        raise DegenerateSampleError("t-test undefined for a sample with zero standard deviation")
    t = (x.mean() - null_mean) / (sd / math.sqrt(n))
    p = float(2.0 * sps.t.sf(abs(t), n - 1))
    return TTestResult(float(t), min(p, 1.0), n, float(x.mean()))


@dataclass(frozen=True)
class WilcoxonResult:
    W: float
    p: float
    z: float
    n_nonzero: int

    @property
    def stars(self) -> str:
        return significance_stars(self.p)

    def __iter__(self):
        yield self.W
        yield self.p


def _signed_ranks(x, null_median: float):
    d = _vector(x) - null_median
    d = d[d != 0]
    ranks = sps.rankdata(np.abs(d))  # mid-ranks for ties
    return d, ranks


def signed_rank_statistic(x, null_median: float = 0.0) -> float:
    """Sum of the ranks of positive deviations (zeros dropped, mid-ranks for ties)."""
    d, ranks = _signed_ranks(x, null_median)
    return float(ranks[d > 0].sum())


def wilcoxon_signed_rank(x, null_median: float = 0.0, min_nonzero: int = 5) -> WilcoxonResult:
    """Wilcoxon signed-rank test, normal approximation with tie-corrected variance.

    Zero deviations are dropped before ranking. No continuity correction.
    """
    d, ranks = _signed_ranks(x, null_median)
    n = d.size
    if n < min_nonzero:
        raise InsufficientDataError(
            f"signed-rank test needs at least {min_nonzero} nonzero deviations, got {n}")
    W = float(ranks[d > 0].sum())
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    z = (W - mean) / math.sqrt(var)
    p = float(2.0 * sps.norm.sf(abs(z)))
    return WilcoxonResult(W, min(p, 1.0), float(z), n)


@dataclass(frozen=True)
class DistributionData:
    bin_centers: np.ndarray
    density: np.ndarray
    ecdf_x: np.ndarray
    ecdf: np.ndarray
    tail_x: np.ndarray
    left_F: np.ndarray
    reflected_right_F: np.ndarray


def ecdf(sample, at) -> np.ndarray:
    """Right-continuous empirical distribution function of ``sample`` evaluated at ``at``."""
    s = np.sort(_vector(sample))
    return np.searchsorted(s, np.asarray(at, float), side="right") / s.size


def distribution_data(x, n_bins: int = 50, n_tail: int = 100, center: float = 0.0) -> DistributionData:
    """Histogram density, ECDF, and left tail against the reflected right tail.

    The tail grid runs over ``x <= center``; ``left_F`` is ``F(x)`` and
    ``reflected_right_F`` is ``1 - F(2*center - x)``, so a heavier right tail
    puts the reflected curve above the left one.
    """
    x = _vector(x)
    if x.size < 10:
        raise InsufficientDataError(f"need at least 10 observations, got {x.size}")
    density, edges = np.histogram(x, bins=n_bins, range=(x.min(), x.max()), density=True)
    xs = np.sort(x)
    F = np.arange(1, xs.size + 1) / xs.size
    reach = np.max(np.abs(x - center))
    tail_x = np.linspace(center - reach, center, n_tail)
    left = ecdf(x, tail_x)
    # 1 - F(c + u) evaluated with left limits gives P(X >= c + u)
    mirrored = 2 * center - tail_x
    right = 1.0 - np.searchsorted(xs, mirrored, side="left") / xs.size
    return DistributionData(0.5 * (edges[:-1] + edges[1:]), density, xs, F, tail_x, left, right)


@dataclass(frozen=True)
class CrossSectionSummary:
    statistic: str
    mean: float
    median: float
    t_statistic: float
    t_pvalue: float
    signed_rank_statistic: float
    signed_rank_pvalue: float
    n_stocks: int

    @property
    def mean_stars(self) -> str:
        return significance_stars(self.t_pvalue)

    @property
    def median_stars(self) -> str:
        return significance_stars(self.signed_rank_pvalue)

    def as_dict(self) -> dict:
        return {
            "statistic": self.statistic, "mean": self.mean, "median": self.median,
            "t_statistic": self.t_statistic, "t_pvalue": self.t_pvalue,
            "signed_rank_statistic": self.signed_rank_statistic,
            "signed_rank_pvalue": self.signed_rank_pvalue, "n_stocks": self.n_stocks,
            "mean_stars": self.mean_stars, "median_stars": self.median_stars,
        }


def cross_section_summary(values, statistic: str = "") -> CrossSectionSummary:
    """Mean and median of per-stock values with t-test and signed-rank test against zero."""
    v = _vector(values)
    if v.size < 5:
        raise InsufficientDataError(f"cross-section needs at least 5 stocks, got {v.size}")
    tt = one_sample_t_test(v)
    wr = wilcoxon_signed_rank(v)
    return CrossSectionSummary(statistic, float(v.mean()), float(np.median(v)), tt.t, tt.p,
                               wr.W, wr.p, int(v.size))


def summary_table(per_stock: Mapping[str, Sequence[float]]) -> dict[str, CrossSectionSummary]:
    """Summaries for each column present in ``per_stock``, in table order."""
    out = {}
    for key, _ in TABLE2_COLUMNS:
        if key in per_stock:
            vals = np.asarray(per_stock[key], float)
            out[key] = cross_section_summary(vals[np.isfinite(vals)], key)
    return out


def format_summary_table(summaries: Mapping[str, CrossSectionSummary], width: int = 14) -> str:
    """Fixed-width rendering: mean and median rows, one column per statistic."""
    cols = [(k, lab) for k, lab in TABLE2_COLUMNS if k in summaries]
    head = " " * 10 + "".join(f"{lab:>{width + 8}}" for _, lab in cols)
    lines = [head]
    for row, val, stars in (("mean", "mean", "mean_stars"), ("median", "median", "median_stars")):
        cells = "".join(
            f"{getattr(summaries[k], val):>{width}.4g}{getattr(summaries[k], stars):<8}" for k, _ in cols)
        lines.append(f"{row:<10}{cells}")
    lines.append(f"{'n':<10}" + "".join(f"{summaries[k].n_stocks:>{width}d}{'':<8}" for k, _ in cols))
    return "\n".join(lines)


@dataclass(frozen=True)
class IntervalProfile:
    intervals: np.ndarray
    mean: np.ndarray
    error: np.ndarray
    n: np.ndarray


def interval_profile(series: Iterable[ReturnSeries], intervals=range(1, 11),
                     statistic: Callable[[np.ndarray], float] = skewness) -> IntervalProfile:
    """Cross-sectional mean of a per-stock statistic as the return interval grows.

    For every interval ``k`` the statistic is computed on each stock's
    non-overlapping ``k``-day aggregated returns; stocks where it is undefined
    are skipped. ``error`` is the standard deviation over stocks divided by
    ``sqrt(n - 1)``.
    """
    series = list(series)
    ks = np.asarray(list(intervals), dtype=int)
    mean, err, count = [], [], []
    for k in ks:
        vals = []
        for s in series:
            agg = aggregate_returns(s, int(k))
            try:
                vals.append(statistic(agg.values))
            except (InsufficientDataError, UndefinedStatisticError):
                continue
        vals = np.asarray(vals)
        count.append(vals.size)
        mean.append(vals.mean() if vals.size else np.nan)
        err.append(vals.std(ddof=0) / math.sqrt(vals.size - 1) if vals.size > 1 else np.nan)
    return IntervalProfile(ks, np.asarray(mean), np.asarray(err), np.asarray(count))
