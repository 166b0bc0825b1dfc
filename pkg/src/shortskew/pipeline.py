"""Stage functions chaining the modules into the full analysis.

Each stage is a pure function of its inputs; the CLI adds file I/O on top.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dates import to_day
from .egarch import EgarchFit, egarch_fit, normalize
from .errors import InsufficientDataError, UndefinedStatisticError
from .events import ListTimeline, assign_groups, replay_events
from .factor_model import MIN_EXCESS_OBS, MIN_WINDOW_OBS, filter_min_obs, rolling_excess_returns
from .marketdata import Dataset, ReturnSeries
from .panel import AS_OF, PERIOD
from .stats import (
    CrossSectionSummary,
    IntervalProfile,
    interval_profile,
    return_volatility_correlation,
    skewness,
    summary_table,
)

logger = logging.getLogger(__name__)

POLICY_START = "2010-03-31"


@dataclass
class ExcessStage:
    excess: dict[str, ReturnSeries]
    skipped_quarters: dict[str, list] = field(default_factory=dict)
    dropped: list[str] = field(default_factory=list)


def _excess_one(args):
    sid, raw, factors, window_years, min_window_obs = args
    return sid, rolling_excess_returns(raw, factors, window_years=window_years, min_obs=min_window_obs)


def _map(fn, items, workers: int):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items, chunksize=4))
    return [fn(it) for it in items]


def excess_stage(dataset: Dataset, return_method: str = "log", window_years: int = 4,
                 min_window_obs: int = MIN_WINDOW_OBS, min_obs: int = MIN_EXCESS_OBS,
                 workers: int = 1) -> ExcessStage:
    """Rolling three-factor excess returns for every stock, then the >min_obs filter."""
    raw = dataset.returns(return_method)
    jobs = [(sid, r, dataset.factors, window_years, min_window_obs) for sid, r in raw.items()]
    out = ExcessStage({})
    for sid, res in _map(_excess_one, jobs, workers):
        if res.skipped:
            out.skipped_quarters[sid] = [(str(q), why) for q, why in res.skipped]
        if filter_min_obs(res.excess, min_obs):
            out.excess[sid] = res.excess
        else:
            out.dropped.append(sid)
    return out


@dataclass
class EgarchStage:
    fits: dict[str, EgarchFit]
    normalized: dict[str, ReturnSeries]
    dropped: dict[str, str] = field(default_factory=dict)


def _fit_one(args):
    sid, values = args
    try:
        return sid, egarch_fit(values), None
    except Exception as exc:  # noqa: BLE001 - reported as a drop reason
        return sid, None, f"{type(exc).__name__}: {exc}"


def egarch_stage(excess: Mapping[str, ReturnSeries], workers: int = 1) -> EgarchStage:
    """Full-sample EGARCH fit and normalization per stock; non-converged fits are dropped."""
    jobs = [(sid, s.values) for sid, s in sorted(excess.items())]
    out = EgarchStage({}, {})
    for sid, fit, err in _map(_fit_one, jobs, workers):
        if fit is None:
            out.dropped[sid] = err
            continue
        if not fit.converged:
            out.dropped[sid] = "not converged"
            continue
        out.fits[sid] = fit
        out.normalized[sid] = excess[sid].with_values(normalize(excess[sid].values, fit.path), "normalized")
    return out


def _safe(fn, x) -> float:
    try:
        return fn(x)
    except (InsufficientDataError, UndefinedStatisticError):
        return float("nan")


def per_stock_statistics(dataset: Dataset, excess: Mapping[str, ReturnSeries],
                         normalized: Mapping[str, ReturnSeries], fits: Mapping[str, EgarchFit],
                         return_method: str = "log", period=PERIOD) -> dict[str, dict[str, float]]:
    """Whole-period statistics for each stock that survived every stage."""
    raw = dataset.returns(return_method)
    out = {}
    for sid in sorted(fits):
        r = raw[sid].window(*period).values
        e = excess[sid].window(*period).values
        z = normalized[sid].window(*period).values
        out[sid] = {
            "skew_raw": _safe(skewness, r),
            "skew_excess": _safe(skewness, e),
            "skew_normalized": _safe(skewness, z),
            "leverage_xi1": float(fits[sid].params.xi1),
            "corr_raw": _safe(return_volatility_correlation, r),
            "corr_excess": _safe(return_volatility_correlation, e),
        }
    return out


def cross_section(per_stock: Mapping[str, Mapping[str, float]]) -> dict[str, CrossSectionSummary]:
    cols: dict[str, list[float]] = {}
    for row in per_stock.values():
        for k, v in row.items():
            cols.setdefault(k, []).append(v)
    return summary_table(cols)


def split_at(series: ReturnSeries, date) -> tuple[ReturnSeries, ReturnSeries]:
    """Observations strictly before ``date`` and on/after it."""
    d = to_day(date)
    before = series.window(None, d - np.timedelta64(1, "D"))
    return before, series.window(d, None)


def event_split(series: Mapping[str, ReturnSeries], timeline: ListTimeline, as_of=AS_OF,
                policy_start=POLICY_START) -> dict[str, list[ReturnSeries]]:
    """Partition series into group 1/2 before/after segments.

    Group 1 stocks split at their first addition to the list; group 2 stocks,
    which have no addition date, split at the policy launch.
    """
    groups = assign_groups(timeline, series, as_of)
    parts: dict[str, list[ReturnSeries]] = {k: [] for k in ("g1_before", "g1_after", "g2_before", "g2_after")}
    for sid, s in sorted(series.items()):
        if groups[sid] == 1:
            before, after = split_at(s, timeline.first_added(sid))
            parts["g1_before"].append(before)
            parts["g1_after"].append(after)
        else:
            before, after = split_at(s, policy_start)
            parts["g2_before"].append(before)
            parts["g2_after"].append(after)
    return parts


def interval_profiles(series: Mapping[str, ReturnSeries], timeline: ListTimeline, statistic=skewness,
                      intervals=range(1, 11), as_of=AS_OF,
                      policy_start=POLICY_START) -> dict[str, IntervalProfile]:
    """Group x before/after profiles of a statistic against the return interval."""
    parts = event_split(series, timeline, as_of, policy_start)
    return {k: interval_profile(v, intervals, statistic) for k, v in parts.items()}


@dataclass
class PipelineResult:
    timeline: ListTimeline
    excess: ExcessStage
    egarch: EgarchStage
    per_stock: dict[str, dict[str, float]]
    summary: dict[str, CrossSectionSummary]
    drop_counts: Counter = field(default_factory=Counter)


def run_core(dataset: Dataset, return_method: str = "log", min_excess_obs: int = MIN_EXCESS_OBS,
             period=PERIOD, workers: int = 1) -> PipelineResult:
    """Excess returns, EGARCH normalization and whole-period statistics."""
    timeline = replay_events(dataset.events)
    ex = excess_stage(dataset, return_method, min_obs=min_excess_obs, workers=workers)
    eg = egarch_stage(ex.excess, workers=workers)
    per_stock = per_stock_statistics(dataset, ex.excess, eg.normalized, eg.fits, return_method, period)
    drops = Counter(excess_filter=len(ex.dropped), egarch_dropped=len(eg.dropped))
    return PipelineResult(timeline, ex, eg, per_stock, cross_section(per_stock), drops)
