"""Return asymmetry under short-sale constraints: excess returns, EGARCH
normalization, skewness/leverage statistics, list-event replay and
fixed-effects panel regressions, with a synthetic-market simulator."""

__version__ = "0.1.0"

from .egarch import EgarchParams, VolatilityPath, egarch_filter, egarch_fit, normalize
from .events import ListTimeline, ShortSaleEvent, assign_groups, replay_events, shortable_dummy
from .factor_model import filter_min_obs, ols_fit, rolling_excess_returns
from .marketdata import (
    Dataset,
    PriceSeries,
    ReturnSeries,
    aggregate_returns,
    compute_returns,
    ingest_dataset,
)
from .panel import PanelSample, build_samples, fe_ols, report_table
from .simulator import SimConfig, egarch_simulate, simulate_market
from .stats import (
    cross_section_summary,
    distribution_data,
    one_sample_t_test,
    return_volatility_correlation,
    skewness,
    wilcoxon_signed_rank,
)

__all__ = [
    "Dataset", "EgarchParams", "ListTimeline", "PanelSample", "PriceSeries", "ReturnSeries",
    "ShortSaleEvent", "SimConfig", "VolatilityPath", "aggregate_returns", "assign_groups",
    "build_samples", "compute_returns", "cross_section_summary", "distribution_data",
    "egarch_filter", "egarch_fit", "egarch_simulate", "fe_ols", "filter_min_obs",
    "ingest_dataset", "normalize", "one_sample_t_test", "ols_fit", "replay_events",
    "report_table", "return_volatility_correlation", "rolling_excess_returns",
    "shortable_dummy", "simulate_market", "skewness", "wilcoxon_signed_rank",
]
