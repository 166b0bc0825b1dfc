"""Synthetic markets with known factor loadings and EGARCH dynamics.

Each stock's daily log return is ``alpha + beta . f[t] + e[t]`` where ``f`` are
i.i.d. Gaussian factor returns and ``e`` follows an EGARCH(1,1) whose
parameters switch from a "before" to an "after" regime on the day the stock
is first added to the designated list. Stocks never added stay in the
"control" regime throughout.

Randomness comes from ``numpy.random.PCG64``; per-stock streams are spawned
from the master seed with ``SeedSequence`` so results do not depend on the
order in which stocks are generated.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np

from .dates import DAY, to_day
from .egarch import SQRT_2_OVER_PI, EgarchParams
from .errors import ConfigError
from .events import ShortSaleEvent
from .marketdata import (
    Dataset,
    FactorSeries,
    PriceSeries,
    StockMeta,
    TradingCalendar,
    TurnoverSeries,
    write_dataset,
)

GENERATOR = "numpy.random.PCG64"


@dataclass(frozen=True)
class Regime:
    """EGARCH parameters plus innovation shape.

    ``innovation_skew`` is the right/left scale ratio of a two-piece normal,
    standardized to zero mean and unit variance; 1.0 gives Gaussian shocks.
    """

    params: EgarchParams
    innovation_skew: float = 1.0

    def __post_init__(self):
        if not self.innovation_skew > 0:
            raise ConfigError(f"innovation_skew must be positive, got {self.innovation_skew}")


def two_piece_normal(rng: np.random.Generator, size, ratio: float = 1.0) -> np.ndarray:
    """Standardized two-piece normal draws; ``ratio > 1`` skews right."""
    if ratio == 1.0:
        return rng.standard_normal(size)
    s1, s2 = 1.0, float(ratio)
    w = np.abs(rng.standard_normal(size))
    right = rng.random(size) < s2 / (s1 + s2)
    x = np.where(right, s2 * w, -s1 * w)
    mean = SQRT_2_OVER_PI * (s2 - s1)
    var = (s1 ** 3 + s2 ** 3) / (s1 + s2) - mean ** 2
    return (x - mean) / math.sqrt(var)


@numba.njit(cache=True)
def _simulate_kernel(kappa, gamma1, eta1, xi1, z, log_s2_0):
    n = z.shape[0]
    eps = np.empty(n)
    sigma = np.empty(n)
    h = log_s2_0
    for t in range(n):
        s = math.exp(0.5 * h)
        sigma[t] = s
        eps[t] = s * z[t]
        if t + 1 < n:
            k = t + 1
            h = kappa[k] + gamma1[k] * h + eta1[k] * (abs(z[t]) - SQRT_2_OVER_PI) + xi1[k] * z[t]
    return eps, sigma


def _param_arrays(regimes: list[tuple[int, EgarchParams]], n: int):
    """Piecewise-constant parameter arrays; ``regimes`` lists (first index, params)."""
    arrs = np.empty((4, n))
    for i, (lo, p) in enumerate(regimes):
        hi = regimes[i + 1][0] if i + 1 < len(regimes) else n
        arrs[:, lo:hi] = p.as_array()[:, None]
    return arrs


def simulate_regimes(regimes: list[tuple[int, Regime]], n: int, rng: np.random.Generator,
                     burn: int = 500) -> tuple[np.ndarray, np.ndarray]:
    """EGARCH path whose parameters switch at the given start indices.

    The first regime is also used for a discarded burn-in of ``burn`` steps,
    started at its stationary log-variance level.
    """
    if not regimes or regimes[0][0] != 0:
        raise ConfigError("first regime must start at index 0")
    full = [(0, regimes[0][1])] + [(lo + burn, r) for lo, r in regimes[1:]] if burn else list(regimes)
    total = n + burn
    z = np.empty(total)
    for i, (lo, r) in enumerate(full):
        hi = full[i + 1][0] if i + 1 < len(full) else total
        z[lo:hi] = two_piece_normal(rng, hi - lo, r.innovation_skew)
    k, g, e, x = _param_arrays([(lo, r.params) for lo, r in full], total)
    first = regimes[0][1].params
    eps, sigma = _simulate_kernel(k, g, e, x, z, first.unconditional_log_variance)
    return eps[burn:], sigma[burn:]


def egarch_simulate(params: EgarchParams, n: int, seed, burn: int = 500,
                    innovation_skew: float = 1.0) -> np.ndarray:
    """Simulate ``n`` EGARCH(1,1) innovations ``e[t] = s[t] * z[t]``.

    Deterministic given ``seed``.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    eps, _ = simulate_regimes([(0, Regime(params, innovation_skew))], n, rng, burn)
    return eps


# --------------------------------------------------------------------------- #
# full markets

DEFAULT_EGARCH = EgarchParams(kappa=-0.39, gamma1=0.95, eta1=0.15, xi1=0.0)


def _with_xi(p: EgarchParams, xi: float) -> EgarchParams:
    return EgarchParams(p.kappa, p.gamma1, p.eta1, xi)


@dataclass(frozen=True)
class ListingSpec:
    """Designated-list schedule entry for the stock at position ``stock``."""

    stock: int
    add: str
    delete: str | None = None


@dataclass(frozen=True)
class SimConfig:
    n_stocks: int = 50
    start: str = "2002-01-01"
    end: str = "2014-03-31"
    factor_mean: tuple[float, float, float] = (3e-4, 1e-4, 1e-4)
    factor_vol: tuple[float, float, float] = (0.015, 0.006, 0.006)
    alpha_range: tuple[float, float] = (-2e-4, 2e-4)
    beta_ranges: tuple[tuple[float, float], ...] = ((0.6, 1.4), (-0.5, 0.5), (-0.5, 0.5))
    idio_scale: float = 1.0
    regime_before: Regime = Regime(_with_xi(DEFAULT_EGARCH, 0.1))
    regime_after: Regime = Regime(_with_xi(DEFAULT_EGARCH, 0.0))
    regime_control: Regime | None = None
    schedule: tuple[ListingSpec, ...] = ()
    turnover_log_mean: float = -4.5
    turnover_log_sd: float = 0.5
    n_industries: int = 13
    initial_price: float = 10.0
    burn: int = 500
    seed: int = 0
    stock_prefix: str = "S"

    def __post_init__(self):
        if self.n_stocks < 1:
            raise ConfigError("n_stocks must be positive")
        if to_day(self.end) <= to_day(self.start):
            raise ConfigError("end must be after start")
        if any(v <= 0 for v in self.factor_vol) or self.turnover_log_sd <= 0:
            raise ConfigError("all volatilities must be positive")
        if self.idio_scale < 0:
            raise ConfigError("idio_scale must be non-negative")
        if len(self.factor_mean) != 3 or len(self.factor_vol) != 3 or len(self.beta_ranges) != 3:
            raise ConfigError("exactly three factors are simulated")
        lo, hi = to_day(self.start), to_day(self.end)
        seen = set()
        for spec in self.schedule:
            if not 0 <= spec.stock < self.n_stocks:
                raise ConfigError(f"schedule references unknown stock index {spec.stock}")
            if spec.stock in seen:
                raise ConfigError(f"stock index {spec.stock} scheduled twice")
            seen.add(spec.stock)
            a = to_day(spec.add)
            d = None if spec.delete is None else to_day(spec.delete)
            if not lo <= a <= hi or (d is not None and not a < d <= hi):
                raise ConfigError(f"schedule dates for stock {spec.stock} outside [{lo}, {hi}]")

    @property
    def control(self) -> Regime:
        return self.regime_control or self.regime_before

    def stock_id(self, i: int) -> str:
        width = max(3, len(str(self.n_stocks - 1)))
        return f"{self.stock_prefix}{i:0{width}d}"

    def trading_days(self) -> np.ndarray:
        lo, hi = to_day(self.start), to_day(self.end)
        days = np.arange(lo, hi + np.timedelta64(1, "D"), dtype=DAY)
        return days[np.is_busday(days)]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StockTruth:
    stock_id: str
    industry_code: str
    group: int
    alpha: float
    betas: tuple[float, float, float]
    add_date: np.datetime64 | None
    before: Regime
    after: Regime | None


@dataclass(frozen=True)
class SimulatedMarket:
    dataset: Dataset
    truth: dict[str, StockTruth]
    manifest: dict = field(default_factory=dict)
    innovations: dict[str, np.ndarray] = field(default_factory=dict, repr=False)


def simulate_market(config: SimConfig) -> SimulatedMarket:
    """Generate a full :class:`Dataset` plus the ground truth behind it."""
    days = config.trading_days()
    n = days.size
    if n < 3:
        raise ConfigError("simulation period holds fewer than 3 trading days")
    root = np.random.SeedSequence(config.seed)
    market_seq, *stock_seqs = root.spawn(config.n_stocks + 1)
    mrng = np.random.Generator(np.random.PCG64(market_seq))

    fmean = np.asarray(config.factor_mean)
    fvol = np.asarray(config.factor_vol)
    factors = fmean + fvol * mrng.standard_normal((n, 3))
    industries = [f"I{k + 1:02d}" for k in range(config.n_industries)]
    ind_idx = mrng.integers(0, config.n_industries, size=config.n_stocks)

    schedule = {s.stock: s for s in config.schedule}
    prices, turnover, meta, truth, innov = {}, {}, {}, {}, {}
    events = []
    for i in range(config.n_stocks):
        rng = np.random.Generator(np.random.PCG64(stock_seqs[i]))
        sid = config.stock_id(i)
        alpha = float(rng.uniform(*config.alpha_range))
        betas = np.array([rng.uniform(lo, hi) for lo, hi in config.beta_ranges])
        spec = schedule.get(i)
        if spec is None:
            regimes = [(0, config.control)]
            add_date = None
        else:
            add_date = to_day(spec.add)
            # returns are indexed from day 1; switch at the first return dated on/after addition
            k = int(np.searchsorted(days[1:], add_date))
            regimes = [(0, config.regime_before)]
            if k > 0 and k < n - 1:
                regimes.append((k, config.regime_after))
            elif k == 0:
                regimes = [(0, config.regime_after)]
            events.append(ShortSaleEvent(add_date, sid, "add"))
            if spec.delete is not None:
                events.append(ShortSaleEvent(to_day(spec.delete), sid, "delete"))
        eps, _ = simulate_regimes(regimes, n - 1, rng, config.burn)
        eps = config.idio_scale * eps
        r = alpha + factors[1:] @ betas + eps
        logp = math.log(config.initial_price) + np.concatenate([[0.0], np.cumsum(r)])
        prices[sid] = PriceSeries(sid, days, np.exp(logp))
        turnover[sid] = TurnoverSeries(
            sid, days, np.exp(config.turnover_log_mean + config.turnover_log_sd * rng.standard_normal(n)))
        code = industries[ind_idx[i]]
        meta[sid] = StockMeta(sid, code)
        innov[sid] = eps
        truth[sid] = StockTruth(
            stock_id=sid, industry_code=code, group=1 if spec is not None else 2,
            alpha=alpha, betas=tuple(float(b) for b in betas), add_date=add_date,
            before=config.regime_before if spec is not None else config.control,
            after=config.regime_after if spec is not None else None,
        )

    events.sort(key=lambda e: (e.effective_date, e.action != "delete", e.stock_id))
    dataset = Dataset(TradingCalendar(days), prices, FactorSeries(days, factors), turnover, meta,
                      tuple(events), ())
    manifest = {
        "generator": GENERATOR,
        "numpy_version": np.__version__,
        "seed": config.seed,
        "n_trading_days": int(n),
        "config": _jsonable(config.to_dict()),
    }
    return SimulatedMarket(dataset, truth, manifest, innov)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


TRUTH_COLUMNS = (
    "stock_id", "industry_code", "group", "alpha", "beta_mkt", "beta_smb", "beta_hml", "add_date",
    "kappa_before", "gamma1_before", "eta1_before", "xi1_before", "skew_before",
    "kappa_after", "gamma1_after", "eta1_after", "xi1_after", "skew_after",
)


def _truth_row(t: StockTruth) -> list:
    def regime(r):
        if r is None:
            return [""] * 5
        return [repr(x) for x in r.params.as_array().tolist()] + [repr(r.innovation_skew)]

    return ([t.stock_id, t.industry_code, t.group, repr(t.alpha)] + [repr(b) for b in t.betas]
            + ["" if t.add_date is None else str(t.add_date)] + regime(t.before) + regime(t.after))


def write_simulation(sim: SimulatedMarket, directory) -> dict[str, Path]:
    """Write the dataset CSVs plus ``ground_truth.csv`` and ``manifest.json``."""
    d = Path(directory)
    paths = write_dataset(sim.dataset, d)
    paths["ground_truth"] = d / "ground_truth.csv"
    with open(paths["ground_truth"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_COLUMNS)
        for sid in sorted(sim.truth):
            w.writerow(_truth_row(sim.truth[sid]))
    paths["manifest"] = d / "manifest.json"
    paths["manifest"].write_text(json.dumps(sim.manifest, indent=2, sort_keys=True, default=str) + "\n")
    return paths


def staggered_schedule(n_listed: int, add_dates, first: int = 0) -> tuple[ListingSpec, ...]:
    """List stocks ``first .. first+n_listed-1``, cycling through ``add_dates``."""
    add_dates = [str(to_day(d)) for d in add_dates]
    return tuple(ListingSpec(first + j, add_dates[j % len(add_dates)]) for j in range(n_listed))


def regime_experiment_config(n_stocks: int = 200, seed: int = 2014, xi_before: float = 0.1,
                             xi_after: float = 0.0, add_dates=None, **overrides) -> SimConfig:
    """Treatment/control market: listed stocks lose their anti-leverage on addition.

    Half the stocks are added to the list on staggered dates and switch
    ``xi1`` from ``xi_before`` to ``xi_after``; the rest keep ``xi_before``.
    Data run 2002-01-01..2014-03-31 so the rolling factor model has four
    years of history before the 2006-2014 analysis period.
    """
    if add_dates is None:
        add_dates = ("2010-03-31", "2010-09-30", "2011-03-31", "2011-09-30", "2012-03-30")
    base = overrides.pop("egarch", DEFAULT_EGARCH)
    cfg = dict(
        n_stocks=n_stocks,
        regime_before=Regime(_with_xi(base, xi_before)),
        regime_after=Regime(_with_xi(base, xi_after)),
        regime_control=Regime(_with_xi(base, xi_before)),
        schedule=staggered_schedule(n_stocks // 2, add_dates),
        seed=seed,
    )
    cfg.update(overrides)
    return SimConfig(**cfg)
