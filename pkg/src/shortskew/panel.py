"""Stock x window panel samples and the two-way fixed-effects regression.

The regression is::

    y_it = a_industry + g_window + bT*T_it + br*r_it + bs*sigma_it + bv*v_i + bu*u_it

with industry and time-window intercepts absorbed by alternating demeaning.
Statistics are reported over the full dummy-expanded design, so adjusted
R-squared and F agree with OLS on explicit dummies.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats as sps
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .dates import calendar_windows, to_day
from .egarch import EgarchFit, EgarchParams, egarch_fit
from .errors import (
    CollinearityError,
    DomainError,
    InsufficientDataError,
    UndefinedStatisticError,
    UnderdeterminedError,
)
from .events import ListTimeline, assign_groups, shortable_dummy
from .marketdata import Dataset, ReturnSeries
from .stats import TABLE2_COLUMNS, return_volatility_correlation, significance_stars, skewness

logger = logging.getLogger(__name__)

PERIOD = ("2006-01-01", "2014-03-31")
AS_OF = "2014-03-31"
MIN_PANEL_OBS = 40

DEPENDENTS = tuple(k for k, _ in TABLE2_COLUMNS)
REGRESSORS = ("T", "r", "sigma", "v", "u")
REGRESSOR_LABELS = {
    "T": "turnover rate",
    "r": "return",
    "sigma": "volatility",
    "v": "designated list",
    "u": "short sale practiced",
}


@dataclass(frozen=True)
class PanelSample:
    stock_id: str
    window: int
    window_start: str
    window_end: str
    industry_code: str
    n_obs: int
    skew_raw: float
    skew_excess: float
    skew_normalized: float
    leverage_xi1: float
    corr_raw: float
    corr_excess: float
    T: float
    r: float
    sigma: float
    v: int
    u: int

    def __post_init__(self):
        if self.u and not self.v:
            raise DomainError(f"{self.stock_id} window {self.window}: shortable but not in group 1")


SAMPLE_FIELDS = tuple(f.name for f in fields(PanelSample))


@dataclass
class PanelBuild:
    samples: list[PanelSample]
    windows: list[tuple[np.datetime64, np.datetime64]]
    windowing: str
    dropped: Counter = field(default_factory=Counter)
    empty_windows: list[int] = field(default_factory=list)

    @property
    def n_windows(self) -> int:
        return len(self.windows)


# Within-window fits: quasi-Newton search with the stationarity bound pulled
# slightly inside |gamma1| < 1 so flat short-sample likelihoods terminate.
WINDOW_FIT = {"method": "l-bfgs-b", "gamma_max": 0.999, "maxiter": 500}


def _window_stats(sid, lo, hi, raw, excess, normalized, turnover, start, min_obs):
    """Dependents and continuous regressors for one stock-window, or a drop reason."""
    rw = raw.window(lo, hi)
    if len(rw) <= min_obs:
        return "too_few_obs", None
    ew = excess.window(lo, hi) if excess is not None else None
    nw = normalized.window(lo, hi) if normalized is not None else None
    if ew is None or nw is None or len(ew) <= min_obs or len(nw) < 3:
        return "no_excess_returns", None
    tw = turnover.window(lo, hi) if turnover is not None else None
    if tw is None or len(tw) == 0:
        return "no_turnover", None
    try:
        out = dict(
            skew_raw=skewness(rw.values), skew_excess=skewness(ew.values),
            skew_normalized=skewness(nw.values), corr_raw=return_volatility_correlation(rw.values),
            corr_excess=return_volatility_correlation(ew.values),
        )
    except (UndefinedStatisticError, InsufficientDataError):
        return "undefined_statistic", None
    fit = None
    if start is not False:
        try:
            fit = egarch_fit(ew.values, start=start, min_obs=min_obs + 1, **WINDOW_FIT)
        except Exception as exc:  # noqa: BLE001 - any numerical failure drops the sample
            logger.debug("%s %s: window EGARCH failed: %s", sid, lo, exc)
            return "egarch_failed", None
        if not fit.converged:
            return "egarch_nonconverged", None
    out.update(
        n_obs=len(rw),
        leverage_xi1=float(fit.params.xi1) if fit is not None else float("nan"),
        T=float(tw.values.mean()),
        r=float(rw.values.sum()),
        sigma=float(rw.values.std(ddof=1)),
    )
    return None, out


def build_samples(dataset: Dataset, timeline: ListTimeline, windowing: str = "quarter",
                  min_obs: int = MIN_PANEL_OBS, *, excess: Mapping[str, ReturnSeries],
                  normalized: Mapping[str, ReturnSeries],
                  full_fits: Mapping[str, EgarchParams | EgarchFit] | None = None,
                  period=PERIOD, as_of=AS_OF, return_method: str = "log",
                  fit_leverage: bool = True, stocks: Iterable[str] | None = None) -> PanelBuild:
    """Assemble one sample per (stock, window) with strictly more than ``min_obs`` days.

    Dependents are computed from that window's returns; the leverage
    coefficient comes from a within-window EGARCH fit started at the stock's
    full-sample estimate. Samples whose window fit fails or does not converge
    are dropped and counted in ``dropped``.
    """
    windows = calendar_windows(period[0], period[1], windowing)
    stock_ids = sorted(stocks) if stocks is not None else dataset.stock_ids
    groups = assign_groups(timeline, stock_ids, as_of)
    raw_all = dataset.returns(return_method)
    full_fits = full_fits or {}
    dropped: Counter = Counter()
    samples = []
    for sid in stock_ids:
        raw = raw_all.get(sid)
        meta = dataset.meta.get(sid)
        if raw is None:
            dropped["no_prices"] += len(windows)
            continue
        if meta is None:
            dropped["no_industry"] += len(windows)
            continue
        start = full_fits.get(sid)
        if isinstance(start, EgarchFit):
            start = start.params
        if not fit_leverage:
            start = False
        v = int(groups[sid] == 1)
        for w, (lo, hi) in enumerate(windows):
            reason, vals = _window_stats(sid, lo, hi, raw, excess.get(sid), normalized.get(sid),
                                         dataset.turnover.get(sid), start, min_obs)
            if reason is not None:
                if reason != "too_few_obs" or len(raw.window(lo, hi)) > 0:
                    dropped[reason] += 1
                continue
            u = shortable_dummy(sid, (lo, hi), timeline, dataset.calendar) if v else 0
            samples.append(PanelSample(
                stock_id=sid, window=w, window_start=str(lo), window_end=str(hi),
                industry_code=meta.industry_code, v=v, u=u, **vals,
            ))
    present = {s.window for s in samples}
    empty = [w for w in range(len(windows)) if w not in present]
    for w in empty:
        logger.warning("window %d (%s..%s) has no qualifying stocks", w, *windows[w])
    return PanelBuild(samples, windows, windowing, dropped, empty)


# --------------------------------------------------------------------------- #
# estimation

@dataclass(frozen=True)
class PanelFit:
    dependent: str
    regressors: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    tstat: np.ndarray
    pvalue: np.ndarray
    r2: float
    adj_r2: float
    F: float
    F_pvalue: float
    n_obs: int
    n_stocks: int
    n_industries: int
    n_time: int
    fe_rank: int
    df_resid: int
    industry_effects: bool = True
    time_effects: bool = True
    cov_type: str = "classical"

    def params(self) -> dict[str, float]:
        return dict(zip(self.regressors, self.coef.tolist()))

    def as_dict(self) -> dict:
        return {
            "dependent": self.dependent,
            "coefficients": {
                name: {"coef": float(c), "se": float(s), "t": float(t), "p": float(p),
                       "stars": significance_stars(p)}
                for name, c, s, t, p in zip(self.regressors, self.coef, self.se, self.tstat, self.pvalue)
            },
            "r2": self.r2, "adj_r2": self.adj_r2, "F": self.F, "F_pvalue": self.F_pvalue,
            "n_obs": self.n_obs, "n_stocks": self.n_stocks, "n_industries": self.n_industries,
            "n_time": self.n_time, "n_time_dummies": self.n_time if self.time_effects else 0,
            "fe_rank": self.fe_rank, "df_resid": self.df_resid,
            "industry_effects": self.industry_effects, "time_effects": self.time_effects,
            "cov_type": self.cov_type,
        }


def _codes(values) -> tuple[np.ndarray, int]:
    _, inv = np.unique(np.asarray(values), return_inverse=True)
    return inv.astype(np.int64), int(inv.max()) + 1


def _group_demean(a: np.ndarray, codes: np.ndarray, n_groups: int, counts: np.ndarray) -> np.ndarray:
    sums = np.zeros((n_groups,) + a.shape[1:])
    np.add.at(sums, codes, a)
    return a - (sums / counts.reshape((-1,) + (1,) * (a.ndim - 1)))[codes]


def absorb(a: np.ndarray, effects: Sequence[np.ndarray], tol: float = 1e-14,
           max_iter: int = 10_000) -> np.ndarray:
    """Project ``a`` off the span of one or more sets of group dummies.

    Alternates group demeaning over the effect sets until the largest update
    is below ``tol`` times the scale of ``a``. With no effects the overall
    mean is removed (intercept only).
    """
    a = np.asarray(a, dtype=float)
    if not effects:
        return a - a.mean(axis=0)
    prepared = []
    for codes in effects:
        c, g = _codes(codes)
        prepared.append((c, g, np.bincount(c, minlength=g).astype(float)))
    out = a.copy()
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    for _ in range(max_iter):
        prev = out
        for c, g, counts in prepared:
            out = _group_demean(out, c, g, counts)
        if len(prepared) == 1 or np.max(np.abs(out - prev)) <= tol * scale:
            return out
    logger.warning("alternating projections did not converge; using exact dummy projection")
    D = np.column_stack([np.eye(g)[c] for c, g, _ in prepared])
    coef, *_ = np.linalg.lstsq(D, a, rcond=None)
    return a - D @ coef


def fe_rank(effects: Sequence[np.ndarray]) -> int:
    """Column rank of the intercept plus all fixed-effect dummies.

    For two effect sets this is ``G1 + G2 - (connected components)`` of the
    bipartite graph linking co-occurring groups.
    """
    if not effects:
        return 1
    if len(effects) == 1:
        return _codes(effects[0])[1]
    if len(effects) > 2:
        D = np.column_stack([np.eye(_codes(e)[1])[_codes(e)[0]] for e in effects])
        return int(np.linalg.matrix_rank(D))
    c1, g1 = _codes(effects[0])
    c2, g2 = _codes(effects[1])
    graph = coo_matrix((np.ones(c1.size), (c1, g1 + c2)), shape=(g1 + g2, g1 + g2))
    n_comp, _ = connected_components(graph, directed=False)
    return g1 + g2 - n_comp


def _samples_arrays(samples, dependent, regressors):
    if not samples:
        raise InsufficientDataError("no panel samples")
    if dependent not in DEPENDENTS:
        raise DomainError(f"unknown dependent {dependent!r}; expected one of {DEPENDENTS}")
    y = np.array([getattr(s, dependent) for s in samples], dtype=float)
    X = np.array([[getattr(s, r) for r in regressors] for s in samples], dtype=float)
    keep = np.isfinite(y) & np.isfinite(X).all(axis=1)
    samples = [s for s, k in zip(samples, keep) if k]
    return samples, y[keep], X[keep]


def fe_ols(samples: Sequence[PanelSample], dependent: str, regressors: Sequence[str] = REGRESSORS,
           industry_effects: bool = True, time_effects: bool = True,
           cluster: str | None = None, collinearity_tol: float = 1e-9) -> PanelFit:
    """Two-way fixed-effects OLS with classical (or stock-clustered) standard errors.

    Raises
    ------
    CollinearityError
        A regressor is spanned by the fixed effects and the regressors before
        it; the error names the column.
    """
    regressors = tuple(regressors)
    samples, y, X = _samples_arrays(samples, dependent, regressors)
    n, k = X.shape
    effects = []
    if industry_effects:
        effects.append(np.array([s.industry_code for s in samples]))
    if time_effects:
        effects.append(np.array([s.window for s in samples]))
    p_fe = fe_rank(effects)
    df_resid = n - p_fe - k
    if df_resid <= 0:
        raise UnderdeterminedError(f"{n} observations for {p_fe + k} parameters")

    Z = absorb(np.column_stack([y, X]), effects)
    yd, Xd = Z[:, 0], Z[:, 1:]
    raw_norms = np.linalg.norm(X, axis=0)
    for j, name in enumerate(regressors):
        col = Xd[:, j]
        if j:
            b, *_ = np.linalg.lstsq(Xd[:, :j], col, rcond=None)
            col = col - Xd[:, :j] @ b
        if not np.linalg.norm(col) > collinearity_tol * max(raw_norms[j], 1.0):
            raise CollinearityError(name)

    Q, R = np.linalg.qr(Xd)
    beta = np.linalg.solve(R, Q.T @ yd)
    resid = yd - Xd @ beta
    ssr = float(resid @ resid)
    Rinv = np.linalg.inv(R)
    bread = Rinv @ Rinv.T
    if cluster is None:
        cov = (ssr / df_resid) * bread
        cov_type = "classical"
    elif cluster == "stock":
        ids, _ = _codes([s.stock_id for s in samples])
        G = int(ids.max()) + 1
        scores = np.zeros((G, k))
        np.add.at(scores, ids, Xd * resid[:, None])
        meat = scores.T @ scores
        scale = G / (G - 1) * (n - 1) / (n - p_fe - k)
        cov = scale * bread @ meat @ bread
        cov_type = "cluster:stock"
    else:
        raise DomainError(f"cluster must be None or 'stock', got {cluster!r}")

    se = np.sqrt(np.diag(cov))
    tstat = beta / se
    df_t = df_resid if cluster is None else G - 1
    pval = 2.0 * sps.t.sf(np.abs(tstat), df_t)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ssr / sst
    adj = 1.0 - (1.0 - r2) * (n - 1) / df_resid
    df_model = p_fe - 1 + k
    F = ((sst - ssr) / df_model) / (ssr / df_resid)
    return PanelFit(
        dependent=dependent, regressors=regressors, coef=beta, se=se, tstat=tstat, pvalue=pval,
        r2=r2, adj_r2=adj, F=float(F), F_pvalue=float(sps.f.sf(F, df_model, df_resid)),
        n_obs=n, n_stocks=len({s.stock_id for s in samples}),
        n_industries=len({s.industry_code for s in samples}),
        n_time=len({s.window for s in samples}), fe_rank=p_fe, df_resid=df_resid,
        industry_effects=industry_effects, time_effects=time_effects, cov_type=cov_type,
    )


# --------------------------------------------------------------------------- #
# reporting and I/O

def _fmt(x: float) -> str:
    if not np.isfinite(x):
        return "nan"
    a = abs(x)
    if a != 0 and (a < 1e-3 or a >= 1e4):
        return f"{x:.3g}"
    return f"{x:.4g}" if a < 1 else f"{x:.2f}"


def report_table(fits, col_width: int = 14) -> str:
    """Fixed-width regression table: coefficients with stars, t-statistics in parentheses."""
    if isinstance(fits, PanelFit):
        fits = [fits]
    if isinstance(fits, Mapping):
        fits = list(fits.values())
    if not fits:
        raise DomainError("report_table needs at least one fit")
    order = {k: i for i, k in enumerate(DEPENDENTS)}
    fits = sorted(fits, key=lambda f: order.get(f.dependent, len(order)))
    labels = dict(TABLE2_COLUMNS)
    stub = 24
    w = max(col_width, 2 + max(len(labels.get(f.dependent, f.dependent)) for f in fits))
    rule = "-" * (stub + w * len(fits))
    lines = [rule, " " * stub + "".join(f"{labels.get(f.dependent, f.dependent):>{w}}" for f in fits), rule]
    for name in fits[0].regressors:
        label = REGRESSOR_LABELS.get(name, name)
        coef_cells, t_cells = [], []
        for f in fits:
            j = f.regressors.index(name)
            coef_cells.append(f"{_fmt(f.coef[j]) + significance_stars(f.pvalue[j]):>{w}}")
            t_cells.append(f"{'(' + f'{f.tstat[j]:.2f}' + ')':>{w}}")
        lines.append(f"{label:<{stub}}" + "".join(coef_cells))
        lines.append(" " * stub + "".join(t_cells))
    lines.append(rule)
    footer = (
        ("Obj.", lambda f: str(f.n_obs)),
        ("Stocks", lambda f: str(f.n_stocks)),
        ("R-square adjusted", lambda f: f"{f.adj_r2:.3f}"),
        ("F-statistics", lambda f: f"{f.F:.2f}"),
        ("Time fixed effect", lambda f: "YES" if f.time_effects else "NO"),
        ("Industry fixed effect", lambda f: "YES" if f.industry_effects else "NO"),
    )
    for label, cell in footer:
        lines.append(f"{label:<{stub}}" + "".join(f"{cell(f):>{w}}" for f in fits))
    lines.append(rule)
    lines.append("*** p<0.01, ** p<0.05, * p<0.1")
    return "\n".join(lines)


def fits_to_json(fits: Iterable[PanelFit], **extra) -> str:
    payload = dict(extra)
    payload["fits"] = [f.as_dict() for f in fits]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_samples(samples: Iterable[PanelSample], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_FIELDS)
        for s in samples:
            w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(s).values()])
    return path


def read_samples(path) -> list[PanelSample]:
    types = {f.name: f.type for f in fields(PanelSample)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for name, val in row.items():
                t = types[name]
                kw[name] = int(val) if t == "int" else float(val) if t == "float" else val
            out.append(PanelSample(**kw))
    return out


def window_label(windowing: str, lo) -> str:
    d = to_day(lo).astype(object)
    if windowing == "quarter":
        return f"{d.year}Q{(d.month - 1) // 3 + 1}"
    if windowing == "half_year":
        return f"{d.year}H{(d.month - 1) // 6 + 1}"
    return str(d)
