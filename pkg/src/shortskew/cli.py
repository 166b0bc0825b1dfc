"""Command-line pipeline: ``shortskew <stage> [--config FILE] [options]``.

Stages: simulate, excess, egarch, stats, panel, figures, all.

The optional config file is plain ``key = value`` lines (``#`` comments).
Command-line flags override config values. Exit codes: 0 success,
1 validation error, 2 computation error, 3 missing upstream artifact.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dates import to_day
from .egarch import EgarchFit, EgarchParams
from .errors import (
    ConfigError,
    DependencyError,
    DuplicateError,
    EmptyInputError,
    InconsistentEventError,
    SchemaError,
    ShortSkewError,
)
from .events import replay_events
from .marketdata import (
    SCHEMAS,
    ingest_dataset,
    read_returns_csv,
    write_returns_csv,
)
from .panel import DEPENDENTS, build_samples, fe_ols, fits_to_json, report_table, write_samples
from .pipeline import (
    cross_section,
    egarch_stage,
    excess_stage,
    interval_profiles,
    per_stock_statistics,
)
from .simulator import regime_experiment_config, simulate_market, write_simulation
from .stats import (
    TABLE2_COLUMNS,
    distribution_data,
    format_summary_table,
    return_volatility_correlation,
    skewness,
)

logger = logging.getLogger("shortskew")

STAGES = ("simulate", "excess", "egarch", "stats", "panel", "figures")
EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTATION, EXIT_DEPENDENCY = 0, 1, 2, 3
_VALIDATION_ERRORS = (ConfigError, SchemaError, DuplicateError, EmptyInputError,
                      InconsistentEventError, OSError)


def _date(v):
    return str(to_day(v))


def _path(v):
    return Path(v) if v not in ("", None) else None


def _choice(*options):
    def conv(v):
        if v not in options:
            raise ValueError(f"expected one of {options}, got {v!r}")
        return v
    return conv


def _positive_int(v):
    i = int(v)
    if i <= 0:
        raise ValueError(f"must be a positive integer, got {v!r}")
    return i


def _optional_cluster(v):
    if v in ("", "none", None):
        return None
    return _choice("stock")(v)


@dataclass
class RunConfig:
    output_dir: Path = Path("output")
    data_dir: Path | None = None
    prices: Path | None = None
    factors: Path | None = None
    turnover: Path | None = None
    meta: Path | None = None
    events: Path | None = None
    windowing: str = "quarter"
    min_obs_excess: int = 60
    min_obs_panel: int = 40
    min_window_obs: int = 200
    window_years: int = 4
    return_method: str = "log"
    as_of: str = "2014-03-31"
    period_start: str = "2006-01-01"
    period_end: str = "2014-03-31"
    policy_start: str = "2010-03-31"
    max_interval: int = 10
    cluster: str | None = None
    seed: int = 2014
    n_stocks: int = 200
    workers: int = 1
    stage_timings: dict = field(default_factory=dict, repr=False)

    _CONVERTERS = {
        "output_dir": Path, "data_dir": _path, "prices": _path, "factors": _path, "turnover": _path,
        "meta": _path, "events": _path, "windowing": _choice("quarter", "half_year"),
        "min_obs_excess": _positive_int, "min_obs_panel": _positive_int,
        "min_window_obs": _positive_int, "window_years": _positive_int,
        "return_method": _choice("log", "simple"), "as_of": _date, "period_start": _date,
        "period_end": _date, "policy_start": _date, "max_interval": _positive_int,
        "cluster": _optional_cluster, "seed": int, "n_stocks": _positive_int,
        "workers": _positive_int,
    }

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(cls._CONVERTERS)

    def set(self, key: str, value) -> None:
        if key not in self._CONVERTERS:
            raise ConfigError(f"unknown config key {key!r}; valid keys: {', '.join(self.keys())}")
        try:
            setattr(self, key, self._CONVERTERS[key](value) if isinstance(value, str) else value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid value for {key!r}: {exc}") from None

    def input_path(self, name: str) -> Path:
        explicit = getattr(self, name)
        if explicit is not None:
            return explicit
        return (self.data_dir or self.output_dir / "data") / f"{name}.csv"

    @property
    def period(self) -> tuple[str, str]:
        return self.period_start, self.period_end

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name.startswith("_") or f.name == "stage_timings":
                continue
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, Path) else v
        return out


def parse_config_file(path) -> dict[str, str]:
    """Read ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        for k, v in parse_config_file(path).items():
            cfg.set(k, v)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg.set(k, v)
    if to_day(cfg.period_end) <= to_day(cfg.period_start):
        raise ConfigError("period_end must be after period_start")
    return cfg


# --------------------------------------------------------------------------- #
# artifacts

def _dump_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _write_rows(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise DependencyError(stage, str(path))
    return path


def _dataset(cfg: RunConfig):
    paths = {name: cfg.input_path(name) for name in SCHEMAS}
    for name in ("prices", "factors"):
        _require(paths[name], "simulate")
    opt = {k: (p if p.exists() else None) for k, p in paths.items()}
    return ingest_dataset(paths["prices"], paths["factors"], opt["turnover"], opt["meta"], opt["events"])


def _excess_path(cfg):
    return cfg.output_dir / "excess" / "excess_returns.csv"


def _params_path(cfg):
    return cfg.output_dir / "egarch" / "params.csv"


def _normalized_path(cfg):
    return cfg.output_dir / "egarch" / "normalized.csv"


PARAM_HEADER = ("stock_id", "kappa", "gamma1", "eta1", "xi1", "loglik", "converged", "sigma0_sq")


def _read_params(path: Path) -> dict[str, EgarchParams]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["converged"] == "1":
                out[row["stock_id"]] = EgarchParams(float(row["kappa"]), float(row["gamma1"]),
                                                    float(row["eta1"]), float(row["xi1"]))
    return out


# --------------------------------------------------------------------------- #
# stages

def stage_simulate(cfg: RunConfig) -> dict:
    sim = simulate_market(regime_experiment_config(n_stocks=cfg.n_stocks, seed=cfg.seed))
    target = cfg.data_dir or cfg.output_dir / "data"
    write_simulation(sim, target)
    return {"n_stocks": len(sim.truth), "n_days": len(sim.dataset.calendar), "data_dir": str(target)}


def stage_excess(cfg: RunConfig) -> dict:
    ds = _dataset(cfg)
    ex = excess_stage(ds, cfg.return_method, cfg.window_years, cfg.min_window_obs,
                      cfg.min_obs_excess, cfg.workers)
    out = cfg.output_dir / "excess"
    out.mkdir(parents=True, exist_ok=True)
    write_returns_csv(ex.excess, _excess_path(cfg), "excess")
    report = {
        "n_stocks_in": len(ds.prices), "n_stocks_kept": len(ex.excess),
        "dropped_min_obs": sorted(ex.dropped), "skipped_quarters": ex.skipped_quarters,
        "rejected_rows": [vars(d) for d in ds.diagnostics], "gap_counts": ds.gap_counts(),
    }
    _dump_json(out / "report.json", report)
    return {"kept": len(ex.excess), "dropped_min_obs": len(ex.dropped),
            "rejected_rows": len(ds.diagnostics)}


def stage_egarch(cfg: RunConfig) -> dict:
    excess = read_returns_csv(_require(_excess_path(cfg), "excess"), "excess")
    eg = egarch_stage(excess, cfg.workers)
    rows = []
    for sid in sorted(excess):
        fit: EgarchFit | None = eg.fits.get(sid)
        if fit is None:
            continue
        p = fit.params
        rows.append((sid, *(_cell(x) for x in (p.kappa, p.gamma1, p.eta1, p.xi1, fit.loglik)),
                     int(fit.converged), _cell(fit.sigma0_sq)))
    _write_rows(_params_path(cfg), PARAM_HEADER, rows)
    write_returns_csv(eg.normalized, _normalized_path(cfg), "normalized")
    _dump_json(cfg.output_dir / "egarch" / "report.json", {"dropped": eg.dropped, "n_fitted": len(eg.fits)})
    return {"fitted": len(eg.fits), "dropped": len(eg.dropped)}


def _load_upstream(cfg: RunConfig):
    excess = read_returns_csv(_require(_excess_path(cfg), "excess"), "excess")
    normalized = read_returns_csv(_require(_normalized_path(cfg), "egarch"), "normalized")
    params = _read_params(_require(_params_path(cfg), "egarch"))
    return excess, normalized, params


class _ParamFit:
    """Adapter exposing ``.params`` like an :class:`EgarchFit`."""

    def __init__(self, params):
        self.params = params


def stage_stats(cfg: RunConfig) -> dict:
    ds = _dataset(cfg)
    excess, normalized, params = _load_upstream(cfg)
    fits = {k: _ParamFit(v) for k, v in params.items()}
    per_stock = per_stock_statistics(ds, excess, normalized, fits, cfg.return_method, cfg.period)
    summary = cross_section(per_stock)
    out = cfg.output_dir / "stats"
    keys = [k for k, _ in TABLE2_COLUMNS]
    _write_rows(out / "per_stock.csv", ("stock_id",) + tuple(keys),
                ((sid, *(_cell(row[k]) for k in keys)) for sid, row in sorted(per_stock.items())))
    _write_rows(out / "table2.csv",
                ("statistic", "mean", "median", "t_statistic", "t_pvalue", "signed_rank_statistic",
                 "signed_rank_pvalue", "n_stocks", "mean_stars", "median_stars"),
                ([_cell(v) for v in s.as_dict().values()] for s in summary.values()))
    _dump_json(out / "table2.json", {k: s.as_dict() for k, s in summary.items()})
    (out / "table2.txt").write_text(format_summary_table(summary) + "\n", encoding="utf-8")
    return {"n_stocks": len(per_stock)}


def stage_panel(cfg: RunConfig) -> dict:
    ds = _dataset(cfg)
    excess, normalized, params = _load_upstream(cfg)
    timeline = replay_events(ds.events)
    build = build_samples(ds, timeline, cfg.windowing, cfg.min_obs_panel, excess=excess,
                          normalized=normalized, full_fits=params, period=cfg.period, as_of=cfg.as_of,
                          return_method=cfg.return_method, stocks=sorted(params))
    out = cfg.output_dir / "panel"
    out.mkdir(parents=True, exist_ok=True)
    tag = cfg.windowing
    write_samples(build.samples, out / f"samples_{tag}.csv")
    fits = [fe_ols(build.samples, dep, cluster=cfg.cluster) for dep in DEPENDENTS]
    (out / f"fits_{tag}.json").write_text(fits_to_json(
        fits, windowing=tag, n_time_windows=build.n_windows, n_time_dummies=build.n_windows,
        windows=[[str(a), str(b)] for a, b in build.windows], empty_windows=build.empty_windows,
        dropped=dict(sorted(build.dropped.items())), n_samples=len(build.samples),
    ), encoding="utf-8")
    (out / f"table_{tag}.txt").write_text(report_table(fits) + "\n", encoding="utf-8")
    return {"windowing": tag, "n_time_windows": build.n_windows, "n_samples": len(build.samples),
            "dropped": dict(build.dropped)}


def _profile_rows(profiles):
    for name, prof in profiles.items():
        for k, m, e, n in zip(prof.intervals, prof.mean, prof.error, prof.n):
            yield int(k), name, _cell(m), _cell(e), int(n)


def stage_figures(cfg: RunConfig) -> dict:
    ds = _dataset(cfg)
    excess, normalized, params = _load_upstream(cfg)
    normalized = {k: v for k, v in normalized.items() if k in params}
    excess = {k: v for k, v in excess.items() if k in params}
    timeline = replay_events(ds.events)
    pooled = np.concatenate([s.window(*cfg.period).values for _, s in sorted(normalized.items())])
    dd = distribution_data(pooled)
    out = cfg.output_dir / "figures"
    _write_rows(out / "density.csv", ("bin_center", "density"),
                ((_cell(a), _cell(b)) for a, b in zip(dd.bin_centers, dd.density)))
    _write_rows(out / "ecdf.csv", ("x", "F"), ((_cell(a), _cell(b)) for a, b in zip(dd.ecdf_x, dd.ecdf)))
    _write_rows(out / "tails.csv", ("x", "left_F", "reflected_right_F"),
                ((_cell(a), _cell(b), _cell(c)) for a, b, c in zip(dd.tail_x, dd.left_F, dd.reflected_right_F)))
    intervals = range(1, cfg.max_interval + 1)
    header = ("interval", "series", "mean", "error", "n")
    skew = interval_profiles(normalized, timeline, skewness, intervals, cfg.as_of, cfg.policy_start)
    _write_rows(out / "skewness_vs_interval.csv", header, _profile_rows(skew))
    corr = interval_profiles(excess, timeline, return_volatility_correlation, intervals, cfg.as_of,
                             cfg.policy_start)
    _write_rows(out / "correlation_vs_interval.csv", header, _profile_rows(corr))
    return {"n_pooled": int(pooled.size)}


STAGE_FUNCS = {
    "simulate": stage_simulate, "excess": stage_excess, "egarch": stage_egarch,
    "stats": stage_stats, "panel": stage_panel, "figures": stage_figures,
}


def run_stage(name: str, cfg: RunConfig) -> dict:
    """Run one stage (or ``all`` = every analysis stage) and update the run manifest."""
    names = [s for s in STAGES if s != "simulate"] if name == "all" else [name]
    results = {}
    for stage in names:
        t0 = time.perf_counter()
        logger.info("stage %s", stage)
        results[stage] = STAGE_FUNCS[stage](cfg)
        cfg.stage_timings[stage] = round(time.perf_counter() - t0, 3)
    _update_manifest(cfg, results)
    return results


def _update_manifest(cfg: RunConfig, results: dict) -> None:
    path = cfg.output_dir / "run_manifest.json"
    manifest = json.loads(path.read_text()) if path.exists() else {"stages": {}}
    for stage, info in results.items():
        manifest["stages"][stage] = {
            "finished_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "seconds": cfg.stage_timings.get(stage),
            "result": info,
        }
    manifest["config"] = cfg.echo()
    manifest["version"] = __version__
    _dump_json(path, manifest)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shortskew", description=__doc__.splitlines()[0])
    p.add_argument("stage", choices=STAGES + ("all",))
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--windowing", choices=("quarter", "half_year"))
    p.add_argument("--return-method", dest="return_method", choices=("log", "simple"))
    p.add_argument("--as-of", dest="as_of")
    p.add_argument("--seed")
    p.add_argument("--n-stocks", dest="n_stocks")
    p.add_argument("--workers")
    p.add_argument("--cluster", choices=("none", "stock"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: getattr(args, k) for k in
                 ("output_dir", "data_dir", "windowing", "return_method", "as_of", "seed",
                  "n_stocks", "workers", "cluster")}
    try:
        cfg = load_config(args.config, overrides)
        run_stage(args.stage, cfg)
    except DependencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ShortSkewError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
