import json

import numpy as np
import pytest

from shortskew.egarch import EgarchParams
from shortskew.errors import ConfigError
from shortskew.events import replay_events
from shortskew.factor_model import rolling_excess_returns
from shortskew.marketdata import compute_returns, load_dataset_dir
from shortskew.simulator import (
    ListingSpec,
    Regime,
    SimConfig,
    egarch_simulate,
    regime_experiment_config,
    simulate_market,
    simulate_regimes,
    staggered_schedule,
    two_piece_normal,
    write_simulation,
)
from shortskew.stats import skewness


def small(**kw):
    base = dict(n_stocks=6, start="2008-01-01", end="2010-12-31", seed=5,
                schedule=(ListingSpec(0, "2009-06-01"), ListingSpec(1, "2009-06-01", "2010-06-01")))
    base.update(kw)
    return SimConfig(**base)


def test_bitwise_reproducible():
    a = simulate_market(small())
    b = simulate_market(small())
    assert a.dataset.fingerprint() == b.dataset.fingerprint()
    assert simulate_market(small(seed=6)).dataset.fingerprint() != a.dataset.fingerprint()
    np.testing.assert_array_equal(egarch_simulate(EgarchParams(-0.2, 0.95, 0.1, 0.0), 50, 1),
                                  egarch_simulate(EgarchParams(-0.2, 0.95, 0.1, 0.0), 50, 1))


def test_prices_round_trip_to_returns():
    sim = simulate_market(small())
    ds = sim.dataset
    for sid, t in sim.truth.items():
        r = compute_returns(ds.prices[sid]).values
        expect = t.alpha + ds.factors.values[1:] @ np.array(t.betas) + sim.innovations[sid]
        np.testing.assert_allclose(r, expect, rtol=0, atol=1e-12)


def test_noiseless_factor_recovery():
    sim = simulate_market(small(idio_scale=0.0, start="2004-01-01"))
    sid = "S002"
    raw = sim.dataset.returns()[sid]
    res = rolling_excess_returns(raw, sim.dataset.factors)
    assert res.fits
    for f in res.fits:
        np.testing.assert_allclose(f.betas, sim.truth[sid].betas, atol=1e-9)
    np.testing.assert_allclose(res.excess.values, 0.0, atol=1e-12)


def test_schedule_and_events():
    sim = simulate_market(small())
    tl = replay_events(sim.dataset.events)
    assert tl.is_member("S000", "2010-12-31")
    assert tl.is_member("S001", "2010-05-31") and not tl.is_member("S001", "2010-06-01")
    assert sim.truth["S000"].group == 1 and sim.truth["S003"].group == 2
    assert sim.truth["S003"].after is None


def test_config_validation():
    with pytest.raises(ConfigError):
        small(schedule=(ListingSpec(99, "2009-01-05"),))
    with pytest.raises(ConfigError):
        small(schedule=(ListingSpec(0, "2030-01-01"),))
    with pytest.raises(ConfigError):
        small(n_stocks=0)
    with pytest.raises(ConfigError):
        Regime(EgarchParams(0, 0.5, 0, 0), innovation_skew=0.0)


def test_regime_switch_changes_parameters_at_index():
    before = Regime(EgarchParams(-0.2, 0.95, 0.0, 0.0))
    after = Regime(EgarchParams(2.0, 0.0, 0.0, 0.0))  # log s2 jumps to 2
    rng = np.random.Generator(np.random.PCG64(0))
    _, sigma = simulate_regimes([(0, before), (100, after)], 200, rng, burn=50)
    np.testing.assert_allclose(sigma[:100], np.exp(-2.0))
    np.testing.assert_allclose(sigma[100:], np.exp(1.0))


def test_two_piece_normal_standardized():
    rng = np.random.Generator(np.random.PCG64(1))
    x = two_piece_normal(rng, 400_000, 1.5)
    assert abs(x.mean()) < 0.01 and abs(x.var() - 1) < 0.01
    assert skewness(x) > 0.2
    assert skewness(two_piece_normal(rng, 400_000, 1 / 1.5)) < -0.2


def test_null_market_has_no_skew():
    cfg = SimConfig(n_stocks=200, start="2006-01-01", end="2014-03-31", seed=9,
                    regime_before=Regime(EgarchParams(-0.39, 0.95, 0.15, 0.0)))
    sim = simulate_market(cfg)
    sk = [skewness(r.values) for r in sim.dataset.returns().values()]
    assert abs(np.mean(sk)) < 0.05


def test_regime_experiment_layout():
    cfg = regime_experiment_config(n_stocks=20)
    assert len(cfg.schedule) == 10
    assert cfg.regime_before.params.xi1 == 0.1 and cfg.regime_after.params.xi1 == 0.0
    assert cfg.control.params.xi1 == 0.1
    assert {s.add for s in staggered_schedule(10, ["2010-03-31", "2011-03-31"])} == {"2010-03-31", "2011-03-31"}


def test_write_simulation(tmp_path):
    sim = simulate_market(small())
    paths = write_simulation(sim, tmp_path)
    ds = load_dataset_dir(tmp_path)
    assert ds.fingerprint() == sim.dataset.fingerprint()
    manifest = json.loads(paths["manifest"].read_text())
    assert manifest["seed"] == 5
    rows = paths["ground_truth"].read_text().splitlines()
    assert len(rows) == 7 and rows[0].startswith("stock_id,industry_code,group")
