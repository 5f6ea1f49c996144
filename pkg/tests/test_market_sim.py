import numpy as np
import pytest

from storbid.core import AlphaSeries, DispatchProfile, PriceKind, PriceSeries, StorageSpec
from storbid.market_sim import (DegenerateAlphaError, ScenarioConfig, ScenarioLabel,
                                build_alpha, build_nominal, compare_reference, run_scenario,
                                run_standard)
from storbid.scheduler import profit_influenced

SPEC = StorageSpec(2.5, 10.0, 0.9, 5.0, 5.0)
BIG = StorageSpec(2.5, 1000.0, 0.9, 500.0)


def test_build_alpha_examples():
    assert np.allclose(build_alpha(PriceSeries([30] * 5), 1).values, 1)
    assert np.allclose(build_alpha(PriceSeries([20, 40]), 1).values, [2 / 3, 4 / 3])
    assert np.all(build_alpha(PriceSeries([20, 40]), 0).values == 0)
    a = build_alpha(PriceSeries([-5, 10, 30]), 2)
    assert a.values[0] == 0 and np.all(a.values >= 0)
    with pytest.raises(DegenerateAlphaError):
        build_alpha(PriceSeries([-1, 0]), 1)


def test_build_alpha_mean():
    lam = np.random.default_rng(0).uniform(5, 90, 24)
    assert np.mean(build_alpha(PriceSeries(lam), 1.7).values) == pytest.approx(1.7, abs=1e-9)


def test_build_nominal_examples():
    comp = PriceSeries([50, 20])
    prof = DispatchProfile.from_decisions([2.025, 0], [0, 2.5], BIG)
    nominal = build_nominal(comp, AlphaSeries([1, 1]), prof)
    assert np.allclose(nominal.values, [52.025, 17.5])
    assert nominal.kind is PriceKind.NOMINAL
    assert np.allclose(nominal.values - 1 * prof.net, comp.values)
    assert np.array_equal(build_nominal(comp, AlphaSeries([0, 0]), prof).values, comp.values)
    idle = DispatchProfile.idle(2, BIG)
    assert np.array_equal(build_nominal(comp, AlphaSeries([1, 1]), idle).values, comp.values)


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(SPEC, 1.0, ScenarioLabel.NO_MARKET_POWER)
    with pytest.raises(ValueError):
        ScenarioConfig(SPEC, -1.0)


def test_no_market_power_skips_maker():
    comp = PriceSeries(np.random.default_rng(1).uniform(5, 90, 24))
    res = run_scenario(ScenarioConfig.standard("none", SPEC), comp)
    assert res.maker_profile is None and res.maker_profit is None
    assert np.array_equal(res.realized.values, comp.values)
    assert np.all(res.withheld == 0)
    assert res.taker_profit == pytest.approx(float(comp.values @ res.taker_profile.net))


def test_two_interval_toy_pipeline():
    # competitive (50, 20) with alpha = (1, 1) via a flat-mean construction
    comp = PriceSeries([50, 20])
    cfg = ScenarioConfig(BIG, 35 / 50, ScenarioLabel.CUSTOM, period_length=2)
    res = run_scenario(cfg, comp)
    assert np.allclose(res.alpha.values, [1.0, 0.4])
    q = res.maker_profile.net
    assert np.allclose(res.realized.values, res.nominal.values - res.alpha.values * q)
    nominal_spread = res.nominal.values[0] - res.nominal.values[1]
    realized_spread = res.realized.values[0] - res.realized.values[1]
    assert realized_spread < nominal_spread


@pytest.mark.parametrize("level", [0.5, 1.0, 2.0])
def test_scenario_invariants(level):
    lam = np.random.default_rng(int(level * 10)).uniform(5, 90, 48)
    res = run_scenario(ScenarioConfig(SPEC, level, period_length=24), PriceSeries(lam))
    m = res.maker_profile
    assert np.allclose(res.realized.values,
                       res.nominal.values - res.alpha.values * m.net)
    assert res.maker_profit >= profit_influenced(res.taker_profile, res.nominal, res.alpha) - 1e-9
    assert np.all(res.realized.values[m.discharge > 0] <= res.nominal.values[m.discharge > 0])
    assert np.all(res.realized.values[m.charge > 0] >= res.nominal.values[m.charge > 0])
    assert np.allclose(res.withheld, res.taker_profile.net - m.net)


def test_period_length_must_divide():
    with pytest.raises(ValueError):
        run_scenario(ScenarioConfig(SPEC, 1.0, period_length=5), PriceSeries(np.ones(24)))


def test_compare_reference_is_informational():
    comp = PriceSeries(np.random.default_rng(2).uniform(5, 90, 24))
    rows = compare_reference(run_standard(comp, SPEC))
    assert [r["scenario"] for r in rows] == ["none", "low", "high"]
    assert rows[0]["maker_reference"] is None
