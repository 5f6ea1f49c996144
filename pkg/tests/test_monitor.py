import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from storbid.core import DispatchProfile, PriceKind, PriceSeries, StorageSpec
from storbid.monitor import (Classification, ObservationWindow, audit, check_condition1,
                             check_condition2, count_withholding, counterexample_catalogue,
                             random_taker_window, segment)

SPEC = StorageSpec(2.5, 1000.0, 0.9, 500.0)


def window(p, b, prices, T, spec=SPEC):
    return ObservationWindow(DispatchProfile.from_decisions(p, b, spec),
                             PriceSeries(prices, PriceKind.REALIZED), spec, T)


def test_window_length_must_divide():
    with pytest.raises(ValueError):
        window([0, 0, 0], [0, 0, 0], [1, 2, 3], 2)


def test_segment_counts_nonidle_periods():
    w = window([2.5, 0, 0, 0], [0, 2.5, 0, 0], [50, 20, 30, 30], 2)
    views = segment(w)
    assert [v.idle for v in views] == [False, True]
    w3 = window([2.5, 0, 0, 0, 2.025, 0], [0, 2.5, 0, 0, 0, 2.5], [50, 20, 1, 1, 50, 20], 2)
    assert check_condition1(w3).nonidle_periods == 2
    assert len(segment(window(np.zeros(24), np.zeros(24), np.ones(24), 24))) == 1


def test_count_withholding_examples():
    assert count_withholding(window([2.025, 0], [0, 2.5], [50, 20], 2)) == 1
    assert count_withholding(window([1.25, 0], [0, 1.25], [30, 20], 2)) == 2
    assert count_withholding(window([0, 0], [0, 0], [30, 20], 2)) == 0


def test_condition1_examples():
    assert check_condition1(window([2.025, 0], [0, 2.5], [50, 20], 2)).passed
    c = check_condition1(window([1.25, 0], [0, 1.25], [30, 20], 2))
    assert not c.passed and c.margin == -1
    assert check_condition1(window([0, 0], [0, 0], [30, 20], 2)).passed


def test_condition2_examples():
    assert check_condition2(window([2.025, 0], [0, 2.5], [50, 20], 2)).passed
    bad = check_condition2(window([1.0, 0], [0, 0], [40, 20], 2))
    assert not bad.passed
    (v,) = [v for v in bad.violations if v.rule == "iii.a"]
    assert (v.first, v.second) == (1, 0)
    assert v.lhs == pytest.approx(20 / 0.81) and v.rhs == 40
    assert check_condition2(window([0, 0], [0, 0], [40, 20], 2)).passed


def test_negative_price_idle_is_not_evidence():
    # idle at a negative price next to a partial discharge
    w = window([1.0, 0], [0, 0], [40, -5], 2)
    assert check_condition2(w).passed


def test_audit_examples():
    assert audit(window([2.025, 0], [0, 2.5], [50, 20], 2)).clean
    v = audit(window([1.25, 0], [0, 1.25], [30, 20], 2))
    assert v.classification is Classification.NOT_CERTIFIED and not v.condition1


def test_catalogue_shapes():
    cat = counterexample_catalogue(SPEC)
    assert len({e.name for e in cat}) == 10
    first = cat[0]
    assert np.allclose(first.taker.profile.discharge, [2.5, 2.5, 0, 0, 0])
    assert np.allclose(first.taker.profile.charge, [0, 0, 1.0, 2.5, 2.5])
    assert np.allclose(first.maker.profile.discharge, [2.5, 1.5, 0, 0, 0])
    assert np.allclose(first.maker.profile.charge, [0, 0, 0, 2.5, 2.5])
    p_up = next(e for e in cat if e.name == "p_upgrade")
    assert np.allclose(p_up.taker.profile.discharge, [2.5, 1.5, 1.5, 0, 0])
    assert np.allclose(p_up.maker.profile.discharge, [2.5, 2.5, 1.5, 0, 0])
    for e in cat:
        assert count_withholding(e.maker) == 1
        assert not audit(e.maker).clean
        shift = e.alpha.values * (e.taker.profile.net - e.maker.profile.net)
        assert np.allclose(e.maker.prices.values, e.taker.prices.values + shift)


def test_p_switch_violates_price_consistency():
    e = next(e for e in counterexample_catalogue(SPEC) if e.name.startswith("p_switch"))
    v = audit(e.maker)
    assert v.condition1 and not v.condition2


def test_catalogue_needs_round_trip_loss():
    with pytest.raises(ValueError):
        counterexample_catalogue(StorageSpec(2.5, 10, 1.0, 5))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), periods=st.integers(1, 3))
def test_random_taker_windows_are_clean(seed, periods):
    w = random_taker_window(np.random.default_rng(seed), horizon=12, periods=periods)
    assert audit(w).clean


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), loosen=st.floats(1.0, 1e4))
def test_loosening_price_tolerance_keeps_clean_verdicts(seed, loosen):
    w = random_taker_window(np.random.default_rng(seed), horizon=8)
    base = audit(w)
    assert base.clean
    assert audit(w, price_tol=1e-6 * loosen).clean


def test_loosening_on_catalogue_takers_is_monotone():
    for e in counterexample_catalogue(SPEC):
        if audit(e.taker).clean:
            for eps in (1e-6, 1e-3, 1.0, 100.0):
                assert audit(e.taker, price_tol=eps).clean


def test_permuting_periods():
    rng = np.random.default_rng(11)
    w = random_taker_window(rng, horizon=6, periods=3)
    cat = counterexample_catalogue(StorageSpec(2.5, 1000, 0.9, 500))
    # glue the clean window to a flagged five-interval pattern padded to six
    m = cat[0].maker
    p = np.concatenate([m.profile.discharge, [0.0]])
    b = np.concatenate([m.profile.charge, [0.0]])
    lam = np.concatenate([m.prices.values, [50.0]])
    parts = [(w.profile.discharge[k * 6:(k + 1) * 6], w.profile.charge[k * 6:(k + 1) * 6],
              w.prices.values[k * 6:(k + 1) * 6]) for k in range(3)] + [(p, b, lam)]
    spec = w.spec

    def build(order):
        return window(np.concatenate([parts[k][0] for k in order]),
                      np.concatenate([parts[k][1] for k in order]),
                      np.concatenate([parts[k][2] for k in order]), 6, spec)

    a, z = audit(build([0, 1, 2, 3])), audit(build([3, 2, 0, 1]))
    assert (a.condition1, a.withholding_count, a.nonidle_periods) == \
        (z.condition1, z.withholding_count, z.nonidle_periods)
    assert sorted(v.rule for v in a.violations) == sorted(v.rule for v in z.violations)
    assert {v.period for v in z.violations} == {0}
