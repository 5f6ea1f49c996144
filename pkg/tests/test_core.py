import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from storbid.core import (AlphaSeries, DispatchProfile, IntervalClass, PriceKind, PriceSeries,
                          SimultaneousDispatchError, StorageSpec, classify_intervals,
                          soc_trajectory, validate_profile)

SPEC = StorageSpec(2.5, 100.0, 0.9, 50.0)


def test_price_series_is_immutable_and_validated():
    s = PriceSeries([1.0, 2.0], PriceKind.NOMINAL)
    with pytest.raises(ValueError):
        s.values[0] = 3.0
    with pytest.raises(AttributeError):
        s.kind = PriceKind.REALIZED
    with pytest.raises(ValueError):
        PriceSeries([1.0, np.nan])
    with pytest.raises(ValueError):
        PriceSeries([])
    assert s.with_kind(PriceKind.REALIZED).kind is PriceKind.REALIZED


def test_alpha_series_rejects_negative_and_mismatch():
    with pytest.raises(ValueError):
        AlphaSeries([0.1, -0.1])
    with pytest.raises(ValueError):
        AlphaSeries([1.0]).check_paired(PriceSeries([1.0, 2.0]))


@pytest.mark.parametrize("kwargs", [
    dict(power_cap=0, energy_cap=1),
    dict(power_cap=1, energy_cap=0),
    dict(power_cap=1, energy_cap=1, efficiency=0),
    dict(power_cap=1, energy_cap=1, efficiency=1.1),
    dict(power_cap=1, energy_cap=1, soc_init=2),
    dict(power_cap=1, energy_cap=1, soc_terminal=-1),
])
def test_storage_spec_invariants(kwargs):
    with pytest.raises(ValueError):
        StorageSpec(**kwargs)


def test_cyclic_terminal_target():
    assert StorageSpec(1, 4, soc_init=2).terminal_target == 2
    assert StorageSpec(1, 4, soc_init=2, soc_terminal=3).terminal_target == 3


def test_classify_examples():
    full = DispatchProfile.from_decisions([2.5, 0], [0, 2.5], SPEC)
    assert classify_intervals(full, SPEC) == [IntervalClass.DISCHARGE_FULL,
                                              IntervalClass.CHARGE_FULL]
    table = DispatchProfile.from_decisions([2.025, 0], [0, 2.5], SPEC)
    assert classify_intervals(table, SPEC) == [IntervalClass.DISCHARGE_WITHHOLD,
                                               IntervalClass.CHARGE_FULL]
    idle = DispatchProfile.idle(2, SPEC)
    assert classify_intervals(idle, SPEC) == [IntervalClass.IDLE] * 2


def test_classify_rejects_simultaneous():
    prof = DispatchProfile.from_decisions([1.0], [1.0], SPEC)
    with pytest.raises(SimultaneousDispatchError):
        classify_intervals(prof, SPEC)


def test_classify_tolerance_edges():
    tol = 1e-3
    prof = DispatchProfile.from_decisions([2.5 - 0.5e-3, 0.5e-3, 0.0], [0.0, 0.0, 2.5 - 2e-3], SPEC)
    assert classify_intervals(prof, SPEC, tol) == [IntervalClass.DISCHARGE_FULL,
                                                   IntervalClass.IDLE,
                                                   IntervalClass.CHARGE_WITHHOLD]


@settings(max_examples=200, deadline=None)
@given(p=st.floats(0, 2.5), b=st.floats(0, 2.5), scale=st.floats(0.01, 100))
def test_classification_total_and_scale_invariant(p, b, scale):
    tol = 1e-6 * 2.5
    if p > tol and b > tol:
        return
    prof = DispatchProfile.from_decisions([p], [b], SPEC)
    (cls,) = classify_intervals(prof, SPEC, tol)
    scaled_spec = StorageSpec(2.5 * scale, 100.0 * scale, 0.9, 50.0 * scale)
    scaled = DispatchProfile.from_decisions([p * scale], [b * scale], scaled_spec)
    assert classify_intervals(scaled, scaled_spec, tol * scale) == [cls]


def test_validate_profile_reports_violations():
    assert validate_profile(DispatchProfile.from_decisions([2.0, 0], [0, 2.5], SPEC), SPEC) == []
    over = DispatchProfile.from_decisions([3.0], [0.0], SPEC)
    assert [v.kind for v in validate_profile(over, SPEC)] == ["PowerBound"]
    small = StorageSpec(2.5, 3.0, 1.0, 2.0)
    up = DispatchProfile.from_decisions([0, 0], [2.0, 0.0], small)
    kinds = [str(v) for v in validate_profile(up, small)]
    assert kinds == ["SocUpperBound(0)", "SocUpperBound(1)"]
    drift = DispatchProfile([1.0], [0.0], [50.0])
    assert [v.kind for v in validate_profile(drift, SPEC)] == ["SocDynamics"]
    both = DispatchProfile.from_decisions([1.0], [1.0], SPEC)
    assert "Simultaneous" in [v.kind for v in validate_profile(both, SPEC)]


def test_soc_trajectory():
    e = soc_trajectory([0.9, 0], [0, 1.0], 0.9, 5.0)
    assert np.allclose(e, [4.0, 4.9])
