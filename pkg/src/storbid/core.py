"""Shared domain types for storage bidding, scheduling and auditing.

Energy convention: one interval lasts ``interval_hours``; discharge ``p_t`` and
charge ``b_t`` are energies (MWh) bounded by ``power_cap * interval_hours``, so
MW and MWh coincide at hourly resolution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np


class StorbidError(Exception):
    """Base class for all errors raised by this package."""


class SimultaneousDispatchError(StorbidError, ValueError):
    """An interval both charges and discharges above tolerance."""


class PriceKind(Enum):
    COMPETITIVE = "competitive"
    NOMINAL = "nominal"
    REALIZED = "realized"
    FORECAST = "forecast"


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Prices in $/MWh over a horizon of equal-length intervals."""

    values: np.ndarray
    kind: PriceKind = PriceKind.COMPETITIVE
    interval_hours: float = 1.0

    def __post_init__(self):
        arr = _frozen_array(self.values, "prices")
        if arr.size < 1:
            raise ValueError("a price series needs at least one interval")
        if not self.interval_hours > 0:
            raise ValueError("interval_hours must be positive")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "kind", PriceKind(self.kind))

    def __len__(self) -> int:
        return self.values.size

    def with_kind(self, kind: PriceKind, values=None) -> "PriceSeries":
        """Copy with a different kind (and optionally different values)."""
        return PriceSeries(self.values if values is None else values, kind, self.interval_hours)


@dataclass(frozen=True, eq=False)
class AlphaSeries:
    """Price sensitivity per interval ($/MWh per MWh of net output)."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, "alpha")
        if np.any(arr < 0):
            raise ValueError("price sensitivity must be non-negative")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def zeros(cls, n: int) -> "AlphaSeries":
        return cls(np.zeros(n))

    def check_paired(self, prices: PriceSeries) -> None:
        if len(self) != len(prices):
            raise ValueError(
                f"alpha has {len(self)} intervals but prices have {len(prices)}")


@dataclass(frozen=True)
class StorageSpec:
    """Storage unit parameters.

    ``soc_terminal=None`` means the unit must end each scheduling period at its
    initial state of charge (a cyclic schedule).
    """

    power_cap: float
    energy_cap: float
    efficiency: float = 1.0
    soc_init: float = 0.0
    soc_terminal: Optional[float] = None

    def __post_init__(self):
        if not self.power_cap > 0:
            raise ValueError("power_cap must be positive")
        if not self.energy_cap > 0:
            raise ValueError("energy_cap must be positive")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        if not 0 <= self.soc_init <= self.energy_cap:
            raise ValueError("soc_init must lie in [0, energy_cap]")
        if self.soc_terminal is not None and not 0 <= self.soc_terminal <= self.energy_cap:
            raise ValueError("soc_terminal must lie in [0, energy_cap]")

    @property
    def terminal_target(self) -> float:
        return self.soc_init if self.soc_terminal is None else self.soc_terminal

    def interval_cap(self, interval_hours: float = 1.0) -> float:
        """Largest energy that can move in one interval."""
        return self.power_cap * interval_hours


def soc_trajectory(discharge, charge, efficiency: float, soc_init: float) -> np.ndarray:
    """State of charge after each interval: e_t = e_{t-1} - p_t/eta + b_t*eta."""
    p = np.asarray(discharge, dtype=float)
    b = np.asarray(charge, dtype=float)
    return soc_init + np.cumsum(-p / efficiency + b * efficiency)


@dataclass(frozen=True, eq=False)
class DispatchProfile:
    discharge: np.ndarray
    charge: np.ndarray
    soc: np.ndarray
    interval_hours: float = 1.0

    def __post_init__(self):
        p = _frozen_array(self.discharge, "discharge")
        b = _frozen_array(self.charge, "charge")
        e = _frozen_array(self.soc, "soc")
        if not (p.size == b.size == e.size):
            raise ValueError("discharge, charge and soc must have equal length")
        object.__setattr__(self, "discharge", p)
        object.__setattr__(self, "charge", b)
        object.__setattr__(self, "soc", e)

    @classmethod
    def from_decisions(cls, discharge, charge, spec: StorageSpec,
                       interval_hours: float = 1.0) -> "DispatchProfile":
        soc = soc_trajectory(discharge, charge, spec.efficiency, spec.soc_init)
        return cls(discharge, charge, soc, interval_hours)

    @classmethod
    def idle(cls, n: int, spec: StorageSpec, interval_hours: float = 1.0) -> "DispatchProfile":
        return cls.from_decisions(np.zeros(n), np.zeros(n), spec, interval_hours)

    def __len__(self) -> int:
        return self.discharge.size

    @property
    def net(self) -> np.ndarray:
        """Net output q_t = p_t - b_t."""
        return self.discharge - self.charge

    def is_idle(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.discharge <= tol) and np.all(self.charge <= tol))

    def slice(self, start: int, stop: int) -> "DispatchProfile":
        return DispatchProfile(self.discharge[start:stop], self.charge[start:stop],
                               self.soc[start:stop], self.interval_hours)


class IntervalClass(Enum):
    DISCHARGE_FULL = "discharge_full"
    DISCHARGE_WITHHOLD = "discharge_withhold"
    CHARGE_FULL = "charge_full"
    CHARGE_WITHHOLD = "charge_withhold"
    IDLE = "idle"

    @property
    def is_withholding(self) -> bool:
        return self in (IntervalClass.DISCHARGE_WITHHOLD, IntervalClass.CHARGE_WITHHOLD)

    @property
    def is_full(self) -> bool:
        return self in (IntervalClass.DISCHARGE_FULL, IntervalClass.CHARGE_FULL)


@dataclass(frozen=True, eq=False)
class KktCertificate:
    """Dual variables and residuals of the scheduling KKT system.

    ``theta`` is the multiplier of the end-of-period energy balance. When state
    of charge bounds are part of the model, ``soc_lower``/``soc_upper`` hold
    their multipliers and ``theta_effective[t]`` is the balance price seen by
    interval ``t``.
    """

    theta: float
    delta_minus: np.ndarray
    delta_plus: np.ndarray
    beta_minus: np.ndarray
    beta_plus: np.ndarray
    stationarity_residual: float
    complementarity_residual: float
    primal_residual: float
    dual_residual: float = 0.0
    soc_lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    soc_upper: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta_effective: np.ndarray = field(default_factory=lambda: np.zeros(0))

    CERTIFY_TOL = 1e-6

    @property
    def max_residual(self) -> float:
        return max(self.stationarity_residual, self.complementarity_residual,
                   self.primal_residual, self.dual_residual)

    @property
    def certified(self) -> bool:
        return self.max_residual <= self.CERTIFY_TOL


def default_tol(spec: StorageSpec, interval_hours: float = 1.0, rel: float = 1e-6) -> float:
    return rel * spec.interval_cap(interval_hours)


def classify_intervals(profile: DispatchProfile, spec: StorageSpec,
                       tol: Optional[float] = None) -> List[IntervalClass]:
    """Label every interval as full, withholding or idle.

    ``tol`` defaults to ``1e-6 * power_cap * interval_hours``. Raises
    :class:`SimultaneousDispatchError` if both charge and discharge exceed it.
    """
    cap = spec.interval_cap(profile.interval_hours)
    if tol is None:
        tol = default_tol(spec, profile.interval_hours)
    if not tol > 0:
        raise ValueError("classification tolerance must be positive")
    classes = []
    for t, (p, b) in enumerate(zip(profile.discharge, profile.charge)):
        if p > tol and b > tol:
            raise SimultaneousDispatchError(
                f"interval {t} charges ({b:g}) and discharges ({p:g}) at once")
        if p > tol:
            classes.append(IntervalClass.DISCHARGE_FULL if p >= cap - tol
                           else IntervalClass.DISCHARGE_WITHHOLD)
        elif b > tol:
            classes.append(IntervalClass.CHARGE_FULL if b >= cap - tol
                           else IntervalClass.CHARGE_WITHHOLD)
        else:
            classes.append(IntervalClass.IDLE)
    return classes


@dataclass(frozen=True)
class Violation:
    kind: str
    interval: int
    amount: float

    def __str__(self) -> str:
        return f"{self.kind}({self.interval})"


ENERGY_TOL = 1e-9


def validate_profile(profile: DispatchProfile, spec: StorageSpec) -> List[Violation]:
    """Return all feasibility violations of ``profile``; empty when feasible."""
    cap = spec.interval_cap(profile.interval_hours)
    p, b, e = profile.discharge, profile.charge, profile.soc
    out: List[Violation] = []
    prev = spec.soc_init
    sim_tol = 1e-9 * cap
    for t in range(len(profile)):
        if p[t] < -ENERGY_TOL or p[t] > cap + ENERGY_TOL:
            out.append(Violation("PowerBound", t, float(p[t])))
        if b[t] < -ENERGY_TOL or b[t] > cap + ENERGY_TOL:
            out.append(Violation("PowerBound", t, float(b[t])))
        if p[t] > sim_tol and b[t] > sim_tol:
            out.append(Violation("Simultaneous", t, float(min(p[t], b[t]))))
        drift = e[t] - prev - (-p[t] / spec.efficiency + b[t] * spec.efficiency)
        if abs(drift) > ENERGY_TOL:
            out.append(Violation("SocDynamics", t, float(drift)))
        if e[t] > spec.energy_cap + ENERGY_TOL:
            out.append(Violation("SocUpperBound", t, float(e[t])))
        if e[t] < -ENERGY_TOL:
            out.append(Violation("SocLowerBound", t, float(e[t])))
        prev = e[t]
    return out


def check_lengths(*series: Sequence) -> int:
    sizes = {len(s) for s in series}
    if len(sizes) != 1:
        raise ValueError(f"length mismatch: {sorted(sizes)}")
    return sizes.pop()
