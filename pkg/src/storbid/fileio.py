"""CSV/JSON/TOML reading and writing for prices, profiles, scenarios and verdicts.

Floats are written with 17 significant digits so that every write/read cycle
reproduces the exact binary value and repeated runs are byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass, fields
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .core import DispatchProfile, PriceKind, PriceSeries, StorageSpec, StorbidError
from .market_sim import ScenarioLabel, ScenarioResult
from .monitor import AuditVerdict, ObservationWindow

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
PRICE_HEADER = ("timestamp", "price_usd_per_mwh")
OBSERVATION_HEADER = ("interval", "p_mwh", "b_mwh", "price")
PROFILE_HEADER = ("interval", "p_mwh", "b_mwh", "soc_mwh")
SCENARIO_HEADER = ("interval", "competitive", "nominal", "realized",
                   "p_taker", "b_taker", "p_maker", "b_maker", "withheld")

PathLike = Union[str, Path]


class ParseError(StorbidError, ValueError):
    """Malformed input file; ``line`` is 1-based (the header is line 1)."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class ConfigError(StorbidError, ValueError):
    pass


def fmt(value: float) -> str:
    return format(float(value), ".17g")


# ---------------------------------------------------------------------------
# JSON

def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return "null"
        # "-0" would parse back as the integer 0
        return "-0.0" if obj == 0 and math.copysign(1.0, obj) < 0 else fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) or v is None for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON text; keys keep insertion order."""
    return _encode(obj, indent, 0) + "\n"


def write_json(obj: Any, path: PathLike) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


# ---------------------------------------------------------------------------
# prices

@dataclass(frozen=True)
class PriceFileRecord:
    timestamp: datetime
    price: float


def _rows(path: PathLike, header: Sequence[str]):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(path, 1, f"not UTF-8 ({exc.reason})") from None
    reader = csv.reader(text.splitlines())
    first = next(reader, None)
    if first is None or tuple(c.strip() for c in first) != tuple(header):
        raise ParseError(path, 1, f"expected header {','.join(header)}")
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} columns, got {len(row)}")
        yield lineno, [c.strip() for c in row]


def _number(path, lineno: int, text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, lineno, f"{name} {text!r} is not a number") from None
    if not math.isfinite(value):
        raise ParseError(path, lineno, f"{name} must be finite")
    return value


def read_price_records(path: PathLike) -> List[PriceFileRecord]:
    out: List[PriceFileRecord] = []
    for lineno, (stamp, price) in _rows(path, PRICE_HEADER):
        try:
            ts = datetime.fromisoformat(stamp)
        except ValueError:
            raise ParseError(path, lineno, f"timestamp {stamp!r} is not ISO-8601") from None
        if out and not ts > out[-1].timestamp:
            raise ParseError(path, lineno, "timestamps must be strictly increasing")
        out.append(PriceFileRecord(ts, _number(path, lineno, price, "price")))
    if not out:
        raise ParseError(path, 2, "no price rows")
    return out


def parse_price_csv(path: PathLike, kind: PriceKind = PriceKind.COMPETITIVE,
                    interval_hours: float = 1.0) -> PriceSeries:
    records = read_price_records(path)
    return PriceSeries([r.price for r in records], kind, interval_hours)


def write_price_csv(series: PriceSeries, path: PathLike,
                    start: datetime = datetime(2024, 1, 1)) -> None:
    step = timedelta(hours=series.interval_hours)
    lines = [",".join(PRICE_HEADER)]
    for i, v in enumerate(series.values):
        lines.append(f"{(start + i * step).isoformat()},{fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def bundled_prices_path() -> Path:
    """Path of the synthetic 24-hour day shipped with the package."""
    return Path(str(resources.files("storbid") / "data" / "synthetic_day.csv"))


def bundled_prices() -> PriceSeries:
    return parse_price_csv(bundled_prices_path())


# ---------------------------------------------------------------------------
# profiles and observations

def _check_intervals(path, seen: List[int], lineno: int, text: str) -> None:
    try:
        k = int(text)
    except ValueError:
        raise ParseError(path, lineno, f"interval {text!r} is not an integer") from None
    if k != len(seen):
        raise ParseError(path, lineno, f"expected interval {len(seen)}, got {k}")
    seen.append(k)


def write_profile_csv(profile: DispatchProfile, path: PathLike) -> None:
    lines = [",".join(PROFILE_HEADER)]
    for t in range(len(profile)):
        lines.append(f"{t},{fmt(profile.discharge[t])},{fmt(profile.charge[t])},{fmt(profile.soc[t])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_profile_csv(path: PathLike, interval_hours: float = 1.0) -> DispatchProfile:
    seen: List[int] = []
    p, b, e = [], [], []
    for lineno, (k, pv, bv, ev) in _rows(path, PROFILE_HEADER):
        _check_intervals(path, seen, lineno, k)
        p.append(_number(path, lineno, pv, "p_mwh"))
        b.append(_number(path, lineno, bv, "b_mwh"))
        e.append(_number(path, lineno, ev, "soc_mwh"))
    if not seen:
        raise ParseError(path, 2, "no profile rows")
    return DispatchProfile(p, b, e, interval_hours)


def profile_to_dict(profile: DispatchProfile) -> Dict[str, Any]:
    return {"interval_hours": profile.interval_hours,
            "discharge": profile.discharge, "charge": profile.charge, "soc": profile.soc}


def profile_from_dict(data: Dict[str, Any]) -> DispatchProfile:
    return DispatchProfile(data["discharge"], data["charge"], data["soc"],
                           data.get("interval_hours", 1.0))


def write_observation_csv(window: ObservationWindow, path: PathLike) -> None:
    prof = window.profile
    lines = [",".join(OBSERVATION_HEADER)]
    for t in range(len(prof)):
        lines.append(f"{t},{fmt(prof.discharge[t])},{fmt(prof.charge[t])},"
                     f"{fmt(window.prices.values[t])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_observation_csv(path: PathLike, spec: StorageSpec, period_length: int,
                          interval_hours: float = 1.0) -> ObservationWindow:
    seen: List[int] = []
    p, b, lam = [], [], []
    for lineno, (k, pv, bv, price) in _rows(path, OBSERVATION_HEADER):
        _check_intervals(path, seen, lineno, k)
        p.append(_number(path, lineno, pv, "p_mwh"))
        b.append(_number(path, lineno, bv, "b_mwh"))
        lam.append(_number(path, lineno, price, "price"))
    if not seen:
        raise ParseError(path, 2, "no observation rows")
    profile = DispatchProfile.from_decisions(p, b, spec, interval_hours)
    return ObservationWindow(profile, PriceSeries(lam, PriceKind.REALIZED, interval_hours),
                             spec, period_length)


# ---------------------------------------------------------------------------
# results

def spec_to_dict(spec: StorageSpec) -> Dict[str, Any]:
    return {f.name: getattr(spec, f.name) for f in fields(spec)}


def scenario_to_dict(result: ScenarioResult) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "scenario": result.config.label.value,
        "alpha_level": result.config.alpha_level,
        "period_length": result.config.period_length,
        "storage": spec_to_dict(result.config.spec),
        "taker_profit": result.taker_profit,
        "maker_profit": result.maker_profit,
        "competitive": result.competitive.values,
        "alpha": result.alpha.values,
        "nominal": result.nominal.values,
        "realized": result.realized.values,
        "taker": profile_to_dict(result.taker_profile),
        "maker": None if result.maker_profile is None else profile_to_dict(result.maker_profile),
        "free_rider": profile_to_dict(result.free_rider_profile),
        "withheld": result.withheld,
    }
    return out


def write_scenario_csv(result: ScenarioResult, path: PathLike) -> None:
    """Tidy per-interval table; maker columns are empty without a maker."""
    lines = [",".join(SCENARIO_HEADER)]
    maker = result.maker_profile
    for t in range(len(result.competitive)):
        cells = [str(t), fmt(result.competitive.values[t]), fmt(result.nominal.values[t]),
                 fmt(result.realized.values[t]), fmt(result.taker_profile.discharge[t]),
                 fmt(result.taker_profile.charge[t])]
        if maker is None:
            cells += ["", "", ""]
        else:
            cells += [fmt(maker.discharge[t]), fmt(maker.charge[t]), fmt(result.withheld[t])]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def profit_table(results: Sequence[ScenarioResult]) -> str:
    """Plain-text profit summary, one scenario per row."""
    names = {ScenarioLabel.NO_MARKET_POWER: "No market power",
             ScenarioLabel.LOW_MARKET_POWER: "Low market power",
             ScenarioLabel.HIGH_MARKET_POWER: "High market power"}
    lines = [f"{'Scenario':<20}{'Price Taker ($)':>18}{'Price Maker ($)':>18}"]
    for res in results:
        name = names.get(res.config.label, f"alpha={res.config.alpha_level:g}")
        maker = "--" if res.maker_profit is None else f"{res.maker_profit:.2f}"
        lines.append(f"{name:<20}{res.taker_profit:>18.2f}{maker:>18}")
    return "\n".join(lines) + "\n"


def verdict_to_dict(verdict: AuditVerdict) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "classification": verdict.classification.value,
        "periods": verdict.periods,
        "nonidle_periods": verdict.nonidle_periods,
        "withholding_count": verdict.withholding_count,
        "count_margin": verdict.margin,
        "condition1": verdict.condition1,
        "condition2": verdict.condition2,
        "class_tol": verdict.class_tol,
        "price_tol": verdict.price_tol,
        "violations": [v.to_dict() for v in verdict.violations],
    }


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class RunConfig:
    storage: StorageSpec
    alpha_level: float = 0.0
    label: ScenarioLabel = ScenarioLabel.CUSTOM
    period_length: int = 24
    class_tol: Optional[float] = None
    price_tol: Optional[float] = None
    prices: Optional[Path] = None
    observations: Optional[Path] = None
    output_dir: Optional[Path] = None


_STORAGE_KEYS = {"power_cap", "energy_cap", "efficiency", "soc_init", "soc_terminal"}
_FLOAT_KEYS = _STORAGE_KEYS | {"alpha_level", "class_tol", "price_tol"}
_INPUT_PATHS = {"prices", "observations"}
_KNOWN = _FLOAT_KEYS | _INPUT_PATHS | {"label", "period_length", "output_dir"}
# 2.5 MW / 10 MWh at 90% efficiency; state of charge defaults to half full
# and the schedule returns there by the end of each period
DEFAULT_STORAGE = {"power_cap": 2.5, "energy_cap": 10.0, "efficiency": 0.9}


def read_config_data(path: PathLike) -> Dict[str, Any]:
    """Raw key/value pairs of a flat TOML or JSON config."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a table of keys")
    return data


def load_config(path: PathLike) -> RunConfig:
    """Read a config file; relative paths resolve next to it."""
    return config_from_dict(read_config_data(path), Path(path).parent)


def config_from_dict(data: Dict[str, Any], base: Path = Path(".")) -> RunConfig:
    unknown = set(data) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    values: Dict[str, Any] = {}
    for key, val in data.items():
        if key in _FLOAT_KEYS:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{key} must be a number")
            values[key] = float(val)
        elif key == "period_length":
            if isinstance(val, bool) or not isinstance(val, int) or val < 1:
                raise ConfigError("period_length must be a positive integer")
            values[key] = val
        elif key == "label":
            try:
                values[key] = ScenarioLabel(val)
            except ValueError:
                raise ConfigError(f"unknown scenario label {val!r}") from None
        else:
            if not isinstance(val, str):
                raise ConfigError(f"{key} must be a path string")
            p = Path(val)
            p = p if p.is_absolute() else base / p
            if key in _INPUT_PATHS and not p.exists():
                raise ConfigError(f"{key} file {p} does not exist")
            values[key] = p
    storage = dict(DEFAULT_STORAGE)
    storage.update({k: values.pop(k) for k in list(values) if k in _STORAGE_KEYS})
    storage.setdefault("soc_init", storage["energy_cap"] / 2)
    try:
        spec = StorageSpec(**storage)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(storage=spec, **values)
