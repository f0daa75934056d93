"""
Simulation configuration: a sectioned ``key = value`` text file.

Sections are ``[process]``, ``[variation]``, ``[windows]``, ``[calibration]``
and ``[env]``. Every key is optional and falls back to the defaults below;
unknown sections or keys are rejected. Lists (``temperatures_c``) are
comma-separated.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Union

from .rfmodels import (
    DEFAULT_PREAMP_GAIN_DB,
    SIMULABLE_TEMP_C,
    T_REF_C,
    EnvCondition,
    ProcessParams,
    ValidityWindows,
    VariationModel,
)


class ConfigError(ValueError):
    """Malformed or invalid configuration (message names the line or key)."""


@dataclass(frozen=True)
class CornerBounds:
    """Half-widths of the uniform process-delta draws (the 3-sigma bounds)."""

    vt_bound_v: float = 4.0e-3
    k_bound_rel: float = 0.0
    r4_bound_rel: float = 0.0
    ic_bound_rel: float = 0.015
    c1_bound_rel: float = 0.015

    def as_tuple(self) -> tuple:
        return (self.vt_bound_v, self.k_bound_rel, self.r4_bound_rel,
                self.ic_bound_rel, self.c1_bound_rel)


@dataclass(frozen=True)
class CalibrationSettings:
    null_tolerance_v: float = 0.1e-3
    max_iterations: int = 60
    temperature_c: float = T_REF_C
    reference_freq_hz: float = 1.5e9
    reference_power_dbm: float = 5.0


@dataclass(frozen=True)
class EnvGrid:
    """Environment corners and measurement grids of a campaign."""

    temperatures_c: tuple = (-10.0, 10.0, 30.0, 50.0, 70.0)
    power_supply_nominal_v: float = 2.5
    power_supply_tol_v: float = 0.25
    freq_supply_nominal_v: float = 3.3
    freq_supply_tol_v: float = 0.3
    power_start_dbm: float = -18.0
    power_stop_dbm: float = 6.0
    power_step_db: float = 1.0
    power_freq_hz: float = 1.5e9
    freq_start_hz: float = 1.2e9
    freq_stop_hz: float = 1.8e9
    freq_step_hz: float = 0.1e9
    freq_power_dbm: float = 5.0

    def supply(self, path: str) -> tuple:
        if path == "power":
            return self.power_supply_nominal_v, self.power_supply_tol_v
        return self.freq_supply_nominal_v, self.freq_supply_tol_v

    def conditions(self, path: str) -> list:
        nom, tol = self.supply(path)
        return [EnvCondition(t, v, nom) for t in self.temperatures_c
                for v in (nom - tol, nom, nom + tol)]


@dataclass(frozen=True)
class SimConfig:
    process: ProcessParams = field(default_factory=ProcessParams)
    ref_impedance_ohm: float = 50.0
    variation: VariationModel = field(default_factory=VariationModel)
    bounds: CornerBounds = field(default_factory=CornerBounds)
    windows: ValidityWindows = field(default_factory=ValidityWindows)
    preamp_gain_db: float = DEFAULT_PREAMP_GAIN_DB
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    env: EnvGrid = field(default_factory=EnvGrid)

    def env_cal(self, path: str) -> EnvCondition:
        nom, _ = self.env.supply(path)
        return EnvCondition(self.calibration.temperature_c, nom, nom)


DEFAULT_CONFIG = SimConfig()

_PROCESS_KEYS = ["k_prime_a_per_v2", "vt0_v", "w1_over_l1", "w2_over_l2", "r4_ohm", "ic_a", "c1_f"]
# config key -> (ValidityWindows attribute, index into a (min, max) pair or None)
_WINDOW_KEYS = {
    "band_lo_hz": ("band_lo_hz", None),
    "band_hi_hz": ("band_hi_hz", None),
    "basic_power_min_dbm": ("basic_power_dbm", 0),
    "basic_power_max_dbm": ("basic_power_dbm", 1),
    "preamp_power_min_dbm": ("preamp_power_dbm", 0),
    "preamp_power_max_dbm": ("preamp_power_dbm", 1),
    "basic_min_drive_dbm": ("basic_min_drive_dbm", None),
    "preamp_min_drive_dbm": ("preamp_min_drive_dbm", None),
}


def _keys(section: str) -> list:
    if section == "process":
        return _PROCESS_KEYS + ["ref_impedance_ohm"]
    if section == "variation":
        return [f.name for f in fields(VariationModel)] + [f.name for f in fields(CornerBounds)]
    if section == "windows":
        return list(_WINDOW_KEYS) + ["preamp_gain_db"]
    if section == "calibration":
        return [f.name for f in fields(CalibrationSettings)]
    if section == "env":
        return [f.name for f in fields(EnvGrid)]
    raise KeyError(section)


SECTIONS = ("process", "variation", "windows", "calibration", "env")


def _parse_value(key: str, text: str, kind):
    try:
        if kind is tuple:
            items = [s.strip() for s in text.split(",") if s.strip()]
            if not items:
                raise ValueError("empty list")
            return tuple(float(s) for s in items)
        if kind is int:
            return int(text)
        value = float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite, got {text!r}")
    return value


def _field_type(cls, name):
    default = next(f for f in fields(cls) if f.name == name).default
    return type(default)


def _build(raw: dict) -> SimConfig:
    cfg = DEFAULT_CONFIG
    proc = {k: _parse_value(k, v, float) for k, v in raw.get("process", {}).items()}
    ref_z = proc.pop("ref_impedance_ohm", cfg.ref_impedance_ohm)

    var = raw.get("variation", {})
    var_fields = {f.name for f in fields(VariationModel)}
    variation = {k: _parse_value(k, v, float) for k, v in var.items() if k in var_fields}
    bounds = {k: _parse_value(k, v, float) for k, v in var.items() if k not in var_fields}

    win = {}
    gain = cfg.preamp_gain_db
    for k, v in raw.get("windows", {}).items():
        if k == "preamp_gain_db":
            gain = _parse_value(k, v, float)
            continue
        attr, idx = _WINDOW_KEYS[k]
        value = _parse_value(k, v, float)
        if idx is None:
            win[attr] = value
        else:
            pair = list(win.get(attr, getattr(cfg.windows, attr)))
            pair[idx] = value
            win[attr] = tuple(pair)

    cal = {k: _parse_value(k, v, _field_type(CalibrationSettings, k))
           for k, v in raw.get("calibration", {}).items()}
    env = {k: _parse_value(k, v, _field_type(EnvGrid, k)) for k, v in raw.get("env", {}).items()}

    try:
        process = ProcessParams(**proc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = SimConfig(process=process, ref_impedance_ohm=ref_z,
                    variation=VariationModel(**variation), bounds=CornerBounds(**bounds),
                    windows=ValidityWindows(**win), preamp_gain_db=gain,
                    calibration=CalibrationSettings(**cal), env=EnvGrid(**env))
    validate(out)
    return out


def validate(cfg: SimConfig):
    """Raise ConfigError naming the first key that breaks an invariant."""
    def need(ok, key, value):
        if not ok:
            raise ConfigError(f"invalid value for {key}: {value!r}")

    need(cfg.ref_impedance_ohm > 0, "ref_impedance_ohm", cfg.ref_impedance_ohm)
    b = cfg.bounds
    need(0 <= b.vt_bound_v <= 0.2, "vt_bound_v", b.vt_bound_v)
    for key in ("k_bound_rel", "r4_bound_rel", "ic_bound_rel", "c1_bound_rel"):
        need(0 <= getattr(b, key) <= 0.5, key, getattr(b, key))
    w = cfg.windows
    need(0 < w.band_lo_hz < w.band_hi_hz, "band_lo_hz", w.band_lo_hz)
    need(w.basic_power_dbm[0] < w.basic_power_dbm[1], "basic_power_min_dbm", w.basic_power_dbm[0])
    need(w.preamp_power_dbm[0] < w.preamp_power_dbm[1], "preamp_power_min_dbm", w.preamp_power_dbm[0])
    c = cfg.calibration
    need(c.null_tolerance_v > 0, "null_tolerance_v", c.null_tolerance_v)
    need(c.max_iterations >= 1, "max_iterations", c.max_iterations)
    lo, hi = SIMULABLE_TEMP_C
    need(lo <= c.temperature_c <= hi, "temperature_c", c.temperature_c)
    need(c.reference_freq_hz > 0, "reference_freq_hz", c.reference_freq_hz)
    e = cfg.env
    need(all(lo <= t <= hi for t in e.temperatures_c), "temperatures_c", e.temperatures_c)
    for key in ("power_supply_nominal_v", "freq_supply_nominal_v"):
        need(getattr(e, key) > 0, key, getattr(e, key))
    need(0 <= e.power_supply_tol_v < e.power_supply_nominal_v, "power_supply_tol_v", e.power_supply_tol_v)
    need(0 <= e.freq_supply_tol_v < e.freq_supply_nominal_v, "freq_supply_tol_v", e.freq_supply_tol_v)
    need(e.power_step_db > 0, "power_step_db", e.power_step_db)
    need(e.power_start_dbm <= e.power_stop_dbm, "power_start_dbm", e.power_start_dbm)
    need(e.freq_step_hz > 0, "freq_step_hz", e.freq_step_hz)
    need(0 < e.freq_start_hz <= e.freq_stop_hz, "freq_start_hz", e.freq_start_hz)
    need(e.power_freq_hz > 0, "power_freq_hz", e.power_freq_hz)


def parse_config(text: str) -> SimConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside of a [section]") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else "?"
        raise ConfigError(f"line {lineno}: cannot parse {exc.errors[0][1] if exc.errors else ''}") from None
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", "?")
        raise ConfigError(f"line {lineno}: {exc.message}") from None
    raw = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        allowed = set(_keys(section))
        items = dict(parser.items(section))
        for key in items:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
        raw[section] = items
    return _build(raw)


def load_config(path: Union[str, Path, None]) -> SimConfig:
    if path is None:
        return DEFAULT_CONFIG
    return parse_config(Path(path).read_text())


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return repr(value)


def serialize_config(cfg: SimConfig) -> str:
    lines = ["[process]"]
    for key in _PROCESS_KEYS:
        lines.append(f"{key} = {_fmt(getattr(cfg.process, key))}")
    lines.append(f"ref_impedance_ohm = {_fmt(cfg.ref_impedance_ohm)}")
    lines += ["", "[variation]"]
    for obj in (cfg.variation, cfg.bounds):
        for f in fields(obj):
            lines.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
    lines += ["", "[windows]"]
    for key, (attr, idx) in _WINDOW_KEYS.items():
        value = getattr(cfg.windows, attr)
        lines.append(f"{key} = {_fmt(value if idx is None else value[idx])}")
    lines.append(f"preamp_gain_db = {_fmt(cfg.preamp_gain_db)}")
    for name, obj in (("calibration", cfg.calibration), ("env", cfg.env)):
        lines += ["", f"[{name}]"]
        for f in fields(obj):
            lines.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def corner_from_mapping(base: ProcessParams, values: dict) -> ProcessParams:
    """Apply the five process deltas from a ``key -> text`` mapping."""
    allowed = ("delta_vt_v", "delta_k_rel", "delta_r4_rel", "delta_ic_rel", "delta_c1_rel")
    deltas = {}
    for key, text in values.items():
        if key not in allowed:
            raise ConfigError(f"unknown corner key {key!r}")
        deltas[key] = _parse_value(key, text, float)
    try:
        return dataclasses.replace(base, **deltas)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_corner(path: Union[str, Path], base: ProcessParams) -> ProcessParams:
    """Read a corner file: ``key = value`` delta lines, optionally under ``[corner]``."""
    text = Path(path).read_text()
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = "[corner]\n" + text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"corner file: {exc}") from None
    values = {}
    for section in parser.sections():
        values.update(parser.items(section))
    return corner_from_mapping(base, values)
