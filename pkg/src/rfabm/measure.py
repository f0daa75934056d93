"""
Inverse transfer functions, sweeps and Monte Carlo error envelopes.

The estimator side never sees the true corner: readings are inverted with the
nominal device at the assumed (reference) environment, and for the power path
it assumes the bias sits exactly at threshold. Whatever the true device does
differently shows up as measurement error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from types import SimpleNamespace
from typing import Iterator, Optional, Sequence

import numpy as np

from .abm import AbmState
from .calibration import CalibrationError, bisect_threshold, calibrate_freq, trim_in_range
from .config import DEFAULT_CONFIG, EnvGrid, SimConfig
from .rfmodels import (
    AbmKind,
    EnvCondition,
    ProcessParams,
    RFTone,
    apply_variation,
    amplitude_from_power,
    drain_dc_current,
    freq_output_voltage,
    gate_offset,
    load_voltage,
)

POWER_SEARCH_DBM = (-30.0, 10.0)
POWER_INVERSION_TOL_V = 1e-6
# Readings are first bracketed on a 4096-cell table (~0.01 dB cells), then
# bisected; 36 halvings leave a bracket below 1e-13 dB.
POWER_TABLE_CELLS = 4096
POWER_BISECTION_STEPS = 36

POWER_CSV_HEADER = ["true_dbm", "v_out_v", "est_dbm", "error_db", "temp_c", "supply_v",
                    "corner_id", "calibrated"]
FREQ_CSV_HEADER = ["true_ghz", "v_o_v", "est_ghz", "error_ghz", "temp_c", "supply_v",
                   "corner_id", "calibrated"]

PATHS = ("power", "freq")


class InvalidReadingError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementRecord:
    """One reading. Power values are dBm/dB, frequency values Hz."""

    path: str
    true_value: float
    v_measured_v: float
    estimate: float
    error: float
    temperature_c: float
    supply_v: float
    corner_id: int
    calibrated: bool


@dataclass(frozen=True)
class ErrorEnvelope:
    max_abs_power_error_db: float
    max_abs_freq_error_hz: float
    n_samples: int
    seed: int
    calibrated: bool


class RecordTable(Sequence):
    """Column store of measurement records; indexing yields MeasurementRecord."""

    def __init__(self, path, true_value, v_measured, estimate, temperature_c, supply_v,
                 corner_id, calibrated):
        self.path = path
        self.true_value = np.asarray(true_value, dtype=float).ravel()
        self.v_measured = np.asarray(v_measured, dtype=float).ravel()
        self.estimate = np.asarray(estimate, dtype=float).ravel()
        self.error = self.estimate - self.true_value
        self.temperature_c = np.asarray(temperature_c, dtype=float).ravel()
        self.supply_v = np.asarray(supply_v, dtype=float).ravel()
        self.corner_id = np.asarray(corner_id, dtype=int).ravel()
        self.calibrated = bool(calibrated)

    def __len__(self):
        return self.true_value.size

    def __getitem__(self, i) -> MeasurementRecord:
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return MeasurementRecord(self.path, float(self.true_value[i]), float(self.v_measured[i]),
                                 float(self.estimate[i]), float(self.error[i]),
                                 float(self.temperature_c[i]), float(self.supply_v[i]),
                                 int(self.corner_id[i]), self.calibrated)

    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.error))) if len(self) else 0.0

    def csv_rows(self) -> Iterator[list]:
        scale = 1.0 if self.path == "power" else 1e9
        cols = [(self.true_value / scale).tolist(), self.v_measured.tolist(),
                (self.estimate / scale).tolist(), (self.error / scale).tolist(),
                self.temperature_c.tolist(), self.supply_v.tolist(), self.corner_id.tolist()]
        flag = int(self.calibrated)
        for row in zip(*cols):
            yield [*(repr(v) for v in row[:6]), row[6], flag]

    def write_csv(self, stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(POWER_CSV_HEADER if self.path == "power" else FREQ_CSV_HEADER)
        writer.writerows(self.csv_rows())

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _nominal_power_vout(power_dbm, eff, ref_impedance_ohm, kind, preamp_gain_db):
    gain = preamp_gain_db if kind is AbmKind.PREAMPLIFIED else 0.0
    amp = amplitude_from_power(np.asarray(power_dbm, dtype=float) + gain, ref_impedance_ohm)
    return load_voltage(drain_dc_current(amp, 0.0, eff), eff)


def invert_power_array(v_out_v, params: ProcessParams = DEFAULT_CONFIG.process,
                       env_assumed: EnvCondition = EnvCondition(),
                       abm_kind: AbmKind = AbmKind.BASIC,
                       config: SimConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Vectorized :func:`invert_power`; out-of-range readings map to -inf / +inf."""
    v = np.asarray(v_out_v, dtype=float)
    eff = apply_variation(params, env_assumed, config.variation)

    def forward(p):
        return _nominal_power_vout(p, eff, config.ref_impedance_ohm, abm_kind, config.preamp_gain_db)

    table_p = np.linspace(*POWER_SEARCH_DBM, POWER_TABLE_CELLS + 1)
    table_v = forward(table_p)
    v_lo, v_hi = table_v[0], table_v[-1]
    # forward output falls (more negative) as power rises; flip for searchsorted
    cell = np.clip(np.searchsorted(-table_v, -v), 1, POWER_TABLE_CELLS)
    lo, hi = table_p[cell - 1], table_p[cell]
    for _ in range(POWER_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        above = forward(mid) < v
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    est = 0.5 * (lo + hi)
    resid = np.abs(np.asarray(forward(est)) - v)
    if np.any((v <= v_lo) & (v >= v_hi) & (resid > POWER_INVERSION_TOL_V)):
        raise ArithmeticError("power inversion missed its voltage tolerance")
    est = np.where(v > v_lo, -np.inf, est)
    return np.where(v < v_hi, np.inf, est)


def invert_power(v_out_v: float, params: ProcessParams = DEFAULT_CONFIG.process,
                 env_assumed: EnvCondition = EnvCondition(), abm_kind: AbmKind = AbmKind.BASIC,
                 config: SimConfig = DEFAULT_CONFIG) -> float:
    """Input power (dBm) whose nominal forward response is ``v_out_v``.

    Bisection over -30..+10 dBm. Readings weaker than the -30 dBm response
    (including 0 V) return ``-inf``; readings beyond +10 dBm return ``+inf``.
    """
    if v_out_v > 0:
        raise InvalidReadingError(f"power detector output must be <= 0 V, got {v_out_v}")
    return float(invert_power_array(v_out_v, params, env_assumed, abm_kind, config))


def invert_frequency(v_o_v, params: ProcessParams = DEFAULT_CONFIG.process,
                     ic_trim_rel: float = 1.0, env_assumed: Optional[EnvCondition] = None,
                     config: SimConfig = DEFAULT_CONFIG):
    """Closed-form inverse of the converter: f = I_c * trim / (2 * C1 * V_o)."""
    v = np.asarray(v_o_v, dtype=float)
    if np.any(v <= 0):
        raise InvalidReadingError(f"frequency detector output must be > 0 V, got {v_o_v}")
    env = env_assumed or config.env_cal("freq")
    eff = apply_variation(params, env, config.variation)
    f = eff.ic_a * ic_trim_rel / (2.0 * eff.c1_f * v)
    return float(f) if f.ndim == 0 else f


def grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid, rounded so decimal endpoints land exactly."""
    if not step > 0 or stop < start:
        raise ValueError(f"empty grid: {start}..{stop} step {step}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 9)


def _env_arrays(envs: Sequence[EnvCondition]):
    return SimpleNamespace(
        temperature_c=np.array([e.temperature_c for e in envs]),
        supply_v=np.array([e.supply_v for e in envs]),
        supply_nominal_v=np.array([e.supply_nominal_v for e in envs]),
    )


def _corner_arrays(base: ProcessParams, deltas: np.ndarray):
    """Duck-typed ProcessParams whose deltas are (n, 1) columns."""
    d = deltas[:, :, None] if deltas.ndim == 2 else deltas
    return SimpleNamespace(
        k_prime_a_per_v2=base.k_prime_a_per_v2, vt0_v=base.vt0_v,
        w1_over_l1=base.w1_over_l1, w2_over_l2=base.w2_over_l2, r4_ohm=base.r4_ohm,
        ic_a=base.ic_a, c1_f=base.c1_f,
        delta_vt_v=d[:, 0], delta_k_rel=d[:, 1], delta_r4_rel=d[:, 2],
        delta_ic_rel=d[:, 3], delta_c1_rel=d[:, 4],
    )


def _deltas_of(params: ProcessParams) -> np.ndarray:
    return np.array([[params.delta_vt_v, params.delta_k_rel, params.delta_r4_rel,
                      params.delta_ic_rel, params.delta_c1_rel]])


def _power_tunes(corners, deltas, config: SimConfig, calibrated: bool) -> np.ndarray:
    n = deltas.shape[0]
    if not calibrated:
        return np.zeros((n, 1))
    eff = apply_variation(corners, config.env_cal("power"), config.variation)
    ok = trim_in_range(eff)
    if not np.all(ok):
        bad = int(np.flatnonzero(~np.ravel(ok))[0])
        raise CalibrationError(f"corner {bad}: threshold outside the tuneP range")
    _, hi, _ = bisect_threshold(eff, config.calibration.max_iterations)
    return hi


def _freq_trims(base, deltas, config: SimConfig, calibrated: bool) -> np.ndarray:
    n = deltas.shape[0]
    if not calibrated:
        return np.ones((n, 1))
    ref = RFTone(config.calibration.reference_freq_hz, config.calibration.reference_power_dbm,
                 config.ref_impedance_ohm)
    trims = []
    for row in deltas:
        abm = AbmState()
        params = base.with_deltas(*row.tolist())
        trims.append(calibrate_freq(abm, params, config.env_cal("freq"), ref, config.variation,
                                    config.windows).ic_trim_rel)
    return np.array(trims)[:, None]


def _power_records(base, deltas, envs, powers, config, calibrated, kind=AbmKind.BASIC, tunes=None):
    """Forward + inverse over corners x envs x powers, as one RecordTable."""
    n, m, g = deltas.shape[0], len(envs), powers.size
    corners = _corner_arrays(base, deltas)
    if tunes is None:
        tunes = _power_tunes(corners, deltas, config, calibrated)
    env = _env_arrays(envs)
    eff = apply_variation(corners, env, config.variation)          # fields (n, m)
    offset = gate_offset(tunes, eff)[:, :, None]
    eff3 = SimpleNamespace(**{k: np.asarray(v)[..., None] if np.ndim(v) else v
                              for k, v in vars(eff).items()})
    gain = config.preamp_gain_db if kind is AbmKind.PREAMPLIFIED else 0.0
    amp = amplitude_from_power(powers + gain, config.ref_impedance_ohm)
    v = np.broadcast_to(load_voltage(drain_dc_current(amp, offset, eff3), eff3), (n, m, g))
    est = invert_power_array(v, base.nominal(), config.env_cal("power"), kind, config)
    shape = (n, m, g)
    return RecordTable(
        "power", np.broadcast_to(powers, shape), v, est,
        np.broadcast_to(env.temperature_c[None, :, None], shape),
        np.broadcast_to(env.supply_v[None, :, None], shape),
        np.broadcast_to(np.arange(n)[:, None, None], shape), calibrated)


def _freq_records(base, deltas, envs, freqs, config, calibrated, trims=None):
    n, m, g = deltas.shape[0], len(envs), freqs.size
    corners = _corner_arrays(base, deltas)
    if trims is None:
        trims = _freq_trims(base, deltas, config, calibrated)
    env = _env_arrays(envs)
    eff = apply_variation(corners, env, config.variation)
    eff3 = SimpleNamespace(**{k: np.asarray(v)[..., None] if np.ndim(v) else v
                              for k, v in vars(eff).items()})
    v = np.broadcast_to(freq_output_voltage(freqs, trims[:, :, None], eff3), (n, m, g))
    est = invert_frequency(v, base, 1.0, config.env_cal("freq"), config)
    shape = (n, m, g)
    return RecordTable(
        "freq", np.broadcast_to(freqs, shape), v, est,
        np.broadcast_to(env.temperature_c[None, :, None], shape),
        np.broadcast_to(env.supply_v[None, :, None], shape),
        np.broadcast_to(np.arange(n)[:, None, None], shape), calibrated)


def sweep(path: str, start: float, stop: float, step: float, *, frequency_hz: float = 1.5e9,
          power_dbm: float = 5.0, env: Optional[EnvCondition] = None,
          corner: Optional[ProcessParams] = None, abm_kind: AbmKind = AbmKind.BASIC,
          calibrated: bool = False, config: SimConfig = DEFAULT_CONFIG) -> RecordTable:
    """Forward model then inversion at every grid point of one path.

    ``start``/``stop``/``step`` are dBm for the power path and Hz for the
    frequency path. ``corner`` is the true device (defaults to nominal);
    ``calibrated`` runs the DC calibration on it first.
    """
    if path not in PATHS:
        raise ValueError(f"unknown path {path!r}")
    points = grid(start, stop, step)
    corner = corner or config.process
    env = env or config.env_cal(path)
    deltas = _deltas_of(corner)
    base = corner.nominal()
    if path == "power":
        return _power_records(base, deltas, [env], points, config, calibrated, abm_kind)
    return _freq_records(base, deltas, [env], points, config, calibrated)


def draw_corners(n: int, seed: int, config: SimConfig = DEFAULT_CONFIG,
                 process_on: bool = True) -> np.ndarray:
    """(n, 5) process deltas, uniform within the configured bounds.

    The random stream is consumed identically whether or not process
    variation is on, so toggling it changes nothing else.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=(n, 5))
    deltas = u * np.array(config.bounds.as_tuple())
    return deltas if process_on else np.zeros_like(deltas)


@dataclass
class MonteCarloResult:
    envelope: ErrorEnvelope
    power: Optional[RecordTable] = None
    freq: Optional[RecordTable] = None


def monte_carlo(path: str, n: int, seed: int, env_grid: Optional[EnvGrid] = None,
                process_on: bool = True, calibrated: bool = False,
                config: SimConfig = DEFAULT_CONFIG) -> MonteCarloResult:
    """Error envelope over n random corners x env grid x measurement grid.

    ``path`` is ``"power"``, ``"freq"`` or ``"both"``. Record order is fixed
    by (corner, environment, grid point), so results depend only on the
    seed and the configuration.
    """
    if path not in PATHS + ("both",):
        raise ValueError(f"unknown path {path!r}")
    env_grid = env_grid or config.env
    deltas = draw_corners(n, seed, config, process_on)
    base = config.process.nominal()
    power = freq = None
    p_err = f_err = math.nan
    if path in ("power", "both"):
        powers = grid(env_grid.power_start_dbm, env_grid.power_stop_dbm, env_grid.power_step_db)
        power = _power_records(base, deltas, env_grid.conditions("power"), powers, config,
                               calibrated)
        p_err = power.max_abs_error()
    if path in ("freq", "both"):
        freqs = grid(env_grid.freq_start_hz, env_grid.freq_stop_hz, env_grid.freq_step_hz)
        freq = _freq_records(base, deltas, env_grid.conditions("freq"), freqs, config, calibrated)
        f_err = freq.max_abs_error()
    return MonteCarloResult(ErrorEnvelope(p_err, f_err, n, seed, calibrated), power, freq)


def per_corner_max_error(table: RecordTable, n: int) -> np.ndarray:
    """Max |error| of each corner over all its records (records are corner-major)."""
    return np.max(np.abs(table.error.reshape(n, -1)), axis=1)
