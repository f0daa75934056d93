"""
Behavioral transfer functions of the RF analogue boundary module detectors.

Power detector: a square-law MOS device (Q1) biased at threshold half-wave
rectifies the RF input; the DC drain current develops a voltage across a
resistor (R4) in series with a diode-connected load (Q2). The low-pass
filter is ideal, so the output is the exact DC average.

Frequency detector: a charge-pump style frequency-to-voltage converter whose
settled output is V_o = I_c / (2 * C1 * f).

The public operations take plain floats and return floats. The lower-level
helpers (``mean_square_overdrive``, ``drain_dc_current``, ``load_voltage``,
``freq_output_voltage``, ``apply_variation``) broadcast over numpy arrays,
which is how :mod:`rfabm.measure` evaluates whole Monte Carlo campaigns.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

T_REF_C = 27.0
T_KELVIN_REF = T_REF_C + 273.15
SIMULABLE_TEMP_C = (-40.0, 125.0)


class AbmKind(enum.Enum):
    BASIC = "basic"
    PREAMPLIFIED = "preamplified"


class ValidityReason(enum.Enum):
    OK = "ok"
    POWER_BELOW_RANGE = "power_below_range"
    POWER_ABOVE_RANGE = "power_above_range"
    FREQUENCY_OUT_OF_BAND = "frequency_out_of_band"
    INSUFFICIENT_DRIVE = "insufficient_drive"


@dataclass(frozen=True)
class RFTone:
    frequency_hz: float
    power_dbm: float
    ref_impedance_ohm: float = 50.0

    def __post_init__(self):
        if not self.frequency_hz > 0:
            raise ValueError(f"frequency_hz must be > 0, got {self.frequency_hz}")
        if not self.ref_impedance_ohm > 0:
            raise ValueError(f"ref_impedance_ohm must be > 0, got {self.ref_impedance_ohm}")


@dataclass(frozen=True)
class ProcessParams:
    """Nominal device constants plus the process deltas of one corner."""

    k_prime_a_per_v2: float = 100e-6
    vt0_v: float = 0.5
    w1_over_l1: float = 10.0
    w2_over_l2: float = 10.0
    r4_ohm: float = 10e3
    ic_a: float = 10e-6
    c1_f: float = 100e-15
    delta_vt_v: float = 0.0
    delta_k_rel: float = 0.0
    delta_r4_rel: float = 0.0
    delta_ic_rel: float = 0.0
    delta_c1_rel: float = 0.0

    def __post_init__(self):
        for name in ("k_prime_a_per_v2", "w1_over_l1", "w2_over_l2", "r4_ohm", "ic_a", "c1_f"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        for name in ("delta_k_rel", "delta_r4_rel", "delta_ic_rel", "delta_c1_rel"):
            value = getattr(self, name)
            if not -0.5 <= value <= 0.5:
                raise ValueError(f"{name} must lie in [-0.5, 0.5], got {value}")
        if not math.isfinite(self.vt0_v) or not math.isfinite(self.delta_vt_v):
            raise ValueError("threshold voltages must be finite")

    def nominal(self) -> "ProcessParams":
        """The same device with every process delta zeroed."""
        return replace(self, delta_vt_v=0.0, delta_k_rel=0.0, delta_r4_rel=0.0,
                       delta_ic_rel=0.0, delta_c1_rel=0.0)

    def with_deltas(self, delta_vt_v=0.0, delta_k_rel=0.0, delta_r4_rel=0.0,
                    delta_ic_rel=0.0, delta_c1_rel=0.0) -> "ProcessParams":
        return replace(self, delta_vt_v=delta_vt_v, delta_k_rel=delta_k_rel,
                       delta_r4_rel=delta_r4_rel, delta_ic_rel=delta_ic_rel,
                       delta_c1_rel=delta_c1_rel)


@dataclass(frozen=True)
class EnvCondition:
    temperature_c: float = T_REF_C
    supply_v: float = 2.5
    supply_nominal_v: float = 2.5

    def __post_init__(self):
        lo, hi = SIMULABLE_TEMP_C
        if not lo <= self.temperature_c <= hi:
            raise ValueError(f"temperature_c must lie in [{lo}, {hi}], got {self.temperature_c}")
        if not self.supply_v > 0:
            raise ValueError(f"supply_v must be > 0, got {self.supply_v}")
        if not self.supply_nominal_v > 0:
            raise ValueError(f"supply_nominal_v must be > 0, got {self.supply_nominal_v}")


@dataclass(frozen=True)
class VariationModel:
    """Temperature/supply coefficients of :func:`apply_variation`.

    These are behavioral fits, not device physics; the defaults are tuned so
    the Monte Carlo envelopes land on the published accuracy figures (see
    ``scripts/fit_variation.py``).
    """

    mobility_exponent: float = -1.5
    vt_tempco_v_per_c: float = -0.07e-3
    r4_tempco_per_c: float = 1e-3
    ic_tempco_per_c: float = 2e-4
    ic_supply_sensitivity: float = 0.2


@dataclass(frozen=True)
class ValidityWindows:
    band_lo_hz: float = 1.2e9
    band_hi_hz: float = 1.8e9
    basic_power_dbm: tuple = (-18.0, 6.0)
    preamp_power_dbm: tuple = (-25.0, -3.0)
    basic_min_drive_dbm: float = 5.0
    preamp_min_drive_dbm: float = -5.0

    def power_range(self, kind: AbmKind) -> tuple:
        return self.basic_power_dbm if kind is AbmKind.BASIC else self.preamp_power_dbm

    def min_drive(self, kind: AbmKind) -> float:
        return self.basic_min_drive_dbm if kind is AbmKind.BASIC else self.preamp_min_drive_dbm


@dataclass(frozen=True)
class EffectiveParams:
    k_prime_a_per_v2: float
    vt_v: float
    vt0_v: float
    r4_ohm: float
    ic_a: float
    c1_f: float
    w1_over_l1: float
    w2_over_l2: float

    @property
    def vt_shift_v(self) -> float:
        """Threshold displacement from the nominal bias point."""
        return self.vt_v - self.vt0_v


@dataclass(frozen=True)
class DetectorOutput:
    v_out_v: float
    validity_reason: ValidityReason = ValidityReason.OK

    @property
    def in_valid_range(self) -> bool:
        return self.validity_reason is ValidityReason.OK


DEFAULT_PARAMS = ProcessParams()
DEFAULT_VARIATION = VariationModel()
DEFAULT_WINDOWS = ValidityWindows()
DEFAULT_PREAMP_GAIN_DB = 10.0
NOMINAL_ENV = EnvCondition()


def amplitude_from_power(power_dbm, ref_impedance_ohm=50.0):
    """Peak amplitude (V) of a sinusoid delivering ``power_dbm`` into a resistance."""
    if np.any(np.asarray(ref_impedance_ohm) < 0):
        raise ValueError("ref_impedance_ohm must be >= 0")
    p_watts = 1e-3 * np.power(10.0, np.asarray(power_dbm, dtype=float) / 10.0)
    amp = np.sqrt(2.0 * ref_impedance_ohm * p_watts)
    return float(amp) if np.ndim(amp) == 0 else amp


def apply_variation(params: ProcessParams, env: EnvCondition,
                    model: VariationModel = DEFAULT_VARIATION) -> EffectiveParams:
    """Effective device values at a process corner and operating point.

    Only attribute access and arithmetic are used, so objects whose fields
    hold numpy arrays give an EffectiveParams of arrays.
    """
    dt = env.temperature_c - T_REF_C
    t_ratio = (env.temperature_c + 273.15) / T_KELVIN_REF
    supply_rel = (env.supply_v - env.supply_nominal_v) / env.supply_nominal_v
    return EffectiveParams(
        k_prime_a_per_v2=params.k_prime_a_per_v2 * (1 + params.delta_k_rel)
        * t_ratio ** model.mobility_exponent,
        vt_v=params.vt0_v + params.delta_vt_v + model.vt_tempco_v_per_c * dt,
        vt0_v=params.vt0_v,
        r4_ohm=params.r4_ohm * (1 + params.delta_r4_rel) * (1 + model.r4_tempco_per_c * dt),
        ic_a=params.ic_a * (1 + params.delta_ic_rel) * (1 + model.ic_tempco_per_c * dt)
        * (1 + model.ic_supply_sensitivity * supply_rel),
        c1_f=params.c1_f * (1 + params.delta_c1_rel),
        w1_over_l1=params.w1_over_l1,
        w2_over_l2=params.w2_over_l2,
    )


def mean_square_overdrive(amplitude_v, offset_v):
    """Time average of max(A*sin(wt) + offset, 0)**2 over one period (closed form).

    Conduction spans the phase interval where sin(wt) > -offset/A; integrating
    the square over that arc gives the expression below. Broadcasts over arrays.
    """
    a = np.asarray(amplitude_v, dtype=float)
    d = np.asarray(offset_v, dtype=float)
    a, d = np.broadcast_arrays(a, d)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.clip(np.where(a > 0, -d / a, np.sign(-d) * 2.0), -1.0, 1.0)
    theta1 = np.arcsin(ratio)
    arc = np.pi - 2.0 * theta1
    partial = (a * a * (arc / 2.0 + np.sin(2.0 * theta1) / 2.0)
               + 4.0 * a * d * np.cos(theta1) + d * d * arc) / (2.0 * np.pi)
    full = d * d + a * a / 2.0
    out = np.where(d >= a, full, np.where(d <= -a, 0.0, partial))
    # a == 0 and d == 0 falls in the first branch; keep it exact
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def drain_dc_current(amplitude_v, gate_offset_v, eff: EffectiveParams):
    """Half-wave rectified square-law DC drain current of Q1 (array-friendly)."""
    return 0.5 * eff.k_prime_a_per_v2 * eff.w1_over_l1 * mean_square_overdrive(amplitude_v, gate_offset_v)


def load_voltage(i_dc_a, eff: EffectiveParams):
    """V_out across the R4 + diode-connected Q2 load for a DC current (array-friendly)."""
    i = np.asarray(i_dc_a, dtype=float)
    v = -i * eff.r4_ohm - np.sqrt(2.0 * i / (eff.k_prime_a_per_v2 * eff.w2_over_l2))
    return float(v) if v.ndim == 0 else v


def gate_offset(tune_p_v, eff: EffectiveParams):
    """Residual gate overdrive at zero RF input.

    ``tune_p_v`` trims the threshold reference: the bias sits exactly at the
    device threshold when ``tune_p_v == -(V_T_eff - V_T0)``.
    """
    return -(np.asarray(tune_p_v, dtype=float) + eff.vt_shift_v)


def rectified_dc_current(amplitude_v: float, gate_offset_v: float, params: ProcessParams,
                         env: EnvCondition, model: VariationModel = DEFAULT_VARIATION) -> float:
    if amplitude_v < 0:
        raise ValueError(f"amplitude_v must be >= 0, got {amplitude_v}")
    return float(drain_dc_current(amplitude_v, gate_offset_v, apply_variation(params, env, model)))


def power_detector_vout(i_dc_a: float, params: ProcessParams, env: EnvCondition,
                        model: VariationModel = DEFAULT_VARIATION) -> float:
    if i_dc_a < 0:
        raise ValueError(f"i_dc_a must be >= 0, got {i_dc_a}")
    return float(load_voltage(i_dc_a, apply_variation(params, env, model)))


def preamp_apply(tone: RFTone, gain_db: float = DEFAULT_PREAMP_GAIN_DB) -> RFTone:
    return replace(tone, power_dbm=tone.power_dbm + gain_db)


def _band_ok(frequency_hz, windows: ValidityWindows) -> bool:
    return windows.band_lo_hz <= frequency_hz <= windows.band_hi_hz


def power_validity(tone: RFTone, kind: AbmKind,
                   windows: ValidityWindows = DEFAULT_WINDOWS) -> ValidityReason:
    if not _band_ok(tone.frequency_hz, windows):
        return ValidityReason.FREQUENCY_OUT_OF_BAND
    lo, hi = windows.power_range(kind)
    if tone.power_dbm < lo:
        return ValidityReason.POWER_BELOW_RANGE
    if tone.power_dbm > hi:
        return ValidityReason.POWER_ABOVE_RANGE
    return ValidityReason.OK


def freq_validity(tone: RFTone, kind: AbmKind,
                  windows: ValidityWindows = DEFAULT_WINDOWS) -> ValidityReason:
    if not _band_ok(tone.frequency_hz, windows):
        return ValidityReason.FREQUENCY_OUT_OF_BAND
    if tone.power_dbm < windows.min_drive(kind):
        return ValidityReason.INSUFFICIENT_DRIVE
    return ValidityReason.OK


def power_detector_response(tone: RFTone, abm_kind: AbmKind, tune_p_offset_v: float,
                            params: ProcessParams, env: EnvCondition,
                            model: VariationModel = DEFAULT_VARIATION,
                            windows: ValidityWindows = DEFAULT_WINDOWS,
                            preamp_gain_db: float = DEFAULT_PREAMP_GAIN_DB) -> DetectorOutput:
    """End-to-end power path. V_out is computed even when the flags say invalid."""
    at_detector = preamp_apply(tone, preamp_gain_db) if abm_kind is AbmKind.PREAMPLIFIED else tone
    eff = apply_variation(params, env, model)
    amp = amplitude_from_power(at_detector.power_dbm, at_detector.ref_impedance_ohm)
    i_dc = drain_dc_current(amp, gate_offset(tune_p_offset_v, eff), eff)
    return DetectorOutput(float(load_voltage(i_dc, eff)), power_validity(tone, abm_kind, windows))


def freq_output_voltage(frequency_hz, ic_trim_rel, eff: EffectiveParams):
    """Settled converter output I_c * trim / (2 * C1 * f) (array-friendly)."""
    v = (eff.ic_a * np.asarray(ic_trim_rel, dtype=float)) / (2.0 * eff.c1_f * np.asarray(frequency_hz, dtype=float))
    return float(v) if v.ndim == 0 else v


def freq_detector_vout(tone: RFTone, abm_kind: AbmKind, ic_trim_rel: float,
                       params: ProcessParams, env: EnvCondition,
                       model: VariationModel = DEFAULT_VARIATION,
                       windows: ValidityWindows = DEFAULT_WINDOWS) -> DetectorOutput:
    # The converter output has no amplitude dependence; the preamp only moves the drive threshold.
    eff = apply_variation(params, env, model)
    return DetectorOutput(freq_output_voltage(tone.frequency_hz, ic_trim_rel, eff),
                          freq_validity(tone, abm_kind, windows))
