"""DC calibration of the two detector paths through the tuneP / tuneF inputs."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .abm import IC_TRIM_RANGE, TUNE_P_RANGE_V, AbmState
from .rfmodels import (
    DEFAULT_VARIATION,
    DEFAULT_WINDOWS,
    EnvCondition,
    ProcessParams,
    RFTone,
    ValidityReason,
    ValidityWindows,
    VariationModel,
    apply_variation,
    drain_dc_current,
    freq_output_voltage,
    freq_validity,
    gate_offset,
    load_voltage,
)

NULL_TOLERANCE_V = 0.1e-3
MAX_ITERATIONS = 60
# Bracket width at which the threshold search stops; far below the null tolerance.
BRACKET_RESOLUTION_V = 1e-15
REFERENCE_TONE = RFTone(1.5e9, 5.0)


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CalibrationResult:
    tune_p_v: float
    ic_trim_rel: float
    residual_null_v: float
    converged: bool
    iterations: int


def _zero_input_vout(tune_p_v, eff):
    return load_voltage(drain_dc_current(0.0, gate_offset(tune_p_v, eff), eff), eff)


def bisect_threshold(eff, max_iterations: int = MAX_ITERATIONS):
    """Locate the conduction edge of the zero-input power detector.

    With no RF drive Q1 conducts only when the gate sits above threshold, so
    the zero-input output is 0 V on one side of the true threshold and
    strictly negative on the other. Returns ``(conducting, blocked,
    iterations)``: the final bracket over the tuneP range. Works elementwise
    when ``eff`` holds arrays.
    """
    shape = np.shape(eff.vt_shift_v)
    lo = np.full(shape, TUNE_P_RANGE_V[0])
    hi = np.full(shape, TUNE_P_RANGE_V[1])
    iterations = 0
    while iterations < max_iterations and np.max(hi - lo) > BRACKET_RESOLUTION_V:
        mid = 0.5 * (lo + hi)
        conducting = np.asarray(_zero_input_vout(mid, eff)) < 0.0
        lo = np.where(conducting, mid, lo)
        hi = np.where(conducting, hi, mid)
        iterations += 1
    return lo, hi, iterations


def trim_in_range(eff) -> np.ndarray:
    """True where the threshold can be reached inside the tuneP range."""
    lo, hi = TUNE_P_RANGE_V
    # larger tune_p lowers the gate overdrive
    return ((np.asarray(_zero_input_vout(lo, eff)) < 0.0)
            & (np.asarray(_zero_input_vout(hi, eff)) == 0.0))


def calibrate_power(abm: AbmState, params: ProcessParams, env_cal: EnvCondition = EnvCondition(),
                    model: VariationModel = DEFAULT_VARIATION,
                    null_tolerance_v: float = NULL_TOLERANCE_V,
                    max_iterations: int = MAX_ITERATIONS) -> CalibrationResult:
    """Null the power path with the RF input off and store the tuneP trim in ``abm``."""
    eff = apply_variation(params, env_cal, model)
    if not trim_in_range(eff):
        raise CalibrationError(
            f"threshold outside the tuneP range {TUNE_P_RANGE_V} V "
            f"(threshold shift {eff.vt_shift_v * 1e3:.1f} mV)")
    lo, hi, iterations = bisect_threshold(eff, max_iterations)
    tune = float(hi)
    residual = abs(float(_zero_input_vout(lo, eff)))
    if residual > null_tolerance_v:
        raise CalibrationError(
            f"power null not reached after {iterations} iterations (residual {residual:.3g} V)")
    abm.tune = replace(abm.tune, tune_p_v=tune)
    return CalibrationResult(tune, abm.tune.ic_trim_rel, residual, True, iterations)


def calibrate_freq(abm: AbmState, params: ProcessParams, env_cal: EnvCondition = EnvCondition(),
                   reference_tone: RFTone = REFERENCE_TONE,
                   model: VariationModel = DEFAULT_VARIATION,
                   windows: ValidityWindows = DEFAULT_WINDOWS,
                   nominal: Optional[ProcessParams] = None) -> CalibrationResult:
    """Trim I_c so the reference tone reads exactly its nominal output voltage.

    The measurement is taken untrimmed, so repeated calibration gives the
    same trim.
    """
    reason = freq_validity(reference_tone, abm.kind, windows)
    if reason is not ValidityReason.OK:
        raise CalibrationError(f"reference tone unusable: {reason.value}")
    nominal = params.nominal() if nominal is None else nominal
    expected = freq_output_voltage(reference_tone.frequency_hz, 1.0,
                                   apply_variation(nominal, env_cal, model))
    eff = apply_variation(params, env_cal, model)
    measured = freq_output_voltage(reference_tone.frequency_hz, 1.0, eff)
    trim = expected / measured
    lo, hi = IC_TRIM_RANGE
    if not lo <= trim <= hi:
        raise CalibrationError(f"required I_c trim {trim:.4f} outside [{lo}, {hi}]")
    residual = abs(freq_output_voltage(reference_tone.frequency_hz, trim, eff) - expected)
    abm.tune = replace(abm.tune, ic_trim_rel=trim)
    return CalibrationResult(abm.tune.tune_p_v, trim, residual, True, 1)
