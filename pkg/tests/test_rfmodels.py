import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import halfwave_dc_current
from rfabm.rfmodels import (
    DEFAULT_PARAMS,
    NOMINAL_ENV,
    AbmKind,
    EnvCondition,
    ProcessParams,
    RFTone,
    ValidityReason,
    VariationModel,
    amplitude_from_power,
    apply_variation,
    freq_detector_vout,
    mean_square_overdrive,
    power_detector_response,
    power_detector_vout,
    preamp_apply,
    rectified_dc_current,
)

BASIC = AbmKind.BASIC
PRE = AbmKind.PREAMPLIFIED


def test_amplitude_from_power_examples():
    assert amplitude_from_power(10, 50) == pytest.approx(1.0, abs=5e-4)
    assert amplitude_from_power(0, 50) == pytest.approx(0.31623, abs=5e-6)
    assert amplitude_from_power(-7.0, 0.0) == 0.0


def test_amplitude_rejects_negative_impedance():
    with pytest.raises(ValueError):
        amplitude_from_power(0.0, -1.0)


@given(st.floats(-60, 30), st.floats(0.01, 30))
def test_amplitude_monotone(p, dp):
    assert amplitude_from_power(p + dp) > amplitude_from_power(p)


# Frozen from tests/oracles.halfwave_dc_current (2**14 midpoint samples per period).
@pytest.mark.parametrize("amp, offset, expected", [
    (0.0, 0.0, 0.0),
    (0.31623, 0.0, 1.2500176612500002e-05),
    (0.1, 0.0, 1.2500000000000003e-06),
    (0.1, 0.03, 2.4443193447766965e-06),
    (0.1, -0.03, 5.056806552233038e-07),
])
def test_rectified_dc_current_matches_oracle(amp, offset, expected):
    got = rectified_dc_current(amp, offset, DEFAULT_PARAMS, NOMINAL_ENV)
    assert got == pytest.approx(expected, rel=1e-3, abs=1e-15)


def test_rectified_dc_current_spec_values():
    assert rectified_dc_current(0.31623, 0, DEFAULT_PARAMS, NOMINAL_ENV) == pytest.approx(12.5e-6, rel=1e-3)
    assert rectified_dc_current(0.1, 0, DEFAULT_PARAMS, NOMINAL_ENV) == pytest.approx(1.25e-6, rel=1e-3)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-1.5, 1.5))
def test_closed_form_overdrive_matches_numeric(amp, offset):
    numeric = halfwave_dc_current(amp, offset, 2.0, 1.0)
    assert mean_square_overdrive(amp, offset) == pytest.approx(numeric, rel=1e-6, abs=1e-9)


def test_power_detector_vout_examples():
    assert power_detector_vout(0.0, DEFAULT_PARAMS, NOMINAL_ENV) == 0.0
    assert power_detector_vout(12.5e-6, DEFAULT_PARAMS, NOMINAL_ENV) == pytest.approx(-0.28311, abs=5e-6)
    assert power_detector_vout(1.25e-6, DEFAULT_PARAMS, NOMINAL_ENV) == pytest.approx(-0.06250, abs=5e-6)


@given(st.floats(0, 1e-3), st.floats(1e-9, 1e-4))
def test_power_detector_vout_strictly_decreasing(i, di):
    assert power_detector_vout(i + di, DEFAULT_PARAMS, NOMINAL_ENV) < power_detector_vout(i, DEFAULT_PARAMS, NOMINAL_ENV)


def test_power_response_chain():
    out = power_detector_response(RFTone(1.5e9, 0.0), BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV)
    assert out.v_out_v == pytest.approx(-0.28311, abs=5e-6)
    assert out.in_valid_range and out.validity_reason is ValidityReason.OK


def test_power_response_flags():
    hot = power_detector_response(RFTone(1.5e9, 10.0), BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV)
    assert not hot.in_valid_range and hot.validity_reason is ValidityReason.POWER_ABOVE_RANGE
    assert hot.v_out_v < 0  # still computed
    low_f = power_detector_response(RFTone(1.0e9, 0.0), BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV)
    assert low_f.validity_reason is ValidityReason.FREQUENCY_OUT_OF_BAND
    weak = power_detector_response(RFTone(1.5e9, -20.0), BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV)
    assert weak.validity_reason is ValidityReason.POWER_BELOW_RANGE


def test_preamplified_power_path_adds_gain():
    pre = power_detector_response(RFTone(1.5e9, -10.0), PRE, 0.0, DEFAULT_PARAMS, NOMINAL_ENV)
    basic = power_detector_response(RFTone(1.5e9, 0.0), BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV)
    assert pre.v_out_v == basic.v_out_v
    assert pre.in_valid_range


def test_miscalibrated_threshold_shifts_response():
    corner = DEFAULT_PARAMS.with_deltas(delta_vt_v=0.01)
    tone = RFTone(1.5e9, -10.0)
    off = power_detector_response(tone, BASIC, 0.0, corner, NOMINAL_ENV).v_out_v
    trimmed = power_detector_response(tone, BASIC, -0.01, corner, NOMINAL_ENV).v_out_v
    nominal = power_detector_response(tone, BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV).v_out_v
    assert abs(off) < abs(nominal)  # raised threshold conducts less
    assert trimmed == pytest.approx(nominal, abs=1e-15)


@given(st.floats(-18, 5.9), st.floats(0.05, 6))
def test_power_response_monotone_in_power(p, dp):
    dp = min(dp, 6 - p)
    a = power_detector_response(RFTone(1.5e9, p), BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV).v_out_v
    b = power_detector_response(RFTone(1.5e9, p + dp), BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV).v_out_v
    assert abs(b) > abs(a)


@given(st.floats(-40, 20), st.floats(-0.2, 0.2), st.floats(-40, 125))
def test_vout_never_positive(p, tune, temp):
    env = EnvCondition(temp, 2.5, 2.5)
    out = power_detector_response(RFTone(1.5e9, p), BASIC, tune, DEFAULT_PARAMS, env)
    assert out.v_out_v <= 0.0


@given(st.floats(-30, 10))
def test_power_path_frequency_independent(p):
    a = power_detector_response(RFTone(1.3e9, p), BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV)
    b = power_detector_response(RFTone(1.7e9, p), BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV)
    assert a.v_out_v == b.v_out_v


def test_freq_detector_examples():
    out = freq_detector_vout(RFTone(1.5e9, 5.0), BASIC, 1.0, DEFAULT_PARAMS, NOMINAL_ENV)
    assert out.v_out_v == pytest.approx(33.333e-3, abs=5e-7) and out.in_valid_range
    out = freq_detector_vout(RFTone(1.2e9, 5.0), BASIC, 1.0, DEFAULT_PARAMS, NOMINAL_ENV)
    assert out.v_out_v == pytest.approx(41.667e-3, abs=5e-7)
    out = freq_detector_vout(RFTone(1.5e9, 0.0), BASIC, 1.0, DEFAULT_PARAMS, NOMINAL_ENV)
    assert out.validity_reason is ValidityReason.INSUFFICIENT_DRIVE


@given(st.floats(1.2e9, 1.8e9), st.floats(0.5, 2.0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
       st.floats(-10, 70), st.floats(2.0, 4.0))
def test_freq_detector_exact(f, trim, dic, dc1, temp, vdd):
    params = DEFAULT_PARAMS.with_deltas(delta_ic_rel=dic, delta_c1_rel=dc1)
    env = EnvCondition(temp, vdd, 3.3)
    eff = apply_variation(params, env)
    got = freq_detector_vout(RFTone(f, 5.0), BASIC, trim, params, env).v_out_v
    assert got == pytest.approx(eff.ic_a * trim / (2 * eff.c1_f * f), rel=1e-12)


def test_preamp_apply():
    assert preamp_apply(RFTone(1.5e9, -15.0), 10.0) == RFTone(1.5e9, -5.0)
    assert preamp_apply(RFTone(1.5e9, -5.0)) == RFTone(1.5e9, 5.0)
    assert preamp_apply(RFTone(1.4e9, 3.0), 0.0) == RFTone(1.4e9, 3.0)


def test_apply_variation_identity_at_reference():
    eff = apply_variation(DEFAULT_PARAMS, EnvCondition(27.0, 2.5, 2.5))
    p = DEFAULT_PARAMS
    assert (eff.k_prime_a_per_v2, eff.vt_v, eff.r4_ohm, eff.ic_a, eff.c1_f) == (
        p.k_prime_a_per_v2, p.vt0_v, p.r4_ohm, p.ic_a, p.c1_f)


def test_apply_variation_examples():
    eff = apply_variation(DEFAULT_PARAMS, EnvCondition(27.0, 2.75, 2.5))
    assert eff.ic_a == pytest.approx(1.02 * DEFAULT_PARAMS.ic_a, rel=1e-12)
    eff = apply_variation(DEFAULT_PARAMS.with_deltas(delta_vt_v=0.03), NOMINAL_ENV)
    assert eff.vt_v == pytest.approx(DEFAULT_PARAMS.vt0_v + 0.03, abs=1e-15)


def test_apply_variation_temperature_terms():
    model = VariationModel(vt_tempco_v_per_c=-1e-3)
    eff = apply_variation(DEFAULT_PARAMS, EnvCondition(77.0, 2.5, 2.5), model)
    assert eff.vt_v == pytest.approx(0.5 - 0.05)
    assert eff.r4_ohm == pytest.approx(10e3 * 1.05)
    assert eff.k_prime_a_per_v2 == pytest.approx(100e-6 * (350.15 / 300.15) ** -1.5)
    assert eff.ic_a == pytest.approx(10e-6 * (1 + 2e-4 * 50))


@pytest.mark.parametrize("kwargs", [
    {"k_prime_a_per_v2": 0.0}, {"r4_ohm": -1.0}, {"c1_f": 0.0}, {"delta_k_rel": 0.6},
    {"delta_ic_rel": -0.51},
])
def test_process_params_invariants(kwargs):
    with pytest.raises(ValueError):
        ProcessParams(**kwargs)


def test_type_invariants():
    with pytest.raises(ValueError):
        RFTone(0.0, 0.0)
    with pytest.raises(ValueError):
        RFTone(1e9, 0.0, 0.0)
    with pytest.raises(ValueError):
        EnvCondition(130.0)
    with pytest.raises(ValueError):
        EnvCondition(27.0, 0.0)


def test_array_broadcast_matches_scalar():
    amps = np.linspace(0, 1, 11)
    offs = np.linspace(-0.1, 0.1, 11)
    vec = mean_square_overdrive(amps, offs)
    assert all(math.isclose(v, mean_square_overdrive(a, o), rel_tol=0, abs_tol=0)
               for v, a, o in zip(vec, amps, offs))
