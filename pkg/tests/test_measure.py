import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import detector_vout, table_invert
from rfabm.config import DEFAULT_CONFIG, EnvGrid
from rfabm.measure import (
    FREQ_CSV_HEADER,
    POWER_CSV_HEADER,
    InvalidReadingError,
    draw_corners,
    grid,
    invert_frequency,
    invert_power,
    invert_power_array,
    monte_carlo,
    per_corner_max_error,
    sweep,
)
from rfabm.rfmodels import (
    DEFAULT_PARAMS,
    NOMINAL_ENV,
    AbmKind,
    EnvCondition,
    RFTone,
    apply_variation,
    power_detector_response,
)


def test_invert_power_examples():
    assert invert_power(-0.28311388300841897) == pytest.approx(0.0, abs=0.01)
    assert invert_power(0.0) == -math.inf
    # table lookup in a brute-force forward sweep gives -10.0 dBm
    assert invert_power(-0.0625) == pytest.approx(table_invert(-0.0625), abs=0.01)
    assert invert_power(-0.0625) == pytest.approx(-10.0, abs=0.01)


def test_invert_power_sentinels_and_errors():
    assert invert_power(-50.0) == math.inf
    with pytest.raises(InvalidReadingError):
        invert_power(0.01)


def test_invert_power_preamplified():
    v = power_detector_response(RFTone(1.5e9, -12.0), AbmKind.PREAMPLIFIED, 0.0, DEFAULT_PARAMS,
                                NOMINAL_ENV).v_out_v
    assert invert_power(v, abm_kind=AbmKind.PREAMPLIFIED) == pytest.approx(-12.0, abs=1e-6)


@given(st.floats(-29.5, 9.5))
def test_invert_power_round_trip(p):
    v = power_detector_response(RFTone(1.5e9, p), AbmKind.BASIC, 0.0, DEFAULT_PARAMS, NOMINAL_ENV).v_out_v
    assert invert_power(v) == pytest.approx(p, abs=1e-6)


def test_invert_frequency_examples():
    assert invert_frequency(10e-6 / (2 * 100e-15 * 1.5e9)) == pytest.approx(1.5e9, rel=1e-12)
    assert invert_frequency(33.333e-3) == pytest.approx(1.5e9, rel=2e-5)
    assert invert_frequency(41.667e-3) == pytest.approx(1.2e9, rel=2e-5)
    with pytest.raises(InvalidReadingError):
        invert_frequency(-1e-3)
    with pytest.raises(InvalidReadingError):
        invert_frequency(0.0)


def test_grid():
    assert grid(-18, 6, 1).size == 25
    assert list(grid(1.2e9, 1.8e9, 0.1e9)) == [1.2e9, 1.3e9, 1.4e9, 1.5e9, 1.6e9, 1.7e9, 1.8e9]
    with pytest.raises(ValueError):
        grid(1, 0, 1)
    with pytest.raises(ValueError):
        grid(0, 1, 0)


def test_sweep_examples():
    power = sweep("power", -18, 6, 1)
    assert len(power) == 25 and power.max_abs_error() <= 0.01
    freq = sweep("freq", 1.2e9, 1.8e9, 0.1e9)
    assert len(freq) == 7
    assert np.all(np.abs(freq.error / freq.true_value) <= 1e-6)


def test_sweep_gain_corner_errors_match_brute_force():
    corner = DEFAULT_PARAMS.with_deltas(delta_k_rel=0.15)
    table = sweep("power", -18, 6, 6, corner=corner)
    assert table.max_abs_error() > 0.05
    for rec in table:
        v = detector_vout(rec.true_value, k_prime=115e-6)
        assert rec.v_measured_v == pytest.approx(v, rel=1e-6)
        assert rec.error == pytest.approx(table_invert(v) - rec.true_value, abs=0.01)


def test_sweep_calibrated_corner_removes_threshold_error():
    corner = DEFAULT_PARAMS.with_deltas(delta_vt_v=0.02)
    raw = sweep("power", -18, 6, 1, corner=corner)
    cal = sweep("power", -18, 6, 1, corner=corner, calibrated=True)
    assert raw.max_abs_error() > 0.5
    assert cal.max_abs_error() <= 1e-6


def test_record_fields_and_csv():
    table = sweep("freq", 1.2e9, 1.8e9, 0.1e9)
    rec = table[0]
    assert rec.path == "freq" and rec.true_value == 1.2e9 and rec.corner_id == 0
    lines = table.to_csv().splitlines()
    assert lines[0] == ",".join(FREQ_CSV_HEADER)
    assert lines[1].startswith("1.2,")
    assert sweep("power", 0, 0, 1).to_csv().splitlines()[0] == ",".join(POWER_CSV_HEADER)


def test_monte_carlo_nominal_is_zero():
    grid_ = EnvGrid(temperatures_c=(27.0,), power_supply_tol_v=0.0, freq_supply_tol_v=0.0)
    res = monte_carlo("both", 1, 7, env_grid=grid_, process_on=False)
    # 3 supply points collapse onto nominal when the tolerance is zero
    assert res.envelope.max_abs_power_error_db <= 1e-6
    assert res.envelope.max_abs_freq_error_hz <= 1e-6 * 1.8e9


def test_monte_carlo_seed_determinism():
    a = monte_carlo("both", 20, 5)
    b = monte_carlo("both", 20, 5)
    assert a.power.to_csv() == b.power.to_csv() and a.freq.to_csv() == b.freq.to_csv()
    c = monte_carlo("both", 20, 6)
    assert a.power.to_csv() != c.power.to_csv()


def test_process_toggle_and_stream():
    on = draw_corners(50, 3)
    off = draw_corners(50, 3, process_on=False)
    assert np.all(off == 0) and np.any(on != 0)
    bounds = np.array(DEFAULT_CONFIG.bounds.as_tuple())
    assert np.all(np.abs(on) <= bounds)
    with pytest.raises(ValueError):
        draw_corners(0, 1)


def test_monte_carlo_shapes():
    res = monte_carlo("power", 3, 1)
    assert res.freq is None and math.isnan(res.envelope.max_abs_freq_error_hz)
    assert len(res.power) == 3 * 15 * 25
    assert per_corner_max_error(res.power, 3).shape == (3,)
    res = monte_carlo("freq", 2, 1)
    assert len(res.freq) == 2 * 15 * 7
    with pytest.raises(ValueError):
        monte_carlo("noise", 1, 1)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 30))
def test_envelope_monotone_in_corner_count(seed, n):
    small = monte_carlo("both", n - 1, seed).envelope
    big = monte_carlo("both", n, seed).envelope
    assert big.max_abs_power_error_db >= small.max_abs_power_error_db
    assert big.max_abs_freq_error_hz >= small.max_abs_freq_error_hz


def test_invert_power_array_matches_scalar():
    vs = np.array([-0.3, -0.1, -0.01, 0.0])
    arr = invert_power_array(vs)
    assert list(arr) == [invert_power(v) for v in vs]


def test_invert_at_assumed_env():
    # the estimator models a nulled detector, so trim out the thermal threshold shift
    env = EnvCondition(50.0, 2.5, 2.5)
    tune = -apply_variation(DEFAULT_PARAMS, env).vt_shift_v
    v = power_detector_response(RFTone(1.5e9, -3.0), AbmKind.BASIC, tune, DEFAULT_PARAMS, env).v_out_v
    assert invert_power(v, env_assumed=env) == pytest.approx(-3.0, abs=1e-6)
    assert abs(invert_power(v) + 3.0) > 1e-3
