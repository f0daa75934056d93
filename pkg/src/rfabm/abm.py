"""
One analogue boundary module: the detector pair, its tuning inputs and the
switch matrix that connects a selected pin onto the AT1/AT2 test-port lines.

Control word layout (6 bits, first bit first)::

    [enable, pin2, pin1, pin0, at1, at2]

Pin codes: 000 vout, 001 out_plus, 010 out_minus, 011 tune_p, 100 tune_f,
101..111 none. A disabled module always decodes to pin ``none`` with both
switches open.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .rfmodels import (
    DEFAULT_PREAMP_GAIN_DB,
    DEFAULT_VARIATION,
    DEFAULT_WINDOWS,
    AbmKind,
    DetectorOutput,
    EnvCondition,
    ProcessParams,
    RFTone,
    ValidityWindows,
    VariationModel,
    freq_detector_vout,
    power_detector_response,
)

CONTROL_BITS = 6
TUNE_P_RANGE_V = (-0.2, 0.2)
IC_TRIM_RANGE = (0.5, 2.0)


class MalformedControlError(ValueError):
    pass


class BusConflictError(RuntimeError):
    pass


class Pin(enum.Enum):
    VOUT = "vout"
    OUT_PLUS = "out_plus"
    OUT_MINUS = "out_minus"
    TUNE_P = "tune_p"
    TUNE_F = "tune_f"
    NONE = "none"


class DetectorPath(enum.Enum):
    POWER = "power"
    FREQUENCY = "frequency"


_PIN_CODES = [Pin.VOUT, Pin.OUT_PLUS, Pin.OUT_MINUS, Pin.TUNE_P, Pin.TUNE_F]
OUTPUT_PINS = frozenset({Pin.VOUT, Pin.OUT_PLUS, Pin.OUT_MINUS})
INPUT_PINS = frozenset({Pin.TUNE_P, Pin.TUNE_F})


@dataclass
class TuneSettings:
    tune_p_v: float = 0.0
    ic_trim_rel: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        lo, hi = TUNE_P_RANGE_V
        if not lo <= self.tune_p_v <= hi:
            raise ValueError(f"tune_p_v must lie in [{lo}, {hi}] V, got {self.tune_p_v}")
        lo, hi = IC_TRIM_RANGE
        if not lo <= self.ic_trim_rel <= hi:
            raise ValueError(f"ic_trim_rel must lie in [{lo}, {hi}], got {self.ic_trim_rel}")


@dataclass(frozen=True)
class AbmSelect:
    pin_sel: Pin = Pin.NONE
    at1_connect: bool = False
    at2_connect: bool = False
    abm_enabled: bool = False

    def __post_init__(self):
        if self.pin_sel is Pin.NONE and (self.at1_connect or self.at2_connect):
            raise ValueError("pin none cannot connect to an AT line")
        if not self.abm_enabled and self.pin_sel is not Pin.NONE:
            raise ValueError("a disabled ABM must select pin none")

    def drives(self) -> tuple:
        """(drives AT1, drives AT2) for this select."""
        active = self.abm_enabled and self.pin_sel in OUTPUT_PINS
        return active and self.at1_connect, active and self.at2_connect


IDLE_SELECT = AbmSelect()


@dataclass
class AbmState:
    kind: AbmKind = AbmKind.BASIC
    select: AbmSelect = IDLE_SELECT
    tune: TuneSettings = field(default_factory=TuneSettings)
    path: DetectorPath = DetectorPath.POWER


@dataclass(frozen=True)
class AnalogBus:
    """The two test-port lines. ``None`` means undriven."""

    at1_v: Optional[float] = None
    at2_v: Optional[float] = None
    driver_count_at1: int = 0
    driver_count_at2: int = 0

    @classmethod
    def external(cls, at1_v=None, at2_v=None) -> "AnalogBus":
        """A bus with the tester driving whichever lines are given."""
        return cls(at1_v, at2_v, int(at1_v is not None), int(at2_v is not None))


def decode_select(control_bits: Sequence[int]) -> AbmSelect:
    bits = [int(b) for b in control_bits]
    if len(bits) != CONTROL_BITS:
        raise MalformedControlError(f"expected {CONTROL_BITS} control bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise MalformedControlError(f"control bits must be 0/1, got {bits}")
    enable, p2, p1, p0, at1, at2 = bits
    if not enable:
        return IDLE_SELECT
    code = (p2 << 2) | (p1 << 1) | p0
    pin = _PIN_CODES[code] if code < len(_PIN_CODES) else Pin.NONE
    if pin is Pin.NONE:
        return AbmSelect(Pin.NONE, False, False, True)
    return AbmSelect(pin, bool(at1), bool(at2), True)


def encode_select(select: AbmSelect) -> list:
    if not select.abm_enabled:
        return [0] * CONTROL_BITS
    code = _PIN_CODES.index(select.pin_sel) if select.pin_sel is not Pin.NONE else 0b111
    return [1, (code >> 2) & 1, (code >> 1) & 1, code & 1,
            int(select.at1_connect), int(select.at2_connect)]


def pin_voltage(pin: Pin, output: DetectorOutput) -> float:
    # out- carries V_outN, out+ is the 0 V reference, so out- minus out+ is V_out.
    if pin is Pin.OUT_PLUS:
        return 0.0
    if pin in (Pin.VOUT, Pin.OUT_MINUS):
        return output.v_out_v
    raise ValueError(f"pin {pin.value} is not an output")


def _clamp(value: float, bounds: tuple) -> float:
    return min(max(value, bounds[0]), bounds[1])


def _tune_from_voltage(state: AbmState, pin: Pin, volts: float):
    # The trim inputs saturate at the ends of their range rather than fault.
    if pin is Pin.TUNE_P:
        new = replace(state.tune, tune_p_v=_clamp(volts, TUNE_P_RANGE_V))
    else:
        # tuneF: 1 V on the line is +100 % I_c trim
        new = replace(state.tune, ic_trim_rel=_clamp(1.0 + volts, IC_TRIM_RANGE))
    state.tune = new


def drive_bus(abm_state: AbmState, select: AbmSelect, detector_outputs: DetectorOutput,
              bus: AnalogBus) -> AnalogBus:
    """Apply one ABM's switch settings to the bus.

    Output pins drive every connected line; tune pins read the connected line
    (if driven) into ``abm_state.tune`` instead. Raises BusConflictError when a
    line would get a second driver.
    """
    if not select.abm_enabled or select.pin_sel is Pin.NONE:
        return bus
    lines = [("1", select.at1_connect), ("2", select.at2_connect)]
    if select.pin_sel in INPUT_PINS:
        for name, connected in lines:
            volts = getattr(bus, f"at{name}_v")
            if connected and volts is not None:
                _tune_from_voltage(abm_state, select.pin_sel, volts)
        return bus
    v = pin_voltage(select.pin_sel, detector_outputs)
    updates = {}
    for name, connected in lines:
        if not connected:
            continue
        count = getattr(bus, f"driver_count_at{name}") + 1
        if count > 1:
            raise BusConflictError(f"AT{name} already driven; one-driver rule violated")
        updates[f"at{name}_v"] = v
        updates[f"driver_count_at{name}"] = count
    return replace(bus, **updates)


def route_all(selects: Sequence[AbmSelect], outputs: Sequence[DetectorOutput],
              states: Optional[Sequence[AbmState]] = None,
              bus: Optional[AnalogBus] = None) -> AnalogBus:
    """Route several ABMs onto one bus in order; any conflict rejects the whole plan."""
    bus = AnalogBus() if bus is None else bus
    if states is None:
        states = [AbmState() for _ in selects]
    for state, select, out in zip(states, selects, outputs):
        bus = drive_bus(state, select, out, bus)
    return bus


def detector_output(abm_state: AbmState, tone: RFTone, env: EnvCondition, params: ProcessParams,
                    model: VariationModel = DEFAULT_VARIATION,
                    windows: ValidityWindows = DEFAULT_WINDOWS,
                    preamp_gain_db: float = DEFAULT_PREAMP_GAIN_DB) -> DetectorOutput:
    """Output of whichever detector the ABM's path currently selects."""
    if abm_state.path is DetectorPath.POWER:
        return power_detector_response(tone, abm_state.kind, abm_state.tune.tune_p_v, params, env,
                                       model, windows, preamp_gain_db)
    return freq_detector_vout(tone, abm_state.kind, abm_state.tune.ic_trim_rel, params, env,
                              model, windows)


def measure_via_atp(abm_state: AbmState, tone: RFTone, env: EnvCondition, params: ProcessParams,
                    select: AbmSelect, bus: Optional[AnalogBus] = None,
                    model: VariationModel = DEFAULT_VARIATION,
                    windows: ValidityWindows = DEFAULT_WINDOWS,
                    preamp_gain_db: float = DEFAULT_PREAMP_GAIN_DB) -> tuple:
    """Stimulus to test-port voltage. Returns ``(DetectorOutput, AnalogBus)``.

    The detector output carries the voltage seen on the bus for the selected
    pin (the switches are ideal). A disabled ABM leaves the bus untouched.
    """
    if select.pin_sel in INPUT_PINS:
        raise ValueError("select must route a measurement pin")
    out = detector_output(abm_state, tone, env, params, model, windows, preamp_gain_db)
    bus = drive_bus(abm_state, select, out, AnalogBus() if bus is None else bus)
    if select.abm_enabled and select.pin_sel in OUTPUT_PINS:
        out = DetectorOutput(pin_voltage(select.pin_sel, out), out.validity_reason)
    return out, bus
