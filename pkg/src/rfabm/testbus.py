"""
Boundary-scan TAP controller that delivers select words to the ABMs.

Registers shift LSB first: on every Shift clock the register's bit 0 goes
out on TDO and TDI enters at the top. Capture happens on the clock that
leaves Capture-xR; Update takes effect on entering Update-xR.

Instruction register: 4 bits. Data registers: 1-bit BYPASS and the 12-bit
control register (6 bits per ABM; ABM 0 sits at the TDO end, bits 0..5).
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .abm import CONTROL_BITS, AbmState, DetectorPath, decode_select, encode_select

IR_WIDTH = 4
N_ABMS = 2
CONTROL_WIDTH = CONTROL_BITS * N_ABMS
CAPTURE_IR = 0b0001


class TapState(enum.Enum):
    TEST_LOGIC_RESET = "Test-Logic-Reset"
    RUN_TEST_IDLE = "Run-Test/Idle"
    SELECT_DR_SCAN = "Select-DR-Scan"
    CAPTURE_DR = "Capture-DR"
    SHIFT_DR = "Shift-DR"
    EXIT1_DR = "Exit1-DR"
    PAUSE_DR = "Pause-DR"
    EXIT2_DR = "Exit2-DR"
    UPDATE_DR = "Update-DR"
    SELECT_IR_SCAN = "Select-IR-Scan"
    CAPTURE_IR = "Capture-IR"
    SHIFT_IR = "Shift-IR"
    EXIT1_IR = "Exit1-IR"
    PAUSE_IR = "Pause-IR"
    EXIT2_IR = "Exit2-IR"
    UPDATE_IR = "Update-IR"


S = TapState
# state -> (next on TMS=0, next on TMS=1)
TRANSITIONS = {
    S.TEST_LOGIC_RESET: (S.RUN_TEST_IDLE, S.TEST_LOGIC_RESET),
    S.RUN_TEST_IDLE: (S.RUN_TEST_IDLE, S.SELECT_DR_SCAN),
    S.SELECT_DR_SCAN: (S.CAPTURE_DR, S.SELECT_IR_SCAN),
    S.CAPTURE_DR: (S.SHIFT_DR, S.EXIT1_DR),
    S.SHIFT_DR: (S.SHIFT_DR, S.EXIT1_DR),
    S.EXIT1_DR: (S.PAUSE_DR, S.UPDATE_DR),
    S.PAUSE_DR: (S.PAUSE_DR, S.EXIT2_DR),
    S.EXIT2_DR: (S.SHIFT_DR, S.UPDATE_DR),
    S.UPDATE_DR: (S.RUN_TEST_IDLE, S.SELECT_DR_SCAN),
    S.SELECT_IR_SCAN: (S.CAPTURE_IR, S.TEST_LOGIC_RESET),
    S.CAPTURE_IR: (S.SHIFT_IR, S.EXIT1_IR),
    S.SHIFT_IR: (S.SHIFT_IR, S.EXIT1_IR),
    S.EXIT1_IR: (S.PAUSE_IR, S.UPDATE_IR),
    S.PAUSE_IR: (S.PAUSE_IR, S.EXIT2_IR),
    S.EXIT2_IR: (S.SHIFT_IR, S.UPDATE_IR),
    S.UPDATE_IR: (S.RUN_TEST_IDLE, S.SELECT_DR_SCAN),
}


def next_state(state: TapState, tms: int) -> TapState:
    return TRANSITIONS[state][1 if tms else 0]


class Instruction(enum.Enum):
    BYPASS = 0b1111
    PROBE_P = 0b0010
    PROBE_F = 0b0011
    CONTROL = 0b0100

    @classmethod
    def decode(cls, code: int) -> "Instruction":
        try:
            return cls(code)
        except ValueError:
            return cls.BYPASS


def int_to_bits(value: int, width: int) -> List[int]:
    """LSB-first bit list."""
    return [(value >> i) & 1 for i in range(width)]


def bits_to_int(bits: Sequence[int]) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


@dataclass(frozen=True)
class TraceRecord:
    clock: int
    state: TapState
    tdo: int


class TapController:
    """One device: TAP state machine plus its registers and the ABMs it controls."""

    def __init__(self, abms: Optional[Sequence[AbmState]] = None):
        self.abms = list(abms) if abms is not None else [AbmState() for _ in range(N_ABMS)]
        if len(self.abms) != N_ABMS:
            raise ValueError(f"controller drives exactly {N_ABMS} ABMs")
        self.reset()

    def reset(self):
        """Asynchronous reset: what entering Test-Logic-Reset does."""
        self.state = TapState.TEST_LOGIC_RESET
        self._enter_reset()

    def _enter_reset(self):
        self.instruction = Instruction.BYPASS
        self.ir = int_to_bits(Instruction.BYPASS.value, IR_WIDTH)
        self.bypass = [0]
        # ABM selects are left alone: they only ever change on Update-DR under CONTROL.
        self.control = [0] * CONTROL_WIDTH

    def _data_register(self) -> list:
        return self.control if self.instruction is Instruction.CONTROL else self.bypass

    def _capture_dr(self):
        if self.instruction is Instruction.CONTROL:
            self.control = [b for abm in self.abms for b in encode_select(abm.select)]
        else:
            self.bypass = [0]

    def _update_dr(self):
        if self.instruction is not Instruction.CONTROL:
            return
        for k, abm in enumerate(self.abms):
            abm.select = decode_select(self.control[k * CONTROL_BITS:(k + 1) * CONTROL_BITS])

    def _update_ir(self):
        self.instruction = Instruction.decode(bits_to_int(self.ir))
        if self.instruction is Instruction.PROBE_P:
            for abm in self.abms:
                abm.path = DetectorPath.POWER
        elif self.instruction is Instruction.PROBE_F:
            for abm in self.abms:
                abm.path = DetectorPath.FREQUENCY

    @property
    def selects(self) -> list:
        return [abm.select for abm in self.abms]

    def step(self, tms: int, tdi: int) -> int:
        """Advance one TCK and return TDO (0 when not shifting)."""
        tdo = 0
        state = self.state
        if state is TapState.CAPTURE_IR:
            self.ir = int_to_bits(CAPTURE_IR, IR_WIDTH)
        elif state is TapState.CAPTURE_DR:
            self._capture_dr()
        elif state is TapState.SHIFT_IR:
            tdo = self.ir[0]
            self.ir = self.ir[1:] + [int(tdi)]
        elif state is TapState.SHIFT_DR:
            reg = self._data_register()
            tdo = reg[0]
            reg[:] = reg[1:] + [int(tdi)]

        self.state = next_state(state, tms)
        if self.state is TapState.UPDATE_IR:
            self._update_ir()
        elif self.state is TapState.UPDATE_DR:
            self._update_dr()
        elif self.state is TapState.TEST_LOGIC_RESET and state is not TapState.TEST_LOGIC_RESET:
            self._enter_reset()
        return tdo


def tap_step(controller: TapController, tms: int, tdi: int) -> int:
    return controller.step(tms, tdi)


ScanVector = Sequence[Tuple[int, int]]


def run_vector(controller: TapController, vector: ScanVector) -> List[TraceRecord]:
    if len(vector) == 0:
        raise ValueError("scan vector must not be empty")
    trace = []
    for i, (tms, tdi) in enumerate(vector):
        tdo = controller.step(tms, tdi)
        trace.append(TraceRecord(i, controller.state, tdo))
    return trace


# Vector builders. All start and end in Run-Test/Idle unless noted.

def reset_vector() -> list:
    return [(1, 0)] * 5


def shift_ir_vector(code: int) -> list:
    """Run-Test/Idle -> load a 4-bit instruction -> Run-Test/Idle."""
    bits = int_to_bits(code, IR_WIDTH)
    vec = [(1, 0), (1, 0), (0, 0), (0, 0)]
    vec += [(1 if i == IR_WIDTH - 1 else 0, b) for i, b in enumerate(bits)]
    return vec + [(1, 0), (0, 0)]


def shift_dr_vector(bits: Sequence[int]) -> list:
    """Run-Test/Idle -> shift ``bits`` (first element first) -> Update-DR -> Run-Test/Idle."""
    vec = [(1, 0), (0, 0), (0, 0)]
    vec += [(1 if i == len(bits) - 1 else 0, int(b)) for i, b in enumerate(bits)]
    return vec + [(1, 0), (0, 0)]


def load_instruction_vector(instruction: Instruction) -> list:
    """From Test-Logic-Reset: idle, then the canonical IR load."""
    return [(0, 0)] + shift_ir_vector(instruction.value)


def parse_vector_text(text: str) -> list:
    """Scan-vector file: one ``TMS TDI`` pair per line, ``#`` comments."""
    vector = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or any(p not in ("0", "1") for p in parts):
            raise ValueError(f"line {lineno}: expected 'TMS TDI' bits, got {raw!r}")
        vector.append((int(parts[0]), int(parts[1])))
    if not vector:
        raise ValueError("scan vector file holds no vectors")
    return vector


def load_vector(path: Union[str, Path]) -> list:
    return parse_vector_text(Path(path).read_text())


def format_vector(vector: Iterable[Tuple[int, int]]) -> str:
    return "".join(f"{tms} {tdi}\n" for tms, tdi in vector)


def trace_to_csv(trace: Sequence[TraceRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["clock", "state", "tdo"])
    for rec in trace:
        writer.writerow([rec.clock, rec.state.value, rec.tdo])
    return buf.getvalue()
