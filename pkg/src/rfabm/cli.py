"""
Command-line front end.

    rfabm [--config FILE] sweep --path power|freq --from X --to Y --step S [...] --out FILE
    rfabm [--config FILE] calibrate --path power|freq [--corner-file FILE] --out FILE
    rfabm [--config FILE] montecarlo [--path power|freq|both] --n N --seed S
                                     [--calibrated] [--process on|off] --out FILE
    rfabm tap --vectors FILE --trace FILE

Exit codes: 0 success, 1 usage/input error, 2 runtime failure (bus
conflict, calibration failure).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .abm import AbmState, BusConflictError
from .calibration import CalibrationError, calibrate_freq, calibrate_power
from .config import ConfigError, load_config, load_corner
from .measure import monte_carlo, sweep
from .rfmodels import AbmKind, RFTone
from .testbus import TapController, load_vector, run_vector, trace_to_csv

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
CALIBRATION_CSV_HEADER = ["path", "tune_p_v", "ic_trim_rel", "residual_null_v", "converged",
                          "iterations"]
_ABM_KINDS = {"basic": AbmKind.BASIC, "preamp": AbmKind.PREAMPLIFIED}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rfabm", description="RF analogue boundary module simulator")
    parser.add_argument("--config", type=Path, help="sectioned key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="forward model + inversion over a grid")
    p.add_argument("--path", choices=["power", "freq"], required=True)
    p.add_argument("--from", dest="start", type=float, required=True,
                   help="dBm (power) or GHz (freq)")
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--freq-ghz", type=float, default=1.5, help="tone frequency for power sweeps")
    p.add_argument("--power-dbm", type=float, default=5.0, help="tone power for freq sweeps")
    p.add_argument("--abm", choices=sorted(_ABM_KINDS), default="basic")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("calibrate", help="DC-calibrate one path of a device corner")
    p.add_argument("--path", choices=["power", "freq"], required=True)
    p.add_argument("--corner-file", type=Path, help="process deltas, key = value per line")
    p.add_argument("--abm", choices=sorted(_ABM_KINDS), default="basic")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("montecarlo", help="error envelope over random process corners")
    p.add_argument("--path", choices=["power", "freq", "both"], default="both")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--calibrated", action="store_true")
    p.add_argument("--process", choices=["on", "off"], default="on")
    p.add_argument("--out", type=Path, required=True,
                   help="record CSV; with --path both, _power/_freq is appended to the stem")

    p = sub.add_parser("tap", help="run a scan-vector file through the TAP controller")
    p.add_argument("--vectors", type=Path, required=True)
    p.add_argument("--trace", type=Path, required=True)
    return parser


def _cmd_sweep(args, cfg) -> int:
    kind = _ABM_KINDS[args.abm]
    if args.path == "power":
        table = sweep("power", args.start, args.stop, args.step,
                      frequency_hz=args.freq_ghz * 1e9, abm_kind=kind, config=cfg)
    else:
        table = sweep("freq", args.start * 1e9, args.stop * 1e9, args.step * 1e9,
                      power_dbm=args.power_dbm, abm_kind=kind, config=cfg)
    with open(args.out, "w", newline="") as fh:
        table.write_csv(fh)
    return EXIT_OK


def _cmd_calibrate(args, cfg) -> int:
    params = cfg.process
    if args.corner_file is not None:
        params = load_corner(args.corner_file, cfg.process)
    abm = AbmState(kind=_ABM_KINDS[args.abm])
    env_cal = cfg.env_cal(args.path)
    if args.path == "power":
        res = calibrate_power(abm, params, env_cal, cfg.variation,
                              cfg.calibration.null_tolerance_v, cfg.calibration.max_iterations)
    else:
        ref = RFTone(cfg.calibration.reference_freq_hz, cfg.calibration.reference_power_dbm,
                     cfg.ref_impedance_ohm)
        res = calibrate_freq(abm, params, env_cal, ref, cfg.variation, cfg.windows)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CALIBRATION_CSV_HEADER)
        writer.writerow([args.path, repr(res.tune_p_v), repr(res.ic_trim_rel),
                         repr(res.residual_null_v), int(res.converged), res.iterations])
    print(f"calibrated {args.path} tune_p_v={res.tune_p_v!r} ic_trim_rel={res.ic_trim_rel!r}")
    return EXIT_OK


def _out_paths(out: Path, path: str) -> dict:
    if path != "both":
        return {path: out}
    return {p: out.with_name(f"{out.stem}_{p}{out.suffix}") for p in ("power", "freq")}


def _cmd_montecarlo(args, cfg) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    result = monte_carlo(args.path, args.n, args.seed, process_on=args.process == "on",
                         calibrated=args.calibrated, config=cfg)
    for path, out in _out_paths(args.out, args.path).items():
        with open(out, "w", newline="") as fh:
            getattr(result, path).write_csv(fh)
    env = result.envelope
    print(f"envelope power_db={env.max_abs_power_error_db!r} "
          f"freq_ghz={env.max_abs_freq_error_hz / 1e9!r}")
    return EXIT_OK


def _cmd_tap(args, cfg) -> int:
    vector = load_vector(args.vectors)
    ctrl = TapController()
    trace = run_vector(ctrl, vector)
    args.trace.write_text(trace_to_csv(trace))
    print(f"final state {ctrl.state.value}")
    return EXIT_OK


_COMMANDS = {"sweep": _cmd_sweep, "calibrate": _cmd_calibrate, "montecarlo": _cmd_montecarlo,
             "tap": _cmd_tap}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, OSError, ValueError) as exc:
        print(f"rfabm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BusConflictError, CalibrationError) as exc:
        print(f"rfabm: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
