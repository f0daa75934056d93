"""Scan corner bounds and report Monte Carlo error envelopes against targets.

Used to choose the shipped variation defaults. Each candidate runs the
uncalibrated and calibrated campaigns (n corners, fixed seed) and prints
the four envelope numbers with a flag for whether all targets hold.

    python scripts/fit_variation.py --vt-mv 3 4 5 --ic-pct 1.0 1.5 2.0
"""

import argparse
import dataclasses
import itertools

from rfabm.config import DEFAULT_CONFIG, serialize_config
from rfabm.measure import monte_carlo

TARGETS = {"power_uncal": (1.5, 2.5), "freq_uncal": (0.08, 0.12),
           "power_cal": (0.0, 1.0), "freq_cal": (0.0, 0.05)}


def evaluate(cfg, n, seed):
    unc = monte_carlo("both", n, seed, config=cfg).envelope
    cal = monte_carlo("both", n, seed, calibrated=True, config=cfg).envelope
    return {"power_uncal": unc.max_abs_power_error_db,
            "freq_uncal": unc.max_abs_freq_error_hz / 1e9,
            "power_cal": cal.max_abs_power_error_db,
            "freq_cal": cal.max_abs_freq_error_hz / 1e9}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vt-mv", type=float, nargs="+",
                    default=[DEFAULT_CONFIG.bounds.vt_bound_v * 1e3])
    ap.add_argument("--ic-pct", type=float, nargs="+",
                    default=[DEFAULT_CONFIG.bounds.ic_bound_rel * 100])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--dump", action="store_true", help="print the best config file")
    args = ap.parse_args()

    best = None
    for vt_mv, ic_pct in itertools.product(args.vt_mv, args.ic_pct):
        bounds = dataclasses.replace(DEFAULT_CONFIG.bounds, vt_bound_v=vt_mv * 1e-3,
                                     ic_bound_rel=ic_pct / 100, c1_bound_rel=ic_pct / 100)
        cfg = dataclasses.replace(DEFAULT_CONFIG, bounds=bounds)
        env = evaluate(cfg, args.n, args.seed)
        ok = all(lo <= env[k] <= hi for k, (lo, hi) in TARGETS.items())
        print(f"vt={vt_mv:5.2f} mV ic/c1={ic_pct:5.2f} %  "
              + "  ".join(f"{k}={v:.4f}" for k, v in env.items()) + ("  OK" if ok else ""))
        if ok and best is None:
            best = cfg
    if args.dump and best is not None:
        print(serialize_config(best), end="")


if __name__ == "__main__":
    main()
