"""Compare order-1 and order-2 P1dB across the Kerr-free flux of a device.

Usage: python scripts/kerr_free_study.py [DEVICE] [--half-width 0.05] [--points 11]
"""

from __future__ import annotations

import argparse

import numpy as np

from snailamp.circuit import kerr_free_flux, mode_parameters
from snailamp.errors import SnailampError
from snailamp.experiments import p1db
from snailamp.hb import calibrate_pump
from snailamp.io import load_device


def _p1db(mode, order):
    try:
        return f"{p1db(calibrate_pump(mode, 100.0, order=order)).p_1db_dbm:8.2f}"
    except SnailampError as err:
        return f"{type(err).__name__:>8}"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("device", nargs="?", default="C")
    ap.add_argument("--half-width", type=float, default=0.05)
    ap.add_argument("--points", type=int, default=11)
    args = ap.parse_args()
    spec, _ = load_device(args.device)
    root = kerr_free_flux(spec)
    print(f"device {args.device}: K = 0 at flux {root:.4f}")
    print("   flux   K/2pi kHz  g4/2pi kHz  P1dB o1  P1dB o2")
    for f in np.linspace(root - args.half_width, root + args.half_width, args.points):
        m = mode_parameters(spec, float(f))
        print(f"{f:7.4f} {m.K / 2 / np.pi / 1e3:10.3f} {m.g4 / 2 / np.pi / 1e3:11.3f}"
              f" {_p1db(m, 1)} {_p1db(m, 2)}")


if __name__ == "__main__":
    main()
