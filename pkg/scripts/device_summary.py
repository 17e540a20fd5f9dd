"""Print flux-swept ranges of the mode parameters and P1dB for bundled devices.

Usage: python scripts/device_summary.py [A B ...] [--g3-scale 2.0]
"""

from __future__ import annotations

import argparse
import math
from dataclasses import replace

import numpy as np

from snailamp.circuit import flux_sweep, kerr_free_flux, mode_parameters
from snailamp.errors import SnailampError
from snailamp.experiments import p1db
from snailamp.hb import calibrate_pump
from snailamp.io import builtin_devices, load_device

TWO_PI = 2 * math.pi


def summarize(name: str, g3_scale: float) -> None:
    spec, _ = load_device(name)
    spec = replace(spec, g3_scale=g3_scale)
    modes = [m for m in flux_sweep(spec, np.linspace(0, 0.5, 51)) if m.ok]
    wa = [m.omega_a / TWO_PI / 1e9 for m in modes]
    g3 = [abs(m.g3) / TWO_PI / 1e6 for m in modes]
    g4 = [abs(m.g4) / TWO_PI / 1e3 for m in modes]
    try:
        kf = f"{kerr_free_flux(spec):.4f}"
    except SnailampError:
        kf = "none"
    p1 = []
    for f in np.arange(0.05, 0.451, 0.05):
        try:
            p1.append(p1db(calibrate_pump(mode_parameters(spec, float(f)), 100.0)).p_1db_dbm)
        except SnailampError:
            pass
    p1s = f"{min(p1):7.1f} .. {max(p1):6.1f}" if p1 else "n/a"
    print(f"{name:>3} | {min(wa):5.2f} .. {max(wa):5.2f} GHz | |g3| <= {max(g3):6.2f} MHz"
          f" | |g4| {min(g4):7.2f} .. {max(g4):7.2f} kHz | K=0 at {kf:>6} | P1dB {p1s} dBm")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("devices", nargs="*", default=None)
    ap.add_argument("--g3-scale", type=float, default=1.0)
    args = ap.parse_args()
    for name in args.devices or builtin_devices():
        summarize(name, args.g3_scale)


if __name__ == "__main__":
    main()
