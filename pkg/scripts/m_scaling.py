"""Peak |g4| and |K| against the number of SNAILs M.

By default L_J and the zero-flux mode frequency are held fixed, with omega_0
retuned for each M. ``--fixed-array`` instead holds the total array inductance
M L_J fixed.

Usage: python scripts/m_scaling.py [DEVICE] [--M 10 20 40 80] [--fixed-array]
"""

from __future__ import annotations

import argparse
from dataclasses import replace

import numpy as np
from scipy.optimize import brentq

from snailamp.circuit import flux_sweep, mode_parameters
from snailamp.io import load_device


def retuned(base, M):
    """Copy of ``base`` with M SNAILs and omega_0 chosen to keep omega_a(0)."""
    target = mode_parameters(base, 0.0).omega_a

    def miss(w0):
        return mode_parameters(replace(base, M=M, omega_0=w0), 0.0).omega_a - target

    return replace(base, M=M, omega_0=brentq(miss, 0.1 * base.omega_0, 20 * base.omega_0))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("device", nargs="?", default="C")
    ap.add_argument("--M", type=int, nargs="+", default=[10, 20, 40, 80])
    ap.add_argument("--fixed-array", action="store_true")
    args = ap.parse_args()
    base, _ = load_device(args.device)
    grid = np.linspace(0.01, 0.49, 49)
    print("   M  omega0 GHz  wa max GHz  max|g4| kHz  max|K| kHz")
    for M in args.M:
        if args.fixed_array:
            spec = replace(base, M=M, L_J=base.L_J * base.M / M)
        else:
            spec = retuned(base, M)
        modes = [m for m in flux_sweep(spec, grid) if m.ok]
        wa = max(m.omega_a for m in modes) / 2 / np.pi / 1e9
        g4 = max(abs(m.g4) for m in modes) / 2 / np.pi / 1e3
        K = max(abs(m.K) for m in modes) / 2 / np.pi / 1e3
        print(f"{M:4d} {spec.omega_0 / 2 / np.pi / 1e9:11.3f} {wa:11.3f} {g4:12.3f} {K:11.3f}")


if __name__ == "__main__":
    main()
