"""Physical constants in SI units."""

import numpy as np
from scipy import constants as _c

HBAR = _c.hbar
E_CHARGE = _c.e
PHI0_REDUCED = HBAR / (2 * E_CHARGE)  # reduced flux quantum, Wb/rad
R_Q = HBAR / (2 * E_CHARGE) ** 2  # resistance quantum hbar/(2e)^2
TWO_PI = 2 * _c.pi


def dbm_to_watts(p_dbm):
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watts_to_dbm(p_w):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(p_w, dtype=float) / 1e-3)
