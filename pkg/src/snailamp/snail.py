"""SNAIL potential, its tracked minimum and Taylor coefficients.

The element is a loop of ``n_large`` identical large junctions (inductance
``L_J`` each) shunted by one small junction of inductance ``L_J/alpha``.
Energies are expressed in units of the large-junction Josephson energy E_J,
phases in radians, and ``phi_ext = 2*pi*Phi/Phi0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .constants import PHI0_REDUCED
from .errors import DivergentInductance, HystereticBranchLost, NoMinimumBracketed

MAX_ORDER = 6
_NEWTON_TOL = 1e-15
SCAN_POINTS = 1000
_CONT_STEP = 0.2
_MIN_STEP = 1e-7


@dataclass(frozen=True)
class SnailParams:
    alpha: float
    phi_ext: float = 0.0
    L_J: float | None = None
    n_large: int = 3

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_large < 1:
            raise ValueError("n_large must be >= 1")
        if self.L_J is not None and self.L_J <= 0:
            raise ValueError("L_J must be positive")

    @property
    def hysteretic(self) -> bool:
        return self.alpha > 1.0 / self.n_large

    @property
    def E_J(self) -> float:
        if self.L_J is None:
            raise ValueError("E_J needs L_J")
        return PHI0_REDUCED**2 / self.L_J

    def at_flux(self, phi_ext: float) -> "SnailParams":
        return SnailParams(self.alpha, phi_ext, self.L_J, self.n_large)


@dataclass(frozen=True)
class SnailCoefficients:
    """Taylor coefficients ``c[n] = (1/E_J) d^n U / d phi^n`` at ``phi_min``.

    ``c`` is indexed so that ``c[n]`` is the n-th coefficient; ``c[0]`` holds
    the potential value at the minimum.
    """

    phi_min: float
    c: np.ndarray = field(repr=False)
    phi_ext: float

    def __getitem__(self, n):
        return self.c[n]


def _cos_shifted(x, n):
    # cos(x + n*pi/2) without rounding the shifted argument
    return (np.cos(x), -np.sin(x), -np.cos(x), np.sin(x))[n % 4]


def potential_derivative(phi_s, params: SnailParams, n: int = 0):
    """n-th derivative of the dimensionless potential; ``n=0`` is the potential."""
    N = params.n_large
    phi_s = np.asarray(phi_s, dtype=float)
    u = (phi_s - params.phi_ext) / N
    return -params.alpha * _cos_shifted(phi_s, n) - N ** (1 - n) * _cos_shifted(u, n)


def snail_potential(phi_s, params: SnailParams):
    """U_SNAIL / E_J = -alpha cos(phi_s) - N cos((phi_ext - phi_s)/N)."""
    return potential_derivative(phi_s, params, 0)


def _newton(params: SnailParams, phi: float, max_iter: int = 300) -> float | None:
    """Refine a stationary point with c2 > 0; returns None when it fails."""
    for _ in range(max_iter):
        c1 = float(potential_derivative(phi, params, 1))
        c2 = float(potential_derivative(phi, params, 2))
        if c2 > 0:
            step = -c1 / c2
            step = float(np.clip(step, -0.5, 0.5))
        else:
            step = -0.1 * np.sign(c1)
        phi += step
        if abs(step) < _NEWTON_TOL * max(1.0, abs(phi)):
            break
    c1 = float(potential_derivative(phi, params, 1))
    c2 = float(potential_derivative(phi, params, 2))
    if abs(c1) > 1e-13 or c2 < -1e-12:
        return None
    return phi


def grid_minimum(params: SnailParams, n_points: int = SCAN_POINTS) -> float:
    """Lowest local minimum found by a grid scan over one period, Newton refined."""
    N = params.n_large
    grid = np.linspace(-N * np.pi, N * np.pi, n_points) + params.phi_ext / N
    d1 = potential_derivative(grid, params, 1)
    idx = np.nonzero((d1[:-1] <= 0) & (d1[1:] > 0))[0]
    if idx.size == 0:
        raise NoMinimumBracketed(f"no sign change of c1 on the scan grid (alpha={params.alpha})")
    best = None
    for i in idx:
        lo, hi = grid[i], grid[i + 1]
        guess = lo - d1[i] * (hi - lo) / (d1[i + 1] - d1[i])
        phi = _newton(params, guess)
        if phi is None:
            continue
        energy = float(snail_potential(phi, params))
        if best is None or energy < best[1]:
            best = (phi, energy)
    if best is None:
        raise NoMinimumBracketed("grid scan brackets found but Newton refinement failed")
    return best[0]


@lru_cache(maxsize=4096)
def _continued_minimum(alpha: float, n_large: int, phi_ext: float) -> float:
    base = SnailParams(alpha, 0.0, None, n_large)
    phi = grid_minimum(base)
    flux = 0.0
    step = _CONT_STEP
    direction = np.sign(phi_ext)
    while flux != phi_ext:
        trial_flux = flux + direction * min(step, abs(phi_ext - flux))
        p = base.at_flux(trial_flux)
        # predictor from the implicit-function derivative of c1 = 0
        u = (phi - flux) / n_large
        c2 = float(potential_derivative(phi, base.at_flux(flux), 2))
        slope = np.cos(u) / (n_large * c2) if c2 > 0 else 0.0
        guess = phi + slope * (trial_flux - flux)
        new = _newton(p, guess)
        if new is None or abs(new - phi) > np.pi:
            step /= 2
            if step < _MIN_STEP:
                raise HystereticBranchLost(
                    f"minimum branch ends near phi_ext={flux:.6g} (alpha={alpha})"
                )
            continue
        phi, flux = new, trial_flux
        step = min(2 * step, _CONT_STEP)
    return phi


def _symmetry_center(params: SnailParams) -> float | None:
    # at phi_ext = m*pi the potential is even about phi_s = m*pi
    m = np.round(params.phi_ext / np.pi)
    if abs(params.phi_ext - m * np.pi) > 1e-12 * max(1.0, abs(params.phi_ext)):
        return None
    return float(m * np.pi)


def _snap_symmetric(params: SnailParams, phi: float) -> float:
    sym = _symmetry_center(params)
    if sym is None:
        return phi
    if abs(phi - sym) < 1e-3 and float(potential_derivative(sym, params, 2)) >= -1e-12:
        return float(sym)
    return phi


def find_minimum(params: SnailParams, previous: float | None = None) -> float:
    """Location of the tracked potential minimum.

    Without ``previous`` the minimum is followed in flux from the symmetric
    point ``phi_ext = 0``, so the returned branch is the one continuously
    connected to ``phi_min(0) = 0``. With ``previous`` (a minimum at a nearby
    flux) a single Newton refinement is done from that seed.
    """
    if previous is None:
        phi = _continued_minimum(float(params.alpha), int(params.n_large), float(params.phi_ext))
        return _snap_symmetric(params, phi)
    phi = _newton(params, float(previous))
    if phi is None or abs(phi - previous) > np.pi:
        raise HystereticBranchLost(
            f"continuation from {previous:.6g} lost the branch at phi_ext={params.phi_ext:.6g}"
        )
    return _snap_symmetric(params, phi)


def taylor_coefficients(
    params: SnailParams, max_order: int = MAX_ORDER, previous: float | None = None
) -> SnailCoefficients:
    if not 2 <= max_order <= MAX_ORDER:
        raise ValueError(f"max_order must be in [2, {MAX_ORDER}]")
    phi_min = find_minimum(params, previous)
    c = np.array([float(potential_derivative(phi_min, params, n)) for n in range(max_order + 1)])
    if phi_min == _symmetry_center(params):
        c[1::2] = 0.0  # even potential: odd derivatives vanish, not just to rounding
    return SnailCoefficients(phi_min=phi_min, c=c, phi_ext=params.phi_ext)


def snail_inductance(params: SnailParams, coeffs: SnailCoefficients | None = None) -> float:
    """Linear inductance L_J / c2 of one SNAIL at its flux bias."""
    if params.L_J is None:
        raise ValueError("snail_inductance needs L_J")
    if coeffs is None:
        coeffs = taylor_coefficients(params, 2)
    c2 = coeffs[2]
    if c2 <= 1e-12:
        raise DivergentInductance(
            f"c2={c2:.3g} at phi_ext={params.phi_ext:.6g}: SNAIL inductance diverges"
        )
    return params.L_J / c2
