"""Semiclassical harmonic balance for a pumped three-wave-mixing mode.

The steady state keeps the pump, signal and idler tones (order 1). Order 2
adds the g3^2/omega_c Stark corrections that come from eliminating the next
set of off-resonant harmonics. The equations are solved by Newton's method on
the real and imaginary parts of the complex amplitudes, with drive
continuation from the undriven state.

Sign convention: each tone obeys ``L_k alpha_k = u_k + coupling_k`` with
``L_k = omega_k - omega_a + i d_k - sum_j C_kj |alpha_j|^2`` (plus order-2 terms).
Output field ``u_out = u_in - i kappa alpha`` so that power gain is
``|1 - i kappa alpha_s / u_s|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import ModeParameters
from .constants import HBAR, dbm_to_watts, watts_to_dbm
from .errors import (
    AboveInstability,
    NonConvergence,
    SingularDenominator,
    TargetUnreachable,
)

P, S, I = 0, 1, 2

# Kerr brackets, rows (pump, signal, idler), columns (|a_p|^2, |a_s|^2, |a_i|^2)
G4_BRACKET = np.array([[32 / 9, 16.0, 16.0], [32 / 3, 12.0, 12.0], [32 / 3, 12.0, 12.0]])
G3SQ_BRACKET = np.array([[928 / 45, 42.0, 42.0], [28.0, 60.0, 144.0], [28.0, 144.0, 60.0]])
PUMP_DAMPING = 2.0 / 3.0
SIGNAL_DAMPING = 0.5

PROBE_DBM = -170.0
PROBE_OFFSET = 2 * math.pi * 1.0  # 1 Hz
INITIAL_STEP = 0.25  # continuation step in the ramp parameter


@dataclass(frozen=True)
class HBSettings:
    tol: float = 1e-10
    max_newton: int = 100
    max_steps: int = 50
    min_step: float = 1e-6
    gain_tol_db: float = 0.001
    max_bisect: int = 200


DEFAULT_SETTINGS = HBSettings()


@dataclass(frozen=True)
class DriveSet:
    omega_p: float
    omega_s: float
    u_p: complex = 0j
    u_s: complex = 0j
    u_i: complex = 0j

    def __post_init__(self):
        if self.omega_p <= 0 or self.omega_s <= 0 or self.omega_p - self.omega_s <= 0:
            raise ValueError("need omega_p > 0, omega_s > 0 and omega_i = omega_p - omega_s > 0")

    @property
    def omega_i(self) -> float:
        return self.omega_p - self.omega_s

    @property
    def u(self) -> np.ndarray:
        return np.array([self.u_p, self.u_s, self.u_i], dtype=complex)

    def with_drives(self, u) -> "DriveSet":
        return replace(self, u_p=complex(u[0]), u_s=complex(u[1]), u_i=complex(u[2]))


@dataclass
class HBSolution:
    alpha_p: complex
    alpha_s: complex
    alpha_i: complex
    order: int
    residual_norm: float
    delta_eff: float
    g_eff: complex
    converged: bool
    drives: DriveSet
    delta_eff_idler: float = float("nan")
    steps: int = 0
    omega_c: float = float("nan")
    cascade_scale: float = 1.0
    stiff_pump: bool = False

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([self.alpha_p, self.alpha_s, self.alpha_i])


@dataclass
class OperatingPoint:
    mode: ModeParameters
    omega_p: float
    u_p: complex
    G0: float
    pump_power_dbm: float
    delta: float = 0.0
    order: int = 1
    omega_c: float | None = None
    cascade_scale: float = 1.0
    pump_solution: HBSolution | None = None
    meta: dict = field(default_factory=dict)

    @property
    def G0_db(self) -> float:
        return 10 * math.log10(self.G0)


# -- power/drive conversion -------------------------------------------------


def power_from_drive(u, omega: float, mode: ModeParameters) -> float:
    return HBAR * mode.omega_a / mode.kappa * abs(u) ** 2 * (mode.omega_a / omega) ** 2


def drive_from_power(P_w: float, omega: float, mode: ModeParameters) -> float:
    if P_w < 0:
        raise ValueError("power must be >= 0")
    return math.sqrt(P_w * mode.kappa / (HBAR * mode.omega_a)) * (omega / mode.omega_a)


# -- generic Newton core ----------------------------------------------------


@dataclass
class KerrSystem:
    """``F_k = L_k a_k - u_k - sum(coef * a_m * (a_n or conj a_n))`` for tones k.

    ``L_k = L0_k - sum_j C_kj |a_j|^2``; ``couplings`` holds tuples
    ``(k, coef, m, n, conj_n)``. Indices in ``fixed`` are held constant.
    """

    L0: np.ndarray
    C: np.ndarray
    u: np.ndarray
    couplings: list
    fixed: tuple = ()

    def coupling_terms(self, z):
        out = np.zeros_like(z)
        for k, coef, m, n, conj_n in self.couplings:
            out[k] += coef * z[m] * (np.conj(z[n]) if conj_n else z[n])
        return out

    def residual(self, z):
        N = np.abs(z) ** 2
        L = self.L0 - self.C @ N
        lin = L * z
        coup = self.coupling_terms(z)
        F = lin - self.u - coup
        scale = np.maximum.reduce([np.abs(self.u), np.abs(lin), np.abs(coup)])
        return F, scale

    def jacobian(self, z):
        n = len(z)
        N = np.abs(z) ** 2
        L = self.L0 - self.C @ N
        A = np.diag(L).astype(complex) - self.C * np.outer(z, np.conj(z))
        B = -self.C * np.outer(z, z)
        for k, coef, m, nn, conj_n in self.couplings:
            if conj_n:
                A[k, m] -= coef * np.conj(z[nn])
                B[k, nn] -= coef * z[m]
            else:
                A[k, m] -= coef * z[nn]
                A[k, nn] -= coef * z[m]
        return A, B

    def free(self):
        return [k for k in range(len(self.L0)) if k not in self.fixed]


def _error_norm(F, scale, free):
    F, scale = np.abs(F[free]), scale[free]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(F == 0, 0.0, F / np.where(scale > 0, scale, np.inf))
    return float(np.max(r)) if r.size else 0.0


def newton(system: KerrSystem, z0, settings: HBSettings = DEFAULT_SETTINGS):
    """Damped Newton; returns (z, error, iterations, converged)."""
    z = np.array(z0, dtype=complex)
    free = system.free()
    nf = len(free)
    F, scale = system.residual(z)
    err = _error_norm(F, scale, free)
    it = 0
    while err >= settings.tol and it < settings.max_newton:
        it += 1
        A, B = system.jacobian(z)
        A, B = A[np.ix_(free, free)], B[np.ix_(free, free)]
        J = np.block([[(A + B).real, (1j * (A - B)).real], [(A + B).imag, (1j * (A - B)).imag]])
        # row scaling keeps the tiny-signal rows from being swamped by the pump rows
        rs = np.where(scale[free] > 0, scale[free], 1.0)
        rs = np.concatenate([rs, rs])
        rhs = -np.concatenate([F[free].real, F[free].imag]) / rs
        try:
            dx = np.linalg.solve(J / rs[:, None], rhs)
        except np.linalg.LinAlgError:
            break
        dz = dx[:nf] + 1j * dx[nf:]
        t = 1.0
        for _ in range(30):
            trial = z.copy()
            trial[free] += t * dz
            Ft, st = system.residual(trial)
            et = _error_norm(Ft, st, free)
            if et < err or et < settings.tol:
                break
            t *= 0.5
        else:
            break
        z, F, scale, err = trial, Ft, st, et
    return z, err, it, err < settings.tol


def continuation(make_system, z_start, settings: HBSettings = DEFAULT_SETTINGS,
                 stage: str = "drive"):
    """Follow the solution of ``make_system(lam)`` from lam=0 (solved by z_start) to 1.

    Steps double on success and halve on failure; raises NonConvergence after
    ``max_steps`` attempts or when the step falls below ``min_step``.
    """
    z = np.array(z_start, dtype=complex)
    lam, h, attempts = 0.0, INITIAL_STEP, 0
    last_err = float("nan")
    while lam < 1.0:
        if attempts >= settings.max_steps:
            raise NonConvergence(f"{stage} continuation exceeded {settings.max_steps} steps",
                                 residual=last_err, steps=attempts)
        attempts += 1
        trial = min(1.0, lam + h)
        z_new, err, _, ok = newton(make_system(trial), z, settings)
        last_err = err
        if ok:
            z, lam = z_new, trial
            h = min(2 * h, 1.0)
        else:
            h *= 0.5
            if h < settings.min_step:
                raise NonConvergence(f"{stage} continuation stalled at lambda={lam:.6g}",
                                     residual=err, steps=attempts)
    return z, last_err if attempts else 0.0, attempts


# -- three-tone system ------------------------------------------------------


def kerr_matrix(mode: ModeParameters, order: int, omega_c: float | None = None,
                cascade_scale: float = 1.0) -> np.ndarray:
    C = mode.g4 * G4_BRACKET
    if order == 2:
        wc = mode.omega_a if omega_c is None else omega_c
        C = C - cascade_scale * mode.g3**2 / wc * G3SQ_BRACKET
    elif order != 1:
        raise ValueError("order must be 1 or 2")
    return C


def _system(mode, drives: DriveSet, u, C, stiff_pump=False) -> KerrSystem:
    w = np.array([drives.omega_p, drives.omega_s, drives.omega_i])
    d = np.array([PUMP_DAMPING, SIGNAL_DAMPING, SIGNAL_DAMPING]) * mode.kappa
    g3 = mode.g3
    couplings = [
        (P, 6 * g3, I, S, False),
        (S, 4 * g3, P, I, True),
        (I, 4 * g3, P, S, True),
    ]
    return KerrSystem(w - mode.omega_a + 1j * d, C, np.asarray(u, dtype=complex), couplings,
                      fixed=(P,) if stiff_pump else ())


def _effective(mode, drives, z, C):
    N = np.abs(z) ** 2
    delta = mode.omega_a - drives.omega_p / 2
    shifts = C @ N
    return delta + shifts[S], delta + shifts[I], 2 * mode.g3 * z[P]


def instability_margin(delta_s: float, delta_i: float, g_eff, kappa: float) -> float:
    """Real part of the omega=0 susceptibility determinant; <= 0 means parametric oscillation."""
    return delta_s * delta_i + kappa**2 / 4 - 4 * abs(g_eff) ** 2


def hb_solve(
    mode: ModeParameters,
    drives: DriveSet,
    order: int = 1,
    *,
    omega_c: float | None = None,
    cascade_scale: float = 1.0,
    warm_start: HBSolution | None = None,
    stiff_pump: complex | None = None,
    settings: HBSettings = DEFAULT_SETTINGS,
) -> HBSolution:
    """Steady-state amplitudes (alpha_p, alpha_s, alpha_i).

    Without ``warm_start`` the pump is ramped from zero with the signal off,
    the parametric-instability margin is checked, and then the signal and idler
    drives are ramped in. With ``warm_start`` a single ramp runs from the
    previous solution's drives to ``drives``. ``stiff_pump`` fixes alpha_p.
    """
    C = kerr_matrix(mode, order, omega_c, cascade_scale)
    u_target = drives.u
    stiff = stiff_pump is not None
    total_steps = 0

    def check_margin(z):
        ds, di, g = _effective(mode, drives, z, C)
        if instability_margin(ds, di, g, mode.kappa) <= 0:
            raise AboveInstability(
                f"pump drive |u_p|={abs(drives.u_p):.4g} is above the parametric instability "
                f"(|g_eff|/kappa={abs(g) / mode.kappa:.4g})"
            )

    if warm_start is not None:
        z = warm_start.amplitudes.copy()
        u_from = warm_start.drives.u
        if stiff:
            z[P] = stiff_pump
    else:
        z = np.zeros(3, dtype=complex)
        if stiff:
            z[P] = stiff_pump
        else:
            pump_only = np.array([u_target[P], 0, 0])
            z, _, n = continuation(
                lambda lam: _system(mode, drives, lam * pump_only, C), z, settings, "pump"
            )
            total_steps += n
        check_margin(z)
        u_from = np.array([u_target[P], 0, 0], dtype=complex)

    def make(lam):
        return _system(mode, drives, u_from + lam * (u_target - u_from), C, stiff)

    z, _, n = continuation(make, z, settings, "signal")
    total_steps += n
    F, scale = make(1.0).residual(z)
    free = make(1.0).free()
    err = _error_norm(F, scale, free)
    ds, di, g = _effective(mode, drives, z, C)
    return HBSolution(
        alpha_p=complex(z[P]), alpha_s=complex(z[S]), alpha_i=complex(z[I]), order=order,
        residual_norm=err, delta_eff=float(ds), g_eff=complex(g), converged=err < settings.tol,
        drives=drives, delta_eff_idler=float(di), steps=total_steps,
        omega_c=mode.omega_a if omega_c is None else omega_c, cascade_scale=cascade_scale,
        stiff_pump=stiff,
    )


# -- linear response and gain -----------------------------------------------


def linear_response(mode: ModeParameters, alpha_p: complex, u_s: complex, u_i: complex,
                    omega: float, delta: float = 0.0):
    """(alpha_s, conj(alpha_i)) for a fixed pump amplitude.

    Uses ``Delta_eff = delta + (32/3) g4 |alpha_p|^2``.
    """
    kappa = mode.kappa
    d_eff = delta + G4_BRACKET[S, P] * mode.g4 * abs(alpha_p) ** 2
    g = 2 * mode.g3 * alpha_p
    a = omega - d_eff + 0.5j * kappa
    b = -omega - d_eff - 0.5j * kappa
    det = a * b - 4 * abs(g) ** 2
    if abs(det) < 1e-15 * kappa**2:
        raise SingularDenominator("susceptibility denominator vanishes (parametric threshold)")
    ui_c = np.conj(u_i)
    return (b * u_s + 2 * g * ui_c) / det, (a * ui_c + 2 * np.conj(g) * u_s) / det


def gain_formula(delta_eff, g_eff, kappa, omega):
    """Closed-form phase-preserving power gain for equal signal/idler detuning."""
    den = (delta_eff**2 - omega**2 + kappa**2 / 4 - 4 * np.abs(g_eff) ** 2) ** 2 + (kappa * omega) ** 2
    return 1 + 4 * kappa**2 * np.abs(g_eff) ** 2 / den


def _gain_general(delta_s, delta_i, g_eff, kappa, omega):
    a = omega - delta_s + 0.5j * kappa
    b = -omega - delta_i - 0.5j * kappa
    return np.abs(1 - 1j * kappa * b / (a * b - 4 * np.abs(g_eff) ** 2)) ** 2


def gain(mode: ModeParameters, sol: HBSolution, omega: float | np.ndarray):
    """Small-signal power gain at signal offset ``omega`` about the solved state.

    Signal and idler detunings are taken separately (they differ only at
    order 2 with unequal signal/idler populations); with equal detunings this is
    the closed form of :func:`gain_formula`.
    """
    ds = sol.delta_eff
    di = sol.delta_eff_idler if math.isfinite(sol.delta_eff_idler) else ds
    if ds == di:
        return gain_formula(ds, sol.g_eff, mode.kappa, omega)
    return _gain_general(ds, di, sol.g_eff, mode.kappa, omega)


def reflection_gain(mode: ModeParameters, sol: HBSolution) -> float:
    """Power gain read off the solved signal amplitude, |1 - i kappa alpha_s / u_s|^2."""
    if sol.drives.u_s == 0:
        raise ValueError("reflection gain needs a signal drive")
    return float(abs(1 - 1j * mode.kappa * sol.alpha_s / sol.drives.u_s) ** 2)


# -- pump calibration -------------------------------------------------------


def _probe_drives(mode, omega_p, u_p, probe_dbm=PROBE_DBM, offset=PROBE_OFFSET):
    omega_s = omega_p / 2 + offset
    u_s = drive_from_power(dbm_to_watts(probe_dbm), omega_s, mode)
    return DriveSet(omega_p=omega_p, omega_s=omega_s, u_p=u_p, u_s=u_s)


def small_signal_gain(mode, omega_p, u_p, order=1, omega_c=None, cascade_scale=1.0,
                      settings=DEFAULT_SETTINGS):
    drives = _probe_drives(mode, omega_p, u_p)
    sol = hb_solve(mode, drives, order, omega_c=omega_c, cascade_scale=cascade_scale,
                   settings=settings)
    return float(gain(mode, sol, PROBE_OFFSET)), sol


def threshold_pump_estimate(mode: ModeParameters, omega_p: float) -> float:
    """|u_p| giving |g_eff| = kappa/4 when Stark shifts are ignored."""
    alpha_th = mode.kappa / (8 * abs(mode.g3))
    return abs(omega_p - mode.omega_a + 1j * PUMP_DAMPING * mode.kappa) * alpha_th


def _calibrate_fixed_delta(mode, target_G0, order, delta, omega_c, cascade_scale, settings):
    omega_p = 2 * (mode.omega_a - delta)
    target_db = 10 * math.log10(target_G0)

    def evaluate(u):
        try:
            G, sol = small_signal_gain(mode, omega_p, u, order, omega_c, cascade_scale, settings)
            return 10 * math.log10(G), sol
        except AboveInstability:
            return math.inf, None

    lo = 1e-3 * threshold_pump_estimate(mode, omega_p)
    g_lo, _ = evaluate(lo)
    if g_lo >= target_db:
        raise TargetUnreachable("target gain is below the gain at negligible pump")
    hi, prev = lo, g_lo
    while True:
        hi *= 2
        g_hi, _ = evaluate(hi)
        if g_hi >= target_db:
            break
        if g_hi < prev or hi > 1e6 * lo:
            raise TargetUnreachable(
                f"gain peaks at {max(prev, g_hi):.2f} dB below the {target_db:.2f} dB target"
            )
        lo, prev = hi, g_hi
    best = None
    for _ in range(settings.max_bisect):
        mid = math.sqrt(lo * hi)
        g_mid, sol = evaluate(mid)
        if sol is not None and abs(g_mid - target_db) < settings.gain_tol_db:
            best = (mid, g_mid, sol)
            break
        if g_mid < target_db:
            lo = mid
        else:
            hi = mid
    if best is None:
        raise TargetUnreachable(f"pump bisection did not reach {target_db:.2f} dB")
    return omega_p, best


def calibrate_pump(
    mode: ModeParameters,
    target_G0: float,
    order: int = 1,
    *,
    delta: float = 0.0,
    cancel_stark: bool = False,
    omega_c: float | None = None,
    cascade_scale: float = 1.0,
    settings: HBSettings = DEFAULT_SETTINGS,
) -> OperatingPoint:
    """Pump drive that gives small-signal gain ``target_G0``.

    The pump sits at ``omega_p = 2 (omega_a - delta)``. With ``cancel_stark``
    the detuning is iterated to ``delta - Delta_eff`` until the pump-induced
    Stark shift is compensated, so that Delta_eff is ~0 at the operating point.
    """
    if target_G0 < 1:
        raise ValueError("target_G0 must be >= 1")
    if target_G0 == 1:
        omega_p = 2 * (mode.omega_a - delta)
        return OperatingPoint(mode, omega_p, 0j, 1.0, -math.inf, delta, order, omega_c,
                              cascade_scale, None)
    iterations = 0
    for iterations in range(1, 31):
        omega_p, (u_p, g_db, sol) = _calibrate_fixed_delta(
            mode, target_G0, order, delta, omega_c, cascade_scale, settings
        )
        if not cancel_stark or abs(sol.delta_eff) < 1e-6 * mode.kappa:
            break
        delta -= sol.delta_eff
    p_w = power_from_drive(u_p, omega_p, mode)
    return OperatingPoint(
        mode=mode, omega_p=omega_p, u_p=complex(u_p), G0=10 ** (g_db / 10),
        pump_power_dbm=float(watts_to_dbm(p_w)), delta=delta, order=order, omega_c=omega_c,
        cascade_scale=cascade_scale, pump_solution=sol,
        meta={"stark_cancel_iterations": iterations if cancel_stark else 0},
    )


# -- gain profile -----------------------------------------------------------


def half_power_width(delta_eff: float, g_eff, kappa: float) -> float:
    """Full width of the band where gain exceeds half its omega=0 value.

    Solves the quadratic in omega^2 obtained from the closed-form gain.
    """
    g2 = abs(g_eff) ** 2
    G0 = gain_formula(delta_eff, g_eff, kappa, 0.0)
    if G0 <= 2:
        return math.inf
    A = delta_eff**2 + kappa**2 / 4 - 4 * g2
    R = 4 * kappa**2 * g2 / (G0 / 2 - 1)
    b = kappa**2 - 2 * A
    disc = b * b - 4 * (A * A - R)
    s = (-b + math.sqrt(disc)) / 2
    return 2 * math.sqrt(s)


def gain_profile(op: OperatingPoint, omegas):
    """(omegas, G, full 3-dB width) at the calibrated pump, small-signal."""
    omegas = np.asarray(omegas, dtype=float)
    sol = op.pump_solution
    G = np.array([gain(op.mode, sol, w) for w in omegas], dtype=float)
    return omegas, G, half_power_width(sol.delta_eff, sol.g_eff, op.mode.kappa)
