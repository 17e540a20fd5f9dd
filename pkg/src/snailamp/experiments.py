"""Virtual measurements on a calibrated amplifier.

Gain compression (P-1dB), two-tone intermodulation (IIP3), Stark-shift
spectroscopy with a detuned drive, and a pQ validity report.
Powers are input-referred at the device port, in dBm.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .circuit import ModeParameters
from .constants import HBAR, dbm_to_watts, watts_to_dbm
from .errors import (
    BistableBranch,
    FitWindowTooSmall,
    NoCompressionBelowCeiling,
    NonConvergence,
)
from .hb import (
    DEFAULT_SETTINGS,
    PROBE_OFFSET,
    PUMP_DAMPING,
    SIGNAL_DAMPING,
    DriveSet,
    HBSettings,
    KerrSystem,
    OperatingPoint,
    calibrate_pump,
    continuation,
    drive_from_power,
    gain_formula,
    hb_solve,
    reflection_gain,
)

START_DBM = -170.0
STEP_DB = 0.5
CEILING_DBM = -80.0
IIP3_WINDOW_DB = 0.1
IIP3_MIN_POINTS = 5
KERR_FREE_GUARD = 1e-12  # |g4|/kappa below this counts as Kerr-free


@dataclass
class CompressionResult:
    p_1db_dbm: float
    method: str
    gain_curve: np.ndarray  # columns: P_in dBm, G dB
    operating_point: OperatingPoint | None = None
    G0_db: float = float("nan")


@dataclass
class Iip3Result:
    iip3_dbm: float
    method: str
    asymptote_slopes: tuple | None = None
    g4_inferred: float = float("nan")
    high_gain_dbm: float = float("nan")
    curves: np.ndarray | None = None  # columns: P_in, P_out main, P_out imd (dBm)


@dataclass
class StarkFit:
    K: float
    K_prime: float
    nbar_grid: np.ndarray
    shifts: np.ndarray
    rms_residual: float = 0.0
    omega_d: float = float("nan")
    bistable: bool = False


# -- compression ------------------------------------------------------------


def _signal_drives(op: OperatingPoint, p_dbm: float) -> DriveSet:
    omega_s = op.omega_p / 2 + PROBE_OFFSET
    u_s = drive_from_power(dbm_to_watts(p_dbm), omega_s, op.mode)
    return DriveSet(omega_p=op.omega_p, omega_s=omega_s, u_p=op.u_p, u_s=u_s)


def _gain_db(op, p_dbm, order, warm, stiff, settings):
    sol = hb_solve(
        op.mode, _signal_drives(op, p_dbm), order, omega_c=op.omega_c,
        cascade_scale=op.cascade_scale, warm_start=warm,
        stiff_pump=op.pump_solution.alpha_p if stiff else None, settings=settings,
    )
    return 10 * math.log10(reflection_gain(op.mode, sol)), sol


def p1db(
    op: OperatingPoint,
    order: int | None = None,
    *,
    stiff_pump: bool = False,
    start_dbm: float = START_DBM,
    step_db: float = STEP_DB,
    ceiling_dbm: float = CEILING_DBM,
    settings: HBSettings = DEFAULT_SETTINGS,
) -> CompressionResult:
    """Input power at which the signal gain has dropped 1 dB below small-signal.

    ``order`` different from the operating point's recalibrates the pump at
    that order first. ``stiff_pump`` freezes the pump amplitude, leaving only
    Stark-shift compression.
    """
    if order is not None and order != op.order:
        op = calibrate_pump(op.mode, op.G0, order, delta=op.delta, omega_c=op.omega_c,
                            cascade_scale=op.cascade_scale, settings=settings)
    order = op.order
    g_ref, warm = _gain_db(op, start_dbm, order, None, stiff_pump, settings)
    target = g_ref - 1.0
    curve = [(start_dbm, g_ref)]
    p_prev, sol_prev = start_dbm, warm
    n_steps = int(round((ceiling_dbm - start_dbm) / step_db))
    for k in range(1, n_steps + 1):
        p = start_dbm + k * step_db
        g, sol = _gain_db(op, p, order, sol_prev, stiff_pump, settings)
        curve.append((p, g))
        if g < target:
            lo, hi, sol_lo = p_prev, p, sol_prev
            while hi - lo > 1e-4:
                mid = 0.5 * (lo + hi)
                gm, sm = _gain_db(op, mid, order, sol_lo, stiff_pump, settings)
                if gm < target:
                    hi = mid
                else:
                    lo, sol_lo = mid, sm
            method = "hb%d" % order + ("_stiff" if stiff_pump else "")
            return CompressionResult(0.5 * (lo + hi), method, np.array(curve), op, g_ref)
        p_prev, sol_prev = p, sol
    raise NoCompressionBelowCeiling(f"gain compressed by less than 1 dB up to {ceiling_dbm} dBm")


def p1db_estimates(op: OperatingPoint):
    """Order-of-magnitude (stark_dbm, pumpdep_dbm) with unit prefactors.

    Stark: (kappa/|g4|) G0^(-5/4) hbar omega_a kappa.
    Pump depletion: (kappa omega_a/g3^2) G0^(-3/2) hbar omega_a kappa.
    A vanishing nonlinearity gives +inf.
    """
    m = op.mode
    unit = HBAR * m.omega_a * m.kappa
    stark = math.inf if m.g4 == 0 else m.kappa / abs(m.g4) * op.G0 ** (-1.25) * unit
    pumpdep = math.inf if m.g3 == 0 else m.kappa * m.omega_a / m.g3**2 * op.G0 ** (-1.5) * unit
    return float(watts_to_dbm(stark)), float(watts_to_dbm(pumpdep))


# -- intermodulation --------------------------------------------------------


def _iip3_watts(mode: ModeParameters, G0: float, high_gain: bool = False) -> float:
    shape = G0 ** (-1.5) if high_gain else (1 / (math.sqrt(G0) + 1)) ** 3
    return mode.kappa / (12 * abs(mode.g4)) * shape * HBAR * mode.omega_a * mode.kappa


def iip3_analytic(mode: ModeParameters, G0: float) -> Iip3Result:
    """IIP3 from the Kerr coefficient, arbitrary-gain form; high-gain form also reported."""
    if abs(mode.g4) <= KERR_FREE_GUARD * mode.kappa:
        return Iip3Result(math.inf, "analytic", None, mode.g4, math.inf)
    return Iip3Result(
        float(watts_to_dbm(_iip3_watts(mode, G0))), "analytic", None, mode.g4,
        float(watts_to_dbm(_iip3_watts(mode, G0, high_gain=True))),
    )


def g4_from_iip3(iip3_dbm: float, mode: ModeParameters, G0: float) -> float:
    """|g4| implied by an IIP3 through the arbitrary-gain relation."""
    P = dbm_to_watts(iip3_dbm)
    return mode.kappa**2 * HBAR * mode.omega_a / (12 * P * (math.sqrt(G0) + 1) ** 3)


# tone order in the two-tone system
_P, _S1, _I1, _S2, _I2 = range(5)


def _two_tone_system(mode, omega_p, omegas, u) -> KerrSystem:
    w = np.array([omega_p, *omegas])
    d = np.array([PUMP_DAMPING] + [SIGNAL_DAMPING] * 4) * mode.kappa
    C = np.empty((5, 5))
    C[0] = [32 / 9, 16, 16, 16, 16]
    C[1:] = [32 / 3, 12, 12, 12, 12]
    C *= mode.g4
    g3 = mode.g3
    couplings = [
        (_P, 6 * g3, _I1, _S1, False),
        (_P, 6 * g3, _I2, _S2, False),
        (_S1, 4 * g3, _P, _I1, True),
        (_I1, 4 * g3, _P, _S1, True),
        (_S2, 4 * g3, _P, _I2, True),
        (_I2, 4 * g3, _P, _S2, True),
    ]
    return KerrSystem(w - mode.omega_a + 1j * d, C, np.asarray(u, dtype=complex), couplings)


def iip3_simulated(
    op: OperatingPoint,
    delta: float = 2 * math.pi * 100e3,
    offset: float = 2 * math.pi * 500e3,
    *,
    start_dbm: float = START_DBM,
    step_db: float = 1.0,
    ceiling_dbm: float = CEILING_DBM,
    settings: HBSettings = DEFAULT_SETTINGS,
) -> Iip3Result:
    """IIP3 from intersecting low-power asymptotes of a two-tone simulation.

    Tones at ``omega_p/2 + offset -+ delta/2`` with equal input power. The
    sideband at ``2 w_s1 - w_s2`` is driven by ``12 g4 a_s1^2 conj(a_s2)`` and
    amplified by the small-signal gain at its frequency. The fit window keeps
    points whose main-tone gain is within 0.1 dB of the lowest-power gain.
    """
    if op.order != 1:
        raise ValueError("two-tone simulation is implemented at order 1")
    m = op.mode
    half = op.omega_p / 2
    w_s = [half + offset - delta / 2, half + offset + delta / 2]
    omegas = [w_s[0], op.omega_p - w_s[0], w_s[1], op.omega_p - w_s[1]]
    w_imd = 2 * w_s[0] - w_s[1]
    z = np.zeros(5, dtype=complex)
    z[_P] = op.pump_solution.alpha_p
    u_prev = np.array([op.u_p, 0, 0, 0, 0], dtype=complex)
    rows = []
    g_ref = None
    n_steps = int(round((ceiling_dbm - start_dbm) / step_db))
    for k in range(n_steps + 1):
        p_dbm = start_dbm + k * step_db
        P_w = dbm_to_watts(p_dbm)
        u = np.array([op.u_p, drive_from_power(P_w, w_s[0], m), 0,
                      drive_from_power(P_w, w_s[1], m), 0], dtype=complex)
        z, _, _ = continuation(
            lambda lam, a=u_prev, b=u: _two_tone_system(m, op.omega_p, omegas, a + lam * (b - a)),
            z, settings, "two-tone",
        )
        u_prev = u
        g_main = abs(1 - 1j * m.kappa * z[_S1] / u[_S1]) ** 2
        g_db = 10 * math.log10(g_main)
        g_ref = g_db if g_ref is None else g_ref
        if g_ref - g_db > IIP3_WINDOW_DB:
            break
        N = np.abs(z) ** 2
        d_eff = (m.omega_a - op.omega_p / 2) + m.g4 * (32 / 3 * N[_P] + 12 * N[1:].sum())
        G_imd = gain_formula(d_eff, 2 * m.g3 * z[_P], m.kappa, w_imd - half)
        u_imd = 12 * m.g4 * z[_S1] ** 2 * np.conj(z[_S2])
        P_imd = G_imd * HBAR * m.omega_a / m.kappa * abs(u_imd) ** 2
        rows.append((p_dbm, p_dbm + g_db, float(watts_to_dbm(P_imd))))
    if abs(m.g4) <= KERR_FREE_GUARD * m.kappa:
        return Iip3Result(math.inf, "asymptote_fit", None, 0.0, math.inf, np.array(rows))
    if len(rows) < IIP3_MIN_POINTS:
        raise FitWindowTooSmall(f"only {len(rows)} points inside the 0.1 dB compression window")
    data = np.array(rows)
    p_in, p_main, p_imd = data.T
    slope_main = np.polyfit(p_in, p_main, 1)[0]
    slope_imd = np.polyfit(p_in, p_imd, 1)[0]
    a1 = np.mean(p_main - p_in)
    a3 = np.mean(p_imd - 3 * p_in)
    iip3 = float((a1 - a3) / 2)
    G0 = 10 ** (g_ref / 10)
    return Iip3Result(iip3, "asymptote_fit", (float(slope_main), float(slope_imd)),
                      g4_from_iip3(iip3, m, G0), math.nan, data)


# -- Stark-shift spectroscopy -----------------------------------------------

_HARMONICS = 4
_TIME_POINTS = 32
_FLOQUET = 4


def _periodic_state(k, g3, g4, nu, F, X0):
    """Real periodic solution of x'' + k x' + x + 2(3 g3 x^2 + 4 g4 x^3) = F cos(nu t).

    Time is in units of 1/omega_a; X holds complex harmonics 0..H of x.
    """
    H, T = _HARMONICS, _TIME_POINTS
    n = np.arange(H + 1)
    lin = 1 - (n * nu) ** 2 + 1j * k * n * nu
    rhs = np.zeros(H + 1, dtype=complex)
    rhs[1] = F / 2

    def unpack(v):
        X = np.zeros(H + 1, dtype=complex)
        X[0] = v[0]
        X[1:] = v[1 : H + 1] + 1j * v[H + 1 :]
        return X

    def pack(X):
        return np.concatenate([[X[0].real], X[1:].real, X[1:].imag])

    def resid(v):
        X = unpack(v)
        spec = np.zeros(T // 2 + 1, dtype=complex)
        spec[: H + 1] = X * T
        spec[0] = X[0].real * T
        x = np.fft.irfft(spec, T)
        nl = np.fft.rfft(2 * (3 * g3 * x**2 + 4 * g4 * x**3))[: H + 1] / T
        R = lin * X + nl - rhs
        return pack(R)

    if not np.any(X0):
        X0 = rhs / lin
    sol = optimize.root(resid, pack(X0), method="hybr", tol=1e-14)
    err = np.max(np.abs(resid(sol.x)))
    # hybr may report slow progress after it has already converged
    return unpack(sol.x), err < 1e-10 * max(abs(F), 1e-300)


def _probe_frequency(k, g3, g4, nu, X):
    """Imaginary part of the Floquet exponent of the mode-like branch."""
    H, T, m_max = _HARMONICS, _TIME_POINTS, _FLOQUET
    spec = np.zeros(T // 2 + 1, dtype=complex)
    spec[: H + 1] = X * T
    spec[0] = X[0].real * T
    x = np.fft.irfft(spec, T)
    q = np.fft.fft(2 * (6 * g3 * x + 12 * g4 * x**2)) / T  # q_j at index j mod T
    ms = np.arange(-m_max, m_max + 1)
    size = len(ms)
    Q = np.array([[q[(a - b) % T] for b in ms] for a in ms])
    Nd = np.diag(1j * ms * nu)
    I = np.eye(size)
    K0 = Nd @ Nd + k * Nd + I + Q
    K1 = 2 * Nd + k * I
    A = np.block([[np.zeros((size, size)), I], [-K0, -K1]])
    vals, vecs = np.linalg.eig(A)
    weight = np.abs(vecs[m_max, :]) ** 2 / np.sum(np.abs(vecs[:size, :]) ** 2, axis=0)
    cand = np.where(vals.imag > 0, weight, -1)
    return float(vals[np.argmax(cand)].imag)


def _bistable(mode, omega_d, u) -> bool:
    # one-harmonic Duffing: n[(w_d - w_a - K n)^2 + kappa^2/4] = |u|^2
    d, K, k = omega_d - mode.omega_a, mode.K, mode.kappa
    roots = np.roots([K**2, -2 * d * K, d**2 + k**2 / 4, -abs(u) ** 2])
    real = roots[np.abs(roots.imag) < 1e-9 * np.abs(roots).max()].real
    return int(np.sum(real > 0)) > 1


def default_stark_powers(mode: ModeParameters, omega_d: float, n_points: int = 12) -> np.ndarray:
    """dBm grid whose linear photon number reaches a 5% shift of the drive detuning."""
    det = abs(omega_d - mode.omega_a)
    n_max = 0.05 * det / abs(mode.K) if mode.K != 0 else 100.0
    n_max = min(n_max, 1e4)
    n = np.linspace(n_max / n_points, n_max, n_points)
    u = np.sqrt(n) * abs(omega_d - mode.omega_a + 0.5j * mode.kappa)
    P = HBAR * mode.omega_a / mode.kappa * u**2 * (mode.omega_a / omega_d) ** 2
    return watts_to_dbm(P)


def stark_shift_experiment(
    mode: ModeParameters,
    omega_d: float | None = None,
    powers_dbm=None,
) -> StarkFit:
    """Probe-resonance shift versus drive photon number, fit to 2 K n + K' n^2.

    The driven periodic state is found by multi-harmonic balance of the
    classical equation of motion; the weak-probe resonance is the Floquet
    exponent of the linearized motion that is continuously connected to the
    bare mode. ``omega_d`` defaults to 500 MHz detuned, on the side away from
    which the Kerr shift pulls the mode.
    """
    wa = mode.omega_a
    if omega_d is None:
        sign = -1.0 if mode.K > 0 else 1.0
        omega_d = wa + sign * 2 * math.pi * 500e6
    if powers_dbm is None:
        powers_dbm = default_stark_powers(mode, omega_d)
    k, g3, g4, nu = mode.kappa / wa, mode.g3 / wa, mode.g4 / wa, omega_d / wa
    base = _probe_frequency(k, g3, g4, nu, np.zeros(_HARMONICS + 1, dtype=complex))
    X = np.zeros(_HARMONICS + 1, dtype=complex)
    nbar, shifts, bistable = [], [], False
    for p_dbm in np.sort(np.asarray(powers_dbm, dtype=float)):
        u = drive_from_power(dbm_to_watts(p_dbm), omega_d, mode)
        if _bistable(mode, omega_d, u):
            bistable = True
            warnings.warn(f"drive at {p_dbm:.1f} dBm lies in a bistable region", BistableBranch)
        F = 4 * u / wa
        # ramp the drive from the previous point to keep the tracked branch
        X_new, ok = _periodic_state(k, g3, g4, nu, F, X)
        if not ok:
            raise NonConvergence(f"driven steady state not found at {p_dbm:.1f} dBm")
        X = X_new
        nbar.append(abs(X[1]) ** 2)
        shifts.append((_probe_frequency(k, g3, g4, nu, X) - base) * wa)
    nbar, shifts = np.array(nbar), np.array(shifts)
    A = np.column_stack([2 * nbar, nbar**2])
    (K, K_prime), *_ = np.linalg.lstsq(A, shifts, rcond=None)
    rms = float(np.sqrt(np.mean((A @ [K, K_prime] - shifts) ** 2)))
    return StarkFit(float(K), float(K_prime), nbar, shifts, rms, omega_d, bistable)


# -- validity ---------------------------------------------------------------


@dataclass
class ValidityReport:
    Q: float
    pQ: float
    pQ_ok: bool
    max_snail_phase: float
    phase_ok: bool
    flags: list = field(default_factory=list)


def validity_check(op: OperatingPoint, p: float | None = None, min_pQ: float = 15.0) -> ValidityReport:
    """pQ criterion and peak SNAIL phase excursion at the operating pump."""
    m = op.mode
    p = m.p if p is None else p
    Q = m.omega_a / m.kappa
    pQ = p * Q if math.isfinite(p) else math.nan
    flags = []
    pQ_ok = bool(pQ >= min_pQ)
    if not pQ_ok:
        flags.append(f"pQ={pQ:.3g} < {min_pQ:g}")
    phase = math.nan
    if op.pump_solution is not None and math.isfinite(m.snail_phase_zpf):
        phase = 2 * abs(op.pump_solution.alpha_p) * m.snail_phase_zpf
    phase_ok = not (phase > math.pi / 2)
    if not phase_ok:
        flags.append(f"peak SNAIL phase {phase:.3g} rad exceeds pi/2")
    return ValidityReport(Q, pQ, pQ_ok, phase, phase_ok, flags)
