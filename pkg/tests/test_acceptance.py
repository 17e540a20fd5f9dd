"""Acceptance criteria 1-12.

Each test records its criterion number and a one-line measured summary; the
terminal summary prints one PASS/FAIL line per criterion. Runtime limits are
asserted alongside the numerical checks.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import GHZ, KHZ, MHZ
from oracles import closed_form_gain, eliminated_coefficients
from snailamp.circuit import (
    DISTRIBUTED,
    LUMPED,
    DeviceSpec,
    LumpedEmbedding,
    ModeParameters,
    effective_coefficients,
    equivalent_lumped,
    flux_sweep,
    kerr_free_flux,
    lumped_mode_parameters,
    mode_parameters,
)
from snailamp.constants import dbm_to_watts
from snailamp.errors import SnailampError, TargetUnreachable
from snailamp.experiments import iip3_analytic, iip3_simulated, p1db, stark_shift_experiment
from snailamp.hb import DriveSet, PROBE_OFFSET, calibrate_pump, drive_from_power, hb_solve, reflection_gain
from snailamp.snail import taylor_coefficients

TABLE_OMEGA = {"A": (6.0, 7.84), "B": (4.0, 7.51), "C": (5.99, 7.24), "D": (7.09, 8.37), "E": (7.76, 9.24)}
OPEN_LOWER = {"A", "B"}  # quoted as "< value"
TABLE_G3_MAX = {"A": 30, "B": 60, "C": 1.5, "D": 1.8, "E": 2.0}
TABLE_G4 = {"A": 4.9, "B": 0.5, "C": 0.004, "D": 0.003, "E": 0.004}
AVERAGED_G4 = {"C", "D", "E"}  # flux average outside 0.1 Phi0 around the Kerr-free point
GRID = np.linspace(0.0, 0.5, 51)

C_LIKE = ModeParameters.from_hamiltonian(6.6 * GHZ, 105 * MHZ, 1.0 * MHZ, -4 * KHZ)
D_LIKE = ModeParameters.from_hamiltonian(7.7 * GHZ, 215 * MHZ, 1.2 * MHZ, -3 * KHZ)
E_LIKE = ModeParameters.from_hamiltonian(8.5 * GHZ, 355 * MHZ, 1.35 * MHZ, -4 * KHZ)


def _record(record_property, n, detail):
    record_property("criterion", n)
    record_property("detail", detail)


def _drives(mode, op, omega, p_dbm):
    ws = op.omega_p / 2 + omega
    return DriveSet(op.omega_p, ws, op.u_p, drive_from_power(dbm_to_watts(p_dbm), ws, mode))


@pytest.fixture(scope="module")
def operating_points():
    """Ten calibrated points: three modes, several gains, zero and nonzero pump detuning."""
    plan = [(C_LIKE, 10, 0.0), (C_LIKE, 100, 0.0), (C_LIKE, 30, 0.2),
            (D_LIKE, 10, 0.0), (D_LIKE, 100, 0.0), (D_LIKE, 50, -0.2),
            (E_LIKE, 10, 0.0), (E_LIKE, 100, 0.0), (E_LIKE, 30, 0.3), (E_LIKE, 200, 0.0)]
    return [calibrate_pump(m, G, delta=d * m.kappa) for m, G, d in plan]


def test_criterion_01_symmetry_zeros(devices, record_property):
    t0 = time.perf_counter()
    worst = 0.0
    for spec in devices.values():
        rows = flux_sweep(spec, GRID)
        c3 = [taylor_coefficients(spec.snail(f))[3] for f in GRID]
        g3_max = max(abs(m.g3) for m in rows)
        c3_max = max(abs(c) for c in c3)
        for i in (0, len(GRID) - 1):
            worst = max(worst, abs(rows[i].g3) / g3_max, abs(c3[i]) / c3_max)
    dt = time.perf_counter() - t0
    _record(record_property, 1, f"max relative |g3|,|c3| at flux 0 and 0.5 = {worst:.1e}; {dt:.2f} s")
    assert worst < 1e-10
    assert dt < 1.0


def test_criterion_02_coefficient_oracle(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(50):
        alpha = rng.uniform(0.05, 0.3)
        xi = 10 ** rng.uniform(-1.5, 0.7)
        M = int(rng.integers(1, 41))
        flux = rng.uniform(0.02, 0.48)
        spec = DeviceSpec(L_J=47e-12, M=M, alpha=alpha, C_c=0.0, omega_0=18 * GHZ, Z_c=45.0)
        got = effective_coefficients(spec, flux, LumpedEmbedding(L=47e-12 / xi, C=1e-13))[:3]
        ref = eliminated_coefficients(alpha, 2 * math.pi * flux, M, xi, dps=30)
        worst = max(worst, *(abs(g / r - 1) for g, r in zip(got, ref)))
    dt = time.perf_counter() - t0
    _record(record_property, 2, f"max relative deviation of c2..c4 over 50 samples = {worst:.1e}; {dt:.2f} s")
    assert worst < 1e-6
    assert dt < 10.0


def test_criterion_03_kerr_identity(devices, record_property):
    t0 = time.perf_counter()
    worst, n = 0.0, 0
    for spec in devices.values():
        for model in (LUMPED, DISTRIBUTED):
            for m in flux_sweep(spec, GRID, model):
                scale = 12 * (abs(m.g4) + 5 * m.g3**2 / m.omega_a)
                worst = max(worst, abs(m.K - 12 * (m.g4 - 5 * m.g3**2 / m.omega_a)) / scale)
                n += 1
    dt = time.perf_counter() - t0
    _record(record_property, 3, f"max relative identity error over {n} points = {worst:.1e}; {dt:.2f} s")
    assert worst < 1e-10
    assert dt < 5.0


def test_criterion_04_renormalization(devices, record_property):
    t0 = time.perf_counter()
    spec = devices["A"]
    emb = equivalent_lumped(spec)
    ratios = []
    for f in GRID[1:-1]:
        a = lumped_mode_parameters(spec, emb, f, renormalize=True).K
        b = lumped_mode_parameters(spec, emb, f, renormalize=False).K
        ratios.append(max(abs(a / b), abs(b / a)))
    best = max(ratios)
    dt = time.perf_counter() - t0
    _record(record_property, 4, f"largest |K| change from the c3^2 term = {best:.3g}x; {dt:.2f} s")
    assert best >= 10
    assert dt < 5.0


def test_criterion_05_small_signal_closed_form(operating_points, record_property):
    t0 = time.perf_counter()
    worst = 0.0
    for op in operating_points:
        m = op.mode
        for w in np.linspace(-m.kappa, m.kappa, 21):
            w = w if abs(w) > PROBE_OFFSET else PROBE_OFFSET
            sol = hb_solve(m, _drives(m, op, w, -160.0))
            d_p = op.delta + 32 / 3 * m.g4 * abs(sol.alpha_p) ** 2
            ref = closed_form_gain(d_p, 2 * m.g3 * sol.alpha_p, m.kappa, w)
            worst = max(worst, abs(10 * math.log10(reflection_gain(m, sol) / ref)))
    dt = time.perf_counter() - t0
    _record(record_property, 5, f"max |G_solver - G_closed| = {worst:.1e} dB over 10 points x 21 offsets; {dt:.2f} s")
    assert worst < 0.01
    assert dt < 30.0


def test_criterion_06_order_two_degeneration(operating_points, record_property):
    t0 = time.perf_counter()
    worst = 0.0
    for op in operating_points:
        d = _drives(op.mode, op, 0.1 * op.mode.kappa, -130.0)
        a = hb_solve(op.mode, d, 1).amplitudes
        b = hb_solve(op.mode, d, 2, cascade_scale=0.0).amplitudes
        worst = max(worst, float(np.max(np.abs(a - b) / np.abs(a))))
    dt = time.perf_counter() - t0
    _record(record_property, 6, f"max relative amplitude difference = {worst:.1e}; {dt:.2f} s")
    assert worst < 1e-10
    assert dt < 10.0


def test_criterion_07_calibration_identity(record_property):
    t0 = time.perf_counter()
    mode = ModeParameters.from_hamiltonian(9 * GHZ, 300 * MHZ, 1.5 * MHZ, 4 * KHZ)
    op = calibrate_pump(mode, 100.0, cancel_stark=True)
    sol = op.pump_solution
    lhs = 4 * abs(sol.g_eff) ** 2 / mode.kappa**2
    rhs = 0.25 * (10 - 1) / (10 + 1)
    dt = time.perf_counter() - t0
    _record(record_property, 7, f"4|g|^2/kappa^2 = {lhs:.6f} vs {rhs:.6f}, Delta_eff/kappa = "
                                f"{sol.delta_eff / mode.kappa:.1e}; {dt:.2f} s")
    assert abs(sol.delta_eff) < 1e-3 * mode.kappa
    assert lhs == pytest.approx(rhs, rel=0.01)
    assert dt < 5.0


def test_criterion_08_iip3_cross_validation(record_property):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, mode in (("C", C_LIKE), ("D", D_LIKE), ("E", E_LIKE)):
        op = calibrate_pump(mode, 100.0)
        sim = iip3_simulated(op)
        ana = iip3_analytic(mode, op.G0)
        diff = sim.iip3_dbm - ana.iip3_dbm
        s1, s3 = sim.asymptote_slopes
        ok &= abs(diff) <= 0.5 and abs(s1 - 1) <= 0.05 and abs(s3 - 3) <= 0.05
        parts.append(f"{name}: {diff:+.3f} dB, slopes {s1:.3f}/{s3:.3f}")
    dt = time.perf_counter() - t0
    _record(record_property, 8, "; ".join(parts) + f"; {dt:.2f} s")
    assert ok
    assert dt < 60.0


def test_criterion_09_stark_oracle(record_property):
    t0 = time.perf_counter()
    pure = [ModeParameters.from_hamiltonian(7 * GHZ, 100 * MHZ, 0.0, g4) for g4 in (-4 * KHZ, 20 * KHZ)]
    mixed = [ModeParameters.from_hamiltonian(7 * GHZ, 100 * MHZ, g3, -4 * KHZ) for g3 in (1.5 * MHZ, 3 * MHZ)]
    pure_err = max(abs(stark_shift_experiment(m).K / (12 * m.g4) - 1) for m in pure)
    mixed_err = max(abs(stark_shift_experiment(m).K / m.K - 1) for m in mixed)
    dt = time.perf_counter() - t0
    _record(record_property, 9, f"pure Kerr {pure_err:.2%}, with g3 {mixed_err:.2%}; {dt:.2f} s")
    assert pure_err < 0.02
    assert mixed_err < 0.05
    assert dt < 30.0


def test_criterion_10_device_reproduction(devices, record_property):
    t0 = time.perf_counter()
    lines, failures = [], []
    for name, base in devices.items():
        spec = replace(base, g3_scale=2.0)
        rows = [m for m in flux_sweep(spec, GRID) if m.ok]
        w = np.array([m.omega_a for m in rows]) / GHZ
        lo, hi = TABLE_OMEGA[name]
        if name in OPEN_LOWER:
            lo_ok = w.min() <= lo * 1.10
        else:
            lo_ok = abs(w.min() / lo - 1) <= 0.10
        hi_ok = abs(w.max() / hi - 1) <= 0.10
        overlap = min(w.max(), hi) > max(w.min(), lo)
        g3 = max(abs(m.g3) for m in rows) / MHZ
        if name in AVERAGED_G4:
            kf = kerr_free_flux(spec)
            g4 = np.mean([abs(m.g4) for m in rows if abs(m.flux - kf) > 0.05]) / MHZ
        else:
            g4 = max(abs(m.g4) for m in rows) / MHZ
        g3_ok = 1 / 3 <= g3 / TABLE_G3_MAX[name] <= 3
        g4_ok = 1 / 3 <= g4 / TABLE_G4[name] <= 3
        lines.append(f"{name}: w {w.min():.2f}-{w.max():.2f} GHz, |g3| {g3:.3g}, |g4| {g4:.3g} MHz")
        for label, good in (("w_min", lo_ok), ("w_max", hi_ok), ("overlap", overlap),
                            ("g3", g3_ok), ("g4", g4_ok)):
            if not good:
                failures.append(f"{name} {label}")
    spec_e = replace(devices["E"], g3_scale=2.0)
    kf = kerr_free_flux(spec_e)
    p1, unreachable = [], []
    grid = [f for f in np.arange(0.05, 0.451, 0.05) if abs(f - kf) > 0.05]
    for f in grid:
        try:
            op = calibrate_pump(mode_parameters(spec_e, f), 100.0)
        except TargetUnreachable:
            unreachable.append(f"{f:.2f}")  # no 20 dB operating point, so no P1dB to compare
            continue
        try:
            p1.append(p1db(op).p_1db_dbm)
        except SnailampError as err:
            failures.append(f"E P1dB at {f:.2f}: {type(err).__name__}")
    if 2 * len(p1) < len(grid):
        failures.append("E 20 dB gain unreachable at most flux points")
    if p1 and not all(-115 <= p <= -95 for p in p1):
        failures.append("E P1dB band")
    dt = time.perf_counter() - t0
    detail = "; ".join(lines) + f"; E P1dB {min(p1):.1f} to {max(p1):.1f} dBm"
    detail += f" (20 dB unreachable at flux {', '.join(unreachable) or 'none'})"
    detail += f"; failing: {', '.join(failures) or 'none'}; {dt:.1f} s"
    _record(record_property, 10, detail)
    assert not failures
    assert dt < 300.0


def _p1db_at(mode):
    return p1db(calibrate_pump(mode, 100.0)).p_1db_dbm


def test_criterion_11_recipe_monotonicity(record_property):
    t0 = time.perf_counter()
    base = _p1db_at(C_LIKE)
    wide = _p1db_at(C_LIKE.with_(kappa=2 * C_LIKE.kappa))
    soft = _p1db_at(ModeParameters.from_hamiltonian(C_LIKE.omega_a, C_LIKE.kappa, C_LIKE.g3, C_LIKE.g4 / 2))
    dt = time.perf_counter() - t0
    _record(record_property, 11, f"base {base:.2f}, 2x kappa {wide:.2f}, g4/2 {soft:.2f} dBm; {dt:.2f} s")
    assert wide > base
    assert soft > base
    assert dt < 120.0


def test_criterion_12_kerr_free_structure(devices, record_property):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in ("C", "D", "E"):
        spec = devices[name]
        assert spec.alpha == 0.09 and spec.M == 20
        root = kerr_free_flux(spec)
        ok &= 0.3 < root < 0.5
        # the first-order compression peak closest to the root, inside its 0.1 Phi0 window
        scan = []
        for f in root + np.linspace(-0.05, 0.05, 11):
            op = calibrate_pump(mode_parameters(spec, f), 100.0)
            try:
                scan.append((p1db(op).p_1db_dbm, f, op))
            except SnailampError:
                continue
        p_1, f_peak, op = max(scan, key=lambda t: t[0])
        p_2 = p1db(op, order=2).p_1db_dbm
        ok &= p_2 <= p_1
        parts.append(f"{name}: root {root:.4f}, at {f_peak:.3f} hb1 {p_1:.2f} / hb2 {p_2:.2f} dBm")
    dt = time.perf_counter() - t0
    _record(record_property, 12, "; ".join(parts) + f"; {dt:.1f} s")
    assert ok
    assert dt < 120.0


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
