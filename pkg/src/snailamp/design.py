"""Search constitutive parameters against amplifier targets.

Candidates are scored by a weighted sum of constraint shortfalls, so the best
possible score is 0 and a feasible design has every shortfall equal to 0.
The default "estimate" tier uses the closed-form compression and pump-power
scalings; the "full" tier runs pump calibration and the harmonic-balance
compression sweep at each flux point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .circuit import DeviceSpec, flux_sweep, kerr_free_flux
from .constants import watts_to_dbm
from .errors import BudgetExhausted, NoCompressionBelowCeiling, SnailampError
from .experiments import CEILING_DBM, p1db, p1db_estimates
from .hb import PUMP_DAMPING, OperatingPoint, calibrate_pump, power_from_drive

# 10 log10 of the small-signal prefactor for Stark-limited compression:
# a 1 dB drop needs Delta_eff^2 ~ 0.122 (kappa^2/4 - 4|g|^2), which puts the
# compression point near 0.0103 (kappa/|g4|) G0^(-5/4) hbar omega_a kappa.
ESTIMATE_OFFSET_DB = -19.9
HYSTERETIC_PENALTY = 1e6
PARAMS = ("L_J", "alpha", "C_c", "omega_0")


@dataclass(frozen=True)
class DesignTarget:
    band: tuple  # (omega_min, omega_max) rad/s
    min_p1db_dbm: float = -math.inf
    G0: float = 100.0
    require_kerr_free: bool = False
    max_pump_power_dbm: float = math.inf
    min_pQ: float = 15.0

    def __post_init__(self):
        if not self.band[0] < self.band[1]:
            raise ValueError("band must satisfy omega_min < omega_max")
        if self.G0 <= 1:
            raise ValueError("G0 must exceed 1")


@dataclass(frozen=True)
class ScoreWeights:
    band: float = 10.0  # per unit fractional band shortfall
    p1db: float = 1.0  # per 10 dB
    pump: float = 1.0  # per 10 dB
    pQ: float = 1.0  # per unit fractional shortfall
    kerr_free: float = 1.0
    failed_point: float = 0.5  # per failed flux point


@dataclass
class DesignCandidate:
    spec: DeviceSpec
    score: float
    predicted: dict
    feasible: bool
    flags: list = field(default_factory=list)


def _pump_power_estimate(mode, G0):
    # |g_eff| from the omega=0 gain identity with Delta_eff = 0
    ratio = 0.25 * (math.sqrt(G0) - 1) / (math.sqrt(G0) + 1)
    g_eff = mode.kappa * math.sqrt(ratio) / 2
    alpha_p = g_eff / (2 * abs(mode.g3))
    omega_p = 2 * mode.omega_a
    u_p = abs(omega_p - mode.omega_a + 1j * PUMP_DAMPING * mode.kappa) * alpha_p
    return float(watts_to_dbm(power_from_drive(u_p, omega_p, mode)))


def _amplifier_metrics(mode, target, tier):
    if tier == "estimate":
        op = OperatingPoint(mode, 2 * mode.omega_a, 0j, target.G0, math.nan)
        stark, pumpdep = p1db_estimates(op)
        return min(stark, pumpdep) + ESTIMATE_OFFSET_DB, _pump_power_estimate(mode, target.G0)
    op = calibrate_pump(mode, target.G0)
    try:
        return p1db(op).p_1db_dbm, op.pump_power_dbm
    except NoCompressionBelowCeiling:
        # compression lies above the sweep ceiling; the ceiling is a lower bound
        return CEILING_DBM, op.pump_power_dbm


def evaluate(spec: DeviceSpec, target: DesignTarget, tier: str = "estimate",
             n_flux: int = 11, weights: ScoreWeights = ScoreWeights()) -> DesignCandidate:
    """Score one device against ``target`` on an ``n_flux`` grid over [0, 0.5].

    The band uses every grid point. Amplifier metrics skip the symmetry points
    0 and 0.5, where three-wave mixing vanishes. A point that fails contributes
    a fixed penalty rather than aborting the evaluation.
    """
    if spec.hysteretic:
        return DesignCandidate(spec, -HYSTERETIC_PENALTY, {}, False, ["hysteretic"])
    grid = np.linspace(0.0, 0.5, n_flux)
    modes = flux_sweep(spec, grid)
    failed = [m.flux for m in modes if not m.ok]
    ok = [m for m in modes if m.ok]
    flags = []
    p1dbs, pumps, pQs = [], [], []
    for m in ok:
        if m.g3 == 0 or m.flux in (0.0, 0.5):
            continue
        pQs.append(m.p * m.omega_a / m.kappa if m.kappa > 0 else math.inf)
        try:
            p, pump = _amplifier_metrics(m, target, tier)
            p1dbs.append(p)
            pumps.append(pump)
        except SnailampError as err:
            failed.append(m.flux)
            flags.append(f"flux {m.flux:.3f}: {type(err).__name__}")
    w_lo, w_hi = target.band
    if ok:
        a_lo = min(m.omega_a for m in ok)
        a_hi = max(m.omega_a for m in ok)
        band_short = max(0.0, a_lo - w_lo) / w_lo + max(0.0, w_hi - a_hi) / w_hi
    else:
        a_lo = a_hi = math.nan
        band_short = 2.0
    worst_p1db = min(p1dbs) if p1dbs else -math.inf
    worst_pump = max(pumps) if pumps else math.inf
    worst_pQ = min(pQs) if pQs else 0.0
    short = {
        "band": band_short,
        "p1db": _gap(target.min_p1db_dbm, worst_p1db) / 10,
        "pump": _gap(worst_pump, target.max_pump_power_dbm) / 10,
        "pQ": max(0.0, target.min_pQ - worst_pQ) / target.min_pQ if target.min_pQ > 0 else 0.0,
        "kerr_free": 0.0,
    }
    kf = math.nan
    try:
        kf = float(kerr_free_flux(spec, n_scan=21, tol=1e-4))
    except SnailampError:
        if target.require_kerr_free:
            short["kerr_free"] = 1.0
    score = -sum(getattr(weights, k) * v for k, v in short.items())
    score -= weights.failed_point * len(failed)
    feasible = all(v == 0 for v in short.values())
    if not feasible:
        flags.append("infeasible")
    predicted = {
        "band": (a_lo, a_hi),
        "worst_p1db_dbm": worst_p1db,
        "max_pump_power_dbm": worst_pump,
        "worst_pQ": worst_pQ,
        "pQ_margin": worst_pQ - target.min_pQ,
        "kerr_free_flux": kf,
        "failed_flux": failed,
        "shortfalls": short,
        "tier": tier,
    }
    return DesignCandidate(spec, float(score), predicted, feasible, flags)


def _gap(need, have):
    """Positive amount by which ``have`` falls below ``need`` (0 if met)."""
    if have >= need:
        return 0.0
    if math.isinf(need) or math.isinf(have):
        return 1e3
    return need - have


def search(
    target: DesignTarget,
    bounds: dict,
    budget: int,
    *,
    base: DeviceSpec,
    seed: int = 0,
    tier: str = "estimate",
    weights: ScoreWeights = ScoreWeights(),
    top: int = 10,
    verify: bool = False,
) -> list[DesignCandidate]:
    """Nelder-Mead over (L_J, alpha, C_c, omega_0) inside an outer loop over integer M.

    ``bounds`` maps ``L_J``, ``alpha``, ``C_c``, ``omega_0`` to (lo, hi) in SI
    units and ``M`` to an inclusive integer range. Fields not searched are taken
    from ``base``. The budget counts evaluations and is shared evenly across M
    values. ``verify`` re-scores the returned candidates with the full tier.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    lo = np.array([bounds[k][0] for k in PARAMS], dtype=float)
    hi = np.array([bounds[k][1] for k in PARAMS], dtype=float)
    Ms = list(range(int(bounds["M"][0]), int(bounds["M"][1]) + 1))
    if len(Ms) > 8:
        Ms = sorted(set(int(round(x)) for x in np.geomspace(Ms[0], Ms[-1], 8)))
    per_M = [budget // len(Ms) + (1 if i < budget % len(Ms) else 0) for i in range(len(Ms))]
    records: dict = {}
    exhausted = False

    def to_spec(x, M):
        vals = lo + np.clip(x, 0, 1) * (hi - lo)
        return replace(base, M=M, **dict(zip(PARAMS, (float(v) for v in vals))))

    for M, n_eval in zip(Ms, per_M):
        if n_eval == 0:
            continue
        x0 = rng.uniform(0, 1, len(PARAMS))
        simplex = np.vstack([x0, x0 + np.diag(np.where(x0 < 0.5, 0.25, -0.25))])
        count = 0

        def objective(x, M=M):
            nonlocal count
            count += 1
            spec = to_spec(x, M)
            key = (M, *np.round(np.clip(x, 0, 1), 12))
            if key not in records:
                records[key] = evaluate(spec, target, tier, weights=weights)
            return -records[key].score

        if n_eval == 1:
            objective(x0)
            exhausted = True
            continue
        res = optimize.minimize(
            objective, x0, method="Nelder-Mead", bounds=[(0, 1)] * len(PARAMS),
            options={"maxfev": n_eval, "initial_simplex": simplex, "xatol": 1e-4, "fatol": 1e-9},
        )
        if res.status == 1 or count >= n_eval:
            exhausted = True
    if exhausted:
        warnings.warn("evaluation budget exhausted; returning best candidates so far",
                      BudgetExhausted)
    ranked = sorted(records.values(), key=lambda c: -c.score)
    ranked = [c for c in ranked if not c.spec.hysteretic] + [c for c in ranked if c.spec.hysteretic]
    ranked = ranked[:top]
    if verify:
        ranked = [evaluate(c.spec, target, "full", weights=weights) for c in ranked]
        ranked.sort(key=lambda c: -c.score)
    return ranked
