"""Map SNAIL coefficients and the embedding circuit to mode parameters.

Two embeddings are supported. The lumped model puts the SNAIL array in series
with an inductor ``L`` and capacitor ``C`` and eliminates the SNAIL phase with
the full nonlinear current-conservation condition. The distributed model
places the array at the centre of a half-wave transmission line and uses the
closed-form transcendental frequency equation.

Frequencies are angular (rad/s) throughout; ``flux`` is Phi/Phi0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import E_CHARGE, HBAR, PHI0_REDUCED, R_Q
from .errors import (
    ConstraintNoConvergence,
    DivergentInductance,
    HystereticDevice,
    NoSignChange,
    RootNotBracketed,
)
from .snail import SnailCoefficients, SnailParams, potential_derivative, taylor_coefficients

LUMPED = "lumped"
DISTRIBUTED = "distributed"
SYNTHETIC = "synthetic"
FREQ_BISECTION_ITERS = 60


@dataclass(frozen=True)
class DeviceSpec:
    """Constitutive description of one amplifier (SI units)."""

    L_J: float
    M: int
    alpha: float
    C_c: float
    omega_0: float
    Z_c: float
    Z_0: float = 50.0
    kappa_override: tuple | None = None  # ((flux, kappa rad/s), ...)
    g3_scale: float = 1.0
    allow_hysteretic: bool = False
    name: str = ""

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.omega_0 <= 0 or self.Z_c <= 0 or self.L_J <= 0:
            raise ValueError("omega_0, Z_c and L_J must be positive")
        if self.C_c < 0:
            raise ValueError("C_c must be >= 0")
        if self.kappa_override is not None:
            table = tuple(sorted((float(f), float(k)) for f, k in self.kappa_override))
            object.__setattr__(self, "kappa_override", table)

    @property
    def hysteretic(self) -> bool:
        return self.alpha > 1.0 / 3.0

    def snail(self, flux: float) -> SnailParams:
        return SnailParams(self.alpha, 2 * math.pi * flux, self.L_J)


@dataclass(frozen=True)
class LumpedEmbedding:
    L: float
    C: float

    def __post_init__(self):
        if self.L <= 0 or self.C <= 0:
            raise ValueError("L and C must be positive")

    @property
    def E_C(self) -> float:
        return E_CHARGE**2 / (2 * self.C)

    @property
    def E_L(self) -> float:
        return PHI0_REDUCED**2 / self.L

    @property
    def omega_0(self) -> float:
        return 1.0 / math.sqrt(self.L * self.C)

    def xi_J(self, L_J: float) -> float:
        return L_J / self.L


@dataclass
class ModeParameters:
    omega_a: float
    kappa: float
    g3: float
    g4: float
    K: float
    p: float = float("nan")
    flux: float = float("nan")
    model_tag: str = SYNTHETIC
    snail_phase_zpf: float = float("nan")  # per-SNAIL phase per unit mode amplitude
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_hamiltonian(cls, omega_a, kappa, g3, g4, **kw) -> "ModeParameters":
        """Build a mode from (omega_a, kappa, g3, g4) with K from the perturbative identity."""
        K = 12.0 * (g4 - 5.0 * g3**2 / omega_a)
        return cls(omega_a=omega_a, kappa=kappa, g3=g3, g4=g4, K=K, **kw)

    @classmethod
    def failed(cls, flux, model_tag, error) -> "ModeParameters":
        nan = float("nan")
        return cls(nan, nan, nan, nan, nan, nan, flux, model_tag,
                   meta={"error": f"{type(error).__name__}: {error}"})

    @property
    def ok(self) -> bool:
        return "error" not in self.meta

    def with_(self, **changes) -> "ModeParameters":
        return replace(self, **changes)


def _require_non_hysteretic(spec: DeviceSpec):
    if spec.hysteretic and not spec.allow_hysteretic:
        raise HystereticDevice(
            f"alpha={spec.alpha} > 1/3 gives a hysteretic SNAIL; set allow_hysteretic to proceed"
        )


def equivalent_lumped(spec: DeviceSpec, flux: float | None = None) -> LumpedEmbedding:
    """Series LC standing in for the half-wave line.

    The default ``L = pi Z_c / (2 omega_0)`` reproduces the distributed frequency
    pull in the small-participation limit. Passing ``flux`` instead adjusts
    ``L`` so that the lumped and distributed ``omega_a`` agree at that flux;
    ``C = 1/(omega_0^2 L)`` in both cases.
    """
    if flux is None:
        L = math.pi * spec.Z_c / (2 * spec.omega_0)
    else:
        omega_a = distributed_frequency(spec, flux)
        L_array = spec.M * _snail_inductance(spec, flux)
        L = L_array / ((spec.omega_0 / omega_a) ** 2 - 1)
    return LumpedEmbedding(L=L, C=1.0 / (spec.omega_0**2 * L))


def _coeffs(spec: DeviceSpec, flux: float) -> SnailCoefficients:
    _require_non_hysteretic(spec)
    return taylor_coefficients(spec.snail(flux))


def _snail_inductance(spec: DeviceSpec, flux: float, coeffs=None) -> float:
    coeffs = coeffs or _coeffs(spec, flux)
    if coeffs[2] <= 1e-12:
        raise DivergentInductance(f"c2={coeffs[2]:.3g} at flux {flux:.6g}")
    return spec.L_J / coeffs[2]


# -- lumped model -----------------------------------------------------------


def solve_constraint(
    phi: float, spec: DeviceSpec, coeffs: SnailCoefficients, embedding: LumpedEmbedding
) -> float:
    """SNAIL phase solving the nonlinear current-conservation condition.

    Root of ``alpha sin(phi_s) + sin((phi_s - phi_ext)/3) + xi_J (M phi_s - phi)``
    on the branch that passes through ``phi_min`` at ``phi = M phi_min``.
    """
    params = SnailParams(spec.alpha, coeffs.phi_ext, spec.L_J)
    xi = embedding.xi_J(spec.L_J)
    M = spec.M

    def f(x):
        return float(potential_derivative(x, params, 1)) + xi * (M * x - phi)

    def fprime(x):
        return float(potential_derivative(x, params, 2)) + M * xi

    phi_bar = M * coeffs.phi_min
    slope = xi / (coeffs[2] + M * xi)
    x = coeffs.phi_min + slope * (phi - phi_bar)
    for _ in range(100):
        d = fprime(x)
        if d <= 0:
            break
        step = -f(x) / d
        x += step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    scale = max(1.0, xi * M * abs(x), xi * abs(phi))
    if fprime(x) > 0 and abs(f(x)) <= 1e-13 * scale:
        return x

    # bisection fallback on a bracket that always contains a root
    width = (1.0 + spec.alpha) / (xi * M)
    lo, hi = phi / M - width, phi / M + width
    flo = f(lo)
    if flo > 0 or f(hi) < 0:
        raise ConstraintNoConvergence(f"constraint root not bracketed at phi={phi:.6g}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0 or hi - lo < 1e-16 * max(1.0, abs(mid)):
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    raise ConstraintNoConvergence(f"constraint bisection did not converge at phi={phi:.6g}")


def eliminated_potential(
    phi: float, spec: DeviceSpec, coeffs: SnailCoefficients, embedding: LumpedEmbedding
) -> float:
    """U(phi)/E_J of the single remaining mode coordinate."""
    params = SnailParams(spec.alpha, coeffs.phi_ext, spec.L_J)
    xi = embedding.xi_J(spec.L_J)
    phi_s = solve_constraint(phi, spec, coeffs, embedding)
    return spec.M * float(potential_derivative(phi_s, params, 0)) + 0.5 * xi * (phi - spec.M * phi_s) ** 2


def participation(c2: float, M: int, xi_J: float) -> float:
    return M * xi_J / (c2 + M * xi_J)


def effective_coefficients(
    spec: DeviceSpec, flux: float, embedding: LumpedEmbedding, coeffs: SnailCoefficients | None = None
):
    """(c2_eff, c3_eff, c4_eff, p) of the eliminated potential at its minimum."""
    c = coeffs or _coeffs(spec, flux)
    M = spec.M
    p = participation(c[2], M, embedding.xi_J(spec.L_J))
    c2e = p / M * c[2]
    c3e = p**3 / M**2 * c[3]
    c4e = p**4 / M**3 * (c[4] - 3 * c[3] ** 2 * (1 - p) / c[2])
    return c2e, c3e, c4e, p


def lumped_mode_parameters(
    spec: DeviceSpec, embedding: LumpedEmbedding, flux: float, renormalize: bool = True
) -> ModeParameters:
    """Lumped-element mode parameters.

    ``renormalize=False`` drops the c3^2 correction that the nonlinear current
    conservation adds to the quartic term (the linear-participation picture).
    """
    c = _coeffs(spec, flux)
    c2, c3, c4 = c[2], c[3], c[4]
    if c2 <= 1e-12:
        raise DivergentInductance(f"c2={c2:.3g} at flux {flux:.6g}")
    M = spec.M
    xi = embedding.xi_J(spec.L_J)
    p = participation(c2, M, xi)
    omega_a = embedding.omega_0 / math.sqrt(1 + M * xi / c2)
    E_C = embedding.E_C
    renorm = 3 * c3**2 * (1 - p) / c2 if renormalize else 0.0
    g3 = (p**2 / M) * (c3 / c2) * math.sqrt(E_C * HBAR * omega_a) / (6 * HBAR)
    g4 = (p**3 / M**2) * (c4 - renorm) / c2 * E_C / (12 * HBAR)
    K = (p**3 / M**2) * (c4 - renorm - 5.0 / 3.0 * c3**2 / c2 * p) / c2 * E_C / HBAR
    phi_zpf = 2 * math.sqrt(E_C / (HBAR * omega_a))
    mode = ModeParameters(
        omega_a=omega_a,
        kappa=coupling_kappa(spec, omega_a, flux),
        g3=g3,
        g4=g4,
        K=K,
        p=p,
        flux=flux,
        model_tag=LUMPED,
        snail_phase_zpf=p * phi_zpf / M,
        meta={"kappa_source": kappa_source(spec), "L": embedding.L, "C": embedding.C,
              "renormalized": renormalize},
    )
    return _apply_g3_scale(spec, mode)


# -- distributed model ------------------------------------------------------


def distributed_frequency(spec: DeviceSpec, flux: float, coeffs=None) -> float:
    """Smallest root of ``w tan(pi w / (2 w0)) = 2 Z_c / (M L_s)`` in (0, w0)."""
    L_s = _snail_inductance(spec, flux, coeffs)
    rhs = 2 * spec.Z_c / (spec.M * L_s)
    w0 = spec.omega_0

    def f(w):
        return w * math.tan(0.5 * math.pi * w / w0) - rhs

    lo, hi = 0.0, w0 * (1 - 1e-12)
    if not (f(lo) < 0 < f(hi)):
        raise RootNotBracketed(f"frequency equation not bracketed at flux {flux:.6g}")
    for _ in range(FREQ_BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def distributed_nonlinearities(spec: DeviceSpec, flux: float) -> ModeParameters:
    c = _coeffs(spec, flux)
    c2, c3, c4 = c[2], c[3], c[4]
    L_s = _snail_inductance(spec, flux, c)
    omega_a = distributed_frequency(spec, flux, c)
    M, Z_c, w0 = spec.M, spec.Z_c, spec.omega_0
    x = math.pi * omega_a / w0
    denom = x + math.sin(x)
    g3 = (4 * Z_c * c3 / (3 * M**2 * spec.L_J)) * math.sqrt(Z_c / R_Q) * (
        math.cos(x / 2) ** 2 / denom
    ) ** 1.5
    y2 = (omega_a * M * L_s / (2 * Z_c)) ** 2
    bracket = c4 - c3**2 / c2 * (3 + 5 * y2) / (1 + 3 * y2)
    K = (omega_a * math.sin(x) ** 2 / math.tan(x / 2)) / (c2 * M**2 * denom**2) * (Z_c / R_Q) * bracket
    g4 = K / 12 + 5 * g3**2 / omega_a
    # participation proxy: the series inductance that gives the same omega_a in
    # the lumped formula, i.e. p = M L_s / (M L_s + L_eff) = 1 - (omega_a/omega_0)^2
    p = 1 - (omega_a / w0) ** 2
    lumped = equivalent_lumped(spec)
    phi_zpf = 2 * math.sqrt(lumped.E_C / (HBAR * omega_a))
    mode = ModeParameters(
        omega_a=omega_a,
        kappa=coupling_kappa(spec, omega_a, flux),
        g3=g3,
        g4=g4,
        K=K,
        p=p,
        flux=flux,
        model_tag=DISTRIBUTED,
        snail_phase_zpf=p * phi_zpf / M,
        meta={"kappa_source": kappa_source(spec), "p_proxy": True, "L_s": L_s},
    )
    return _apply_g3_scale(spec, mode)


def _apply_g3_scale(spec: DeviceSpec, mode: ModeParameters) -> ModeParameters:
    if spec.g3_scale == 1.0:
        return mode
    g3 = mode.g3 * spec.g3_scale
    K = 12 * (mode.g4 - 5 * g3**2 / mode.omega_a)
    return mode.with_(g3=g3, K=K, meta={**mode.meta, "g3_scale": spec.g3_scale})


# -- coupling ---------------------------------------------------------------


def kappa_source(spec: DeviceSpec) -> str:
    if spec.kappa_override:
        return "override"
    return "single_pole_estimate" if spec.C_c > 0 else "uncoupled"


def _fold_flux(flux: float) -> float:
    f = flux % 1.0
    return 1.0 - f if f > 0.5 else f


def coupling_kappa(spec: DeviceSpec, omega_a: float, flux: float | None = None) -> float:
    """Output coupling rate.

    A measured ``kappa_override`` table is interpolated linearly in flux
    (folded into [0, 0.5] by symmetry). Otherwise the single-pole estimate
    ``Z_0 C_c^2 omega_a^3 (2 Z_c / pi)`` is used; it is an estimate only.
    """
    if spec.kappa_override:
        f = np.array([t[0] for t in spec.kappa_override])
        k = np.array([t[1] for t in spec.kappa_override])
        x = _fold_flux(flux) if flux is not None and f.min() >= 0 else (flux or 0.0)
        return float(np.interp(x, f, k))
    return spec.Z_0 * spec.C_c**2 * omega_a**3 * (2 * spec.Z_c / math.pi)


# -- flux studies -----------------------------------------------------------


def mode_parameters(spec: DeviceSpec, flux: float, model: str = DISTRIBUTED,
                    embedding: LumpedEmbedding | None = None) -> ModeParameters:
    if model == DISTRIBUTED:
        return distributed_nonlinearities(spec, flux)
    if model == LUMPED:
        return lumped_mode_parameters(spec, embedding or equivalent_lumped(spec), flux)
    raise ValueError(f"unknown model {model!r}")


def flux_sweep(spec: DeviceSpec, fluxes, model: str = DISTRIBUTED,
               embedding: LumpedEmbedding | None = None) -> list[ModeParameters]:
    """Mode parameters on a flux grid; a failing point yields a NaN row with
    ``meta['error']`` set and the sweep carries on."""
    _require_non_hysteretic(spec)
    if model == LUMPED and embedding is None:
        embedding = equivalent_lumped(spec)
    out = []
    for flux in np.asarray(fluxes, dtype=float):
        try:
            out.append(mode_parameters(spec, float(flux), model, embedding))
        except (DivergentInductance, ConstraintNoConvergence, RootNotBracketed) as err:
            out.append(ModeParameters.failed(float(flux), model, err))
    return out


def kerr_free_flux(spec: DeviceSpec, interval=(0.0, 0.5), model: str = DISTRIBUTED,
                   n_scan: int = 101, tol: float = 1e-6) -> float:
    """First zero of K(flux) inside ``interval``, located by scan plus bisection."""
    def K(f):
        return mode_parameters(spec, f, model).K

    a, b = interval
    eps = 1e-9 * (b - a)
    grid = np.linspace(a + eps, b - eps, n_scan)
    vals = []
    for f in grid:
        try:
            vals.append(K(f))
        except DivergentInductance:
            vals.append(float("nan"))
    vals = np.array(vals)
    for i in range(len(grid) - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0:
            lo, hi, klo = grid[i], grid[i + 1], vals[i]
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                km = K(mid)
                if km * klo > 0:
                    lo, klo = mid, km
                else:
                    hi = mid
            return 0.5 * (lo + hi)
    raise NoSignChange(f"K keeps one sign on flux interval {interval}")
