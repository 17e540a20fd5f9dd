"""Independent reference computations used only by the tests.

Nothing here imports the package's numerical kernels; each oracle rebuilds
its quantity from the defining equations with a different method.
"""

import math

import mpmath as mp
import numpy as np


def snail_u(phi, alpha, phi_ext, n=3):
    return -alpha * mp.cos(phi) - n * mp.cos((phi_ext - phi) / n)


def mp_minimum(alpha, phi_ext, n=3, points=6001):
    """Lowest minimum: float scan over one 6*pi period, then mpmath root of U'."""
    xs = np.linspace(-n * np.pi, n * np.pi, points) + float(phi_ext) / n
    u = -float(alpha) * np.cos(xs) - n * np.cos((float(phi_ext) - xs) / n)
    a, pe = mp.mpf(alpha), mp.mpf(phi_ext)
    du = lambda x: a * mp.sin(x) - mp.sin((pe - x) / n)
    return mp.findroot(du, mp.mpf(xs[np.argmin(u)]))


def golden_minimum(f, lo, hi, tol=1e-14, dps=30):
    """Golden-section search carried out in mpmath so it is not limited by sqrt(eps)."""
    mp.mp.dps = dps
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    g = (mp.sqrt(5) - 1) / 2
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    while hi - lo > tol:
        if f(c) < f(d):
            hi, d = d, c
            c = hi - g * (hi - lo)
        else:
            lo, c = c, d
            d = lo + g * (hi - lo)
    out = float((lo + hi) / 2)
    mp.mp.dps = 15
    return out


def mp_fd(f, x, n, h, dps=50):
    """4th-order central difference of an mpmath function, at ``dps`` digits."""
    with mp.workdps(dps):
        return float(central_fd(f, mp.mpf(x), n, mp.mpf(h)))


def fd_weights(n, order=4):
    """Central stencil weights for the n-th derivative with O(h^order) error.

    Solved exactly from the Taylor (Vandermonde) conditions in rationals.
    """
    from fractions import Fraction

    k = (n - 1) // 2 + order // 2
    pts = list(range(-k, k + 1))
    m = len(pts)
    A = [[Fraction(p) ** i for p in pts] for i in range(m)]
    b = [Fraction(math.factorial(n)) if i == n else Fraction(0) for i in range(m)]
    for col in range(m):  # Gauss-Jordan, exact
        piv = next(r for r in range(col, m) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(m):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [a - f * c for a, c in zip(A[r], A[col])]
                b[r] -= f * b[col]
    return pts, [b[i] / A[i][i] for i in range(m)]


def central_fd(f, x, n, h):
    """n-th derivative by a 4th-order accurate central difference."""
    pts, w = fd_weights(n)
    return sum(mp.mpf(wi.numerator) / wi.denominator * f(x + p * h) for p, wi in zip(pts, w)) / h**n


def eliminated_coefficients(alpha, phi_ext, M, xi, orders=(2, 3, 4), dps=40):
    """Derivatives of U(phi)/E_J at its minimum, by mpmath differentiation.

    U(phi) = M u(phi_s) + xi/2 (phi - M phi_s)^2 with phi_s from current
    conservation, solved by findroot at every phi.
    """
    with mp.workdps(dps):
        a, pe, xi = mp.mpf(alpha), mp.mpf(phi_ext), mp.mpf(xi)
        pmin = mp_minimum(alpha, phi_ext)
        phibar = M * pmin

        def phi_s(phi):
            f = lambda s: a * mp.sin(s) + mp.sin((s - pe) / 3) + xi * (M * s - phi)
            return mp.findroot(f, pmin + (phi - phibar) / M)

        def U(phi):
            s = phi_s(phi)
            return M * snail_u(s, a, pe) + xi / 2 * (phi - M * s) ** 2

        return [float(mp.diff(U, phibar, n)) for n in orders]


def numeric_half_width(gain_fn, peak, span):
    """Full width where gain_fn drops to half its peak, by bracketing and bisection."""
    from scipy.optimize import brentq

    half = peak / 2
    right = brentq(lambda w: gain_fn(w) - half, 0.0, span, xtol=1e-12 * span)
    left = brentq(lambda w: gain_fn(w) - half, -span, 0.0, xtol=1e-12 * span)
    return right - left


def lorentzian_response(u_s, omega_s, omega_a, kappa):
    return u_s / (omega_s - omega_a + 0.5j * kappa)


def rng(seed=1234):
    return np.random.default_rng(seed)


def three_tone_residual(mode, drives, a, order=1, omega_c=None, cascade_scale=1.0):
    """Residuals of the pump/signal/idler balance equations written out term by term."""
    ap, as_, ai = a
    Np, Ns, Ni = abs(ap) ** 2, abs(as_) ** 2, abs(ai) ** 2
    g3, g4, k, wa = mode.g3, mode.g4, mode.kappa, mode.omega_a
    wp, ws = drives.omega_p, drives.omega_s
    wi = wp - ws
    sp = g4 * (32 / 9 * Np + 16 * Ns + 16 * Ni)
    ss = g4 * (32 / 3 * Np + 12 * Ns + 12 * Ni)
    si = g4 * (32 / 3 * Np + 12 * Ns + 12 * Ni)
    if order == 2:
        c = cascade_scale * g3**2 / (wa if omega_c is None else omega_c)
        sp -= c * (928 / 45 * Np + 42 * Ns + 42 * Ni)
        ss -= c * 4 * (7 * Np + 15 * Ns + 36 * Ni)
        si -= c * 4 * (7 * Np + 36 * Ns + 15 * Ni)
    Fp = (wp - wa + 2j / 3 * k - sp) * ap - drives.u_p - 6 * g3 * ai * as_
    Fs = (ws - wa + 0.5j * k - ss) * as_ - drives.u_s - 4 * g3 * ap * np.conj(ai)
    Fi = (wi - wa + 0.5j * k - si) * ai - drives.u_i - 4 * g3 * ap * np.conj(as_)
    return np.array([Fp, Fs, Fi])


def closed_form_gain(delta_p, g, kappa, omega):
    """Phase-preserving gain with pump-shifted detuning delta_p and coupling g."""
    g2 = abs(g) ** 2
    return 1 + 4 * kappa**2 * g2 / ((delta_p**2 - omega**2 + kappa**2 / 4 - 4 * g2) ** 2
                                    + kappa**2 * omega**2)


def pump_only_amplitude(mode, omega_p, u_p):
    """Lowest-|alpha_p| root of the signal-free pump equation (cubic in |alpha_p|^2)."""
    a = omega_p - mode.omega_a
    b = 2 / 3 * mode.kappa
    c = 32 / 9 * mode.g4
    # |u|^2 = ((a - c n)^2 + b^2) n
    roots = np.roots([c * c, -2 * a * c, a * a + b * b, -abs(u_p) ** 2])
    n = min(r.real for r in roots if abs(r.imag) < 1e-9 * abs(r) and r.real >= 0)
    return u_p / (a - c * n + 1j * b)
