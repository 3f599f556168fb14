"""Whispering-gallery-mode eigenfrequencies of an oblate spheroidal resonator.

Modes are labelled by radial order q, azimuthal order m and polar order
p = l - m.  The resonance condition is written for the internal size
parameter x = 2 pi R n nu / c.  For an axisymmetric spheroid with equatorial
radius R and rim curvature radius r, the polar confinement is folded into an
effective Bessel order

    nu_eff = m + (p + 1/2) sqrt(R / r)

which equals l + 1/2 for a sphere, so the sphere degeneracy in (m, p) at
fixed l holds exactly.  The size parameter is then the q-th root of the
Riccati-Bessel matching condition

    n P psi'(x) chi(x/n) = psi(x) chi'(x/n),   P = 1 (TE) or 1/n^2 (TM)

with chi the Riccati-Neumann function (radiation leakage neglected).  Up to
EXACT_ORDER_LIMIT this equation is solved directly; above it the
Airy-type asymptotic expansion (Demchenko & Gorodetsky 2013, terms
through nu^-1) is used.  Its truncation error falls roughly as nu^-4/3:
below 1e-6 relative at the crossover (worst case TM at low index) and about
1e-10 at the orders of a millimetre-size resonator in the visible.

In a z-cut crystal the extraordinary index couples to TE modes (field along
the symmetry axis) and the ordinary index to TM modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import ConvergenceError, DomainError
from .materials import MaterialModel, Polarization

C_LIGHT = 299_792_458.0

EXACT_ORDER_LIMIT = 1000.0
MAX_ITERATIONS = 50
FREQUENCY_TOLERANCE = 1e3  # Hz


@dataclass(frozen=True)
class ResonatorGeometry:
    major_radius: float
    polar_radius: float

    def __post_init__(self):
        if not self.major_radius > 0 or not self.polar_radius > 0:
            raise DomainError("resonator radii must be positive")
        if self.polar_radius > self.major_radius * (1 + 1e-12):
            raise DomainError("polar_radius must not exceed major_radius (oblate or spherical only)")

    @property
    def is_sphere(self) -> bool:
        return self.polar_radius == self.major_radius

    @property
    def polar_factor(self) -> float:
        return math.sqrt(self.major_radius / self.polar_radius)


@dataclass(frozen=True)
class ModeIndex:
    q: int
    m: int
    p: int
    polarization: Polarization

    def __post_init__(self):
        if self.q < 1:
            raise DomainError(f"radial order q must be >= 1, got {self.q}")
        if self.m < 1:
            raise DomainError(f"azimuthal order m must be >= 1, got {self.m}")
        if self.p < 0:
            raise DomainError(f"polar order p must be >= 0, got {self.p}")

    @property
    def l(self) -> int:
        return self.m + self.p

    def replace(self, **kw) -> "ModeIndex":
        d = dict(q=self.q, m=self.m, p=self.p, polarization=self.polarization)
        d.update(kw)
        return ModeIndex(**d)


@dataclass(frozen=True)
class ModeFrequency:
    frequency: float
    vacuum_wavelength: float
    size_parameter: float
    index: float


def airy_negative_zero(q: int) -> float:
    """Magnitude of the q-th zero of Ai on the negative real axis."""
    if q < 1:
        raise DomainError(f"q must be >= 1, got {q}")
    return float(-special.ai_zeros(q)[0][-1])


def refractive_index(material: MaterialModel, pol: Polarization,
                     wavelength: float, temperature: float) -> float:
    """Index at a vacuum wavelength given in meters."""
    return material.index(pol, np.asarray(wavelength) * 1e6, temperature)


def boundary_factor(pol: Polarization, n):
    return 1.0 if pol is Polarization.EXTRAORDINARY else 1.0 / (n * n)


def effective_order(geom: ResonatorGeometry, m, p):
    return m + (np.asarray(p) + 0.5) * geom.polar_factor


# -- sphere-type resonance condition ------------------------------------------

def _riccati(order, z):
    """psi, psi', chi, chi' for real Bessel order (order = l + 1/2)."""
    s = np.sqrt(np.pi * z / 2)
    j, jp = special.jv(order, z), special.jvp(order, z)
    y, yp = special.yv(order, z), special.yvp(order, z)
    with np.errstate(invalid="ignore", over="ignore"):
        psi = s * j
        dpsi = s * (jp + j / (2 * z))
        chi = -s * y
        dchi = -s * (yp + y / (2 * z))
    return psi, dpsi, chi, dchi


def characteristic(x, order, n, P):
    """Residual of the real resonance condition at internal size parameter x."""
    psi, dpsi, _, _ = _riccati(order, x)
    _, _, chi, dchi = _riccati(order, x / n)
    with np.errstate(invalid="ignore", over="ignore"):
        return n * P * dpsi * chi - psi * dchi


def _exact_size_parameter(order: float, q: int, n: float, P: float) -> float:
    # No roots below x = order: psi, psi', chi > 0 and chi' < 0 there.
    start = max(order, 0.25)
    step = 0.02 if order < 20 else 0.1
    span = 4 * (order ** (1 / 3) + 2)
    limit = start + 10 * q * span
    found = 0
    while start < limit:
        grid = np.arange(start, start + span + step / 2, step)
        vals = characteristic(grid, order, n, P)
        flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        if not np.all(np.isfinite(vals)):
            raise OverflowError("Neumann function overflow")
        if found + len(flips) >= q:
            i = flips[q - found - 1]
            return optimize.brentq(characteristic, grid[i], grid[i + 1], args=(order, n, P),
                                   xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
        found += len(flips)
        start = grid[-1]
    raise ConvergenceError(f"resonance q={q} of order {order} not bracketed below x={limit:.3f}")


def asymptotic_size_parameter(order, q: int, n, P):
    """Airy-type large-order expansion of the q-th resonance (vectorized in order, n, P)."""
    a = airy_negative_zero(q)
    h = np.asarray(order, dtype=float) / 2
    e = np.sqrt(n * n - 1)
    x = (2 * h + a * h ** (1 / 3)
         + 0.15 * a * a * h ** (-1 / 3)
         + (10 - a ** 3) / 1400 / h
         - n * P / e
         - a * (3 - 2 * P * P) * P * n ** 3 * h ** (-2 / 3) / (6 * e ** 3)
         - n * n * P * (P - 1) * (P * P * n * n + P * n * n - 1) / h / (4 * e ** 4))
    return x


def size_parameter(order, q: int, n, P):
    """Internal size parameter x of the q-th resonance for Bessel order(s)."""
    order = np.asarray(order, dtype=float)
    n_arr, P_arr = np.broadcast_arrays(np.asarray(n, float), np.asarray(P, float))
    if order.ndim == 0 and n_arr.ndim == 0:
        if order <= EXACT_ORDER_LIMIT:
            try:
                return _exact_size_parameter(float(order), q, float(n), float(P))
            except OverflowError:
                pass
        return float(asymptotic_size_parameter(order, q, n, P))
    order, n_arr, P_arr = np.broadcast_arrays(order, n_arr, P_arr)
    out = np.asarray(asymptotic_size_parameter(order, q, n_arr, P_arr), dtype=float)
    small = order <= EXACT_ORDER_LIMIT
    for idx in zip(*np.nonzero(small)):
        try:
            out[idx] = _exact_size_parameter(float(order[idx]), q, float(n_arr[idx]),
                                             float(P_arr[idx]))
        except OverflowError:
            pass
    return out


# -- self-consistent frequencies ------------------------------------------------

def _solve(geom, mat, q, m, p, pol, temperature):
    """Vectorized fixed-point iteration on (frequency, index)."""
    order = effective_order(geom, np.asarray(m, float), p)
    lam_um = 2 * np.pi * geom.major_radius * 1e6 * 2.0 / np.maximum(order, 1.0)
    lo, hi = mat.wavelength_window_um
    n = mat.index(pol, np.clip(lam_um, lo, hi), temperature)
    freq = np.zeros_like(np.asarray(order, float))
    for _ in range(MAX_ITERATIONS):
        x = size_parameter(order, q, n, boundary_factor(pol, n))
        new = x * C_LIGHT / (2 * np.pi * geom.major_radius * n)
        lam_um = C_LIGHT / new * 1e6
        n = mat.index(pol, lam_um, temperature)
        done = np.max(np.abs(new - freq)) < FREQUENCY_TOLERANCE
        freq = new
        if done:
            break
    else:
        raise ConvergenceError(
            f"frequency iteration did not converge in {MAX_ITERATIONS} steps (q={q}, p={p})")
    # Final pass so that n is evaluated at the returned wavelength.
    x = size_parameter(order, q, n, boundary_factor(pol, n))
    freq = x * C_LIGHT / (2 * np.pi * geom.major_radius * n)
    mat.check_window(C_LIGHT / freq * 1e6, temperature)
    return freq, x, n


def mode_frequency(geom: ResonatorGeometry, mat: MaterialModel, mode: ModeIndex,
                   temperature: float) -> ModeFrequency:
    freq, x, n = _solve(geom, mat, mode.q, mode.m, mode.p, mode.polarization, temperature)
    freq, x, n = float(freq), float(x), float(n)
    return ModeFrequency(frequency=freq, vacuum_wavelength=C_LIGHT / freq,
                         size_parameter=x, index=n)


def mode_frequencies(geom: ResonatorGeometry, mat: MaterialModel, q: int, m, p: int,
                     pol: Polarization, temperature: float) -> np.ndarray:
    """Frequencies (Hz) for an array of azimuthal orders at fixed q, p."""
    m = np.asarray(m)
    if m.size == 0:
        return np.zeros(0)
    if np.any(m < 1):
        raise DomainError("azimuthal orders must be >= 1")
    freq, _, _ = _solve(geom, mat, q, m, p, pol, temperature)
    return np.asarray(freq, dtype=float)


def free_spectral_range(geom: ResonatorGeometry, mat: MaterialModel, mode: ModeIndex,
                        temperature: float) -> float:
    f0 = mode_frequency(geom, mat, mode, temperature).frequency
    f1 = mode_frequency(geom, mat, mode.replace(m=mode.m + 1), temperature).frequency
    return f1 - f0


def linewidth_to_q_factor(optical_frequency: float, linewidth_fwhm: float) -> float:
    if not optical_frequency > 0 or not linewidth_fwhm > 0:
        raise DomainError("frequency and linewidth must both be positive")
    return optical_frequency / linewidth_fwhm


def azimuthal_order_near(geom: ResonatorGeometry, mat: MaterialModel, q: int, p: int,
                         pol: Polarization, wavelength: float, temperature: float) -> int:
    """Azimuthal order whose resonance lies closest to a vacuum wavelength (m)."""
    target = C_LIGHT / wavelength
    n = refractive_index(mat, pol, wavelength, temperature)
    m = max(1, int(round(2 * np.pi * geom.major_radius * n / wavelength)))
    for _ in range(60):
        f = mode_frequencies(geom, mat, q, np.array([m - 1, m, m + 1]), p, pol, temperature)
        fsr = f[2] - f[1]
        step = int(round((target - f[1]) / fsr))
        if step == 0:
            break
        m = max(1, m + step)
    f = mode_frequencies(geom, mat, q, np.array([max(1, m - 1), m, m + 1]), p, pol, temperature)
    best = int(np.argmin(np.abs(f - target)))
    return [max(1, m - 1), m, m + 1][best]


def mode_near_wavelength(geom, mat, q: int, p: int, pol: Polarization,
                         wavelength: float, temperature: float) -> ModeIndex:
    m = azimuthal_order_near(geom, mat, q, p, pol, wavelength, temperature)
    return ModeIndex(q=q, m=m, p=p, polarization=pol)
