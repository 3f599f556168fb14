"""Phase-matching of pump/signal/idler mode triples in a WGM resonator.

Angular momentum conservation between the three spherical-harmonic-like mode
profiles allows a triple only if

    m_p = m_s + m_i,   |l_s - l_i| <= l_p <= l_s + l_i,   l_p + l_s + l_i even.

Writing l = m + p, the first rule turns the parity condition into a
constraint on the polar orders alone: a = p_s + p_i - p_p must be an even
non-negative integer, the cluster number.  For a pump layer p_p, cluster a
holds exactly p_p + a + 1 polar combinations (p_s, p_i).

Energy conservation nu_p = nu_s + nu_i is then checked numerically with the
dispersion model in :mod:`wgmpair.modes`.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, NotFoundError, UnsupportedScaleError
from .materials import MaterialModel, Polarization
from .modes import (C_LIGHT, ModeIndex, ResonatorGeometry, azimuthal_order_near,
                    boundary_factor, mode_frequencies, mode_frequency, size_parameter)
from .wigner import gaunt

DEFAULT_TOLERANCE = 26.8e6  # Hz, one down-converted linewidth
DEFAULT_PUMP_LINEWIDTH = 78.1e6  # Hz
RADIAL_L_CAP = 100


@dataclass(frozen=True)
class ModeTriple:
    pump: ModeIndex
    signal: ModeIndex
    idler: ModeIndex
    allow_any_polarization: bool = False

    def __post_init__(self):
        if self.allow_any_polarization:
            return
        if (self.pump.polarization is not Polarization.EXTRAORDINARY
                or self.signal.polarization is not Polarization.ORDINARY
                or self.idler.polarization is not Polarization.ORDINARY):
            raise DomainError("type-I triple needs an extraordinary pump and ordinary signal/idler")


@dataclass(frozen=True)
class PhaseMatchSolution:
    triple: ModeTriple
    pump_frequency: float
    signal_frequency: float
    idler_frequency: float
    detuning: float
    cluster: int

    @property
    def signal_wavelength(self) -> float:
        return C_LIGHT / self.signal_frequency

    @property
    def idler_wavelength(self) -> float:
        return C_LIGHT / self.idler_frequency

    def sort_key(self):
        t = self.triple
        return (abs(self.detuning), t.signal.q, t.idler.q, t.signal.p, t.idler.p, t.signal.m)


# -- selection rules and cluster algebra --------------------------------------

def selection_rules_satisfied(triple: ModeTriple) -> bool:
    p, s, i = triple.pump, triple.signal, triple.idler
    if p.m != s.m + i.m:
        return False
    if not abs(s.l - i.l) <= p.l <= s.l + i.l:
        return False
    return (p.l + s.l + i.l) % 2 == 0


def cluster_number(p_p: int, p_s: int, p_i: int) -> int | None:
    """Cluster number a, or None when the polar orders cannot phase-match."""
    if min(p_p, p_s, p_i) < 0:
        raise DomainError("polar orders must be non-negative")
    a = p_s + p_i - p_p
    if a < 0 or a % 2:
        return None
    return a


def cluster_size(p_p: int, a: int) -> int:
    if p_p < 0:
        raise DomainError("p_p must be non-negative")
    if a < 0 or a % 2:
        raise DomainError(f"cluster number must be even and non-negative, got {a}")
    return p_p + a + 1


def cluster_members(p_p: int, a: int) -> list[tuple[int, int]]:
    """The (p_s, p_i) combinations of cluster a in pump layer p_p."""
    total = cluster_size(p_p, a) - 1
    return [(ps, total - ps) for ps in range(total + 1)]


# -- overlap integrals -----------------------------------------------------------

def angular_overlap(l_p: int, m_p: int, l_s: int, m_s: int, l_i: int, m_i: int) -> float:
    """Angular factor of the three-mode overlap, int Y_s Y_i Y_p* dOmega."""
    return gaunt(l_s, m_s, l_i, m_i, l_p, m_p)


def _radial_profile(l, q, n, pol):
    x = size_parameter(l + 0.5, q, n, boundary_factor(pol, n))
    return lambda r: special.spherical_jn(l, x * r)


def radial_overlap(q_p: int, q_s: int, q_i: int, l_p: int, l_s: int, l_i: int,
                   index: float = 1.45,
                   polarizations=(Polarization.EXTRAORDINARY, Polarization.ORDINARY,
                                  Polarization.ORDINARY),
                   nodes: int = 400) -> float:
    """Radial factor of the overlap for a sphere of unit radius.

    Each radial profile j_l(k r) is normalized to unit norm with weight r^2 on
    [0, 1] and the triple product is integrated with Gauss-Legendre
    quadrature.  Qualitative only; orders are capped at RADIAL_L_CAP.
    """
    if max(l_p, l_s, l_i) > RADIAL_L_CAP:
        raise UnsupportedScaleError(
            f"radial overlap is limited to l <= {RADIAL_L_CAP}, got {max(l_p, l_s, l_i)}")
    r, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * (r + 1)
    w = 0.5 * w
    profiles = []
    for l, q, pol in zip((l_p, l_s, l_i), (q_p, q_s, q_i), polarizations):
        f = _radial_profile(l, q, index, pol)(r)
        f = f / math.sqrt(np.sum(w * f * f * r * r))
        profiles.append(f)
    fp, fs, fi = profiles
    return float(np.sum(w * fs * fi * fp * r * r))


def radial_overlap_adaptive(q_p, q_s, q_i, l_p, l_s, l_i, index=1.45,
                            polarizations=(Polarization.EXTRAORDINARY, Polarization.ORDINARY,
                                           Polarization.ORDINARY)) -> float:
    """Same quantity by adaptive quadrature; slower, used for cross-checks."""
    fns = [_radial_profile(l, q, index, pol)
           for l, q, pol in zip((l_p, l_s, l_i), (q_p, q_s, q_i), polarizations)]
    opts = dict(limit=500, epsabs=1e-14, epsrel=1e-12)
    norms = [math.sqrt(integrate.quad(lambda r, f=f: f(r) ** 2 * r * r, 0, 1, **opts)[0])
             for f in fns]
    val = integrate.quad(lambda r: fns[0](r) * fns[1](r) * fns[2](r) * r * r, 0, 1, **opts)[0]
    return val / (norms[0] * norms[1] * norms[2])


# -- energy conservation scan -----------------------------------------------------

@dataclass
class _FamilyScan:
    q_s: int
    q_i: int
    p_s: int
    p_i: int
    m_s: np.ndarray
    f_s: np.ndarray
    f_i: np.ndarray
    detuning: np.ndarray


def _scan_family(pump, f_p, geom, mat, temperature, window, q_s, q_i, p_s, p_i,
                 pol_s, pol_i) -> _FamilyScan:
    lam_lo, lam_hi = window
    m_lo = azimuthal_order_near(geom, mat, q_s, p_s, pol_s, lam_hi, temperature) - 2
    m_hi = azimuthal_order_near(geom, mat, q_s, p_s, pol_s, lam_lo, temperature) + 2
    m_s = np.arange(max(1, m_lo), min(m_hi, pump.m - 1) + 1)
    empty = _FamilyScan(q_s, q_i, p_s, p_i, *(np.zeros(0),) * 4)
    if m_s.size == 0:
        return empty
    f_s = mode_frequencies(geom, mat, q_s, m_s, p_s, pol_s, temperature)
    inside = (C_LIGHT / f_s >= lam_lo) & (C_LIGHT / f_s <= lam_hi)
    # Idler must stay inside the material window.
    wl_lo, wl_hi = (w * 1e-6 for w in mat.wavelength_window_um)
    f_i_guess = f_p - f_s
    with np.errstate(divide="ignore"):
        lam_i_guess = np.where(f_i_guess > 0, C_LIGHT / np.maximum(f_i_guess, 1.0), np.inf)
    inside &= (lam_i_guess > wl_lo * 1.01) & (lam_i_guess < wl_hi * 0.99)
    m_s, f_s = m_s[inside], f_s[inside]
    if m_s.size == 0:
        return empty
    f_i = mode_frequencies(geom, mat, q_i, pump.m - m_s, p_i, pol_i, temperature)
    return _FamilyScan(q_s, q_i, p_s, p_i, m_s, f_s, f_i, f_p - f_s - f_i)


def _families(p_p, q_max, p_max, a_max=None):
    out = []
    for q_s in range(1, q_max + 1):
        for q_i in range(1, q_max + 1):
            for p_s in range(p_max + 1):
                for p_i in range(p_max + 1):
                    a = cluster_number(p_p, p_s, p_i)
                    if a is None or (a_max is not None and a > a_max):
                        continue
                    out.append((q_s, q_i, p_s, p_i))
    return out


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def enumerate_phase_matches(pump: ModeIndex, geom: ResonatorGeometry, mat: MaterialModel,
                            temperature: float, signal_window: tuple[float, float],
                            q_max: int = 3, p_max: int = 10,
                            tolerance: float = DEFAULT_TOLERANCE,
                            signal_polarization: Polarization = Polarization.ORDINARY,
                            idler_polarization: Polarization = Polarization.ORDINARY,
                            threads: int = 1) -> list[PhaseMatchSolution]:
    """All triples within ``tolerance`` of energy conservation, best first.

    ``signal_window`` is a (min, max) vacuum wavelength range in meters.
    """
    if not tolerance > 0:
        raise DomainError("tolerance must be positive")
    lam_lo, lam_hi = signal_window
    if not 0 < lam_lo < lam_hi:
        raise DomainError("signal window must be an increasing pair of positive wavelengths")
    any_pol = (pump.polarization is not Polarization.EXTRAORDINARY
               or signal_polarization is not Polarization.ORDINARY
               or idler_polarization is not Polarization.ORDINARY)
    f_p = mode_frequency(geom, mat, pump, temperature).frequency

    def run(fam):
        q_s, q_i, p_s, p_i = fam
        scan = _scan_family(pump, f_p, geom, mat, temperature, signal_window,
                            q_s, q_i, p_s, p_i, signal_polarization, idler_polarization)
        hits = np.nonzero(np.abs(scan.detuning) <= tolerance)[0]
        found = []
        a = cluster_number(pump.p, p_s, p_i)
        for k in hits:
            m_s = int(scan.m_s[k])
            triple = ModeTriple(
                pump,
                ModeIndex(q_s, m_s, p_s, signal_polarization),
                ModeIndex(q_i, pump.m - m_s, p_i, idler_polarization),
                allow_any_polarization=any_pol)
            if not selection_rules_satisfied(triple):
                continue
            found.append(PhaseMatchSolution(triple, f_p, float(scan.f_s[k]),
                                            float(scan.f_i[k]), float(scan.detuning[k]), a))
        return found

    results = _map(run, _families(pump.p, q_max, p_max), threads)
    merged = [sol for chunk in results for sol in chunk]
    merged.sort(key=PhaseMatchSolution.sort_key)
    return merged


# -- cluster spectrum ------------------------------------------------------------

@dataclass
class ClusterGroup:
    a: int
    solutions: list[PhaseMatchSolution]
    crossing_wavelengths: list[float]
    expected_size: int

    @property
    def size(self) -> int:
        return len(self.solutions)

    @property
    def centroid_wavelength(self) -> float:
        return float(np.mean(self.crossing_wavelengths))

    @property
    def detuning_spread(self) -> float:
        """Spread of the members' energy mismatch, taken modulo one azimuthal step.

        Neighbouring azimuthal orders shift the mismatch by a fixed step, so
        which integer m a member lands on is arbitrary; what distinguishes
        members is where within that step their phase-matching point sits.
        """
        if len(self.solutions) < 2:
            return 0.0
        ref = self.solutions[0].detuning
        vals = []
        for sol, step in zip(self.solutions, self._steps):
            d = sol.detuning - ref
            d -= step * round(d / step) if step else 0.0
            vals.append(d)
        return float(max(vals) - min(vals))

    _steps: list[float] = field(default_factory=list, repr=False)


@dataclass
class ClusterSpectrum:
    pump: ModeIndex
    temperature: float
    groups: dict[int, ClusterGroup]

    def gaps_nm(self) -> list[tuple[int, int, float]]:
        keys = sorted(a for a, g in self.groups.items() if g.size)
        return [(a, b, abs(self.groups[a].centroid_wavelength
                           - self.groups[b].centroid_wavelength) * 1e9)
                for a, b in zip(keys, keys[1:])]


def cluster_spectrum(pump: ModeIndex, geom: ResonatorGeometry, mat: MaterialModel,
                     temperature: float, a_max: int = 10,
                     signal_window: tuple[float, float] = (0.9e-6, 1.064e-6),
                     q_max: int = 1, threads: int = 1) -> ClusterSpectrum:
    """Group the phase-matching points of a fundamental pump mode by cluster.

    For every polar family (p_s, p_i) of cluster a <= a_max the energy
    mismatch is scanned over the signal window; where it changes sign, the
    azimuthal order nearest to exact conservation is the family's solution.
    Membership comes from the polar indices, never from spectral proximity.
    """
    if pump.q != 1 or pump.p != 0:
        raise DomainError("cluster spectrum needs a fundamental pump mode (q=1, p=0)")
    f_p = mode_frequency(geom, mat, pump, temperature).frequency
    pol_s = pol_i = Polarization.ORDINARY

    def run(fam):
        q_s, q_i, p_s, p_i = fam
        scan = _scan_family(pump, f_p, geom, mat, temperature, signal_window,
                            q_s, q_i, p_s, p_i, pol_s, pol_i)
        d = scan.detuning
        flips = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)[0]
        if not flips.size:
            return None
        best = min(flips, key=lambda i: min(abs(d[i]), abs(d[i + 1])))
        k = best if abs(d[best]) <= abs(d[best + 1]) else best + 1
        frac = d[best] / (d[best] - d[best + 1])
        f_cross = scan.f_s[best] + frac * (scan.f_s[best + 1] - scan.f_s[best])
        m_s = int(scan.m_s[k])
        triple = ModeTriple(pump, ModeIndex(q_s, m_s, p_s, pol_s),
                            ModeIndex(q_i, pump.m - m_s, p_i, pol_i))
        sol = PhaseMatchSolution(triple, f_p, float(scan.f_s[k]), float(scan.f_i[k]),
                                 float(d[k]), cluster_number(0, p_s, p_i))
        return sol, C_LIGHT / f_cross, float(abs(d[best + 1] - d[best]))

    fams = _families(0, q_max, a_max, a_max=a_max)
    results = _map(run, fams, threads)
    groups = {a: ClusterGroup(a, [], [], cluster_size(0, a) * q_max * q_max)
              for a in range(0, a_max + 1, 2)}
    for res in results:
        if res is None:
            continue
        sol, lam_cross, step = res
        g = groups[sol.cluster]
        g.solutions.append(sol)
        g.crossing_wavelengths.append(lam_cross)
        g._steps.append(step)
    return ClusterSpectrum(pump, temperature, groups)


# -- temperature tuning -------------------------------------------------------------

def triple_detuning(triple: ModeTriple, geom, mat, temperature: float) -> float:
    return (mode_frequency(geom, mat, triple.pump, temperature).frequency
            - mode_frequency(geom, mat, triple.signal, temperature).frequency
            - mode_frequency(geom, mat, triple.idler, temperature).frequency)


def phase_match_temperature(triple: ModeTriple, geom: ResonatorGeometry, mat: MaterialModel,
                            temperature_range: tuple[float, float],
                            pump_linewidth: float = DEFAULT_PUMP_LINEWIDTH) -> float:
    """Temperature at which the triple conserves energy, by bracketed root finding."""
    t_lo, t_hi = temperature_range
    d_lo = triple_detuning(triple, geom, mat, t_lo)
    d_hi = triple_detuning(triple, geom, mat, t_hi)
    if np.sign(d_lo) == np.sign(d_hi) and d_lo != 0:
        raise NotFoundError(
            f"detuning does not change sign on [{t_lo}, {t_hi}] C: "
            f"{d_lo / 1e6:.3f} MHz at {t_lo} C, {d_hi / 1e6:.3f} MHz at {t_hi} C")
    t = optimize.brentq(lambda T: triple_detuning(triple, geom, mat, T), t_lo, t_hi,
                        xtol=1e-9, rtol=1e-14, maxiter=200)
    d = triple_detuning(triple, geom, mat, t)
    if abs(d) >= 0.1 * pump_linewidth:
        raise NotFoundError(f"root at {t} C leaves {d / 1e6:.3f} MHz residual detuning")
    return t


# -- CSV output ----------------------------------------------------------------------

SOLUTION_COLUMNS = (
    "q_p", "m_p", "p_p", "q_s", "m_s", "p_s", "q_i", "m_i", "p_i",
    "pump_frequency_hz", "signal_frequency_hz", "idler_frequency_hz",
    "pump_wavelength_nm", "signal_wavelength_nm", "idler_wavelength_nm",
    "detuning_hz", "cluster_a",
)

CLUSTER_COLUMNS = (
    "cluster_a", "size", "expected_size", "centroid_wavelength_nm",
    "detuning_spread_hz", "gap_to_next_nm",
)


def solutions_csv(solutions) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SOLUTION_COLUMNS)
    for s in solutions:
        t = s.triple
        w.writerow([t.pump.q, t.pump.m, t.pump.p, t.signal.q, t.signal.m, t.signal.p,
                    t.idler.q, t.idler.m, t.idler.p,
                    f"{s.pump_frequency:.6f}", f"{s.signal_frequency:.6f}",
                    f"{s.idler_frequency:.6f}",
                    f"{C_LIGHT / s.pump_frequency * 1e9:.6f}",
                    f"{s.signal_wavelength * 1e9:.6f}", f"{s.idler_wavelength * 1e9:.6f}",
                    f"{s.detuning:.3f}", s.cluster])
    return buf.getvalue()


def cluster_csv(spectrum: ClusterSpectrum) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CLUSTER_COLUMNS)
    gaps = {a: gap for a, _, gap in spectrum.gaps_nm()}
    for a in sorted(spectrum.groups):
        g = spectrum.groups[a]
        centroid = f"{g.centroid_wavelength * 1e9:.6f}" if g.size else ""
        gap = f"{gaps[a]:.6f}" if a in gaps else ""
        w.writerow([a, g.size, g.expected_size, centroid, f"{g.detuning_spread:.3f}", gap])
    return buf.getvalue()
