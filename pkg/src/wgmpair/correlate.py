"""Coincidence histograms, g2 normalization and model fits.

Lags are t_y - t_x.  Bins are centred on multiples of the bin width and
assigned symmetrically, bin(dt) = sign(dt) * floor((|dt| + b/2) / b), so an
autocorrelation histogram is exactly even in the lag.

Normalization follows g2 = C / (R_x R_y tau_bin T).  With a pulsed pump the
accidental coincidence level is not flat in the lag; the gated variant
replaces T by T * w(tau), where w is the circular cross-correlation of the
two channels' pulse-phase profiles (w = 1 for unmodulated light).
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, stats

from .errors import ContractError, ConvergenceError, DomainError
from .photonstream import PS, TimeTagStream

DEFAULT_BIN_WIDTH = 1e-9
DEFAULT_MAX_LAG = 200e-9
PAIR_CHUNK = 1 << 18
PHASE_OVERSAMPLE = 8
MIN_OVERLAP = 1e-3
WIDE_CI_CONDITION = 1e12


@dataclass
class CorrelationHistogram:
    bin_width: float
    lags: np.ndarray  # bin centres, s
    counts: np.ndarray
    rate_x: float
    rate_y: float
    duration: float
    overlap: np.ndarray | None = None  # gated accidental weight w(tau)
    g2: np.ndarray | None = None
    g2_err: np.ndarray | None = None
    gated: bool = False

    @property
    def max_lag(self) -> float:
        return float(self.lags[-1] + self.bin_width / 2)

    @property
    def half_bins(self) -> int:
        return (self.lags.size - 1) // 2


# -- histogramming ------------------------------------------------------------------

def _require_sorted(s: TimeTagStream, name: str):
    if s.tags.size > 1 and np.any(np.diff(s.tags) < 0):
        raise ContractError(f"{name} stream is not sorted")


def _bin_index(dt: np.ndarray, b: int) -> np.ndarray:
    return np.sign(dt) * ((np.abs(dt) + b // 2) // b)


def _count_block(tx, ty, b, half, exclude_zero):
    window = (half + 1) * b
    lo = np.searchsorted(ty, tx - window, side="left")
    hi = np.searchsorted(ty, tx + window, side="right")
    n = hi - lo
    total = int(n.sum())
    out = np.zeros(2 * half + 1, dtype=np.int64)
    if total == 0:
        return out
    starts = np.repeat(lo - np.cumsum(n) + n, n)
    j = np.arange(total) + starts
    dt = ty[j] - np.repeat(tx, n)
    if exclude_zero:
        dt = dt[dt != 0]
    k = _bin_index(dt, b)
    k = k[np.abs(k) <= half]
    out += np.bincount(k + half, minlength=2 * half + 1)
    return out


def coincidence_histogram(x: TimeTagStream, y: TimeTagStream,
                          bin_width: float = DEFAULT_BIN_WIDTH,
                          max_lag: float = DEFAULT_MAX_LAG,
                          exclude_self: bool | None = None,
                          repetition_rate: float | None = None,
                          threads: int = 1) -> CorrelationHistogram:
    """Histogram of t_y - t_x over all ordered pairs within the lag range.

    The lag range is rounded to a whole number of bins either side of zero.
    ``exclude_self`` drops the zero-lag self pairs of an autocorrelation and
    defaults to ``x is y``.  ``repetition_rate`` additionally stores the
    gated accidental weight for :func:`normalize_g2`.
    """
    if not bin_width > 0:
        raise DomainError("bin width must be positive")
    if not max_lag >= bin_width:
        raise DomainError("max_lag must be at least one bin width")
    _require_sorted(x, "x")
    _require_sorted(y, "y")
    b = int(round(bin_width / PS))
    if b < 1 or abs(b * PS - bin_width) > 1e-6 * bin_width:
        raise DomainError("bin width must be a whole number of picoseconds")
    half = int(round(max_lag / bin_width))
    exclude = (x is y) if exclude_self is None else exclude_self
    tx, ty = x.tags, y.tags
    blocks = [tx[i:i + PAIR_CHUNK] for i in range(0, tx.size, PAIR_CHUNK)] or [tx]

    def run(block):
        return _count_block(block, ty, b, half, exclude)

    if threads and threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(blk) for blk in blocks]
    counts = np.sum(parts, axis=0).astype(np.int64)
    duration = max(x.duration, y.duration)
    if x.duration != y.duration:
        duration = min(x.duration, y.duration)
    lags = np.arange(-half, half + 1) * b * PS
    hist = CorrelationHistogram(bin_width=b * PS, lags=lags, counts=counts,
                                rate_x=len(x) / x.duration, rate_y=len(y) / y.duration,
                                duration=duration)
    if repetition_rate is not None:
        hist.overlap = gated_overlap(x, y, repetition_rate, lags, b * PS)
    return hist


def brute_force_histogram(x: TimeTagStream, y: TimeTagStream, bin_width: float,
                          max_lag: float, exclude_self: bool = False) -> np.ndarray:
    """O(N M) reference pairing, for testing."""
    b = int(round(bin_width / PS))
    half = int(round(max_lag / bin_width))
    out = np.zeros(2 * half + 1, dtype=np.int64)
    ty = y.tags.tolist()
    for t1 in x.tags.tolist():
        for t2 in ty:
            dt = t2 - t1
            if exclude_self and dt == 0:
                continue
            k = (abs(dt) + b // 2) // b
            if k <= half:
                out[half + (k if dt >= 0 else -k)] += 1
    return out


def gated_overlap(x: TimeTagStream, y: TimeTagStream, repetition_rate: float,
                  lags: np.ndarray, bin_width: float) -> np.ndarray:
    """Accidental-coincidence weight w(tau) from folded pulse-phase profiles.

    With p_x, p_y the phase profiles scaled to unit mean, w(tau) is the
    period average of p_x(phi) p_y(phi + tau), averaged over each lag bin.
    """
    if not repetition_rate > 0:
        raise DomainError("repetition rate must be positive")
    period_ps = 1.0 / repetition_rate / PS
    b = bin_width / PS
    nphase = max(16, int(round(period_ps / b * PHASE_OVERSAMPLE)))
    step = period_ps / nphase

    def profile(s):
        if len(s) == 0:
            return np.ones(nphase)
        ph = np.floor(np.mod(s.tags.astype(float), period_ps) / step).astype(np.int64) % nphase
        h = np.bincount(ph, minlength=nphase).astype(float)
        return h / h.mean()

    px, py = profile(x), profile(y)
    corr = np.fft.irfft(np.conj(np.fft.rfft(px)) * np.fft.rfft(py), n=nphase) / nphase
    # Average over the shifts falling inside each lag bin.
    sub = np.arange(-PHASE_OVERSAMPLE, PHASE_OVERSAMPLE + 1) / (2 * PHASE_OVERSAMPLE)
    w = np.zeros(lags.size)
    for frac in sub:
        shift = (lags / PS + frac * b) / step
        i0 = np.floor(shift).astype(np.int64)
        f = shift - i0
        w += (1 - f) * corr[i0 % nphase] + f * corr[(i0 + 1) % nphase]
    return w / sub.size


def normalize_g2(hist: CorrelationHistogram, gated: bool = False) -> CorrelationHistogram:
    """Populate g2 and its Poisson uncertainty.

    ``gated=True`` divides by the pulse-aware accidental weight instead of
    the total measurement time alone; bins where that weight vanishes are NaN.
    """
    if not hist.rate_x > 0 or not hist.rate_y > 0:
        raise DomainError("both channel rates must be positive")
    if not hist.duration > 0:
        raise DomainError("measurement duration must be positive")
    scale = hist.rate_x * hist.rate_y * hist.bin_width * hist.duration
    denom = np.full(hist.counts.size, scale)
    if gated:
        if hist.overlap is None:
            raise ContractError("gated normalization needs a histogram built with repetition_rate")
        w = hist.overlap
        denom = np.where(w > MIN_OVERLAP * np.max(w), scale * w, np.nan)
    c = hist.counts.astype(float)
    return replace(hist, g2=c / denom, g2_err=np.sqrt(c) / denom, gated=gated)


def accidental_counts(hist: CorrelationHistogram) -> np.ndarray:
    base = hist.rate_x * hist.rate_y * hist.bin_width * hist.duration
    if hist.gated and hist.overlap is not None:
        return base * hist.overlap
    return np.full(hist.counts.size, base)


# -- fits --------------------------------------------------------------------------

def _ci(values, cov, dof, level=0.95):
    t = stats.t.ppf(0.5 + level / 2, max(dof, 1))
    err = np.sqrt(np.clip(np.diag(cov), 0, None))
    return [(v - t * e, v + t * e) for v, e in zip(values, err)], err


def _covariance(jac, chi2_red):
    jtj = jac.T @ jac
    d = np.sqrt(np.abs(np.diag(jtj)))
    d[d == 0] = 1.0
    # Condition of the correlation-scaled matrix, so parameter units do not matter.
    cond = np.linalg.cond(jtj / np.outer(d, d))
    try:
        cov = np.linalg.inv(jtj) * chi2_red
    except np.linalg.LinAlgError:
        return np.full(jtj.shape, np.inf), True
    wide = (not np.isfinite(cond)) or cond > WIDE_CI_CONDITION or not np.all(np.isfinite(cov))
    if wide:
        cov = np.where(np.isfinite(cov), cov, np.inf)
    return cov, wide


@dataclass
class ExpFitResult:
    A: float
    B: float
    C: float
    ci: dict[str, tuple[float, float]]
    stderr: dict[str, float]
    chi2_reduced: float
    dof: int
    wide_ci: bool = False
    cov: np.ndarray | None = field(default=None, repr=False)

    @property
    def bandwidth(self) -> float:
        return self.C / (2 * math.pi)

    @property
    def bandwidth_ci(self) -> tuple[float, float]:
        lo, hi = self.ci["C"]
        return lo / (2 * math.pi), hi / (2 * math.pi)

    @property
    def g2_zero(self) -> float:
        return self.A + self.B

    @property
    def g2_zero_ci(self) -> tuple[float, float]:
        var = self.cov[0, 0] + self.cov[1, 1] + 2 * self.cov[0, 1] if self.cov is not None else np.inf
        t = stats.t.ppf(0.975, max(self.dof, 1))
        e = math.sqrt(max(var, 0.0)) if np.isfinite(var) else math.inf
        return self.g2_zero - t * e, self.g2_zero + t * e

    def mean_photon_number(self) -> float:
        """<n> from the peak, 1 / (A + B - 2)."""
        return mean_photon_number(self.g2_zero)

    def mean_photon_number_from_b(self) -> float:
        """<n> from the amplitude alone, 1 / B (assumes A = 1)."""
        if not self.B > 0:
            raise DomainError("amplitude B must be positive")
        return 1.0 / self.B


def _exp_model(p, t):
    A, B, logC = p
    return A + B * np.exp(-np.exp(logC) * np.abs(t))


def _exp_initial(t, g):
    at = np.abs(t)
    far = at >= 0.75 * at.max()
    A0 = float(np.median(g[far])) if far.any() else float(np.median(g))
    peak = float(g[np.argmin(at)])
    B0 = peak - A0
    C0 = None
    if B0 != 0:
        order = np.argsort(at)
        excess = (g[order] - A0) / B0
        below = np.nonzero(excess < 0.5)[0]
        if below.size and at[order][below[0]] > 0:
            C0 = math.log(2) / at[order][below[0]]
    if C0 is None:
        C0 = 5.0 / at.max()
    return A0, B0, C0


def fit_exponential(hist: CorrelationHistogram) -> ExpFitResult:
    """Weighted Levenberg-Marquardt fit of A + B exp(-C |t|) to a normalized histogram."""
    if hist.g2 is None:
        raise ContractError("histogram must be normalized before fitting")
    t, g = hist.lags, hist.g2
    err = hist.g2_err if hist.g2_err is not None else np.ones_like(g)
    ok = np.isfinite(g) & np.isfinite(err)
    nz = ok & (hist.counts > 0)
    if np.count_nonzero(nz & (t < 0)) < 20 or np.count_nonzero(nz & (t > 0)) < 20:
        raise DomainError("need at least 20 populated bins on each side of zero lag")
    t, g, err = t[ok], g[ok], err[ok]
    # Poisson uncertainty, floored at one count so empty bins keep finite weight.
    floor = np.nanmin(err[err > 0]) if np.any(err > 0) else 1.0
    sigma = np.maximum(err, floor)
    A0, B0, C0 = _exp_initial(t, g)

    def resid(p):
        return (_exp_model(p, t) - g) / sigma

    sol = optimize.least_squares(resid, [A0, B0, math.log(C0)], method="lm",
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise ConvergenceError(
            f"exponential fit failed ({sol.message}); last residual norm {np.linalg.norm(sol.fun):.6g}")
    A, B, logC = sol.x
    C = math.exp(logC)
    dof = t.size - 3
    chi2 = float(np.sum(sol.fun ** 2)) / max(dof, 1)
    # Covariance in (A, B, C): chain rule through C = exp(logC).
    jac = sol.jac * np.array([1.0, 1.0, 1.0 / C])
    cov, wide = _covariance(jac, chi2)
    cis, se = _ci([A, B, C], cov, dof)
    return ExpFitResult(A=float(A), B=float(B), C=C,
                        ci=dict(zip("ABC", cis)), stderr=dict(zip("ABC", map(float, se))),
                        chi2_reduced=chi2, dof=dof, wide_ci=bool(wide), cov=cov)


def bootstrap_exponential(hist: CorrelationHistogram, fit: ExpFitResult,
                          resamples: int = 200, seed: int = 0) -> dict[str, tuple[float, float]]:
    """Parametric bootstrap 95% intervals for A, B, C.

    Synthetic histograms are the fitted curve plus Gaussian noise at the
    per-bin uncertainty scaled by the reduced chi-square; each is refitted.
    Meant as a check on the linearized intervals of :func:`fit_exponential`.
    """
    if resamples < 20:
        raise DomainError("need at least 20 bootstrap resamples")
    ok = np.isfinite(hist.g2) & np.isfinite(hist.g2_err)
    model = _exp_model([fit.A, fit.B, math.log(fit.C)], hist.lags)
    sigma = np.where(ok, hist.g2_err, 0.0) * math.sqrt(max(fit.chi2_reduced, 1e-300))
    rng = np.random.Generator(np.random.Philox(seed))
    draws = []
    for _ in range(resamples):
        g = np.where(ok, model + rng.normal(0.0, 1.0, model.size) * sigma, np.nan)
        try:
            f = fit_exponential(replace(hist, g2=g))
        except ConvergenceError:
            continue
        draws.append((f.A, f.B, f.C))
    if len(draws) < resamples // 2:
        raise ConvergenceError(f"only {len(draws)} of {resamples} bootstrap refits converged")
    lo, hi = np.percentile(np.array(draws), [2.5, 97.5], axis=0)
    return {name: (float(a), float(b)) for name, a, b in zip("ABC", lo, hi)}


@dataclass
class LorentzFitResult:
    center: float
    fwhm: float
    amplitude: float
    offset: float
    ci: dict[str, tuple[float, float]]
    chi2_reduced: float
    dof: int
    wide_ci: bool = False


def lorentzian(x, center, fwhm, amplitude, offset):
    return offset + amplitude / (1 + (2 * (np.asarray(x) - center) / fwhm) ** 2)


def fit_lorentzian(detuning, signal) -> LorentzFitResult:
    """Least-squares Lorentzian (dip or peak) fit to a frequency sweep."""
    x = np.asarray(detuning, dtype=float)
    y = np.asarray(signal, dtype=float)
    if x.shape != y.shape or x.size < 10:
        raise DomainError("need at least 10 (detuning, signal) points")
    order = np.argsort(x)
    x, y = x[order], y[order]
    edge = max(2, x.size // 10)
    off0 = float(np.median(np.r_[y[:edge], y[-edge:]]))
    k = int(np.argmax(np.abs(y - off0)))
    amp0 = float(y[k] - off0)
    half = np.abs(y - off0) >= 0.5 * abs(amp0)
    idx = np.nonzero(half)[0]
    fwhm0 = float(x[idx[-1]] - x[idx[0]]) if idx.size > 1 else float(x[-1] - x[0]) / 4
    fwhm0 = max(fwhm0, float(np.min(np.diff(x))) if x.size > 1 else 1.0)
    if not (x[-1] - x[0]) > fwhm0:
        raise DomainError("sweep must span more than one linewidth")
    scale_x = fwhm0

    def resid(p):
        c, logw, a, o = p
        return lorentzian(x, x[k] + c * scale_x, math.exp(logw) * scale_x, a, o) - y

    sol = optimize.least_squares(resid, [0.0, 0.0, amp0, off0], method="lm",
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise ConvergenceError(
            f"Lorentzian fit failed ({sol.message}); last residual norm {np.linalg.norm(sol.fun):.6g}")
    c, logw, a, o = sol.x
    center = x[k] + c * scale_x
    fwhm = math.exp(logw) * scale_x
    dof = x.size - 4
    chi2 = float(np.sum(sol.fun ** 2)) / max(dof, 1)
    jac = sol.jac * np.array([1.0 / scale_x, 1.0 / fwhm, 1.0, 1.0])
    cov, wide = _covariance(jac, chi2)
    cis, _ = _ci([center, fwhm, a, o], cov, dof)
    return LorentzFitResult(center=float(center), fwhm=float(fwhm), amplitude=float(a),
                            offset=float(o),
                            ci=dict(zip(("center", "fwhm", "amplitude", "offset"), cis)),
                            chi2_reduced=chi2, dof=dof, wide_ci=bool(wide))


# -- derived quantities ---------------------------------------------------------------

def mean_photon_number(g2_cross_zero: float) -> float:
    if not g2_cross_zero > 2:
        raise DomainError(f"g2_si(0) = {g2_cross_zero} <= 2: relation does not apply")
    return 1.0 / (g2_cross_zero - 2)


def effective_modes(g2_auto_zero: float) -> float:
    if not g2_auto_zero > 1:
        raise DomainError(f"g2_ss(0) = {g2_auto_zero} <= 1: no thermal bunching")
    return 1.0 / (g2_auto_zero - 1)


def normalized_pair_rate(coincidence_rate: float, pump_power_mw: float,
                         bandwidth_mhz: float) -> float:
    """Pairs/s per mW of pump per 20 MHz of bandwidth."""
    if not (coincidence_rate > 0 and pump_power_mw > 0 and bandwidth_mhz > 0):
        raise DomainError("rate, pump power and bandwidth must all be positive")
    return coincidence_rate / pump_power_mw * (20.0 / bandwidth_mhz)


def pair_detection_rate(hist: CorrelationHistogram, fit: ExpFitResult | None = None) -> float:
    """Coincidences above the accidental floor per second of measurement.

    The floor is A times the expected accidental counts (A = 1 without a fit).
    """
    base = accidental_counts(hist) * (fit.A if fit is not None else 1.0)
    excess = hist.counts - base
    return float(np.nansum(excess)) / hist.duration


# -- output ----------------------------------------------------------------------------

def histogram_csv(hist: CorrelationHistogram) -> str:
    buf = io.StringIO()
    buf.write("lag_s,counts,g2,g2_err\n")
    g = hist.g2 if hist.g2 is not None else np.full(hist.counts.size, np.nan)
    e = hist.g2_err if hist.g2_err is not None else np.full(hist.counts.size, np.nan)
    for t, c, gv, ev in zip(hist.lags, hist.counts, g, e):
        buf.write(f"{t:.6e},{int(c)},{gv:.8g},{ev:.8g}\n")
    return buf.getvalue()


def fit_report(fit: ExpFitResult, label: str = "", kind: str = "cross") -> str:
    """Text summary; ``kind`` selects <n> (cross) or effective modes (auto)."""
    lines = [f"# exponential fit A + B exp(-C|t|){' : ' + label if label else ''}"]
    for name in "ABC":
        v = getattr(fit, name)
        lo, hi = fit.ci[name]
        lines.append(f"{name} = {v:.6g}  (95% CI {lo:.6g} .. {hi:.6g})")
    lo, hi = fit.g2_zero_ci
    lines.append(f"g2(0) = A + B = {fit.g2_zero:.6g}  (95% CI {lo:.6g} .. {hi:.6g})")
    blo, bhi = fit.bandwidth_ci
    lines.append(f"bandwidth nu = C / 2pi = {fit.bandwidth / 1e6:.4f} MHz  "
                 f"(95% CI {blo / 1e6:.4f} .. {bhi / 1e6:.4f})")
    if kind == "cross" and fit.g2_zero > 2:
        lines.append(f"<n> = 1/(A+B-2) = {fit.mean_photon_number():.5g}")
    if kind == "cross" and fit.B > 0:
        lines.append(f"<n> = 1/B = {fit.mean_photon_number_from_b():.5g}")
    if kind == "auto" and fit.g2_zero > 1:
        lines.append(f"effective modes k = 1/(g2(0)-1) = {effective_modes(fit.g2_zero):.4g}")
    lines.append(f"reduced chi2 = {fit.chi2_reduced:.4g}, dof = {fit.dof}")
    if fit.wide_ci:
        lines.append("WARNING: near-singular covariance, confidence limits unreliable")
    return "\n".join(lines) + "\n"


def svg_plot(hist: CorrelationHistogram, fit: ExpFitResult | None = None,
             title: str = "g2") -> str:
    """Data points and fit curve as a standalone SVG document."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(hist.lags * 1e9, hist.g2, ".", ms=3, label="data")
    if fit is not None:
        t = np.linspace(hist.lags[0], hist.lags[-1], 2001)
        ax.plot(t * 1e9, fit.A + fit.B * np.exp(-fit.C * np.abs(t)), "-", label="fit")
    ax.set_xlabel("lag (ns)")
    ax.set_ylabel("g2")
    ax.set_title(title)
    ax.legend()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
