"""Monte Carlo time-tag streams for a pulsed resonator-enhanced pair source.

Generative model, per thermal mode j:

* "coherence cells" arrive as a stationary Poisson process of rate
  gamma = 2 pi nu, where nu is the down-converted bandwidth;
* each cell holds a Bose-Einstein distributed number of pairs with mean
  mu_j = R_j / gamma, R_j being the mode's in-pulse pair rate;
* every photon of every pair leaves the cavity after its own exponential
  ring-down delay of mean 1 / gamma.

Photons are then gated by the pump schedule (rectangular gates, or
raised-cosine edges applied as a keep probability).  Because the gate only
thins a stationary process, inside the pulses this gives exactly

    g_ss(tau) = 1 + sum_j w_j^2 exp(-gamma |tau|)
    g_si(tau) = 1 + (sum_j w_j^2 + pi nu / R) exp(-gamma |tau|)

so a single mode has g_ss(0) = 2, k equal modes 1 + 1/k, and the
cross-correlation peak is 2 + 1/<n> with <n> = R / (pi nu) for k = 1.

Detection is then modelled channel by channel: efficiency thinning,
Gaussian jitter, Poisson dark counts, optional non-paralyzable dead time,
rounding to integer picoseconds with ties pushed forward by 1 ps.

Randomness comes from numpy's Philox generator.  Each (mode, time chunk) and
each (channel, stage) has its own substream derived from the seed, so the
result does not depend on how many threads are used.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError

PS = 1e-12
CHUNK_SECONDS = 1e-3
RINGDOWN_MARGIN = 40.0  # ring-down times simulated before t = 0
DARK_LABEL = -1
SMOOTH_EDGE_FRACTION = 0.1

# Substream tags, kept stable so seeds stay reproducible across versions.
_STREAM_CELLS = 1
_STREAM_DETECT = 2
_STREAM_SPLIT = 3
_STREAM_BANDPASS = 4


def _rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PumpSchedule:
    pulse_length: float
    repetition_rate: float
    shape: str = "rectangular"

    def __post_init__(self):
        if not self.pulse_length > 0 or not self.repetition_rate > 0:
            raise DomainError("pulse length and repetition rate must be positive")
        if self.pulse_length * self.repetition_rate > 1 + 1e-12:
            raise DomainError(
                f"duty cycle {self.pulse_length * self.repetition_rate:.4g} exceeds 1")
        if self.shape not in ("rectangular", "smoothed"):
            raise DomainError(f"unknown pulse shape {self.shape!r}")

    @property
    def period(self) -> float:
        return 1.0 / self.repetition_rate

    @property
    def duty_cycle(self) -> float:
        return self.pulse_length * self.repetition_rate

    def transmission(self, t: np.ndarray) -> np.ndarray:
        """Probability that a photon emitted at time t is inside the pulse."""
        phase = np.mod(t, self.period)
        inside = phase < self.pulse_length
        if self.shape == "rectangular":
            return inside.astype(float)
        edge = SMOOTH_EDGE_FRACTION * self.pulse_length
        rise = np.clip(phase / edge, 0, 1)
        fall = np.clip((self.pulse_length - phase) / edge, 0, 1)
        ramp = np.sin(0.5 * np.pi * np.minimum(rise, fall)) ** 2
        return np.where(inside, ramp, 0.0)

    def mean_transmission(self) -> float:
        """Time-averaged keep probability over one period."""
        if self.shape == "rectangular":
            return self.duty_cycle
        edge = SMOOTH_EDGE_FRACTION * self.pulse_length
        return (self.pulse_length - edge) * self.repetition_rate


@dataclass(frozen=True)
class SourceModel:
    """k thermal modes sharing a bandwidth; ``pair_rate`` is the in-pulse total."""
    pair_rate: float
    bandwidth: float
    weights: tuple[float, ...] = (1.0,)
    clusters: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.pair_rate >= 0:
            raise DomainError("pair rate must be non-negative")
        if not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")
        w = np.asarray(self.weights, dtype=float)
        if w.size < 1 or np.any(w < 0) or not abs(w.sum() - 1) < 1e-9:
            raise DomainError("mode weights must be non-negative and sum to 1")
        if self.clusters is not None:
            if len(self.clusters) != w.size:
                raise DomainError("one cluster label per mode is required")
            if any(a < 0 or a % 2 for a in self.clusters):
                raise DomainError("cluster labels must be even and non-negative")

    @classmethod
    def equal_modes(cls, k: int, pair_rate: float, bandwidth: float,
                    clusters=None) -> "SourceModel":
        if k < 1:
            raise DomainError("mode count must be >= 1")
        return cls(pair_rate, bandwidth, tuple([1.0 / k] * k),
                   tuple(clusters) if clusters is not None else None)

    @property
    def mode_count(self) -> int:
        return len(self.weights)

    @property
    def mode_rates(self) -> np.ndarray:
        return self.pair_rate * np.asarray(self.weights, dtype=float)

    @property
    def decay_rate(self) -> float:
        return 2 * np.pi * self.bandwidth

    def expected_g2_auto(self) -> float:
        return 1.0 + float(np.sum(np.square(self.weights)))

    def expected_g2_cross(self) -> float:
        return self.expected_g2_auto() + np.pi * self.bandwidth / self.pair_rate


def pair_rate_for_mean_photon_number(mean_photon_number: float, bandwidth: float) -> float:
    """In-pulse pair rate giving g2_si(0) = 2 + 1/<n> for a single mode."""
    if not mean_photon_number > 0 or not bandwidth > 0:
        raise DomainError("mean photon number and bandwidth must be positive")
    return np.pi * bandwidth * mean_photon_number


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_rate: float = 0.0
    jitter_fwhm: float = 0.0
    dead_time: float = 0.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise DomainError("detector efficiency must lie in [0, 1]")
        for name in ("dark_rate", "jitter_fwhm", "dead_time"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be non-negative")

    @property
    def jitter_sigma(self) -> float:
        return self.jitter_fwhm / (2 * math.sqrt(2 * math.log(2)))


@dataclass
class TimeTagStream:
    channel: int
    tags: np.ndarray  # int64 picoseconds, strictly increasing
    duration: float
    labels: np.ndarray | None = None  # mode index per tag, DARK_LABEL for dark counts
    mode_clusters: tuple[int, ...] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tags = np.asarray(self.tags, dtype=np.int64)
        if not 0 <= self.channel <= 255:
            raise DomainError("channel must fit in one byte")
        if self.tags.ndim != 1:
            raise ContractError("tags must be one-dimensional")
        if self.tags.size and np.any(np.diff(self.tags) <= 0):
            raise ContractError("time tags must be strictly increasing")
        if self.tags.size and (self.tags[0] < 0 or self.tags[-1] > self.duration_ps):
            raise ContractError("time tags must lie within [0, duration]")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != self.tags.shape:
                raise ContractError("one label per tag is required")

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration / PS))

    @property
    def times(self) -> np.ndarray:
        return self.tags * PS

    def __len__(self) -> int:
        return int(self.tags.size)

    def rate(self) -> float:
        return len(self) / self.duration

    def _derive(self, keep: np.ndarray, channel: int | None = None, **meta) -> "TimeTagStream":
        md = dict(self.metadata)
        md.update(meta)
        return TimeTagStream(self.channel if channel is None else channel, self.tags[keep],
                             self.duration,
                             None if self.labels is None else self.labels[keep],
                             self.mode_clusters, md)


# -- generation ------------------------------------------------------------------

def _mode_photons(rate, gamma, t0, t1, rng):
    """Signal and idler emission times for one mode over cells in [t0, t1)."""
    mu = rate / gamma
    if mu <= 0:
        return np.zeros(0), np.zeros(0)
    p_busy = mu / (1 + mu)
    ncell = rng.poisson(gamma * p_busy * (t1 - t0))
    cells = rng.uniform(t0, t1, ncell)
    # Bose-Einstein occupation conditioned on N >= 1 is geometric on {1, 2, ...}.
    pairs = rng.geometric(1 / (1 + mu), ncell)
    origin = np.repeat(cells, pairs)
    sig = origin + rng.exponential(1 / gamma, origin.size)
    idl = origin + rng.exponential(1 / gamma, origin.size)
    return sig, idl


def _generate_chunk(source, pump, duration, seed, mode, chunk):
    rng = _rng(seed, _STREAM_CELLS, mode, chunk)
    gamma = source.decay_rate
    margin = RINGDOWN_MARGIN / gamma
    t0 = -margin if chunk == 0 else chunk * CHUNK_SECONDS
    t1 = min((chunk + 1) * CHUNK_SECONDS, duration)
    sig, idl = _mode_photons(source.mode_rates[mode], gamma, t0, t1, rng)
    out = []
    for times in (sig, idl):
        keep = (times >= 0) & (times <= duration)
        if pump.shape == "rectangular":
            keep &= pump.transmission(times) > 0
        else:
            keep &= rng.random(times.size) < pump.transmission(times)
        out.append(times[keep])
    return out


def _detect(times, labels, det, duration, seed, channel):
    rng = _rng(seed, _STREAM_DETECT, channel)
    keep = rng.random(times.size) < det.efficiency
    times, labels = times[keep], labels[keep]
    if det.jitter_fwhm > 0:
        times = times + rng.normal(0.0, det.jitter_sigma, times.size)
    ndark = rng.poisson(det.dark_rate * duration)
    times = np.concatenate([times, rng.uniform(0, duration, ndark)])
    labels = np.concatenate([labels, np.full(ndark, DARK_LABEL, dtype=np.int64)])
    inside = (times >= 0) & (times <= duration)
    times, labels = times[inside], labels[inside]
    order = np.argsort(times, kind="stable")
    times, labels = times[order], labels[order]
    if det.dead_time > 0 and times.size:
        keep = _dead_time_mask(times, det.dead_time)
        times, labels = times[keep], labels[keep]
    tags = np.rint(times / PS).astype(np.int64)
    tags = _strictly_increasing(tags)
    inside = tags <= int(round(duration / PS))
    return tags[inside], labels[inside]


def _dead_time_mask(times, dead):
    keep = np.zeros(times.size, dtype=bool)
    i = 0
    n = times.size
    while i < n:
        keep[i] = True
        i = int(np.searchsorted(times, times[i] + dead, side="left"))
    return keep


def _strictly_increasing(tags: np.ndarray) -> np.ndarray:
    """Push equal or out-of-order neighbours forward in 1 ps steps."""
    if tags.size < 2:
        return tags
    idx = np.arange(tags.size, dtype=np.int64)
    return np.maximum.accumulate(tags - idx) + idx


def simulate_pair_stream(source: SourceModel, pump: PumpSchedule, det_s: DetectorModel,
                         det_i: DetectorModel, duration: float, seed: int,
                         threads: int = 1, channels: tuple[int, int] = (0, 1),
                         ) -> tuple[TimeTagStream, TimeTagStream]:
    """Signal and idler detection streams for ``duration`` seconds."""
    if not duration > 0:
        raise DomainError("duration must be positive")
    if duration * pump.repetition_rate < 1000:
        raise DomainError(
            f"duration covers {duration * pump.repetition_rate:.0f} pump pulses; at least 1000 needed")
    if seed is None or int(seed) < 0:
        raise DomainError("an explicit non-negative integer seed is required")
    nchunk = max(1, math.ceil(duration / CHUNK_SECONDS))
    jobs = [(j, c) for j in range(source.mode_count) for c in range(nchunk)]

    def run(job):
        return _generate_chunk(source, pump, duration, seed, *job)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]

    streams = []
    for side, det, ch in ((0, det_s, channels[0]), (1, det_i, channels[1])):
        times = np.concatenate([p[side] for p in parts]) if parts else np.zeros(0)
        labels = np.concatenate([np.full(p[side].size, j, dtype=np.int64)
                                 for (j, _), p in zip(jobs, parts)]) if parts else np.zeros(0, np.int64)
        tags, labels = _detect(times, labels, det, duration, seed, ch)
        meta = {
            "seed": int(seed),
            "role": "signal" if side == 0 else "idler",
            "pair_rate_hz": source.pair_rate,
            "bandwidth_hz": source.bandwidth,
            "mode_weights": list(source.weights),
            "pulse_length_s": pump.pulse_length,
            "repetition_rate_hz": pump.repetition_rate,
            "pulse_shape": pump.shape,
            "efficiency": det.efficiency,
            "dark_rate_hz": det.dark_rate,
            "jitter_fwhm_s": det.jitter_fwhm,
            "dead_time_s": det.dead_time,
        }
        streams.append(TimeTagStream(ch, tags, duration, labels, source.clusters, meta))
    return streams[0], streams[1]


# -- post-processing -------------------------------------------------------------

def split_stream(stream: TimeTagStream, transmission: float, seed: int,
                 channels: tuple[int, int] | None = None) -> tuple[TimeTagStream, TimeTagStream]:
    """Route each tag to port A with probability ``transmission``, else to port B."""
    if not 0 <= transmission <= 1:
        raise DomainError("transmission must lie in [0, 1]")
    rng = _rng(seed, _STREAM_SPLIT, stream.channel)
    to_a = rng.random(len(stream)) < transmission
    ch_a, ch_b = channels if channels is not None else (stream.channel, stream.channel)
    meta = dict(split_seed=int(seed), split_transmission=transmission)
    return (stream._derive(to_a, ch_a, split_port="A", **meta),
            stream._derive(~to_a, ch_b, split_port="B", **meta))


def apply_bandpass(stream: TimeTagStream, clusters, transmission: float, seed: int) -> TimeTagStream:
    """Keep only photons from modes in the selected clusters, thinned by ``transmission``.

    Dark counts originate behind the filter and pass unchanged.
    """
    if stream.labels is None or stream.mode_clusters is None:
        raise ContractError("band-pass filtering needs per-tag mode labels and mode clusters")
    if not 0 <= transmission <= 1:
        raise DomainError("transmission must lie in [0, 1]")
    selected = set(int(a) for a in clusters)
    mode_ok = np.array([a in selected for a in stream.mode_clusters], dtype=bool)
    dark = stream.labels == DARK_LABEL
    passes = np.zeros(len(stream), dtype=bool)
    passes[~dark] = mode_ok[stream.labels[~dark]]
    rng = _rng(seed, _STREAM_BANDPASS, stream.channel)
    passes &= rng.random(len(stream)) < transmission
    return stream._derive(passes | dark, bandpass_clusters=sorted(selected),
                          bandpass_transmission=transmission, bandpass_seed=int(seed))
