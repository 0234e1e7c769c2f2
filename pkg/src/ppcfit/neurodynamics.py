"""Spiking-rate statistics and EEG-like oscillation estimates from cognition vectors.

Spike trains are plain sorted float arrays of spike times in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ppcfit.core import DEFAULT_SCALE, CognitionVector, EstimationScale, static_population_response
from ppcfit.errors import InvalidParameterError
from ppcfit.noise import _as_generator

DEFAULT_DURATION = 1.0
DEFAULT_BIN = 0.005
# bin-edge slack for spike times that land on an edge up to float error
_EDGE_EPS = 1e-9


def periodic_spike_train(rate: float, phase: float, duration: float = DEFAULT_DURATION) -> np.ndarray:
    """Spikes at ``phase + k / rate`` for every k with time < duration."""
    if not rate > 0:
        raise InvalidParameterError(f"rate must be positive, got {rate}")
    period = 1.0 / rate
    if not 0 <= phase < period:
        raise InvalidParameterError(f"phase must lie in [0, 1/rate), got {phase}")
    count = max(math.ceil((duration - phase) * rate - _EDGE_EPS), 0)
    times = phase + np.arange(count) / rate
    return times[times < duration]


def poisson_spike_train(rate: float, duration: float, rng) -> np.ndarray:
    """Homogeneous Poisson train; used to contrast with the periodic model."""
    if rate < 0:
        raise InvalidParameterError(f"rate must be >= 0, got {rate}")
    rng = _as_generator(rng)
    count = rng.poisson(rate * duration)
    return np.sort(rng.uniform(0.0, duration, count))


@dataclass(frozen=True, eq=False)
class BinnedCounts:
    width: float
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(len(self.counts)) + 0.5) * self.width

    @property
    def duration(self) -> float:
        return len(self.counts) * self.width


def n_bins(duration: float, width: float) -> int:
    return math.ceil(duration / width - _EDGE_EPS)


def superpose_and_bin(trains, width: float = DEFAULT_BIN, duration: float = DEFAULT_DURATION) -> BinnedCounts:
    """Total spikes of all trains per bin ``[i*width, (i+1)*width)``."""
    if not width > 0:
        raise InvalidParameterError(f"bin width must be positive, got {width}")
    k = n_bins(duration, width)
    counts = np.zeros(k, dtype=np.int64)
    for train in trains:
        t = np.asarray(train, dtype=float)
        if t.size == 0:
            continue
        if np.any(t < 0) or np.any(t >= duration):
            raise InvalidParameterError("spike times must lie in [0, duration)")
        idx = np.floor(t / width + _EDGE_EPS).astype(np.int64)
        counts += np.bincount(np.minimum(idx, k - 1), minlength=k)
    return BinnedCounts(float(width), counts)


@dataclass(frozen=True)
class SineFit:
    """``amplitude * sin(2 pi frequency t + phase) + offset``; frequency NaN when flat."""

    amplitude: float
    frequency: float
    phase: float
    offset: float
    rms: float

    @property
    def defined(self) -> bool:
        return math.isfinite(self.frequency)

    def __call__(self, t):
        if not self.defined:
            return np.full_like(np.asarray(t, dtype=float), self.offset)
        return self.amplitude * np.sin(2 * np.pi * self.frequency * np.asarray(t) + self.phase) + self.offset


def _lstsq_at(t, y, f):
    x = 2 * np.pi * f * t
    design = np.column_stack([np.sin(x), np.cos(x), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return coef, float(resid @ resid)


def dominant_frequency(y: np.ndarray, width: float) -> float:
    """Lowest nonzero DFT frequency carrying (up to 1e-9 relative) the peak power."""
    y = np.asarray(y, dtype=float)
    power = np.abs(np.fft.rfft(y - y.mean())) ** 2
    freqs = np.fft.rfftfreq(len(y), width)
    power[0] = 0.0
    peak = power.max()
    if peak <= 0:
        return math.nan
    # impulse trains put equal power on every harmonic; take the fundamental
    k = int(np.flatnonzero(power >= peak * (1 - 1e-9))[0])
    return float(freqs[k])


def fit_sine(binned: BinnedCounts, search_points: int = 81) -> SineFit:
    """Least-squares sine fit to binned counts against bin centers.

    The frequency is seeded at the dominant DFT frequency and refined over
    one Fourier bin either side.
    """
    y = np.asarray(binned.counts, dtype=float)
    if len(y) < 8:
        raise InvalidParameterError(f"need at least 8 bins, got {len(y)}")
    t = binned.centers
    mean = float(y.mean())
    if np.ptp(y) == 0:
        return SineFit(0.0, math.nan, 0.0, mean, 0.0)
    f0 = dominant_frequency(y, binned.width)
    df = 1.0 / (len(y) * binned.width)
    nyquist = 0.5 / binned.width
    lo, hi = max(f0 - df, df * 1e-3), min(f0 + df, nyquist)
    cand = np.linspace(lo, hi, search_points)
    rss = np.array([_lstsq_at(t, y, f)[1] for f in cand])
    i = int(np.argmin(rss))
    a, b = cand[max(i - 1, 0)], cand[min(i + 1, len(cand) - 1)]
    best_f = float(cand[i])
    if b > a:
        res = minimize_scalar(lambda f: _lstsq_at(t, y, f)[1], bounds=(a, b), method="bounded",
                              options={"xatol": 1e-6})
        if res.fun < rss[i]:
            best_f = float(res.x)
    (s_coef, c_coef, offset), rss_best = _lstsq_at(t, y, best_f)
    amplitude = math.hypot(s_coef, c_coef)
    phase = math.atan2(c_coef, s_coef)
    return SineFit(amplitude, best_f, phase, float(offset), math.sqrt(rss_best / len(y)))


def population_events(
    rates,
    duration: float = DEFAULT_DURATION,
    width: float = DEFAULT_BIN,
    rng=None,
    mode: str = "periodic",
) -> BinnedCounts:
    """Superposed spike trains of neurons firing at `rates`, one random phase each."""
    rng = _as_generator(rng)
    trains = []
    for rate in np.asarray(rates, dtype=float):
        if mode == "periodic":
            if rate <= 0:
                continue
            trains.append(periodic_spike_train(rate, rng.uniform(0.0, 1.0 / rate), duration))
        elif mode == "poisson":
            trains.append(poisson_spike_train(rate, duration, rng))
        else:
            raise InvalidParameterError(f"unknown spike-train mode {mode!r}")
    return superpose_and_bin(trains, width, duration)


def eeg_frequency_from_rates(rates, duration=DEFAULT_DURATION, width=DEFAULT_BIN, rng=None, mode="periodic") -> float:
    return fit_sine(population_events(rates, duration, width, rng, mode)).frequency


def eeg_frequency(
    xi: CognitionVector,
    duration: float = DEFAULT_DURATION,
    width: float = DEFAULT_BIN,
    rng=None,
    scale: EstimationScale = DEFAULT_SCALE,
    mode: str = "periodic",
) -> float:
    """Fitted oscillation frequency (Hz) of the population's summed spiking at static rates."""
    return eeg_frequency_from_rates(static_population_response(xi, scale), duration, width, rng, mode)


@dataclass(frozen=True, eq=False)
class RateStats:
    rates: np.ndarray
    mu_log: float
    sigma_log: float
    mean_rate: float

    @property
    def lognormal_mean(self) -> float:
        return math.exp(self.mu_log + 0.5 * self.sigma_log**2)

    def to_dict(self) -> dict:
        return {
            "count": int(self.rates.size),
            "min_rate": float(self.rates.min()),
            "max_rate": float(self.rates.max()),
            "mean_rate": self.mean_rate,
            "mu_log": self.mu_log,
            "sigma_log": self.sigma_log,
            "lognormal_mean": self.lognormal_mean,
        }


def rate_statistics(ensemble, scale: EstimationScale = DEFAULT_SCALE) -> RateStats:
    """Pool static per-neuron rates over `ensemble`; log-normal by log-moment matching."""
    ensemble = list(ensemble)
    if not ensemble:
        raise InvalidParameterError("rate statistics need at least one cognition vector")
    rates = np.concatenate([static_population_response(xi, scale) for xi in ensemble])
    logs = np.log(rates)
    return RateStats(rates, float(logs.mean()), float(logs.std()), float(rates.mean()))


def lognormal_pdf(x, mu_log: float, sigma_log: float):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    if sigma_log > 0:
        z = (np.log(x[pos]) - mu_log) / sigma_log
        out[pos] = np.exp(-0.5 * z * z) / (x[pos] * sigma_log * math.sqrt(2 * math.pi))
    return out
