"""Feedback distributions from repeated noisy decoding, and their JSD."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ppcfit.core import DEFAULT_SCALE, CognitionVector, EstimationScale, Population
from ppcfit.decoders import DEFAULT_GRID, DecoderSpec, SGrid, decode
from ppcfit.errors import DegenerateConfigurationError, InvalidParameterError
from ppcfit.noise import _as_generator, sample_population_response

DEFAULT_TRIALS = 10_000
SWEEP_TRIALS = 500


@dataclass(frozen=True)
class Binning:
    """``stars``: nearest integer star (half-up); ``uniform``: K equal-width bins."""

    kind: str = "stars"
    k: int = 5

    def __post_init__(self):
        if self.kind not in ("stars", "uniform"):
            raise InvalidParameterError(f"unknown binning {self.kind!r}")
        if self.k < 1:
            raise InvalidParameterError("binning needs at least one bin")

    @classmethod
    def for_scale(cls, kind: str = "stars", scale: EstimationScale = DEFAULT_SCALE, k: int | None = None):
        if kind == "stars":
            lo, hi = math.floor(scale.lo + 0.5), math.floor(scale.hi + 0.5)
            return cls("stars", int(hi - lo + 1))
        return cls("uniform", int(k or 5))

    @classmethod
    def parse(cls, text: str, scale: EstimationScale = DEFAULT_SCALE) -> "Binning":
        """``stars`` or ``uniform:K``."""
        head, _, rest = str(text).partition(":")
        if head == "stars":
            return cls.for_scale("stars", scale)
        if head == "uniform":
            return cls("uniform", int(rest or 5))
        raise InvalidParameterError(f"unknown binning {text!r}")

    def spec(self) -> str:
        return "stars" if self.kind == "stars" else f"uniform:{self.k}"

    def centers(self, scale: EstimationScale = DEFAULT_SCALE) -> np.ndarray:
        if self.kind == "stars":
            return math.floor(scale.lo + 0.5) + np.arange(self.k, dtype=float)
        width = scale.span / self.k
        return scale.lo + width * (np.arange(self.k) + 0.5)


STARS = Binning("stars", 5)


def bin_estimate(x, scale: EstimationScale = DEFAULT_SCALE, binning: Binning = STARS):
    """Bin index (0-based) of estimate(s) `x`."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(~((x_arr >= scale.lo) & (x_arr <= scale.hi))):
        raise InvalidParameterError(f"estimate outside scale [{scale.lo}, {scale.hi}]")
    if binning.kind == "stars":
        first = math.floor(scale.lo + 0.5)
        star = np.floor(x_arr + 0.5)
        idx = np.clip(star - first, 0, binning.k - 1)
    else:
        idx = np.floor((x_arr - scale.lo) / scale.span * binning.k)
        idx = np.clip(idx, 0, binning.k - 1)
    idx = idx.astype(np.int64)
    return int(idx) if idx.ndim == 0 else idx


@dataclass(frozen=True, eq=False)
class FeedbackDistribution:
    """Probability vector over rating bins."""

    probs: np.ndarray
    binning: Binning = STARS

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or len(p) != self.binning.k:
            raise InvalidParameterError(f"expected {self.binning.k} probabilities, got shape {p.shape}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidParameterError("feedback distribution must be nonnegative and sum to 1")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_counts(cls, counts, binning: Binning = STARS) -> "FeedbackDistribution":
        counts = np.asarray(counts, dtype=float)
        return cls(counts / counts.sum(), binning)

    @classmethod
    def point_mass(cls, index: int, binning: Binning = STARS) -> "FeedbackDistribution":
        p = np.zeros(binning.k)
        p[index] = 1.0
        return cls(p, binning)

    def mean(self, scale: EstimationScale = DEFAULT_SCALE) -> float:
        return float(self.probs @ self.binning.centers(scale))

    def std(self, scale: EstimationScale = DEFAULT_SCALE) -> float:
        """Standard deviation in stars, using bin centers."""
        c = self.binning.centers(scale)
        mu = self.probs @ c
        return float(math.sqrt(max(self.probs @ (c - mu) ** 2, 0.0)))

    def to_dict(self) -> dict:
        return {"binning": self.binning.spec(), "probs": [float(x) for x in self.probs]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, scale: EstimationScale = DEFAULT_SCALE) -> "FeedbackDistribution":
        return cls(np.asarray(d["probs"], dtype=float), Binning.parse(d["binning"], scale))

    @classmethod
    def from_json(cls, text: str, scale: EstimationScale = DEFAULT_SCALE) -> "FeedbackDistribution":
        return cls.from_dict(json.loads(text), scale)

    def __eq__(self, other):
        if not isinstance(other, FeedbackDistribution):
            return NotImplemented
        return self.binning == other.binning and np.array_equal(self.probs, other.probs)

    __hash__ = None


def _decode_batch(counts, pop, decoder, rng, grid):
    if decoder.kind != "wad":
        return decode(counts, pop, decoder, rng=rng, grid=grid)
    # WAD is undefined on all-zero rows; return NaN there so the caller can resample
    total = counts.sum(axis=1)
    est = np.full(len(counts), np.nan)
    ok = total > 0
    if np.any(ok):
        est[ok] = decode(counts[ok], pop, decoder, grid=grid)
    return est


def simulate_estimates(
    xi: CognitionVector,
    decoder,
    trials: int,
    rng,
    scale: EstimationScale = DEFAULT_SCALE,
    grid: SGrid = DEFAULT_GRID,
) -> np.ndarray:
    """Continuous decoder outputs for `trials` independent noisy responses to `xi`.

    Trials whose estimate is undefined (all-zero WAD responses) are redrawn;
    more than ``100 * trials`` redraws raises DegenerateConfigurationError.
    """
    trials = int(trials)
    if trials < 1:
        raise InvalidParameterError(f"need at least one trial, got {trials}")
    decoder = DecoderSpec.parse(decoder)
    rng = _as_generator(rng)
    xi.check_scale(scale)
    pop = Population.from_cognition(xi, scale)

    counts = sample_population_response(xi, scale, rng, size=trials)
    est = _decode_batch(counts, pop, decoder, rng, grid)
    bad = np.flatnonzero(np.isnan(est))
    retries = 0
    while bad.size:
        retries += bad.size
        if retries > 100 * trials:
            raise DegenerateConfigurationError(
                f"{xi.as_tuple()} with {decoder.label()}: estimate undefined after {retries} redraws"
            )
        redo = sample_population_response(xi, scale, rng, size=bad.size)
        est[bad] = _decode_batch(redo, pop, decoder, rng, grid)
        bad = bad[np.isnan(est[bad])]
    return est


def simulate_feedback(
    xi: CognitionVector,
    decoder,
    trials: int = DEFAULT_TRIALS,
    rng=None,
    binning: Binning = STARS,
    scale: EstimationScale = DEFAULT_SCALE,
    grid: SGrid = DEFAULT_GRID,
) -> FeedbackDistribution:
    """Empirical distribution of binned decodes over `trials` noisy responses."""
    if rng is None:
        raise TypeError("an explicit rng is required")
    est = simulate_estimates(xi, decoder, trials, rng, scale, grid)
    idx = bin_estimate(est, scale, binning)
    return FeedbackDistribution.from_counts(np.bincount(idx, minlength=binning.k), binning)


def jsd(p, q) -> float:
    """Jensen-Shannon divergence in bits; 0 for identical, 1 for disjoint supports."""
    if isinstance(p, FeedbackDistribution) and isinstance(q, FeedbackDistribution):
        if p.binning != q.binning:
            raise InvalidParameterError(f"cannot compare {p.binning.spec()} with {q.binning.spec()}")
    p = np.asarray(getattr(p, "probs", p), dtype=float)
    q = np.asarray(getattr(q, "probs", q), dtype=float)
    if p.shape != q.shape:
        raise InvalidParameterError(f"distributions have different lengths {p.shape} vs {q.shape}")
    return float(jsd_many(p[None, :], q)[0])


def jsd_many(models: np.ndarray, target: np.ndarray) -> np.ndarray:
    """JSD of each row of `models` against one `target` vector."""
    models = np.asarray(models, dtype=float)
    target = np.asarray(target, dtype=float)[None, :]
    total = models + target
    # x / m written as 2x / (x + y): halving a subnormal would underflow to 0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(models > 0, models * np.log2(2 * models / total), 0.0)
        b = np.where(target > 0, target * np.log2(2 * target / total), 0.0)
    d = 0.5 * a.sum(axis=1) + 0.5 * b.sum(axis=1)
    return np.clip(d, 0.0, 1.0)
