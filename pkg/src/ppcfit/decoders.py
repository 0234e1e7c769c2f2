"""Decoder functions mapping a noisy population response onto the scale.

All decoders accept a single response of shape (n,) and return a float, or
a batch of shape (M, n) and return an array of M estimates. The likelihood
based decoders (MLD, MAD) maximize exhaustively over an ``SGrid``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from ppcfit.core import DEFAULT_SCALE, EstimationScale, Population, gaussian_bump
from ppcfit.errors import InvalidParameterError, InvalidPriorError, UndefinedEstimateError

DECODER_KINDS = ("mvd", "wad", "mld", "mad")

# rows per matrix product; bounds the (rows, grid) score buffer
_CHUNK = 4096


@dataclass(frozen=True)
class SGrid:
    """Evenly spaced evaluation points lo, lo+step, ..., hi."""

    scale: EstimationScale = DEFAULT_SCALE
    step: float = 0.01

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidParameterError(f"grid step must be positive, got {self.step}")
        ratio = self.scale.span / self.step
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvalidParameterError(
                f"scale span {self.scale.span} is not a multiple of step {self.step}"
            )

    @cached_property
    def points(self) -> np.ndarray:
        m = int(round(self.scale.span / self.step))
        pts = self.scale.lo + self.step * np.arange(m + 1, dtype=float)
        pts[-1] = self.scale.hi
        pts.flags.writeable = False
        return pts

    def __len__(self):
        return len(self.points)


DEFAULT_GRID = SGrid()


# -- priors -----------------------------------------------------------------


@dataclass(frozen=True)
class FlatPrior:
    kind: str = field(default="flat", init=False)

    def log_weights(self, points: np.ndarray) -> np.ndarray:
        # zeros, not log(1/G): adding exact zeros keeps MAD bitwise equal to MLD
        return np.zeros(len(points))

    def spec(self) -> str:
        return "flat"


@dataclass(frozen=True)
class GaussianPrior:
    mean: float = 3.0
    var: float = 0.75
    kind: str = field(default="gaussian", init=False)

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.var > 0 and math.isfinite(self.var)):
            raise InvalidPriorError(f"gaussian prior needs finite mean and var > 0, got ({self.mean}, {self.var})")

    def log_weights(self, points: np.ndarray) -> np.ndarray:
        return -0.5 * (points - self.mean) ** 2 / self.var - 0.5 * math.log(2 * math.pi * self.var)

    def spec(self) -> str:
        return f"gaussian:{self.mean!r}:{self.var!r}"


@dataclass(frozen=True)
class HistogramPrior:
    """Probabilities attached to the grid points; must match the grid length."""

    probs: tuple
    kind: str = field(default="histogram", init=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidPriorError("histogram prior must be a vector of nonnegative finite numbers")
        if abs(p.sum() - 1.0) > 1e-9:
            raise InvalidPriorError(f"histogram prior must sum to 1, sums to {p.sum()!r}")
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    @classmethod
    def from_bins(cls, bin_probs, grid: SGrid = DEFAULT_GRID) -> "HistogramPrior":
        """Spread integer-star bin probabilities evenly over the grid points of each bin."""
        from ppcfit.feedback import STARS, bin_estimate

        bin_probs = np.asarray(bin_probs, dtype=float)
        idx = bin_estimate(grid.points, grid.scale, STARS)
        per_bin = np.bincount(idx, minlength=len(bin_probs))
        probs = bin_probs[idx] / per_bin[idx]
        return cls(tuple(probs / probs.sum()))

    def log_weights(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(self.probs)
        if len(p) != len(points):
            raise InvalidPriorError(f"histogram prior has {len(p)} entries, grid has {len(points)}")
        with np.errstate(divide="ignore"):
            return np.log(p)

    def spec(self) -> str:
        return "histogram:" + ",".join(repr(x) for x in self.probs)


def parse_prior(text: str):
    """Parse ``flat``, ``gaussian:MEAN:VAR`` or ``histogram:p1,p2,...``."""
    text = text.strip()
    head, _, rest = text.partition(":")
    try:
        if head == "flat":
            return FlatPrior()
        if head == "gaussian":
            mean, var = (float(x) for x in rest.split(":")) if rest else (3.0, 0.75)
            return GaussianPrior(mean, var)
        if head == "histogram":
            return HistogramPrior(tuple(float(x) for x in rest.split(",")))
    except ValueError as exc:
        raise InvalidPriorError(f"cannot parse prior {text!r}") from exc
    raise InvalidPriorError(f"unknown prior kind {head!r}")


DEFAULT_PRIOR = GaussianPrior(3.0, 0.75)


@dataclass(frozen=True)
class DecoderSpec:
    """A decoder kind; MAD carries its prior."""

    kind: str
    prior: object = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in DECODER_KINDS:
            raise InvalidParameterError(f"unknown decoder {self.kind!r}; choose from {DECODER_KINDS}")
        object.__setattr__(self, "kind", kind)
        if kind == "mad" and self.prior is None:
            object.__setattr__(self, "prior", DEFAULT_PRIOR)
        if kind != "mad" and self.prior is not None:
            raise InvalidParameterError(f"only MAD takes a prior, got one for {kind}")

    @classmethod
    def parse(cls, text, prior=None) -> "DecoderSpec":
        if isinstance(text, DecoderSpec):
            return text
        if isinstance(prior, str):
            prior = parse_prior(prior)
        kind = str(text).lower()
        return cls(kind, prior if kind == "mad" else None)

    def label(self) -> str:
        return self.kind if self.kind != "mad" else f"mad[{self.prior.spec()}]"


# -- likelihood -------------------------------------------------------------


class LikelihoodTable:
    """Per-population lookup tables over the grid points.

    With f_j(s) = o + g*h_j(s), the log-likelihood splits into the
    s-independent part ``ln(o)*sum(r) - n*o`` and the s-dependent part
    ``sum_j r_j*log1p(g*h_j(s)/o) - g*sum_j h_j(s)``. Maximizing the second
    part alone keeps full relative precision where every tuning curve is
    near its floor and the likelihood is flat to ~1e-15.
    """

    def __init__(self, pop: Population, grid: SGrid = DEFAULT_GRID):
        if pop.scale != grid.scale:
            raise InvalidParameterError("population and grid use different scales")
        self.pop = pop
        self.grid = grid
        gain, offset = pop.params.gain, pop.params.offset
        bumps = gain * gaussian_bump(pop.preferred[None, :], pop.params.width, grid.points[:, None])  # (G, n)
        self.log_excess = np.ascontiguousarray(np.log1p(bumps / offset).T)  # (n, G)
        self.excess_total = bumps.sum(axis=1)  # (G,)

    def _check(self, counts):
        counts = np.asarray(counts, dtype=float)
        if counts.shape[-1] != self.pop.n:
            raise InvalidParameterError(f"response has {counts.shape[-1]} entries, population has {self.pop.n}")
        return counts

    def relative_log_likelihood(self, counts) -> np.ndarray:
        """s-dependent part of the log-likelihood at every grid point."""
        return self._check(counts) @ self.log_excess - self.excess_total

    def log_likelihood(self, counts) -> np.ndarray:
        """Log-likelihood up to the s-independent sum of ln(r_j!), for every grid point."""
        counts = self._check(counts)
        o = self.pop.params.offset
        const = counts.sum(axis=-1, keepdims=counts.ndim > 1) * math.log(o) - self.pop.n * o
        return self.relative_log_likelihood(counts) + const

    def argmax(self, counts, log_prior=None) -> np.ndarray:
        """Grid argmax of log-likelihood (+ log-prior); first index wins ties."""
        counts = np.asarray(counts)
        single = counts.ndim == 1
        counts = np.atleast_2d(counts)
        out = np.empty(len(counts), dtype=np.int64)
        for start in range(0, len(counts), _CHUNK):
            scores = self.relative_log_likelihood(counts[start : start + _CHUNK])
            if log_prior is not None:
                scores = scores + log_prior
            out[start : start + _CHUNK] = np.argmax(scores, axis=1)
        return out[0] if single else out


@lru_cache(maxsize=64)
def likelihood_table(pop: Population, grid: SGrid = DEFAULT_GRID) -> LikelihoodTable:
    return LikelihoodTable(pop, grid)


def log_likelihood(counts, pop: Population, s):
    """ln P(counts | s) without the ln(r_j!) term, evaluated at stimulus value(s) `s`."""
    counts = np.asarray(counts, dtype=float)
    if counts.shape[-1] != pop.n:
        raise InvalidParameterError(f"response has {counts.shape[-1]} entries, population has {pop.n}")
    s_arr = np.asarray(s, dtype=float)
    gain, offset = pop.params.gain, pop.params.offset
    bumps = gain * gaussian_bump(pop.preferred[None, :], pop.params.width, np.atleast_1d(s_arr)[:, None])
    rel = np.log1p(bumps / offset) @ counts - bumps.sum(axis=1)
    out = rel + (counts.sum() * math.log(offset) - pop.n * offset)
    return float(out[0]) if s_arr.ndim == 0 else out


# -- decoders ---------------------------------------------------------------


def decode_mvd(counts, pop: Population, rng: np.random.Generator):
    """Preferred value of the most active neuron; ties resolved uniformly at random."""
    counts = np.asarray(counts)
    single = counts.ndim == 1
    counts = np.atleast_2d(counts)
    if counts.shape[1] != pop.n:
        raise InvalidParameterError(f"response has {counts.shape[1]} entries, population has {pop.n}")
    is_max = counts == counts.max(axis=1, keepdims=True)
    n_ties = is_max.sum(axis=1)
    idx = np.argmax(is_max, axis=1)
    tied = np.flatnonzero(n_ties > 1)
    if tied.size:
        pick = rng.integers(0, n_ties[tied])
        # position of the pick-th maximum within each tied row
        rank = np.cumsum(is_max[tied], axis=1) - 1
        idx[tied] = np.argmax(is_max[tied] & (rank == pick[:, None]), axis=1)
    est = pop.preferred[idx]
    return float(est[0]) if single else est


def decode_wad(counts, pop: Population):
    """Count-weighted mean of the preferred values.

    Raises UndefinedEstimateError if any response has no spikes at all.
    """
    counts = np.asarray(counts)
    single = counts.ndim == 1
    counts = np.atleast_2d(counts)
    if counts.shape[1] != pop.n:
        raise InvalidParameterError(f"response has {counts.shape[1]} entries, population has {pop.n}")
    total = counts.sum(axis=1)
    if np.any(total <= 0):
        raise UndefinedEstimateError("weighted average undefined for an all-zero response")
    est = (counts @ pop.preferred) / total
    # rounding can step a hair outside [lo, hi]
    est = np.clip(est, pop.scale.lo, pop.scale.hi)
    return float(est[0]) if single else est


def decode_mld(counts, pop: Population, grid: SGrid = DEFAULT_GRID):
    """Grid point of maximal likelihood; lowest point wins ties."""
    idx = likelihood_table(pop, grid).argmax(counts)
    est = grid.points[idx]
    return float(est) if np.ndim(est) == 0 else est


def _prior_log_weights(prior, grid: SGrid) -> np.ndarray:
    log_prior = np.asarray(prior.log_weights(grid.points), dtype=float)
    if not np.any(np.isfinite(log_prior)):
        raise InvalidPriorError("prior is identically zero on the decoding grid")
    return log_prior


def decode_mad(counts, pop: Population, grid: SGrid = DEFAULT_GRID, prior=DEFAULT_PRIOR):
    """Grid point of maximal posterior under `prior`; zero-prior points never win."""
    log_prior = _prior_log_weights(prior, grid)
    idx = likelihood_table(pop, grid).argmax(counts, log_prior)
    est = grid.points[idx]
    return float(est) if np.ndim(est) == 0 else est


def decode(counts, pop: Population, decoder: DecoderSpec, rng=None, grid: SGrid = DEFAULT_GRID):
    """Dispatch on `decoder.kind`. MVD needs `rng` for tie-breaking."""
    if decoder.kind == "mvd":
        if rng is None:
            raise TypeError("MVD needs an rng for tie-breaking")
        return decode_mvd(counts, pop, rng)
    if decoder.kind == "wad":
        return decode_wad(counts, pop)
    if decoder.kind == "mld":
        return decode_mld(counts, pop, grid)
    return decode_mad(counts, pop, grid, decoder.prior)
