"""Estimation scale, bell-shaped tuning curves and static population responses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ppcfit.errors import InvalidParameterError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class EstimationScale:
    """Closed interval of possible estimates, in stars."""

    lo: float = 1.0
    hi: float = 5.0

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise InvalidParameterError(f"scale needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def span(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all((x >= self.lo) & (x <= self.hi)))


DEFAULT_SCALE = EstimationScale(1.0, 5.0)


@dataclass(frozen=True)
class TuningParams:
    """Gain (dimensionless), width (stars) and offset (Hz) shared by a population."""

    gain: float
    width: float
    offset: float

    def __post_init__(self):
        for name in ("gain", "width", "offset"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be a positive finite number, got {value}")


@dataclass(frozen=True)
class CognitionVector:
    """Population size, tuning shape and presented stimulus: (n, g, w, o, s)."""

    n: int
    g: float
    w: float
    o: float
    s: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParameterError(f"n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        # validates g, w, o
        TuningParams(self.g, self.w, self.o)
        if not math.isfinite(self.s):
            raise InvalidParameterError(f"s must be finite, got {self.s}")

    @property
    def params(self) -> TuningParams:
        return TuningParams(self.g, self.w, self.o)

    def as_tuple(self) -> tuple:
        return (self.n, self.g, self.w, self.o, self.s)

    def check_scale(self, scale: EstimationScale = DEFAULT_SCALE) -> "CognitionVector":
        if not scale.lo <= self.s <= scale.hi:
            raise InvalidParameterError(
                f"stimulus s={self.s} outside scale [{scale.lo}, {scale.hi}]"
            )
        return self

    @classmethod
    def parse(cls, text: str) -> "CognitionVector":
        """Parse ``"n,g,w,o,s"``, e.g. ``"100,1,1,5,3"``."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 5:
            raise InvalidParameterError(f"expected 5 comma-separated values n,g,w,o,s, got {text!r}")
        try:
            n = float(parts[0])
            g, w, o, s = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise InvalidParameterError(f"cannot parse cognition vector {text!r}") from exc
        return cls(n, g, w, o, s)


def gaussian_bump(p, w, s):
    """Normalized Gaussian density with mean `p` and standard deviation `w`, at `s`.

    Broadcasts over array arguments.
    """
    w_arr = np.asarray(w, dtype=float)
    if np.any(~(w_arr > 0)):
        raise InvalidParameterError(f"width must be positive, got {w}")
    z = (np.asarray(s, dtype=float) - np.asarray(p, dtype=float)) / w_arr
    out = np.exp(-0.5 * z * z) / (w_arr * _SQRT_2PI)
    return out if out.ndim else float(out)


def tuning_value(params: TuningParams, p, s):
    """Mean firing rate (Hz) of a neuron preferring `p` for stimulus `s`."""
    return params.gain * gaussian_bump(p, params.width, s) + params.offset


def preferred_values(n: int, scale: EstimationScale = DEFAULT_SCALE) -> np.ndarray:
    """Equidistant preferred values covering `scale` end to end."""
    if int(n) != n or n < 2:
        raise InvalidParameterError(f"a population needs n >= 2 neurons, got {n}")
    n = int(n)
    step = scale.span / (n - 1)
    out = scale.lo + step * np.arange(n, dtype=float)
    out[-1] = scale.hi
    return out


@dataclass(frozen=True)
class Population:
    """n neurons sharing tuning parameters, preferred values spread over the scale."""

    n: int
    params: TuningParams
    scale: EstimationScale = DEFAULT_SCALE

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParameterError(f"a population needs n >= 2 neurons, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_cognition(cls, xi: CognitionVector, scale: EstimationScale = DEFAULT_SCALE) -> "Population":
        return cls(xi.n, xi.params, scale)

    @cached_property
    def preferred(self) -> np.ndarray:
        out = preferred_values(self.n, self.scale)
        out.flags.writeable = False
        return out

    def rates(self, s) -> np.ndarray:
        """Static rates; shape (n,) for scalar `s`, (len(s), n) for a vector."""
        s = np.asarray(s, dtype=float)
        if s.ndim == 0:
            return tuning_value(self.params, self.preferred, s)
        return tuning_value(self.params, self.preferred[None, :], s[:, None])


def static_population_response(xi: CognitionVector, scale: EstimationScale = DEFAULT_SCALE) -> np.ndarray:
    """Noise-free rates (Hz) of every neuron in the population described by `xi`."""
    xi.check_scale(scale)
    return Population.from_cognition(xi, scale).rates(xi.s)
