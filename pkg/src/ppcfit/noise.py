"""Poisson corruption of static population responses.

Random streams are addressed by ``(seed, *key)``; the key path is fed to
numpy's ``SeedSequence`` as its spawn key, so ``make_rng(7, cell, 0)`` yields
the same PCG64 sequence on every platform and in every worker process.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ppcfit.core import DEFAULT_SCALE, CognitionVector, EstimationScale, static_population_response
from ppcfit.errors import InvalidParameterError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Address of an independent random stream."""

    seed: int
    key: tuple = ()

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed) & _MASK64, spawn_key=tuple(int(k) for k in self.key))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.seed, tuple(self.key) + tuple(int(k) for k in key))


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Shorthand for ``RngStream(seed, key).generator()``."""
    return RngStream(seed, tuple(key)).generator()


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected numpy Generator or RngStream, got {type(rng).__name__}")


def sample_poisson(lam, rng, size=None):
    """Exact Poisson draw(s) with mean `lam`.

    numpy uses inversion below lambda=10 and transformed rejection (PTRS)
    above, both exact.
    """
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(~np.isfinite(lam_arr)) or np.any(lam_arr < 0):
        raise InvalidParameterError(f"Poisson mean must be finite and >= 0, got {lam}")
    return _as_generator(rng).poisson(lam_arr, size=size)


def sample_population_response(
    xi: CognitionVector,
    scale: EstimationScale = DEFAULT_SCALE,
    rng=None,
    size: int | None = None,
) -> np.ndarray:
    """Spike counts of every neuron for one (or `size`) noisy trials of `xi`.

    Returns an int64 array of shape (n,) or (size, n).
    """
    if rng is None:
        raise TypeError("an explicit rng is required")
    rates = static_population_response(xi, scale)
    shape = rates.shape if size is None else (int(size), rates.size)
    return sample_poisson(rates, rng, size=shape).astype(np.int64, copy=False)

