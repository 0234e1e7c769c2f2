"""Exhaustive cognition-vector fitting against empirical feedback distributions.

A ``ModelLibrary`` holds one simulated feedback distribution per parameter
grid cell for a single decoder. It is built once and then queried for every
target, so the cost of a fit is a vectorized JSD scan over the cells.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ppcfit.core import DEFAULT_SCALE, CognitionVector, EstimationScale
from ppcfit.decoders import DEFAULT_GRID, DecoderSpec, SGrid, parse_prior
from ppcfit.errors import DegenerateConfigurationError, InvalidParameterError
from ppcfit.feedback import STARS, SWEEP_TRIALS, Binning, FeedbackDistribution, jsd_many, simulate_feedback
from ppcfit.noise import make_rng

log = logging.getLogger(__name__)

PARAM_NAMES = ("n", "g", "w", "o", "s")
DEFAULT_RANGES = {
    "n": (25.0, 250.0),
    "g": (1.0, 100.0),
    "w": (0.1, 2.0),
    "o": (1.0, 15.0),
    "s": (1.0, 5.0),
}
FULL_COUNT = 10
DESK_COUNT = 4
LIBRARY_FORMAT = 1


@dataclass(frozen=True)
class ParameterGrid:
    """Value lists per cognition-vector parameter; cells enumerate their product."""

    n: tuple
    g: tuple
    w: tuple
    o: tuple
    s: tuple

    def __post_init__(self):
        for name in PARAM_NAMES:
            values = tuple(getattr(self, name))
            if not values:
                raise InvalidParameterError(f"grid parameter {name} has no values")
            object.__setattr__(self, name, values)

    @property
    def shape(self) -> tuple:
        return tuple(len(getattr(self, name)) for name in PARAM_NAMES)

    def __len__(self):
        return math.prod(self.shape)

    def cell(self, index: int) -> CognitionVector:
        idx = np.unravel_index(int(index), self.shape)
        values = [getattr(self, name)[i] for name, i in zip(PARAM_NAMES, idx)]
        return CognitionVector(*values)

    def cells(self):
        for values in itertools.product(*(getattr(self, name) for name in PARAM_NAMES)):
            yield CognitionVector(*values)

    def as_array(self) -> np.ndarray:
        """(cells, 5) array of parameter values in cell order."""
        mesh = np.meshgrid(*(np.asarray(getattr(self, name), dtype=float) for name in PARAM_NAMES), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_dict(self) -> dict:
        return {name: [float(v) if name != "n" else int(v) for v in getattr(self, name)] for name in PARAM_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterGrid":
        return cls(*(tuple(d[name]) for name in PARAM_NAMES))


def subdivide(lo: float, hi: float, count: int) -> np.ndarray:
    """`count` equidistant values from lo to hi inclusive; count=1 gives [lo]."""
    count = int(count)
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    if hi < lo:
        raise InvalidParameterError(f"empty range [{lo}, {hi}]")
    if count == 1:
        return np.array([float(lo)])
    return np.linspace(float(lo), float(hi), count)


def build_grid(spec: dict | None = None, count: int = FULL_COUNT) -> ParameterGrid:
    """Grid from ``{name: (lo, hi[, count])}``; missing names use the default ranges.

    n values are rounded to the nearest integer after subdivision.
    """
    spec = dict(spec or {})
    unknown = set(spec) - set(PARAM_NAMES)
    if unknown:
        raise InvalidParameterError(f"unknown grid parameters {sorted(unknown)}")
    values = {}
    for name in PARAM_NAMES:
        entry = tuple(spec.get(name, DEFAULT_RANGES[name]))
        lo, hi = entry[0], entry[1]
        k = entry[2] if len(entry) > 2 else count
        vals = subdivide(lo, hi, k)
        if name == "n":
            vals = np.floor(vals + 0.5).astype(int)
            values[name] = tuple(int(v) for v in vals)
        else:
            values[name] = tuple(float(v) for v in vals)
    return ParameterGrid(**values)


def desk_grid() -> ParameterGrid:
    """4 values per parameter (1,024 cells) over the default ranges."""
    return build_grid(count=DESK_COUNT)


def full_grid() -> ParameterGrid:
    """10 values per parameter (100,000 cells) over the default ranges."""
    return build_grid(count=FULL_COUNT)


def grid_from_preset(name: str) -> ParameterGrid:
    if name == "desk":
        return desk_grid()
    if name == "full":
        return full_grid()
    raise InvalidParameterError(f"unknown grid preset {name!r} (desk, full)")


@dataclass(eq=False)
class ModelLibrary:
    """One feedback distribution per grid cell for one decoder.

    ``failed[i]`` marks cells whose simulation raised a degenerate
    configuration; their ``probs`` row is NaN and they never win a fit.
    """

    grid: ParameterGrid
    decoder: DecoderSpec
    trials: int
    seed: int
    probs: np.ndarray
    failed: np.ndarray
    binning: Binning = STARS
    scale: EstimationScale = DEFAULT_SCALE
    sgrid: SGrid = DEFAULT_GRID

    def __len__(self):
        return len(self.probs)

    def header(self) -> dict:
        return {
            "format": LIBRARY_FORMAT,
            "grid": self.grid.to_dict(),
            "decoder": self.decoder.kind,
            "prior": self.decoder.prior.spec() if self.decoder.prior is not None else None,
            "trials": int(self.trials),
            "seed": int(self.seed),
            "binning": self.binning.spec(),
            "scale": [self.scale.lo, self.scale.hi],
            "grid_step": self.sgrid.step,
        }

    def header_hash(self) -> str:
        return header_hash(self.header())

    def distribution(self, index: int) -> FeedbackDistribution:
        return FeedbackDistribution(self.probs[index], self.binning)

    def digest(self) -> str:
        """SHA-256 over header and cell contents."""
        h = hashlib.sha256(json.dumps(self.header(), sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.probs).tobytes())
        h.update(np.ascontiguousarray(self.failed).tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        cells = [None if bad else [float(x) for x in row] for row, bad in zip(self.probs, self.failed)]
        doc = {"header": self.header(), "header_hash": self.header_hash(), "cells": cells}
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ModelLibrary":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        head = doc["header"]
        if head.get("format") != LIBRARY_FORMAT:
            raise InvalidParameterError(f"unsupported library format {head.get('format')!r}")
        scale = EstimationScale(*head["scale"])
        binning = Binning.parse(head["binning"], scale)
        prior = parse_prior(head["prior"]) if head["prior"] else None
        cells = doc["cells"]
        failed = np.array([c is None for c in cells], dtype=bool)
        probs = np.array([c if c is not None else [np.nan] * binning.k for c in cells], dtype=float)
        return cls(
            grid=ParameterGrid.from_dict(head["grid"]),
            decoder=DecoderSpec(head["decoder"], prior),
            trials=head["trials"],
            seed=head["seed"],
            probs=probs,
            failed=failed,
            binning=binning,
            scale=scale,
            sgrid=SGrid(scale, head["grid_step"]),
        )


def header_hash(header: dict) -> str:
    return hashlib.sha256(json.dumps(header, sort_keys=True).encode()).hexdigest()


def _simulate_cells(args):
    grid, decoder, trials, seed, binning, scale, sgrid, start, stop = args
    k = binning.k
    probs = np.full((stop - start, k), np.nan)
    failed = np.zeros(stop - start, dtype=bool)
    for offset, index in enumerate(range(start, stop)):
        xi = grid.cell(index)
        try:
            dist = simulate_feedback(xi, decoder, trials, make_rng(seed, index), binning, scale, sgrid)
        except DegenerateConfigurationError as exc:
            log.warning("cell %d %s: %s", index, xi.as_tuple(), exc)
            failed[offset] = True
            continue
        probs[offset] = dist.probs
    return start, probs, failed


def precompute_library(
    grid: ParameterGrid,
    decoder,
    trials: int = SWEEP_TRIALS,
    seed: int = 0,
    workers: int | None = 1,
    binning: Binning = STARS,
    scale: EstimationScale = DEFAULT_SCALE,
    sgrid: SGrid = DEFAULT_GRID,
    chunk: int = 64,
) -> ModelLibrary:
    """Simulate every grid cell with its own stream ``(seed, cell index)``.

    Cells are independent, so the result does not depend on `workers` or on
    the order in which chunks finish.
    """
    decoder = DecoderSpec.parse(decoder)
    for value in grid.s:
        if not scale.lo <= value <= scale.hi:
            raise InvalidParameterError(f"grid stimulus value {value} outside scale")
    total = len(grid)
    jobs = [
        (grid, decoder, trials, seed, binning, scale, sgrid, start, min(start + chunk, total))
        for start in range(0, total, chunk)
    ]
    probs = np.full((total, binning.k), np.nan)
    failed = np.zeros(total, dtype=bool)
    workers = (os.cpu_count() or 1) if workers is None else int(workers)
    if workers <= 1 or len(jobs) == 1:
        parts = map(_simulate_cells, jobs)
        for start, p, f in parts:
            probs[start : start + len(p)] = p
            failed[start : start + len(f)] = f
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for start, p, f in pool.map(_simulate_cells, jobs):
                probs[start : start + len(p)] = p
                failed[start : start + len(f)] = f
    return ModelLibrary(grid, decoder, int(trials), int(seed), probs, failed, binning, scale, sgrid)


@dataclass(frozen=True)
class FitResult:
    """Best grid cell for one empirical target under one decoder."""

    user: str
    item: str
    decoder: str
    xi: CognitionVector
    cell: int
    jsd: float
    std: float

    def row(self) -> list:
        n, g, w, o, s = self.xi.as_tuple()
        return [self.user, self.item, self.decoder, n, repr(float(g)), repr(float(w)), repr(float(o)),
                repr(float(s)), repr(self.jsd), repr(self.std)]


FIT_COLUMNS = ["target_user", "target_item", "decoder", "n", "g", "w", "o", "s", "jsd", "std"]


def cell_scores(target, library: ModelLibrary) -> np.ndarray:
    """JSD of every library cell against `target`; failed cells score +inf."""
    if isinstance(target, FeedbackDistribution):
        if target.binning != library.binning:
            raise InvalidParameterError(
                f"target binning {target.binning.spec()} differs from library {library.binning.spec()}"
            )
        target = target.probs
    target = np.asarray(target, dtype=float)
    if target.shape != (library.binning.k,):
        raise InvalidParameterError(f"target has shape {target.shape}, library bins {library.binning.k}")
    scores = np.full(len(library), np.inf)
    ok = ~library.failed
    scores[ok] = jsd_many(library.probs[ok], target)
    return scores


def best_fit(target, library: ModelLibrary, user="", item="", std: float = math.nan) -> FitResult:
    """Cell minimizing JSD to `target`; lowest cell index wins ties."""
    scores = cell_scores(target, library)
    if not np.any(np.isfinite(scores)):
        raise DegenerateConfigurationError("every library cell failed; nothing to fit against")
    index = int(np.argmin(scores))
    return FitResult(str(user), str(item), library.decoder.label(), library.grid.cell(index), index,
                     float(scores[index]), float(std))


def fit_targets(targets, library: ModelLibrary) -> list:
    """Best fit for each ``EmpiricalDistribution``-like target (user, item, probs, std)."""
    return [best_fit(t.probs, library, t.user, t.item, t.std) for t in targets]


def write_fit_results(results, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FIT_COLUMNS)
        for r in results:
            writer.writerow(r.row())


def read_fit_results(path) -> list:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            xi = CognitionVector(int(row["n"]), float(row["g"]), float(row["w"]), float(row["o"]), float(row["s"]))
            out.append(FitResult(row["target_user"], row["target_item"], row["decoder"], xi, -1,
                                 float(row["jsd"]), float(row["std"])))
    return out


CORRELATION_LABELS = ("n", "g", "w", "o", "s", "STD")


def correlation_matrix(results) -> np.ndarray:
    """Pearson correlations of (n, g, w, o, s, STD) across fit results.

    Rows and columns of a zero-variance variable are NaN (a warning names
    them); every other diagonal entry is exactly 1.
    """
    results = list(results)
    if len(results) < 3:
        raise InvalidParameterError(f"need at least 3 fit results, got {len(results)}")
    data = np.array([list(r.xi.as_tuple()) + [r.std] for r in results], dtype=float)
    return pearson_matrix(data, CORRELATION_LABELS)


def pearson_matrix(data: np.ndarray, labels=None) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    centered = data - data.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    scale = np.abs(data).max(axis=0) + 1.0
    defined = ss > (1e-12 * scale) ** 2 * len(data)
    if not np.all(defined):
        names = [labels[i] if labels else str(i) for i in np.flatnonzero(~defined)]
        warnings.warn(f"zero variance in {names}; their correlations are undefined (NaN)", RuntimeWarning,
                      stacklevel=2)
    k = data.shape[1]
    out = np.full((k, k), np.nan)
    for i in range(k):
        if not defined[i]:
            continue
        out[i, i] = 1.0
        for j in range(i + 1, k):
            if defined[j]:
                r = centered[:, i] @ centered[:, j] / math.sqrt(ss[i] * ss[j])
                out[i, j] = out[j, i] = min(max(r, -1.0), 1.0)
    return out
