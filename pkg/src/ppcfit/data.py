"""Rating datasets: CSV ingestion, empirical distributions, synthetic generator."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ppcfit.errors import DatasetError, InvalidParameterError
from ppcfit.feedback import STARS, FeedbackDistribution
from ppcfit.noise import make_rng

HEADER = ("user", "item", "trial", "rating")
MIN_RATING, MAX_RATING = 1, 5

# Study design of the repeated trailer-rating experiment.
STUDY_USERS, STUDY_ITEMS, STUDY_TRIALS = 67, 5, 5
# Share of (user, item) pairs with 1, 2 and >=3 distinct ratings.
TARGET_SPLIT = (0.35, 0.50, 0.15)

# Per-pair rating STD is std_scale * (STD_SHIFT + Exp(1)).  Both constants come
# from calibrate_generator() on 400,000 pairs (seed 2024); a pure exponential
# (STD_SHIFT = 0) cannot reach the target split.
DEFAULT_STD_SCALE = 0.3435
STD_SHIFT = 0.2235


@dataclass(frozen=True)
class RatingRecord:
    user: str
    item: str
    trial: int
    rating: int


@dataclass
class Dataset:
    records: list

    def __len__(self):
        return len(self.records)

    @property
    def users(self) -> list:
        return sorted({r.user for r in self.records}, key=_natural_key)

    @property
    def items(self) -> list:
        return sorted({r.item for r in self.records}, key=_natural_key)

    @property
    def trials(self) -> list:
        return sorted({r.trial for r in self.records})

    def counts(self) -> dict:
        return {"users": len(self.users), "items": len(self.items), "trials": len(self.trials),
                "ratings": len(self.records)}

    def pairs(self) -> dict:
        """(user, item) -> ratings ordered by trial."""
        out = defaultdict(list)
        for r in sorted(self.records, key=lambda r: r.trial):
            out[(r.user, r.item)].append(r.rating)
        return dict(out)


def _natural_key(value: str):
    return (0, int(value), "") if value.isdigit() else (1, 0, value)


def load_dataset(source) -> Dataset:
    """Read a ``user,item,trial,rating`` CSV from a path or an open text file.

    Raises DatasetError naming the line of the first malformed or invalid row.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            return _parse(fh)
    return _parse(source)


def _parse(fh) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError("empty dataset: no header line") from None
    if tuple(h.strip() for h in header) != HEADER:
        raise DatasetError(f"line 1: expected header {','.join(HEADER)}, got {','.join(header)}")
    records, seen = [], {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise DatasetError(f"line {line}: expected 4 fields, got {len(row)}")
        user, item = row[0].strip(), row[1].strip()
        try:
            trial, rating = int(row[2]), int(row[3])
        except ValueError:
            raise DatasetError(f"line {line}: trial and rating must be integers, got {row[2]!r}, {row[3]!r}") from None
        if not user or not item:
            raise DatasetError(f"line {line}: empty user or item id")
        if trial < 1:
            raise DatasetError(f"line {line}: trial must be >= 1, got {trial}")
        if not MIN_RATING <= rating <= MAX_RATING:
            raise DatasetError(
                f"line {line}: rating {rating} for (user={user}, item={item}, trial={trial}) "
                f"outside {MIN_RATING}..{MAX_RATING}"
            )
        key = (user, item, trial)
        if key in seen:
            raise DatasetError(f"line {line}: duplicate (user={user}, item={item}, trial={trial}), first on line {seen[key]}")
        seen[key] = line
        records.append(RatingRecord(user, item, trial, rating))
    if not records:
        raise DatasetError("empty dataset: no rating rows")
    return Dataset(records)


def save_dataset(dataset: Dataset, dest) -> None:
    """Write CSV with LF line endings, records in their stored order."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            save_dataset(dataset, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(HEADER)
    for r in dataset.records:
        writer.writerow([r.user, r.item, r.trial, r.rating])


def dumps_dataset(dataset: Dataset) -> str:
    buf = io.StringIO()
    save_dataset(dataset, buf)
    return buf.getvalue()


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Rating histogram over stars 1..5 of one (user, item) pair."""

    user: str
    item: str
    probs: np.ndarray
    std: float
    ratings: tuple

    def as_feedback(self) -> FeedbackDistribution:
        return FeedbackDistribution(self.probs, STARS)

    def to_dict(self) -> dict:
        return {"user": self.user, "item": self.item, "probs": [float(p) for p in self.probs],
                "std": self.std, "ratings": list(self.ratings)}


def _distribution(user, item, ratings) -> EmpiricalDistribution:
    r = np.asarray(ratings, dtype=int)
    counts = np.bincount(r - MIN_RATING, minlength=MAX_RATING - MIN_RATING + 1)
    # population STD: the trials are the whole feedback distribution
    std = float(np.std(r.astype(float)))
    return EmpiricalDistribution(user, item, counts / counts.sum(), std, tuple(int(x) for x in r))


def empirical_distributions(dataset: Dataset) -> list:
    """One distribution per (user, item), ordered by user then item."""
    pairs = dataset.pairs()
    keys = sorted(pairs, key=lambda k: (_natural_key(k[0]), _natural_key(k[1])))
    return [_distribution(u, i, pairs[(u, i)]) for u, i in keys]


def pooled_distributions(dataset: Dataset) -> list:
    """One distribution per item pooling every user's ratings (user field '*')."""
    by_item = defaultdict(list)
    for r in dataset.records:
        by_item[r.item].append(r.rating)
    return [_distribution("*", item, by_item[item]) for item in sorted(by_item, key=_natural_key)]


def write_distributions_json(dists, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump([d.to_dict() for d in dists], fh, indent=1)
        fh.write("\n")


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=float) + 0.5)


def _pair_ratings(center, std, noise):
    return np.clip(round_half_up(center + std * noise), MIN_RATING, MAX_RATING).astype(int)


def synthesize_dataset(
    users: int = STUDY_USERS,
    items: int = STUDY_ITEMS,
    trials: int = STUDY_TRIALS,
    seed: int = 0,
    std_scale: float = DEFAULT_STD_SCALE,
    std_shift: float = STD_SHIFT,
) -> Dataset:
    """Synthetic repeated ratings mimicking the study's variability.

    Each (user, item) pair gets a central tendency on [1, 5] and a rating
    STD of ``std_scale * (std_shift + E)`` with E ~ Exp(1); each trial is a
    Gaussian draw around the center, rounded half-up and clipped to 1..5.
    Centers and E are stratified over the pairs (one uniform per stratum,
    strata shuffled), which keeps small datasets close to the calibrated
    split. Trial noise of pair (u, i) comes from stream ``(seed, u, i)``.
    """
    for name, value in (("users", users), ("items", items), ("trials", trials)):
        if int(value) != value or value < 1:
            raise InvalidParameterError(f"{name} must be a positive integer, got {value}")
    if not (std_scale >= 0 and std_shift >= 0):
        raise InvalidParameterError("std_scale and std_shift must be >= 0")
    n_pairs = users * items
    master = make_rng(seed)
    u_center = (master.permutation(n_pairs) + master.random(n_pairs)) / n_pairs
    u_std = (master.permutation(n_pairs) + master.random(n_pairs)) / n_pairs
    centers = MIN_RATING + (MAX_RATING - MIN_RATING) * u_center
    stds = std_scale * (std_shift - np.log1p(-u_std))
    records = []
    for u in range(1, users + 1):
        for i in range(1, items + 1):
            k = (u - 1) * items + (i - 1)
            noise = make_rng(seed, u, i).standard_normal(trials)
            ratings = _pair_ratings(centers[k], stds[k], noise)
            records.extend(RatingRecord(str(u), str(i), t + 1, int(r)) for t, r in enumerate(ratings))
    return Dataset(records)


def distinct_split(dataset_or_ratings) -> tuple:
    """Fractions of (user, item) pairs with exactly 1, exactly 2 and >= 3 distinct ratings."""
    if isinstance(dataset_or_ratings, Dataset):
        groups = dataset_or_ratings.pairs().values()
    else:
        groups = dataset_or_ratings
    distinct = np.array([len(set(g)) for g in groups])
    if distinct.size == 0:
        raise DatasetError("no (user, item) pairs")
    return (float(np.mean(distinct == 1)), float(np.mean(distinct == 2)), float(np.mean(distinct >= 3)))


def _split_from_draws(center, expo, noise, std_scale, std_shift):
    std = std_scale * (std_shift + expo)
    r = _pair_ratings(center[:, None], std[:, None], noise)
    s = np.sort(r, axis=1)
    distinct = 1 + np.count_nonzero(np.diff(s, axis=1), axis=1)
    return np.array([np.mean(distinct == 1), np.mean(distinct == 2), np.mean(distinct >= 3)])


def calibrate_generator(target=TARGET_SPLIT, pairs: int = 400_000, trials: int = STUDY_TRIALS, seed: int = 2024):
    """Find (std_scale, std_shift) reproducing `target` distinct-rating fractions.

    Uses common random numbers so the split is a deterministic function of
    the two constants. Inner search: std_scale hitting the 1-distinct share
    for a given shift. Outer search: the shift hitting the 2-distinct share.
    """
    from scipy.optimize import brentq

    rng = make_rng(seed)
    center = rng.uniform(MIN_RATING, MAX_RATING, pairs)
    expo = rng.exponential(1.0, pairs)
    noise = rng.standard_normal((pairs, trials))

    def scale_for(shift):
        return brentq(lambda b: _split_from_draws(center, expo, noise, b, shift)[0] - target[0],
                      0.01, 3.0, xtol=1e-5)

    def two_gap(shift):
        return _split_from_draws(center, expo, noise, scale_for(shift), shift)[1] - target[1]

    shift = brentq(two_gap, 0.0, 2.0, xtol=1e-4)
    scale = scale_for(shift)
    split = _split_from_draws(center, expo, noise, scale, shift)
    return float(scale), float(shift), tuple(float(x) for x in split)


def category_summary(dataset: Dataset) -> str:
    one, two, more = distinct_split(dataset)
    return (f"pairs={len(dataset.pairs())} ratings={len(dataset)}\n"
            f"1 distinct rating: {one:.1%}\n2 distinct ratings: {two:.1%}\n3+ distinct ratings: {more:.1%}")


def rating_std_values(dataset: Dataset) -> np.ndarray:
    return np.array([math.sqrt(np.var(np.asarray(r, dtype=float))) for r in dataset.pairs().values()])
