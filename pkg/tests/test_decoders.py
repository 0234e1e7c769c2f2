from fractions import Fraction

import numpy as np
import pytest

from ppcfit.core import CognitionVector, EstimationScale, Population, TuningParams
from ppcfit.decoders import (
    DEFAULT_GRID,
    DecoderSpec,
    FlatPrior,
    GaussianPrior,
    HistogramPrior,
    SGrid,
    decode_mad,
    decode_mld,
    decode_mvd,
    decode_wad,
    likelihood_table,
    log_likelihood,
    parse_prior,
)
from ppcfit.errors import InvalidParameterError, InvalidPriorError, UndefinedEstimateError
from ppcfit.feedback import simulate_estimates
from ppcfit.noise import make_rng, sample_population_response

from oracles import literal_likelihood_argmax


def pop5(g=7.0, w=1.0, o=5.0):
    return Population(5, TuningParams(g, w, o))


def test_grid_points():
    pts = DEFAULT_GRID.points
    assert len(pts) == 401 and pts[0] == 1.0 and pts[-1] == 5.0
    assert np.all(np.diff(pts) > 0)
    with pytest.raises(InvalidParameterError):
        SGrid(step=0.03)


# -- MVD --------------------------------------------------------------------


def test_mvd_unique_max():
    assert decode_mvd(np.array([0, 3, 9, 1, 2]), pop5(), make_rng(0)) == 3.0


def test_mvd_all_zero_ties_are_uniform():
    counts = np.zeros((10**5, 5), dtype=int)
    est = decode_mvd(counts, pop5(), make_rng(1))
    freq = np.array([np.mean(est == v) for v in [1, 2, 3, 4, 5]])
    assert np.all(np.abs(freq - 0.2) < 0.005)


def test_mvd_partial_tie_only_picks_maxima():
    counts = np.tile([4, 0, 4, 1, 0], (2000, 1))
    est = decode_mvd(counts, pop5(), make_rng(2))
    assert set(np.unique(est)) == {1.0, 3.0}


def test_mvd_large_spread_at_low_gain():
    est = simulate_estimates(CognitionVector(100, 1, 1, 5, 3), "mvd", 2000, make_rng(3))
    assert est.std() > 0.8
    assert est.min() < 1.5 and est.max() > 4.5


# -- WAD --------------------------------------------------------------------


def test_wad_single_support():
    assert decode_wad(np.array([0, 0, 0, 6, 0]), pop5()) == 4.0


def test_wad_hand_value():
    pop = Population(2, TuningParams(1, 1, 1))
    assert decode_wad(np.array([2, 4]), pop) == pytest.approx(22 / 6, rel=1e-15)


def test_wad_equal_counts_midpoint():
    assert decode_wad(np.full(11, 3), Population(11, TuningParams(1, 1, 1))) == pytest.approx(3.0, abs=1e-12)


def test_wad_all_zero_is_undefined():
    with pytest.raises(UndefinedEstimateError):
        decode_wad(np.zeros(5, dtype=int), pop5())


def test_wad_scale_invariant_exact(rng):
    pop = pop5()
    prefs = [Fraction(int(p)) for p in pop.preferred]
    for _ in range(200):
        counts = rng.integers(0, 30, 5)
        counts[rng.integers(5)] += 1
        k = int(rng.integers(2, 50))
        exact = sum(Fraction(int(c)) * p for c, p in zip(counts, prefs)) / int(counts.sum())
        scaled = sum(Fraction(int(c) * k) * p for c, p in zip(counts, prefs)) / int(counts.sum() * k)
        assert exact == scaled
        assert decode_wad(counts * k, pop) == pytest.approx(float(exact), rel=1e-14)
        assert decode_wad(counts * k, pop) == pytest.approx(decode_wad(counts, pop), rel=1e-14)


# -- likelihood -------------------------------------------------------------


def test_log_likelihood_matches_definition():
    pop = pop5()
    counts = np.array([1, 4, 9, 3, 0])
    s = 2.7
    f = pop.rates(s)
    expected = float(np.sum(counts * np.log(f) - f))
    assert log_likelihood(counts, pop, s) == pytest.approx(expected, rel=1e-14)
    vec = log_likelihood(counts, pop, np.array([1.0, 2.7, 5.0]))
    assert vec[1] == pytest.approx(expected, rel=1e-14)


def test_likelihood_argmax_matches_literal_product(rng):
    pts = DEFAULT_GRID.points
    for _ in range(15):
        n = int(rng.integers(2, 6))
        g, w, o = rng.uniform(0.5, 60), rng.uniform(0.1, 2.0), rng.uniform(0.5, 15)
        counts = rng.integers(0, 11, n)
        pop = Population(n, TuningParams(g, w, o))
        got = int(np.argmax(likelihood_table(pop).relative_log_likelihood(counts)))
        assert got == literal_likelihood_argmax(counts, n, g, w, o, pts)
        assert decode_mld(counts, pop) == pts[got]


def test_mld_self_consistency_high_gain():
    xi = CognitionVector(50, 400, 0.5, 1, 3)
    pop = Population.from_cognition(xi)
    counts = np.rint(pop.rates(3.0)).astype(int)
    assert decode_mld(counts, pop) == pytest.approx(3.0, abs=0.01)


def test_mld_all_zero_goes_to_boundary():
    for w in [0.3, 1.0, 2.0]:
        est = decode_mld(np.zeros(25, dtype=int), Population(25, TuningParams(5, w, 2)))
        assert est in (1.0, 5.0)


def test_mld_mode_at_three():
    est = simulate_estimates(CognitionVector(100, 1, 1, 5, 3), "mld", 10**4, make_rng(4))
    stars = np.floor(est + 0.5).astype(int)
    assert np.argmax(np.bincount(stars, minlength=6)[1:]) + 1 == 3


def test_mld_concentrates_at_high_gain():
    est = simulate_estimates(CognitionVector(100, 100, 1, 5, 3), "mld", 10**4, make_rng(5))
    assert np.mean(np.abs(est - 3) <= 0.1) >= 0.99


# -- MAD --------------------------------------------------------------------


def test_mad_flat_equals_mld(rng):
    pop = Population(30, TuningParams(10, 0.8, 3))
    counts = rng.poisson(pop.rates(rng.uniform(1, 5, 1000)))
    np.testing.assert_array_equal(decode_mad(counts, pop, prior=FlatPrior()), decode_mld(counts, pop))


def test_mad_point_mass_prior():
    grid = DEFAULT_GRID
    probs = np.zeros(len(grid))
    probs[123] = 1.0
    prior = HistogramPrior(tuple(probs))
    counts = sample_population_response(CognitionVector(50, 20, 1, 5, 4.5), rng=make_rng(6), size=200)
    np.testing.assert_array_equal(decode_mad(counts, Population(50, TuningParams(20, 1, 5)), grid, prior),
                                  grid.points[123])


def test_mad_gaussian_prior_restricts_support():
    xi = CognitionVector(100, 1, 1, 5, 3)
    mad = simulate_estimates(xi, DecoderSpec("mad", GaussianPrior(3, 0.75)), 10**4, make_rng(7))
    mld = simulate_estimates(xi, "mld", 10**4, make_rng(7))
    assert mad.std() < 0.6 * mld.std()
    assert np.mean(np.floor(mad + 0.5) == 1) < 0.01 and np.mean(np.floor(mad + 0.5) == 5) < 0.01


class _ZeroPrior:
    def log_weights(self, points):
        return np.full(len(points), -np.inf)


def test_zero_prior_rejected():
    with pytest.raises(InvalidPriorError):
        decode_mad(np.ones(5, dtype=int), pop5(), prior=_ZeroPrior())


def test_histogram_prior_excludes_zero_points():
    probs = np.zeros(len(DEFAULT_GRID))
    probs[:50] = 1 / 50
    counts = sample_population_response(CognitionVector(50, 50, 0.5, 5, 4.5), rng=make_rng(9), size=100)
    est = decode_mad(counts, Population(50, TuningParams(50, 0.5, 5)), prior=HistogramPrior(tuple(probs)))
    assert np.all(est <= DEFAULT_GRID.points[49])


def test_histogram_prior_must_sum_to_one():
    with pytest.raises(InvalidPriorError):
        HistogramPrior((0.5, 0.2))


def test_histogram_prior_from_bins():
    prior = HistogramPrior.from_bins([0.1, 0.2, 0.4, 0.2, 0.1])
    p = np.asarray(prior.probs)
    assert p.sum() == pytest.approx(1.0)
    stars = np.floor(DEFAULT_GRID.points + 0.5)
    assert p[stars == 3].sum() == pytest.approx(0.4)


def test_parse_prior():
    assert parse_prior("flat") == FlatPrior()
    assert parse_prior("gaussian:3:0.75") == GaussianPrior(3, 0.75)
    with pytest.raises(InvalidPriorError):
        parse_prior("gaussian:3:-1")
    with pytest.raises(InvalidPriorError):
        parse_prior("beta:1:1")


def test_decoder_spec():
    assert DecoderSpec("MAD").prior == GaussianPrior(3, 0.75)
    with pytest.raises(InvalidParameterError):
        DecoderSpec("xyz")
    with pytest.raises(InvalidParameterError):
        DecoderSpec("mld", FlatPrior())


@pytest.mark.parametrize("kind", ["mvd", "wad", "mld", "mad"])
def test_outputs_inside_scale(kind, rng):
    scale = EstimationScale(1, 5)
    out = []
    for seed in range(20):
        n = int(rng.integers(2, 120))
        xi = CognitionVector(n, rng.uniform(0.5, 100), rng.uniform(0.1, 2), rng.uniform(1, 15), rng.uniform(1, 5))
        out.append(simulate_estimates(xi, kind, 5000, make_rng(seed)))
    est = np.concatenate(out)
    assert est.size == 10**5
    assert np.all((est >= scale.lo) & (est <= scale.hi))


def test_mvd_spread_exceeds_wad():
    xi = CognitionVector(100, 7, 1, 5, 3)
    mvd = simulate_estimates(xi, "mvd", 10**4, make_rng(8))
    wad = simulate_estimates(xi, "wad", 10**4, make_rng(8))
    assert mvd.var() >= wad.var()
