import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppcfit.core import (
    DEFAULT_SCALE,
    CognitionVector,
    EstimationScale,
    Population,
    TuningParams,
    gaussian_bump,
    preferred_values,
    static_population_response,
    tuning_value,
)
from ppcfit.errors import InvalidParameterError

mpmath.mp.dps = 40
FIG1 = TuningParams(gain=7, width=1, offset=5)


def mp_bump(p, w, s):
    p, w, s = mpmath.mpf(p), mpmath.mpf(w), mpmath.mpf(s)
    return mpmath.exp(-((s - p) ** 2) / (2 * w**2)) / (w * mpmath.sqrt(2 * mpmath.pi))


def test_bump_peak_matches_high_precision():
    assert gaussian_bump(3, 1, 3) == pytest.approx(float(mp_bump(3, 1, 3)), rel=1e-15)
    assert gaussian_bump(3, 1, 3) == pytest.approx(0.398942, abs=5e-7)


@pytest.mark.parametrize("p,w,s", [(3, 1, 2.2), (1, 0.1, 1.05), (5, 2, 1), (2.5, 0.7, 4.9)])
def test_bump_against_mpmath(p, w, s):
    assert gaussian_bump(p, w, s) == pytest.approx(float(mp_bump(p, w, s)), rel=1e-13)


@given(st.floats(0, 50))
def test_bump_symmetric(d):
    assert gaussian_bump(3, 1, 3 + d) == pytest.approx(gaussian_bump(3, 1, 3 - d), rel=1e-12, abs=1e-300)


def test_bump_tails_vanish():
    assert gaussian_bump(3, 1, 1e3) == 0.0
    assert gaussian_bump(3, 1, -1e3) == 0.0


@pytest.mark.parametrize("w", [0, -1, float("nan")])
def test_bump_rejects_bad_width(w):
    with pytest.raises(InvalidParameterError):
        gaussian_bump(3, w, 3)


def test_tuning_value_fig1_peak():
    assert tuning_value(FIG1, 3, 3) == pytest.approx(7 / math.sqrt(2 * math.pi) + 5, rel=1e-15)
    assert tuning_value(FIG1, 3, 3) == pytest.approx(7.7926, abs=5e-5)


def test_tuning_value_linear_in_gain():
    low = tuning_value(TuningParams(1, 1, 5), 3, 3)
    assert tuning_value(FIG1, 3, 3) - low == pytest.approx(6 / math.sqrt(2 * math.pi), rel=1e-14)


def test_tuning_value_far_from_preference_is_offset():
    assert tuning_value(FIG1, 3, 60) == pytest.approx(5.0)


@given(
    g=st.floats(0.01, 200), w=st.floats(0.05, 3), o=st.floats(0.01, 30),
    p=st.floats(1, 5), s=st.floats(1, 5),
)
def test_tuning_value_exceeds_offset(g, w, o, p, s):
    value = tuning_value(TuningParams(g, w, o), p, s)
    assert value >= o
    # strict unless the bump is below the float resolution of o
    if g * gaussian_bump(p, w, s) > 1e-12 * o:
        assert value > o


@given(w=st.floats(0.05, 3), p=st.floats(1, 5))
def test_tuning_argmax_is_preferred(w, p):
    s = np.linspace(p - 4 * w, p + 4 * w, 8001)
    vals = tuning_value(TuningParams(5, w, 1), p, s)
    assert s[np.argmax(vals)] == pytest.approx(p, abs=8 * w / 8000)


def test_tuning_params_validated():
    for bad in [(0, 1, 1), (1, 0, 1), (1, 1, 0), (1, -1, 1)]:
        with pytest.raises(InvalidParameterError):
            TuningParams(*bad)


def test_preferred_values_eleven():
    p = preferred_values(11)
    np.testing.assert_allclose(p, 1 + 0.4 * np.arange(11), atol=1e-12)
    assert p[0] == 1.0 and p[-1] == 5.0


def test_preferred_values_small():
    assert preferred_values(2).tolist() == [1.0, 5.0]
    assert preferred_values(5).tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]


@given(st.integers(2, 2000), st.floats(-10, 10), st.floats(0.1, 20))
def test_preferred_values_equidistant(n, lo, span):
    scale = EstimationScale(lo, lo + span)
    p = preferred_values(n, scale)
    assert p[0] == scale.lo and p[-1] == scale.hi
    assert np.all(np.diff(p) > 0)
    np.testing.assert_allclose(np.diff(p), span / (n - 1), atol=1e-12 * max(1, abs(lo) + span))


def test_preferred_values_rejects_small_n():
    with pytest.raises(InvalidParameterError):
        preferred_values(1)


def test_scale_validation():
    with pytest.raises(InvalidParameterError):
        EstimationScale(5, 1)
    assert DEFAULT_SCALE == EstimationScale(1, 5)


def test_static_response_fig1():
    rates = static_population_response(CognitionVector(11, 7, 1, 5, 3))
    assert np.argmax(rates) == 5
    assert rates[5] == pytest.approx(7.7926, abs=5e-5)
    np.testing.assert_allclose(rates, rates[::-1], rtol=1e-14)
    assert np.all(rates >= 5)


def test_static_response_offset_only_limit():
    rates = static_population_response(CognitionVector(25, 1e-9, 1, 5, 2))
    np.testing.assert_allclose(rates, 5.0, atol=1e-9)


def test_cognition_vector_validation():
    with pytest.raises(InvalidParameterError):
        CognitionVector(1, 1, 1, 1, 3)
    with pytest.raises(InvalidParameterError):
        CognitionVector(10, 1, 0, 1, 3)
    with pytest.raises(InvalidParameterError):
        static_population_response(CognitionVector(10, 1, 1, 1, 6))
    assert CognitionVector.parse("100,1,1,5,3") == CognitionVector(100, 1.0, 1.0, 5.0, 3.0)
    with pytest.raises(InvalidParameterError):
        CognitionVector.parse("1,2,3")


def test_population_rates_matrix():
    pop = Population(7, FIG1)
    s = np.array([1.0, 2.5, 5.0])
    m = pop.rates(s)
    assert m.shape == (3, 7)
    for i, si in enumerate(s):
        np.testing.assert_array_equal(m[i], pop.rates(si))
