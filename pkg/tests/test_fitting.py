import math
import warnings

import numpy as np
import pytest

from ppcfit.core import CognitionVector
from ppcfit.errors import InvalidParameterError
from ppcfit.feedback import Binning, FeedbackDistribution, simulate_feedback
from ppcfit.fitting import (
    FitResult,
    ModelLibrary,
    best_fit,
    build_grid,
    correlation_matrix,
    full_grid,
    pearson_matrix,
    precompute_library,
    read_fit_results,
    subdivide,
    write_fit_results,
)
from ppcfit.noise import make_rng

from oracles import naive_jsd


def test_grid_subdivision():
    g = full_grid()
    assert g.n == tuple(range(25, 251, 25))
    assert np.diff(g.s) == pytest.approx(4 / 9)
    assert len(g) == 10**5
    assert subdivide(2, 9, 1).tolist() == [2.0]


def test_desk_grid(desk):
    assert len(desk) == 4**5
    assert desk.n == (25, 100, 175, 250)
    assert desk.cell(0) == CognitionVector(25, 1, 0.1, 1, 1)
    assert desk.cell(len(desk) - 1) == CognitionVector(250, 100, 2, 15, 5)
    assert list(desk.cells())[517] == desk.cell(517)
    np.testing.assert_array_equal(desk.as_array()[517], desk.cell(517).as_tuple())


def test_grid_n_rounded():
    g = build_grid({"n": (25, 250, 4)}, count=2)
    assert g.n == (25, 100, 175, 250)
    g = build_grid({"n": (10, 20, 4)}, count=1)
    assert g.n == (10, 13, 17, 20)
    with pytest.raises(InvalidParameterError):
        build_grid({"q": (1, 2)})


def small_grid():
    return build_grid({"n": (25, 60, 2), "g": (5, 60, 2), "w": (0.3, 1.2, 2), "o": (2, 8, 2), "s": (1, 5, 3)})


def test_library_deterministic_across_workers():
    g = small_grid()
    a = precompute_library(g, "mld", 200, seed=3, workers=1, chunk=7)
    b = precompute_library(g, "mld", 200, seed=3, workers=2, chunk=5)
    assert a.digest() == b.digest()
    c = precompute_library(g, "mld", 200, seed=4, workers=1)
    assert a.digest() != c.digest()


def test_library_cells_use_their_own_stream():
    g = small_grid()
    lib = precompute_library(g, "mvd", 100, seed=9)
    for i in (0, 13, len(g) - 1):
        expected = simulate_feedback(g.cell(i), "mvd", 100, make_rng(9, i))
        np.testing.assert_array_equal(lib.probs[i], expected.probs)


def test_library_roundtrip(tmp_path):
    g = small_grid()
    lib = precompute_library(g, "mad", 100, seed=1)
    lib.failed[3] = True
    lib.probs[3] = np.nan
    path = tmp_path / "lib.json"
    lib.save(path)
    back = ModelLibrary.load(path)
    assert back.digest() == lib.digest()
    assert back.header_hash() == lib.header_hash()
    assert back.decoder == lib.decoder


def test_failed_cells_are_marked_not_dropped():
    g = build_grid({"n": (2, 2, 1), "g": (1e-9, 1e-9, 1), "w": (1, 1, 1), "o": (1e-7, 1.0, 2), "s": (3, 3, 1)})
    lib = precompute_library(g, "wad", 20, seed=0)
    assert len(lib) == 2
    assert lib.failed.tolist() == [True, False]
    assert np.all(np.isnan(lib.probs[0]))
    assert best_fit(lib.probs[1], lib).cell == 1


def test_best_fit_identity(desk_libraries):
    lib = desk_libraries("mld")
    for i in (0, 400, 1023):
        r = best_fit(lib.distribution(i), lib)
        assert r.jsd == 0.0
        assert np.array_equal(lib.probs[r.cell], lib.probs[i])
        assert r.cell <= i


def test_best_fit_equals_naive_scan(desk_libraries, rng):
    lib = desk_libraries("mld")
    for _ in range(5):
        target = rng.dirichlet(np.ones(5) * 0.5)
        naive = [naive_jsd(row, target) for row in lib.probs]
        best = min(range(len(naive)), key=lambda i: (naive[i], i))
        r = best_fit(target, lib)
        assert r.cell == best
        assert r.jsd == pytest.approx(naive[best], abs=1e-12)


def test_point_mass_at_three_prefers_central_high_gain(desk_libraries, desk):
    lib = desk_libraries("mld")
    target = FeedbackDistribution.point_mass(2).probs
    r = best_fit(target, lib)
    scores = np.array([naive_jsd(row, target) for row in lib.probs])
    winners = np.flatnonzero(scores == scores.min())
    assert r.cell in winners
    xi = r.xi
    assert abs(xi.s - 3) < 1.0
    assert xi.g >= 34


def test_best_fit_binning_mismatch(desk_libraries):
    with pytest.raises(InvalidParameterError):
        best_fit(FeedbackDistribution.point_mass(0, Binning("uniform", 5)), desk_libraries("mld"))


def test_fit_results_csv_roundtrip(tmp_path):
    rows = [FitResult("1", "2", "mld", CognitionVector(25, 34.0, 0.1, 1.0, 2.3333333333333335), 5, 0.125, 0.4)]
    path = tmp_path / "fits.csv"
    write_fit_results(rows, path)
    text = path.read_text()
    assert text.splitlines()[0] == "target_user,target_item,decoder,n,g,w,o,s,jsd,std"
    back = read_fit_results(path)
    assert back[0].xi == rows[0].xi and back[0].jsd == 0.125


def test_correlation_linear_columns():
    x = np.arange(10.0)
    data = np.column_stack([x, -2 * x + 1, x**2])
    m = pearson_matrix(data)
    assert m[0, 1] == pytest.approx(-1.0, abs=1e-12)
    assert np.all(np.diag(m) == 1.0)
    np.testing.assert_array_equal(m, m.T)
    np.testing.assert_allclose(m, np.corrcoef(data.T), atol=1e-12)


def test_correlation_independent_null(rng):
    m = pearson_matrix(rng.normal(size=(1000, 6)))
    off = m[~np.eye(6, dtype=bool)]
    assert np.all(np.abs(off) < 0.1)


def test_correlation_flags_zero_variance():
    results = [FitResult("u", str(i), "mld", CognitionVector(25, 1 + i, 0.5 * (i + 1), 2, 3), i, 0.1, 0.1 * i)
               for i in range(4)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = correlation_matrix(results)
    assert any("zero variance" in str(w.message) for w in caught)
    for idx in (0, 3, 4):  # n, o, s constant
        assert np.all(np.isnan(m[idx])) and np.all(np.isnan(m[:, idx]))
    assert m[1, 1] == 1.0 and m[1, 2] == pytest.approx(1.0)
    with pytest.raises(InvalidParameterError):
        correlation_matrix(results[:2])


def test_self_recovery_small(desk_libraries, desk):
    lib = desk_libraries("mld")
    for i in (37, 700):
        target = simulate_feedback(desk.cell(i), "mld", 10**4, make_rng(777, i))
        r = best_fit(target, lib)
        assert r.jsd <= 0.05
        assert math.isnan(r.std)
