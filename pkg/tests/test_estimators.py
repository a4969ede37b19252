import math
import warnings

import numpy as np
import pytest

from i3d.census import NeighborCensus, census, distance_histograms
from i3d.errors import (
    ArgumentError,
    DimensionOutOfRangeError,
    GridRangeWarning,
    NoNeighborsError,
    ScaleTooSmallError,
)
from i3d.estimators import (
    bayes_discrete,
    cramer_rao_discrete,
    estimate,
    inner_radius,
    mle_discrete,
    scan,
    scan_histograms,
    solve_ratio,
    two_pass,
)
from i3d.generators import gen_uniform_lattice
from i3d.volumes import volume_ratio


def uniform_census(n_points, k, t1, t2, d, seed=0):
    rng = np.random.default_rng(seed)
    k = np.full(n_points, k)
    return NeighborCensus(rng.binomial(k, volume_ratio(t1, t2, d)), k, t1, t2)


def test_mle_examples():
    assert mle_discrete(NeighborCensus([5], [13], 1, 2)).d == pytest.approx(2.0, abs=1e-9)
    assert mle_discrete(NeighborCensus([1, 2], [3, 6], 1, 2)).d == pytest.approx(
        1 + math.sqrt(2), abs=1e-9)


def test_mle_errors():
    with pytest.raises(NoNeighborsError):
        mle_discrete(NeighborCensus([0, 0], [0, 0], 1, 2))
    with pytest.raises(ScaleTooSmallError):
        mle_discrete(NeighborCensus([3, 2], [3, 2], 1, 2))
    with pytest.raises(DimensionOutOfRangeError):
        mle_discrete(NeighborCensus([0, 0], [3, 2], 1, 2))
    # below the ratio reachable at d = 1000 with t1 = 1, t2 = 2: 2001 / (1 + 2000 + 2e6)
    with pytest.raises(DimensionOutOfRangeError):
        solve_ratio(1, 2, 1e-4)
    with pytest.raises(ScaleTooSmallError):
        solve_ratio(1, 2, 0.99999)


def test_root_residual():
    for t1, t2, target in [(1, 2, 0.3), (3, 7, 0.07), (10, 20, 0.01), (25, 50, 0.2)]:
        d = solve_ratio(t1, t2, target)
        assert abs(math.log(volume_ratio(t1, t2, d)) - math.log(target)) < 1e-10


def test_cramer_rao_example():
    cen = NeighborCensus(np.full(1000, 20) * 5 // 13, np.full(1000, 20), 1, 2)
    p, dp = 5 / 13, -24 / 169
    expected = math.sqrt(p * (1 - p) / (20 * 1000 * dp**2))
    assert cramer_rao_discrete(2.0, cen) == pytest.approx(expected, rel=1e-6)
    assert cramer_rao_discrete(2.0, cen) == pytest.approx(0.0242, abs=5e-5)
    small = cen.subset(np.arange(250))
    assert cramer_rao_discrete(2.0, small) == pytest.approx(2 * expected, rel=1e-6)
    doubled = NeighborCensus(cen.n, 2 * cen.k, 1, 2)
    assert cramer_rao_discrete(2.0, doubled) ** 2 == pytest.approx(expected**2 / 2, rel=1e-6)


def test_bayes_parameters_and_normalization():
    post = bayes_discrete(NeighborCensus([2], [5], 1, 2))
    assert (post.alpha, post.beta) == (3, 4)
    assert np.trapezoid(post.density, post.d_grid) == pytest.approx(1.0, abs=1e-6)
    assert post.d_grid[0] <= post.mean <= post.d_grid[-1]


def test_bayes_agrees_with_mle():
    cen = uniform_census(1000, 60, 4, 8, 2.5, seed=3)
    mle = mle_discrete(cen)
    post = bayes_discrete(cen)
    assert abs(post.mean - mle.d) / mle.d < 0.01
    assert abs(post.std - mle.err) / mle.err < 0.05


def test_bayes_grid_warning():
    # a tiny census at large d spreads the posterior beyond the capped range
    cen = NeighborCensus([0], [1], 1, 2)
    with pytest.warns(GridRangeWarning):
        bayes_discrete(cen, d_max=5.0, max_refinements=0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        bayes_discrete(uniform_census(500, 40, 2, 4, 3.0))


def test_estimate_dispatch():
    cen = uniform_census(2000, 200, 10, 20, 3.0, seed=1)
    methods = {}
    for m in ("mle", "bayes", "continuum", "bayes-continuum"):
        est, post = estimate(cen, m)
        methods[m] = est
        assert (post is not None) == (m == "bayes")
    assert methods["mle"].method == "mle-discrete"
    assert methods["bayes"].d == pytest.approx(methods["mle"].d, rel=0.01)
    with pytest.raises(ArgumentError):
        estimate(cen, "nope")


def test_discrete_approaches_continuum_at_large_radii():
    rel = []
    for t2 in (4, 16, 64, 256):
        t1 = t2 // 2
        p = volume_ratio(t1, t2, 3.0)
        k = np.full(10, 10**6)
        cen = NeighborCensus(np.rint(p * k).astype(int), k, t1, t2)
        d_cont, _ = estimate(cen, "continuum")
        rel.append(abs(d_cont.d - 3.0) / 3.0)
    assert rel[-1] < 0.02
    assert rel == sorted(rel, reverse=True)


def test_inner_radius_rounding():
    assert inner_radius(2, 0.5) == 1
    assert inner_radius(3, 0.5) == 2
    assert inner_radius(5, 0.5) == 3
    assert inner_radius(1, 0.2) == 1
    assert inner_radius(10, 0.2032) == 2


def test_scan_rows_and_skips():
    pts = gen_uniform_lattice(2, 30, 600, True, seed=2)
    res = scan(pts, [2])
    assert len(res.rows) == 1 and res.rows[0].t1 == 1
    res = scan(pts, [2, 3, 4], r=0.75)
    assert [r.t1 for r in res.rows] == [2, 2, 3]
    assert [r.ok for r in res.rows] == [False, True, True]
    assert res.rows[0].reason
    with pytest.raises(ArgumentError):
        scan(pts, [1])
    with pytest.raises(ArgumentError):
        scan(pts, [2, 3], r=0.9)
    with pytest.raises(ArgumentError):
        scan(pts, [])


def test_scan_matches_direct_census():
    pts = gen_uniform_lattice(3, 12, 800, True, seed=5)
    res = scan(pts, [3, 5, 8])
    for row in res.rows:
        direct = mle_discrete(census(pts, row.t1, row.t2))
        assert row.estimate.d == pytest.approx(direct.d, rel=1e-12)
    hist = distance_histograms(pts, 8)
    again = scan_histograms(hist, [3, 5, 8])
    assert again.dims()[1] == pytest.approx(res.dims()[1], rel=1e-12)
    assert "t2" in res.to_table() and len(res.to_records()) == 3


def test_two_pass_uses_optimal_ratio():
    pts = gen_uniform_lattice(2, 40, 1600, True, seed=9)
    first, second = two_pass(pts, 12)
    assert first.t1 == 6
    assert second.t1 == inner_radius(12, 0.2032 ** (1 / first.d))
    assert second.d == pytest.approx(2.0, abs=0.1)
