
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commutesim.geodata import ODMatrix, RasterMask, Zone
from commutesim.rng import RandomStream
from commutesim.sampling import (SamplingError, apportion_trip_counts,
                                 build_support, largest_remainder,
                                 sample_points)


def _od(counts):
    return ODMatrix(flows={k: (v, None) for k, v in counts.items()})


def _zone(x0=0.0, y0=0.0, side=2.0, zone_id="Z"):
    ring = [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side),
            (x0, y0 + side), (x0, y0)]
    return Zone(zone_id, [ring], workers=1, jobs=1, mean_wage=1.0,
                wage_bins=(1, 0, 0, 0, 0), mode_counts=(1, 0, 0, 0))


def _mask(grid, cellsize=1.0, x0=0.0, y0=0.0):
    arr = np.array(grid, dtype=float)
    return RasterMask(ncols=arr.shape[1], nrows=arr.shape[0],
                      xllcorner=x0, yllcorner=y0, cellsize=cellsize,
                      nodata_value=-9999.0, weights=arr,
                      nodata=np.zeros(arr.shape, bool))


def test_apportion_identity_when_n_equals_total():
    od = _od({("A", "A"): 3, ("A", "B"): 2, ("B", "B"): 5})
    counts = apportion_trip_counts(od, 10)
    assert counts.counts == {("A", "A"): 3, ("A", "B"): 2, ("B", "B"): 5}


def test_apportion_hand_example():
    # quotas {1.5, 1.0, 2.5}; tie between AA and BB goes to AA
    od = _od({("A", "A"): 3, ("A", "B"): 2, ("B", "B"): 5})
    counts = apportion_trip_counts(od, 5)
    assert counts.counts == {("A", "A"): 2, ("A", "B"): 1, ("B", "B"): 2}


def test_apportion_rejects_bad_input():
    with pytest.raises(SamplingError):
        apportion_trip_counts(_od({("A", "A"): 1}), 0)
    with pytest.raises(SamplingError):
        apportion_trip_counts(ODMatrix(flows={}), 5)


@settings(max_examples=120, deadline=None)
@given(flows=st.lists(st.integers(0, 500), min_size=1, max_size=30),
       n=st.integers(1, 2000))
def test_apportion_conservation_and_quota_property(flows, n):
    if sum(flows) == 0:
        flows[0] = 1
    od = _od({(f"z{k:02d}", f"z{k:02d}"): f
              for k, f in enumerate(flows) if f > 0})
    counts = apportion_trip_counts(od, n)
    total = od.total
    assert sum(counts.counts.values()) == n
    for (i, j), (x, _) in od.flows.items():
        t = counts.counts.get((i, j), 0)
        assert abs(t - n * x / total) < 1.0
        assert t == 0 or x > 0


def test_largest_remainder_order_tiebreak():
    # equal fractions: units go to the lowest order positions
    assert largest_remainder([0.5, 0.5, 0.5, 0.5], 2) == [1, 1, 0, 0]
    assert largest_remainder([0.5, 0.5, 0.5, 0.5], 2,
                             order=[3, 2, 1, 0]) == [0, 0, 1, 1]


def test_build_support_single_positive_cell():
    zone = _zone(side=2.0)
    mask = _mask([[0, 0], [1, 0]])   # bottom-left cell positive
    support = build_support(zone, mask)
    assert len(support) == 1
    assert not support.fallback
    assert support.weights.tolist() == [1.0]
    assert (support.x0[0], support.y0[0]) == (0.0, 0.0)


def test_build_support_fallback():
    zone = _zone(x0=10.0, y0=10.0)
    mask = _mask([[1]])   # far away from the zone
    support = build_support(zone, mask, fallback_cellsize=0.5)
    assert support.fallback
    assert len(support) == 16   # 2x2 zone at 0.5 cells
    assert np.all(support.weights == 1.0)


def test_build_support_error_without_fallback():
    zone = _zone()
    mask = _mask([[0, 0], [0, 0]])
    with pytest.raises(SamplingError, match="Z"):
        build_support(zone, mask)


def test_support_cells_inside_zone(midsize_scenario):
    zone = midsize_scenario.zones.zones[7]
    support = build_support(zone, midsize_scenario.res_mask)
    centers_x = support.x0 + support.width / 2
    centers_y = support.y0 + support.height / 2
    for x, y in zip(centers_x, centers_y):
        assert zone.contains(x, y)
    assert np.all(np.diff(support.cum_weights) > 0)


def test_sample_zero_weight_cell_never_chosen():
    zone = _zone(side=2.0)
    mask = _mask([[0, 0], [1, 0]])
    support = build_support(zone, mask)
    pts = sample_points(support, 200, RandomStream(5, "test", 0))
    for x, y in pts:
        assert 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0


def test_sample_determinism():
    zone = _zone()
    support = build_support(zone, _mask([[1, 2], [3, 4]]))
    a = sample_points(support, 50, RandomStream(9, "pts", 1))
    b = sample_points(support, 50, RandomStream(9, "pts", 1))
    assert a == b


def test_sample_uniform_mean():
    # single unit cell at the origin: mean converges to (0.5, 0.5)
    zone = _zone(side=1.0)
    support = build_support(zone, _mask([[1]]))
    pts = sample_points(support, 10_000, RandomStream(11, "uniform", 0))
    mx = sum(p[0] for p in pts) / len(pts)
    my = sum(p[1] for p in pts) / len(pts)
    assert abs(mx - 0.5) < 0.05 and abs(my - 0.5) < 0.05


def test_sample_points_in_cell_boxes():
    zone = _zone(side=2.0)
    support = build_support(zone, _mask([[1, 3], [2, 1]]))
    pts = sample_points(support, 2000, RandomStream(3, "boxes", 0))
    boxes = list(zip(support.x0, support.y0, support.width, support.height))
    for x, y in pts:
        assert any(bx <= x <= bx + bw and by <= y <= by + bh
                   for bx, by, bw, bh in boxes)


def test_sample_chi_square_goodness_of_fit():
    from scipy.stats import chi2
    weights = [[1, 5, 2, 8], [3, 1, 7, 2], [4, 4, 1, 6], [2, 9, 3, 1]]
    zone = _zone(side=4.0)
    support = build_support(zone, _mask(weights))
    assert len(support) == 16
    draws = 100_000
    pts = sample_points(support, draws, RandomStream(13, "chi2", 0))
    counts = np.zeros(len(support))
    for x, y in pts:
        cell = int(y) * 4 + int(x)
        # map back to support order (cells stored bottom row first)
        idx = np.flatnonzero((support.x0 == float(int(x))) &
                             (support.y0 == float(int(y))))
        counts[idx[0]] += 1
    expected = draws * support.weights / support.weights.sum()
    stat = float(((counts - expected) ** 2 / expected).sum())
    assert stat < chi2.ppf(0.999, df=len(support) - 1)


def test_sample_empty_support_error():
    zone = _zone()
    support = build_support(zone, _mask([[1]]))
    empty = support.__class__(zone_id="Z", x0=support.x0[:0],
                              y0=support.y0[:0], width=support.width[:0],
                              height=support.height[:0],
                              weights=support.weights[:0],
                              cum_weights=support.cum_weights[:0])
    with pytest.raises(SamplingError):
        sample_points(empty, 1, RandomStream(1, "x", 0))
    assert sample_points(empty, 0, RandomStream(1, "x", 0)) == []
