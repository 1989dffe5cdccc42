"""Polygon regions, rejection sampling, and control distance levels."""
import numpy as np
import pytest

from blauspace import (
    ConfigError,
    NumericError,
    PolygonRegion,
    format_regions,
    parse_regions,
    sample_control_distance_levels,
    sample_location,
    sample_locations,
)

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
TRIANGLE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]


def _region(rid="r", pop=100.0, rings=(UNIT_SQUARE,)):
    return PolygonRegion(rid, pop, tuple(np.array(r) for r in rings))


def test_ring_areas():
    assert _region().area == pytest.approx(1.0)
    assert _region(rings=(TRIANGLE,)).area == pytest.approx(0.5)
    two = _region(rings=(UNIT_SQUARE, [(2.0, 0.0), (3.0, 0.0), (3.0, 1.0), (2.0, 1.0)]))
    assert two.area == pytest.approx(2.0)
    # orientation does not matter
    reversed_square = _region(rings=(list(reversed(UNIT_SQUARE)),))
    assert reversed_square.area == pytest.approx(1.0)


def test_even_odd_containment():
    r = _region()
    got = r.contains(np.array([[0.5, 0.5], [1.5, 0.5], [0.5, -0.1]]))
    np.testing.assert_array_equal(got, [True, False, False])


def test_nested_rings_cancel():
    outer = [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]
    inner = [(1.0, 1.0), (2.0, 1.0), (2.0, 2.0), (1.0, 2.0)]
    r = _region(rings=(outer, inner))
    got = r.contains(np.array([[1.5, 1.5], [0.5, 0.5], [3.0, 3.0]]))
    # the nested ring flips its interior back out
    np.testing.assert_array_equal(got, [False, True, True])


def test_region_validation():
    with pytest.raises(ConfigError):
        _region(rid="has space")
    with pytest.raises(ConfigError):
        _region(pop=0.0)
    with pytest.raises(ConfigError):
        _region(rings=([(0.0, 0.0), (1.0, 0.0)],))
    with pytest.raises(ConfigError):
        _region(rings=([(0.0, 0.0), (1.0, 0.0), (np.nan, 1.0)],))
    with pytest.raises(ConfigError):
        # degenerate: all vertices on one line
        _region(rings=([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],))


def test_parse_and_format_round_trip():
    text = (
        "# comment line\n"
        "north 1200 0,0 1,0 1,1 0,1\n"
        "south 300 0,0 1,0 1,1 ; 2,0 3,0 3,1 2,1  # trailing comment\n"
        "\n"
    )
    regions = parse_regions(text)
    assert [r.region_id for r in regions] == ["north", "south"]
    assert regions[0].population == 1200.0
    assert len(regions[1].rings) == 2
    again = parse_regions(format_regions(regions))
    for a, b in zip(regions, again):
        assert a.region_id == b.region_id
        assert a.population == b.population
        for ra, rb in zip(a.rings, b.rings):
            np.testing.assert_array_equal(ra, rb)


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("r1 100 0,0 1,0\n", "line 1"),
        ("r1 100 0,0 1,0 1,oops\n", "line 1"),
        ("r1 nope 0,0 1,0 1,1\n", "line 1"),
        ("r1 100 0,0 1,0 1,1\nr1 50 0,0 1,0 1,1\n", "line 2"),
        ("r1\n", "line 1"),
        ("", "no regions"),
    ],
)
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_regions(text)


def test_samples_land_in_assigned_region():
    regions = [
        _region("a", 50.0, rings=(TRIANGLE,)),
        _region("b", 50.0, rings=([(5.0, 5.0), (6.0, 5.0), (6.0, 6.0), (5.0, 6.0)],)),
    ]
    sample = sample_locations(regions, 400, seed=2)
    assert sample.locations.shape == (400, 2)
    assert len(sample.region_ids) == 400
    lookup = {r.region_id: r for r in regions}
    for rid in ("a", "b"):
        mask = np.array([x == rid for x in sample.region_ids])
        assert lookup[rid].contains(sample.locations[mask]).all()


def test_population_proportional_assignment():
    regions = [_region("big", 900.0), _region("small", 100.0)]
    sample = sample_locations(regions, 20000, seed=5)
    frac = np.mean([rid == "big" for rid in sample.region_ids])
    assert abs(frac - 0.9) < 3 * np.sqrt(0.9 * 0.1 / 20000)


def test_unit_square_needs_no_rejections():
    sample = sample_locations([_region()], 500, seed=1)
    # the bbox is the polygon, so every proposal is accepted
    assert sample.proposals == 500
    assert sample.acceptance_rate == 1.0


def test_triangle_acceptance_near_half():
    sample = sample_locations([_region(rings=(TRIANGLE,))], 20000, seed=9)
    assert sample.acceptance_rate == pytest.approx(0.5, abs=3 * np.sqrt(0.25 / 20000))


def test_sampling_deterministic():
    regions = [_region("a", 10.0, rings=(TRIANGLE,)), _region("b", 30.0)]
    s1 = sample_locations(regions, 100, seed=33)
    s2 = sample_locations(regions, 100, seed=33)
    np.testing.assert_array_equal(s1.locations, s2.locations)
    assert s1.region_ids == s2.region_ids
    assert s1.proposals == s2.proposals


def test_single_location_draw():
    pt = sample_location(_region(rings=(TRIANGLE,)), seed=0)
    assert pt.shape == (2,)
    assert _region(rings=(TRIANGLE,)).contains(pt[None, :])[0]


def test_thin_sliver_raises_after_empty_rounds():
    # a diagonal sliver has positive area but fills a vanishing fraction
    # of its bounding box, so every proposal round comes back empty
    sliver = [(0.0, 0.0), (1.0, 1.0), (1.0, 1.0 + 1e-9), (0.0, 1e-9)]
    with pytest.raises(NumericError):
        sample_locations([_region(rings=(sliver,))], 10, seed=0)


def test_distance_levels_range_and_mixture():
    regions = [_region("a", 500.0), _region("b", 500.0)]
    levels = sample_control_distance_levels(regions, 5000, bins=(1.0, 5.0, 50.0), seed=4)
    assert levels.shape == (5000,)
    assert levels.dtype.kind == "i"
    assert set(np.unique(levels)) <= {1, 2, 3, 4}


def test_distance_levels_two_point_mixture():
    # two far-apart pin-prick regions: within-region distance is ~0
    # (level 1), across is ~10 (level 3 under bins (1, 5, 50))
    eps = 1e-9
    a = _region("a", 500.0, rings=([(0.0, 0.0), (eps, 0.0), (eps, eps), (0.0, eps)],))
    b = _region("b", 500.0, rings=([(10.0, 0.0), (10.0 + eps, 0.0), (10.0 + eps, eps), (10.0, eps)],))
    levels = sample_control_distance_levels([a, b], 4000, bins=(1.0, 5.0, 50.0), seed=8)
    counts = {lvl: int((levels == lvl).sum()) for lvl in np.unique(levels)}
    assert set(counts) == {1, 3}
    # same-region pairs happen half the time
    assert abs(counts[1] / 4000 - 0.5) < 3 * np.sqrt(0.25 / 4000)


def test_bins_validation():
    regions = [_region()]
    with pytest.raises(ConfigError):
        sample_control_distance_levels(regions, 10, bins=(5.0, 1.0), seed=0)
    with pytest.raises(ConfigError):
        sample_control_distance_levels(regions, 10, bins=(-1.0, 2.0), seed=0)
    with pytest.raises(ValueError):
        sample_control_distance_levels(regions, 0, seed=0)
    with pytest.raises(ValueError):
        sample_locations(regions, 0, seed=0)
    with pytest.raises(ConfigError):
        sample_locations([], 5, seed=0)
