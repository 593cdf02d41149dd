import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from apweights.fractal_sets import (
    BudgetError,
    CanonicalSet,
    CantorDistance,
    IfsSystem,
    Similitude,
    antenna_dimension,
    antenna_ifs,
    attractor_cloud,
    canonical_cloud,
    cantor_ifs,
    decorated_square_cloud,
    distance_field,
    parse_set,
    points_on_set,
    theoretical_assouad_dim,
)


def hausdorff(a, b):
    return max(cKDTree(b).query(a)[0].max(), cKDTree(a).query(b)[0].max())


# -- similitudes and systems ----------------------------------------------------


def test_antenna_third_map_sends_origin_to_midpoint():
    np.testing.assert_allclose(antenna_ifs(0.25).maps[2]([0.0, 0.0])[0], [0.5, 0.0])


def test_antenna_fourth_map_sends_origin_to_tip():
    np.testing.assert_allclose(antenna_ifs(0.25).maps[3]([0.0, 0.0])[0], [0.5, 0.25])


def test_antenna_parameter_range():
    antenna_ifs(0.5 - 1e-9)
    with pytest.raises(ValueError):
        antenna_ifs(0.5)
    with pytest.raises(ValueError):
        antenna_ifs(0.0)


def test_similitude_rejects_non_conformal_matrix():
    with pytest.raises(ValueError):
        Similitude(0.5, ((0.5, 0.0), (0.0, 0.25)), (0.0, 0.0))


@given(
    st.sampled_from([0.1, 0.25, 0.4]),
    st.integers(0, 3),
    st.lists(st.floats(-10, 10), min_size=4, max_size=4),
)
def test_similitude_scales_distances(alpha, index, coords):
    m = antenna_ifs(alpha).maps[index]
    x, y = np.array(coords[:2]), np.array(coords[2:])
    dist = np.linalg.norm(x - y)
    image = np.linalg.norm(m(x)[0] - m(y)[0])
    assert image == pytest.approx(m.scale * dist, rel=1e-12, abs=1e-12)


def test_ifs_requires_maps_of_matching_dimension():
    with pytest.raises(ValueError):
        IfsSystem(2, (Similitude.linear(0.5, 0.0),))
    with pytest.raises(ValueError):
        IfsSystem(1, ())


# -- attractor clouds --------------------------------------------------------------


def test_cantor_depth_three_endpoints():
    cloud = attractor_cloud(cantor_ifs(1 / 3), 3)
    assert len(cloud) == 8
    assert cloud.resolution == pytest.approx(3.0**-3)
    # left ends of the level-3 construction intervals
    ends = np.array(sorted(sum(d * 2 * 3.0**-k for d, k in zip(bits, (1, 2, 3))) for bits in np.ndindex(2, 2, 2)))
    np.testing.assert_allclose(np.sort(cloud.points[:, 0]), ends, atol=1e-12)


def test_depth_one_gives_one_point_per_map():
    assert len(attractor_cloud(antenna_ifs(0.3), 1)) == 4
    assert len(attractor_cloud(cantor_ifs(0.2), 1)) == 2


def test_antenna_depth_six_inside_window():
    cloud = attractor_cloud(antenna_ifs(0.25), 6)
    assert len(cloud) == 4096
    pts = cloud.points
    assert pts[:, 0].min() >= -1e-12 and pts[:, 0].max() <= 1 + 1e-12
    assert pts[:, 1].min() >= -1e-12 and pts[:, 1].max() <= 0.5


def test_antenna_bounding_box_is_derived():
    lo, hi = antenna_ifs(0.25).bounding_box()
    np.testing.assert_allclose(lo, [0.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(hi, [1.0, 0.25], atol=1e-9)


def test_attractor_cap_raises_budget_error():
    with pytest.raises(BudgetError):
        attractor_cloud(antenna_ifs(0.25), 12, cap=4**11)


@pytest.mark.parametrize("system", [antenna_ifs(0.25), cantor_ifs(1 / 3)], ids=["antenna", "cantor"])
def test_deeper_cloud_stays_within_contraction_bound(system):
    for d in (2, 3, 4):
        a = attractor_cloud(system, d).points
        b = attractor_cloud(system, d + 1).points
        assert hausdorff(a, b) <= system.max_scale**d * system.diameter_bound() + 1e-12


@pytest.mark.parametrize("system", [antenna_ifs(0.25), cantor_ifs(1 / 3)], ids=["antenna", "cantor"])
def test_declared_resolution_is_honest(system):
    for d in (2, 3, 4):
        coarse = attractor_cloud(system, d)
        fine = attractor_cloud(system, d + 3)
        assert hausdorff(coarse.points, fine.points) <= coarse.resolution


# -- canonical clouds ---------------------------------------------------------------


def test_point_cloud_of_point():
    cloud = canonical_cloud(CanonicalSet.point(2), 0.1)
    assert len(cloud) == 1 and cloud.resolution == 0.0
    np.testing.assert_array_equal(cloud.points, [[0.0, 0.0]])


def test_square_cloud_size():
    cloud = canonical_cloud(CanonicalSet.square_boundary(), 2.0**-8)
    assert abs(len(cloud) - 4 * 2**8) <= 4
    assert cloud.resolution <= 2.0**-8


def test_circle_cloud_size():
    cloud = canonical_cloud(CanonicalSet.sphere(1.0, 2), 2.0**-6)
    assert len(cloud) == math.ceil(2 * math.pi * 2**6)
    np.testing.assert_allclose(np.linalg.norm(cloud.points, axis=1), 1.0)


@pytest.mark.parametrize(
    "s",
    [CanonicalSet.square_boundary(), CanonicalSet.sphere(1.0, 3), CanonicalSet.cantor(0.3), CanonicalSet.antenna(0.2), CanonicalSet.subspace(1, 2)],
    ids=lambda s: s.spec,
)
def test_canonical_cloud_meets_target_resolution(s):
    target = 2.0**-5
    cloud = canonical_cloud(s, target)
    assert cloud.resolution <= target


def test_subspace_window_recorded():
    cloud = canonical_cloud(CanonicalSet.subspace(1, 2), 0.1, window=2.0)
    assert "window=2.0" in cloud.set_tag
    assert np.abs(cloud.points[:, 0]).max() <= 2.0


def test_canonical_cloud_cap():
    with pytest.raises(BudgetError):
        canonical_cloud(CanonicalSet.square_boundary(), 1e-6, cap=1000)


def test_decorated_square_contains_square_sides():
    cloud = decorated_square_cloud(0.25, 2.0**-6)
    d = cKDTree(cloud.points).query([[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5], [0.3, 0.0]])[0]
    assert d.max() <= cloud.resolution
    # decorations point outward: nothing strictly inside the square
    inside = np.all((cloud.points > 1e-9) & (cloud.points < 1 - 1e-9), axis=1)
    assert not inside.any()


# -- dimensions -------------------------------------------------------------------------


def test_antenna_dimension_quarter():
    ref = brentq(lambda l: 2 * 2.0**-l + 2 * 0.25**l - 1, 1, 2, xtol=1e-14)
    assert antenna_dimension(0.25) == pytest.approx(ref, abs=1e-10)
    assert antenna_dimension(0.25) == pytest.approx(1.4499, abs=1e-4)


def test_antenna_dimension_tends_to_two():
    assert antenna_dimension(0.5 - 1e-9) == pytest.approx(2.0, abs=1e-6)


@given(st.floats(0.01, 0.49), st.floats(0.01, 0.49))
def test_antenna_dimension_monotone(a, b):
    lo, hi = sorted((a, b))
    assert 1 < antenna_dimension(lo) <= antenna_dimension(hi) + 1e-12 < 2 + 1e-12


def test_theoretical_dimensions():
    assert theoretical_assouad_dim(CanonicalSet.point(3)) == 0.0
    assert theoretical_assouad_dim(CanonicalSet.subspace(2, 3)) == 2.0
    assert theoretical_assouad_dim(CanonicalSet.sphere(1.0, 3)) == 2.0
    assert theoretical_assouad_dim(CanonicalSet.square_boundary()) == 1.0
    assert theoretical_assouad_dim(CanonicalSet.cantor(1 / 3)) == pytest.approx(0.63093, abs=1e-5)
    assert theoretical_assouad_dim(CanonicalSet.attractor(cantor_ifs(0.3))) is None


# -- parsing and validation ----------------------------------------------------------


@pytest.mark.parametrize(
    "text,variant,n,param",
    [
        ("antenna:0.25", "antenna", 2, 0.25),
        ("cantor:0.333333", "cantor", 1, 0.333333),
        ("subspace:1", "subspace", 2, 1.0),
        ("square-boundary", "square-boundary", 2, None),
        ("point", "point", 2, None),
    ],
)
def test_parse_set(text, variant, n, param):
    s = parse_set(text)
    assert (s.variant, s.ambient_dim, s.parameter) == (variant, n, param)
    assert parse_set(s.spec) == s


@pytest.mark.parametrize("bad", ["antenna", "antenna:0.6", "cantor:0.5", "subspace:2", "blob", "point:1"])
def test_parse_set_rejects(bad):
    with pytest.raises(ValueError):
        parse_set(bad)


# -- distance fields ------------------------------------------------------------------


def test_cantor_distance_matches_fine_cloud():
    fld = CantorDistance(1 / 3)
    cloud = attractor_cloud(cantor_ifs(1 / 3), 12)
    x = np.linspace(-0.2, 1.2, 301)
    ref = cKDTree(cloud.points).query(x[:, None])[0]
    np.testing.assert_allclose(fld.distance(x[:, None]), ref, atol=cloud.resolution)


def test_cantor_distance_in_gap():
    assert CantorDistance(1 / 3).distance([[0.5]])[0] == pytest.approx(1 / 6)


@pytest.mark.parametrize(
    "s", [CanonicalSet.point(2), CanonicalSet.square_boundary(), CanonicalSet.cantor(1 / 3), CanonicalSet.sphere(2.0, 2), CanonicalSet.subspace(1, 3)], ids=lambda s: s.spec
)
def test_points_on_set_have_zero_distance(s):
    pts = points_on_set(s, 20, np.random.default_rng(0))
    assert distance_field(s).distance(pts).max() <= 1e-12


def test_points_on_antenna_are_cloud_points():
    s = CanonicalSet.antenna(0.25)
    pts = points_on_set(s, 10, np.random.default_rng(0))
    assert distance_field(s).distance(pts).max() == 0.0
