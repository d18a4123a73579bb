import math
import random

import pytest

from cpsim import geometry as geo


def test_heading_unit_compass_convention():
    north = geo.heading_unit(0.0)
    east = geo.heading_unit(90.0)
    assert north == pytest.approx((0.0, 1.0))
    assert east == pytest.approx((1.0, 0.0))


def test_bearing_deg():
    assert geo.bearing_deg((0, 0), (0, 10)) == pytest.approx(0.0)
    assert geo.bearing_deg((0, 0), (10, 0)) == pytest.approx(90.0)
    assert geo.bearing_deg((0, 0), (0, -10)) == pytest.approx(180.0)
    assert geo.bearing_deg((0, 0), (-10, 0)) == pytest.approx(270.0)


def test_ang_diff_wraps():
    assert geo.ang_diff_deg(350.0, 10.0) == pytest.approx(20.0)
    assert geo.ang_diff_deg(10.0, 350.0) == pytest.approx(20.0)
    assert geo.ang_diff_deg(180.0, 0.0) == pytest.approx(180.0)


def test_body_to_world_rotation():
    # Facing east, one meter forward is one meter east; one meter left is north.
    assert geo.body_to_world((1.0, 0.0), 90.0) == pytest.approx((1.0, 0.0))
    assert geo.body_to_world((0.0, 1.0), 90.0) == pytest.approx((0.0, 1.0))


def test_rect_corners_alignment():
    corners = geo.rect_corners((0.0, 0.0), 0.0, 4.0, 2.0)
    xs = sorted(c[0] for c in corners)
    ys = sorted(c[1] for c in corners)
    assert xs == pytest.approx([-1.0, -1.0, 1.0, 1.0])
    assert ys == pytest.approx([-2.0, -2.0, 2.0, 2.0])


def test_point_in_rect():
    corners = geo.rect_corners((0.0, 0.0), 45.0, 4.0, 2.0)
    assert geo.point_in_rect((0.0, 0.0), corners)
    assert not geo.point_in_rect((3.0, 3.0), corners)


def test_segments_intersect_cases():
    assert geo.segments_intersect((0, 0), (2, 2), (0, 2), (2, 0))
    assert not geo.segments_intersect((0, 0), (1, 0), (0, 1), (1, 1))
    # Shared endpoint counts as touching.
    assert geo.segments_intersect((0, 0), (1, 1), (1, 1), (2, 0))
    # Collinear overlap.
    assert geo.segments_intersect((0, 0), (2, 0), (1, 0), (3, 0))


def test_segment_rect_intersect_through_and_inside():
    corners = geo.rect_corners((0.0, 10.0), 0.0, 4.0, 2.0)
    assert geo.segment_rect_intersect((0.0, 0.0), (0.0, 20.0), corners)
    assert geo.segment_rect_intersect((0.0, 10.0), (0.0, 30.0), corners)  # endpoint inside
    assert not geo.segment_rect_intersect((5.0, 0.0), (5.0, 20.0), corners)


def test_ray_rect_hit_distance():
    corners = geo.rect_corners((0.0, 10.0), 0.0, 4.0, 2.0)  # y in [8, 12]
    hit = geo.ray_rect_hit((0.0, 0.0), (0.0, 1.0), corners)
    assert hit == pytest.approx(8.0)
    assert geo.ray_rect_hit((0.0, 0.0), (0.0, -1.0), corners) is None


def test_in_sector_boundaries():
    # Point exactly at range on the boresight is inside.
    assert geo.in_sector((0, 0), 0.0, 100.0, 120.0, (0.0, 100.0))
    assert not geo.in_sector((0, 0), 0.0, 100.0, 120.0, (0.0, 190.0))
    # One degree past the half-aperture is outside.
    off = geo.heading_unit(61.0)
    assert not geo.in_sector((0, 0), 0.0, 100.0, 120.0, (off[0] * 50, off[1] * 50))


def test_point_in_polygon_square():
    square = [(0, 0), (10, 0), (10, 10), (0, 10)]
    assert geo.point_in_polygon((5, 5), square)
    assert not geo.point_in_polygon((15, 5), square)


def test_polygon_is_simple():
    assert geo.polygon_is_simple([(0, 0), (10, 0), (10, 10), (0, 10)])
    assert not geo.polygon_is_simple([(0, 0), (10, 10), (10, 0), (0, 10)])  # bowtie
    assert not geo.polygon_is_simple([(0, 0), (10, 0)])


def test_polygon_is_simple_matches_bruteforce_on_random_fans():
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(3, 30)
        angles = sorted(rng.sample(range(0, 3600), n))
        poly = []
        for tenth in angles:
            a = math.radians(tenth / 10.0)
            r = rng.uniform(1.0, 50.0)
            poly.append((r * math.sin(a), r * math.cos(a)))
        assert geo.polygon_is_simple(poly)


def test_point_rect_dist():
    corners = geo.rect_corners((0.0, 0.0), 0.0, 4.0, 2.0)
    assert geo.point_rect_dist((0.0, 0.0), corners) == 0.0
    assert geo.point_rect_dist((2.0, 0.0), corners) == pytest.approx(1.0)


def test_extrapolate():
    assert geo.extrapolate((0.0, 0.0), 10.0, 0.0, 100) == pytest.approx((0.0, 1.0))
    assert geo.extrapolate((0.0, 0.0), 10.0, 90.0, -100) == pytest.approx((-1.0, 0.0))
    assert geo.extrapolate((3.0, 4.0), 0.0, 45.0, 500) == (3.0, 4.0)
