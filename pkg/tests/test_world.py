import math
import random

import pytest
from shapely.geometry import LineString, Point, Polygon

from cpsim import geometry as geo
from cpsim.messages.types import ObjectClass, SensorType
from cpsim.world import (
    Entity,
    EntityKind,
    NoiseModel,
    SensorSpec,
    Waypoint,
    WorldState,
    free_space,
    free_space_polygon,
    in_sensor_area,
    sense,
    step,
)

LIDAR = SensorSpec(1, SensorType.LIDAR, 100.0, 120.0)
OMNI = SensorSpec(1, SensorType.LIDAR, 80.0, 360.0)


def vehicle(eid, pos, heading=0.0, speed=0.0, footprint=(4.5, 1.8), station=None, **kw):
    kind = EntityKind.CONNECTED_VEHICLE if station else EntityKind.NON_CONNECTED_VEHICLE
    return Entity(eid, kind, pos, heading, speed, footprint, station_id=station, **kw)


def world_with(entities, sensors=None, seed=0):
    return WorldState(0, tuple(entities), sensors or {}, seed)


def shapely_rect(entity):
    return Polygon(entity.corners())


class TestStep:
    def test_zero_speed_keeps_pose(self):
        w = world_with([vehicle(1, (3.0, 4.0), heading=45.0, speed=0.0)])
        w2 = step(w, 100)
        assert w2.entities[0].position == (3.0, 4.0)
        assert w2.time == 100

    def test_kinematics_one_meter_per_100ms_at_10mps(self):
        w = world_with([vehicle(1, (0.0, 0.0), heading=0.0, speed=10.0)])
        w2 = step(w, 100)
        assert w2.entities[0].position == pytest.approx((0.0, 1.0))

    def test_step_requires_positive_dt(self):
        w = world_with([vehicle(1, (0.0, 0.0))])
        with pytest.raises(ValueError):
            step(w, 0)

    def test_waypoints_steer_and_set_speed(self):
        wp = (Waypoint((10.0, 0.0), speed=5.0),)
        w = world_with([vehicle(1, (0.0, 0.0), heading=0.0, speed=0.0, waypoints=wp)])
        w2 = step(w, 1000)
        e = w2.entities[0]
        assert e.speed == 5.0
        assert e.position == pytest.approx((5.0, 0.0))
        assert e.heading == pytest.approx(90.0)

    def test_determinism_same_seed_same_hash_sequence(self):
        def run():
            w = world_with(
                [
                    vehicle(1, (0.0, 0.0), speed=8.0),
                    vehicle(2, (5.0, 5.0), heading=90.0, speed=3.0, waypoints=(Waypoint((50.0, 5.0)),)),
                ],
                seed=42,
            )
            hashes = []
            for _ in range(50):
                w = step(w, 100)
                hashes.append(w.state_hash())
            return hashes

        assert run() == run()


class TestSensorArea:
    def test_point_at_exact_range_inside(self):
        assert in_sensor_area((0, 0), 0.0, LIDAR, (0.0, 100.0))

    def test_beyond_range_outside(self):
        assert not in_sensor_area((0, 0), 0.0, LIDAR, (0.0, 190.0))

    def test_bearing_past_half_aperture_outside(self):
        u = geo.heading_unit(61.0)
        assert not in_sensor_area((0, 0), 0.0, LIDAR, (u[0] * 50, u[1] * 50))
        u = geo.heading_unit(59.0)
        assert in_sensor_area((0, 0), 0.0, LIDAR, (u[0] * 50, u[1] * 50))


class TestSense:
    def _station_world(self, extra, spec=LIDAR):
        ego = vehicle(1, (0.0, 0.0), station=101)
        return world_with([ego] + extra, {101: (spec,)})

    def test_object_in_cone_detected(self):
        w = self._station_world([vehicle(2, (0.0, 50.0))])
        ids = [r.entity_id for r in sense(101, w)]
        assert ids == [2]

    def test_object_beyond_range_not_detected(self):
        w = self._station_world([vehicle(2, (0.0, 190.0))])
        assert sense(101, w) == []

    def test_small_object_behind_truck_not_detected(self):
        truck = vehicle(2, (0.0, 20.0), footprint=(8.0, 2.5))
        hidden = Entity(3, EntityKind.PEDESTRIAN, (0.0, 30.0), 0.0, 0.0, (0.5, 0.5))
        w = self._station_world([truck, hidden])
        ids = [r.entity_id for r in sense(101, w)]
        assert ids == [2]
        # Independent check: the sight line crosses the truck footprint.
        assert LineString([(0, 0), (0, 30)]).intersects(shapely_rect(truck))

    def test_hidden_entities_are_invisible(self):
        w = self._station_world([vehicle(2, (0.0, 50.0), hidden=True)])
        assert sense(101, w) == []

    def test_readings_satisfy_sensor_area_predicate(self):
        rng = random.Random(7)
        for _ in range(20):
            extras = [
                vehicle(10 + k, (rng.uniform(-120, 120), rng.uniform(-120, 120)), heading=rng.uniform(0, 360))
                for k in range(6)
            ]
            w = self._station_world(extras)
            for r in sense(101, w):  # noise-free by default
                assert in_sensor_area((0.0, 0.0), 0.0, LIDAR, r.relative_position)

    def test_sense_matches_shapely_oracle(self):
        rng = random.Random(99)
        for trial in range(30):
            extras = [
                vehicle(10 + k, (rng.uniform(-90, 90), rng.uniform(-90, 90)), heading=rng.uniform(0, 360))
                for k in range(5)
            ]
            w = self._station_world(extras, spec=OMNI)
            got = {r.entity_id for r in sense(101, w)}
            expected = set()
            for e in extras:
                if math.hypot(*e.position) > OMNI.range_m:
                    continue
                ray = LineString([(0, 0), e.position])
                blocked = any(
                    ray.intersects(shapely_rect(o)) for o in extras if o.entity_id != e.entity_id
                )
                if not blocked:
                    expected.add(e.entity_id)
            assert got == expected, f"trial {trial}"

    def test_occlusion_monotonicity(self):
        rng = random.Random(31)
        for _ in range(15):
            extras = [
                vehicle(10 + k, (rng.uniform(-70, 70), rng.uniform(-70, 70)), heading=rng.uniform(0, 360))
                for k in range(5)
            ]
            w = self._station_world(extras, spec=OMNI)
            before = {r.entity_id for r in sense(101, w)}
            blocker = vehicle(99, (rng.uniform(-40, 40), rng.uniform(-40, 40)), footprint=(8.0, 2.5))
            w2 = world_with(list(w.entities) + [blocker], w.sensors)
            after = {r.entity_id for r in sense(101, w2)} - {99}
            assert after <= before

    def test_noise_is_zero_mean_and_truncated(self):
        w = self._station_world([vehicle(2, (0.0, 50.0))])
        noise = NoiseModel(0.2, 0.1)
        errs = []
        for t in range(300):
            rng = random.Random(t)
            r = sense(101, w, noise, rng)[0]
            dx = r.relative_position[0] - 0.0
            dy = r.relative_position[1] - 50.0
            assert abs(dx) <= 0.6 + 1e-9 and abs(dy) <= 0.6 + 1e-9
            errs.append(dx)
        assert abs(sum(errs) / len(errs)) < 0.05


class TestFreeSpace:
    def test_empty_world_full_sector(self):
        poly = free_space_polygon((0.0, 0.0), 0.0, LIDAR, [], 64)
        assert poly[0] == (0.0, 0.0)
        for p in poly[1:]:
            assert math.hypot(*p) == pytest.approx(LIDAR.range_m, abs=1e-3)
        # A near point on the boresight is free, a point past the range is not.
        assert geo.point_in_polygon((0.0, 50.0), poly)
        assert not geo.point_in_polygon((0.0, 150.0), poly)

    def test_object_outside_aperture_leaves_sector_unchanged(self):
        behind = vehicle(2, (0.0, -30.0))
        empty = free_space_polygon((0.0, 0.0), 0.0, LIDAR, [], 64)
        with_obj = free_space_polygon((0.0, 0.0), 0.0, LIDAR, [behind.corners()], 64)
        assert empty == with_obj

    def test_shadow_behind_boresight_object(self):
        car = vehicle(2, (0.0, 50.0))
        poly = free_space_polygon((0.0, 0.0), 0.0, LIDAR, [car.corners()], 64)
        # Sample points behind the car's angular extent and beyond it.
        for y in (55.0, 70.0, 90.0):
            assert not geo.point_in_polygon((0.0, y), poly)
        # Beside the shadow the wedge is still free.
        assert geo.point_in_polygon((20.0, 50.0), poly)
        # In front of the car is free.
        assert geo.point_in_polygon((0.0, 40.0), poly)

    def test_grid_sampling_oracle(self):
        rng = random.Random(17)
        obstacles = [
            vehicle(10 + k, (rng.uniform(-60, 60), rng.uniform(10, 80)), heading=rng.uniform(0, 360))
            for k in range(4)
        ]
        rects = [o.corners() for o in obstacles]
        shapes = [shapely_rect(o) for o in obstacles]
        poly = free_space_polygon((0.0, 0.0), 0.0, LIDAR, rects, 256)
        corners_all = [c for r in rects for c in r]
        mismatches = 0
        checked = 0
        for gx in range(-80, 81, 4):
            for gy in range(4, 100, 4):
                cell = (float(gx), float(gy))
                d = math.hypot(gx, gy)
                if d < 2.0 or d > LIDAR.range_m - 1.5:
                    continue
                bearing = geo.bearing_deg((0.0, 0.0), cell)
                if geo.ang_diff_deg(bearing, 0.0) > LIDAR.aperture_deg / 2 - 1.5:
                    continue
                # Skip the tolerance band near footprints and shadow edges.
                if any(s.distance(Point(cell)) < 1.2 for s in shapes):
                    continue
                near_shadow_edge = False
                for c in corners_all:
                    cd = math.hypot(*c)
                    if cd < 1e-6 or d <= cd:
                        continue
                    line_dist = abs(geo.cross(c, cell)) / cd
                    if line_dist < 1.2:
                        near_shadow_edge = True
                        break
                if near_shadow_edge:
                    continue
                ray = LineString([(0.0, 0.0), cell])
                truth_free = not any(ray.intersects(s) for s in shapes)
                got_free = geo.point_in_polygon(cell, poly)
                checked += 1
                if truth_free != got_free:
                    mismatches += 1
        assert checked > 200
        assert mismatches == 0

    def test_no_footprint_center_deep_inside_polygon(self):
        # Trucks are wide enough that centers sit more than the tolerance
        # band away from any edge.
        rng = random.Random(23)
        for trial in range(10):
            trucks = [
                vehicle(10 + k, (rng.uniform(-50, 50), rng.uniform(5, 70)), heading=rng.uniform(0, 360),
                        footprint=(8.0, 2.5))
                for k in range(4)
            ]
            rects = [t.corners() for t in trucks]
            poly = free_space_polygon((0.0, 0.0), 0.0, LIDAR, rects, 256)
            for t in trucks:
                if math.hypot(*t.position) > LIDAR.range_m:
                    continue
                if geo.point_in_polygon(t.position, poly):
                    # Tolerated only within one meter of the polygon edge.
                    assert geo.point_polygon_boundary_dist(t.position, poly) < 1.0, f"trial {trial}"

    def test_ray_count_minimum(self):
        with pytest.raises(ValueError):
            free_space_polygon((0.0, 0.0), 0.0, LIDAR, [], 8)

    def test_station_level_free_space_is_relative(self):
        ego = vehicle(1, (10.0, 10.0), station=101)
        w = world_with([ego], {101: (LIDAR,)})
        polys = free_space(101, w, 32)
        assert len(polys) == 1
        sensor_id, poly = polys[0]
        assert sensor_id == 1
        assert poly[0] == (0.0, 0.0)
