"""Ground-truth 2D scene: entity kinematics, sensor models, and free space.

The world is the oracle everything else is judged against. Entities move
under constant velocity (optionally following scripted waypoints), sensors
see what their range/aperture cover minus footprint occlusion, and free
space is ray traced per sensor.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

from . import geometry as geo
from .geometry import Vec2
from .hashing import derive_rng
from .messages.types import ObjectClass, SensorType


class EntityKind(Enum):
    CONNECTED_VEHICLE = "connected_vehicle"
    NON_CONNECTED_VEHICLE = "non_connected_vehicle"
    PEDESTRIAN = "pedestrian"
    ANIMAL = "animal"
    RSU = "rsu"
    DECOY = "decoy"


_PERSON_KINDS = {EntityKind.PEDESTRIAN, EntityKind.ANIMAL}


@dataclass(frozen=True)
class Waypoint:
    position: Vec2
    speed: Optional[float] = None  # adopt this speed while heading to the point


@dataclass(frozen=True)
class Entity:
    entity_id: int
    kind: EntityKind
    position: Vec2
    heading: float  # degrees clockwise from north
    speed: float  # m/s
    footprint: tuple[float, float]  # length, width in meters
    station_id: Optional[int] = None  # connected entities only
    waypoints: tuple[Waypoint, ...] = ()
    waypoint_index: int = 0
    hidden: bool = False  # out of every line of sight (used by injected decoys)
    classified_as: Optional[ObjectClass] = None  # override for decoys

    def __post_init__(self):
        if self.kind is EntityKind.CONNECTED_VEHICLE and self.station_id is None:
            raise ValueError(f"entity {self.entity_id}: connected vehicles need a station_id")
        if self.kind in (EntityKind.NON_CONNECTED_VEHICLE, EntityKind.PEDESTRIAN, EntityKind.ANIMAL, EntityKind.DECOY):
            if self.station_id is not None:
                raise ValueError(f"entity {self.entity_id}: kind {self.kind.value} never emits messages")

    @property
    def classification(self) -> ObjectClass:
        if self.classified_as is not None:
            return self.classified_as
        return ObjectClass.PERSON_OR_ANIMAL if self.kind in _PERSON_KINDS else ObjectClass.OTHER

    @property
    def occludes(self) -> bool:
        return not self.hidden and self.footprint[0] > 0.0 and self.footprint[1] > 0.0

    def corners(self) -> tuple[Vec2, Vec2, Vec2, Vec2]:
        return geo.rect_corners(self.position, self.heading, self.footprint[0], self.footprint[1])


@dataclass(frozen=True)
class SensorSpec:
    sensor_id: int
    sensor_type: SensorType
    range_m: float
    aperture_deg: float
    mount_offset: Vec2 = (0.0, 0.0)  # body frame (forward, left)

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError("sensor range must be > 0")
        if not 0 < self.aperture_deg <= 360:
            raise ValueError("sensor aperture must be in (0, 360]")


@dataclass(frozen=True)
class SensorReading:
    entity_id: int
    relative_position: Vec2  # world-frame offset from the station's reference position
    speed: float
    heading: float
    classification: ObjectClass
    sensor_id: int
    dimensions: tuple[float, float]


@dataclass(frozen=True)
class NoiseModel:
    sigma_pos_m: float = 0.2
    sigma_speed_mps: float = 0.1

    def sample_pos(self, rng) -> float:
        if self.sigma_pos_m <= 0:
            return 0.0
        s = self.sigma_pos_m
        return max(-3 * s, min(3 * s, rng.gauss(0.0, s)))

    def sample_speed(self, rng) -> float:
        if self.sigma_speed_mps <= 0:
            return 0.0
        s = self.sigma_speed_mps
        return max(-3 * s, min(3 * s, rng.gauss(0.0, s)))


@dataclass(frozen=True)
class WorldState:
    time: int  # ms
    entities: tuple[Entity, ...]
    sensors: dict[int, tuple[SensorSpec, ...]]  # station_id -> specs
    rng_seed: int

    def __post_init__(self):
        ids = [e.entity_id for e in self.entities]
        if len(ids) != len(set(ids)):
            raise ValueError("entity ids must be unique")

    def entity(self, entity_id: int) -> Entity:
        for e in self.entities:
            if e.entity_id == entity_id:
                return e
        raise KeyError(entity_id)

    def station_entity(self, station_id: int) -> Entity:
        for e in self.entities:
            if e.station_id == station_id:
                return e
        raise KeyError(f"no entity for station {station_id}")

    def state_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.time).encode())
        for e in sorted(self.entities, key=lambda x: x.entity_id):
            h.update(
                (
                    f"{e.entity_id}:{e.kind.value}:{round(e.position[0] * 1e6)}:{round(e.position[1] * 1e6)}:"
                    f"{round(e.heading * 1e6)}:{round(e.speed * 1e6)}:{e.waypoint_index}:{int(e.hidden)}"
                ).encode()
            )
        return h.hexdigest()[:16]


def _step_entity(e: Entity, dt_ms: int) -> Entity:
    heading = e.heading
    speed = e.speed
    index = e.waypoint_index
    if index < len(e.waypoints):
        wp = e.waypoints[index]
        if wp.speed is not None:
            speed = wp.speed
        gap = geo.dist(e.position, wp.position)
        if gap > 1e-9:
            heading = geo.bearing_deg(e.position, wp.position)
    step_d = speed * dt_ms / 1000.0
    pos = geo.extrapolate(e.position, speed, heading, dt_ms)
    if index < len(e.waypoints):
        wp = e.waypoints[index]
        if geo.dist(pos, wp.position) <= max(0.5, step_d):
            index += 1
    if heading == e.heading and speed == e.speed and step_d == 0.0 and index == e.waypoint_index:
        return e
    return replace(e, position=pos, heading=geo.norm_heading(heading), speed=speed, waypoint_index=index)


def step(world: WorldState, dt_ms: int) -> WorldState:
    """Advance every entity under constant velocity; deterministic."""
    if dt_ms <= 0:
        raise ValueError("dt must be > 0")
    return replace(
        world,
        time=world.time + dt_ms,
        entities=tuple(_step_entity(e, dt_ms) for e in world.entities),
    )


def sensor_origin(station_pos: Vec2, station_heading: float, spec: SensorSpec) -> Vec2:
    return geo.add(station_pos, geo.body_to_world(spec.mount_offset, station_heading))


def in_sensor_area(
    station_pos: Vec2, station_heading: float, spec: SensorSpec, point: Vec2, margin_m: float = 0.0
) -> bool:
    """Range-and-bearing membership test; boundary inclusive, boresight along
    the carrier's heading. A positive margin shrinks the area."""
    origin = sensor_origin(station_pos, station_heading, spec)
    d = geo.dist(origin, point)
    if d > spec.range_m - margin_m + 1e-9:
        return False
    if spec.aperture_deg >= 360.0 or d <= 1e-9:
        return True
    half = spec.aperture_deg / 2.0
    if margin_m > 0 and d > 1e-6:
        half -= math.degrees(math.atan2(margin_m, d))
        if half <= 0:
            return False
    return geo.ang_diff_deg(geo.bearing_deg(origin, point), station_heading) <= half + 1e-7


def line_of_sight_clear(
    origin: Vec2,
    target: Vec2,
    obstacles: Sequence[tuple[Vec2, Vec2, Vec2, Vec2]],
) -> bool:
    """True when the origin-target segment misses every obstacle rectangle."""
    for corners in obstacles:
        if geo.segment_rect_intersect(origin, target, corners):
            return False
    return True


def _occluder_rects(world: WorldState, skip_ids: set[int]) -> list[tuple[int, tuple[Vec2, Vec2, Vec2, Vec2]]]:
    rects = []
    for e in world.entities:
        if e.entity_id in skip_ids or not e.occludes:
            continue
        rects.append((e.entity_id, e.corners()))
    return rects


def sense(
    station_id: int,
    world: WorldState,
    noise: NoiseModel | None = None,
    rng=None,
) -> list[SensorReading]:
    """Entities visible to a station through any of its sensors.

    An entity is read iff some sensor covers its center in range and bearing
    and the line of sight from that sensor to the footprint center is not
    blocked by another entity's footprint. Readings carry ground-truth
    kinematics perturbed by zero-mean noise truncated at three sigma.
    """
    specs = world.sensors.get(station_id)
    if not specs:
        raise KeyError(f"station {station_id} has no sensors")
    observer = world.station_entity(station_id)
    if noise is None:
        noise = NoiseModel(0.0, 0.0)
    if rng is None:
        rng = derive_rng(world.rng_seed, "sense", station_id, world.time)
    all_rects = _occluder_rects(world, {observer.entity_id})
    readings: list[SensorReading] = []
    for e in sorted(world.entities, key=lambda x: x.entity_id):
        if e.entity_id == observer.entity_id or e.hidden:
            continue
        if e.kind is EntityKind.RSU and not e.occludes:
            continue
        seen_by: Optional[int] = None
        for spec in sorted(specs, key=lambda s: s.sensor_id):
            if not in_sensor_area(observer.position, observer.heading, spec, e.position):
                continue
            origin = sensor_origin(observer.position, observer.heading, spec)
            blockers = [c for eid, c in all_rects if eid != e.entity_id]
            if line_of_sight_clear(origin, e.position, blockers):
                seen_by = spec.sensor_id
                break
        if seen_by is None:
            continue
        rel = geo.sub(e.position, observer.position)
        rel = (rel[0] + noise.sample_pos(rng), rel[1] + noise.sample_pos(rng))
        spd = max(0.0, e.speed + noise.sample_speed(rng))
        readings.append(
            SensorReading(
                entity_id=e.entity_id,
                relative_position=rel,
                speed=spd,
                heading=e.heading,
                classification=e.classification,
                sensor_id=seen_by,
                dimensions=e.footprint,
            )
        )
    return readings


def free_space_polygon(
    origin: Vec2,
    boresight_deg: float,
    spec: SensorSpec,
    obstacle_rects: Sequence[tuple[Vec2, Vec2, Vec2, Vec2]],
    ray_count: int,
) -> list[Vec2]:
    """Visibility fan for one sensor: rays stop at the nearer of the first
    footprint hit and the sensor range.

    On top of the uniform fan, extra rays are cast at each obstacle's corner
    and center bearings so thin obstacles between uniform rays still carve a
    shadow notch and the polygon never claims ground an obstacle occupies.
    """
    if ray_count < 16:
        raise ValueError("ray_count must be >= 16")
    full_circle = spec.aperture_deg >= 360.0
    half = spec.aperture_deg / 2.0
    start = boresight_deg - half
    # Angles live as offsets from the wedge start, rounded so near-identical
    # rays collapse before casting.
    offsets: set[float] = set()

    def add_offset(off: float) -> None:
        off = round(off, 2)
        if full_circle:
            offsets.add(off % 360.0)
        elif -1e-9 <= off <= spec.aperture_deg + 1e-9:
            offsets.add(min(max(off, 0.0), spec.aperture_deg))

    if full_circle:
        for i in range(ray_count):
            add_offset(i * 360.0 / ray_count)
    else:
        for i in range(ray_count):
            add_offset(i * spec.aperture_deg / (ray_count - 1))
    # Extra rays at each obstacle's corner and center bearings: thin
    # obstacles between uniform rays still carve their shadow.
    for corners in obstacle_rects:
        bearings = [geo.bearing_deg(origin, c) for c in corners]
        bearings.append(geo.bearing_deg(origin, geo.centroid(corners)))
        for b in bearings:
            for jitter in (-0.2, 0.0, 0.2):
                add_offset((b + jitter - start) % 360.0)

    # Bounding circle per rect lets most ray/rect pairs be rejected with two
    # multiplications.
    bounds = []
    for corners in obstacle_rects:
        cx = sum(c[0] for c in corners) / 4.0
        cy = sum(c[1] for c in corners) / 4.0
        radius = max(math.hypot(c[0] - cx, c[1] - cy) for c in corners)
        bounds.append((cx - origin[0], cy - origin[1], radius))

    pts: list[Vec2] = []
    for off in sorted(offsets):
        direction = geo.heading_unit(start + off)
        dx, dy = direction
        t = spec.range_m
        for (bx, by, radius), corners in zip(bounds, obstacle_rects):
            if abs(dx * by - dy * bx) > radius:
                continue  # ray line passes beside the bounding circle
            if dx * bx + dy * by < -radius:
                continue  # rect entirely behind the sensor
            hit = geo.ray_rect_hit(origin, direction, corners)
            if hit is not None and hit < t:
                t = hit
        t = max(t, 0.5)
        pts.append(
            (
                round((origin[0] + direction[0] * t) * 1000.0) / 1000.0,
                round((origin[1] + direction[1] * t) * 1000.0) / 1000.0,
            )
        )
    dedup: list[Vec2] = []
    for p in pts:
        if not dedup or geo.dist(dedup[-1], p) > 2e-3:
            dedup.append(p)
    if len(dedup) > 1 and geo.dist(dedup[0], dedup[-1]) <= 2e-3:
        dedup.pop()
    if not full_circle:
        polygon = [(round(origin[0] * 1000.0) / 1000.0, round(origin[1] * 1000.0) / 1000.0)] + dedup
    else:
        polygon = dedup
    return polygon


def free_space(station_id: int, world: WorldState, ray_count: int) -> list[tuple[int, list[Vec2]]]:
    """Station-relative free-space polygon per sensor."""
    specs = world.sensors.get(station_id)
    if not specs:
        raise KeyError(f"station {station_id} has no sensors")
    observer = world.station_entity(station_id)
    rects = [c for eid, c in _occluder_rects(world, {observer.entity_id})]
    out = []
    for spec in sorted(specs, key=lambda s: s.sensor_id):
        origin = sensor_origin(observer.position, observer.heading, spec)
        poly = free_space_polygon(origin, observer.heading, spec, rects, ray_count)
        if len(poly) >= 3:
            out.append((spec.sensor_id, [geo.sub(p, observer.position) for p in poly]))
    return out
