"""Attack injection layer.

Seventeen injectors, one per catalog row plus the composite brake-light
attack. Each attack mutates exactly one interception point of the tick
pipeline: outgoing messages, the world, a victim's sensor readings, or a
victim's clock. Injectors are deterministic transforms of (spec, rng).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

from . import geometry as geo
from .geometry import Vec2
from .messages.types import (
    CamMessage,
    CpmMessage,
    DenmEventType,
    DenmMessage,
    DetectorId,
    FreeSpaceAddendum,
    Header,
    Message,
    MessageId,
    ObjectClass,
    PerceivedObject,
    SensorInformation,
)
from .world import Entity, EntityKind, SensorReading, SensorSpec, WorldState, Waypoint, free_space_polygon


class Membership(Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


class Motivation(Enum):
    MALICIOUS = "malicious"
    RATIONAL = "rational"


class Activity(Enum):
    ACTIVE = "active"
    PASSIVE = "passive"


class Scope(Enum):
    LOCAL = "local"
    EXTENDED = "extended"


class Path(Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"


@dataclass(frozen=True)
class AttackerProfile:
    membership: Membership = Membership.INTERNAL
    motivation: Motivation = Motivation.MALICIOUS
    activity: Activity = Activity.ACTIVE
    scope: Scope = Scope.LOCAL
    path: Path = Path.DIRECT


class AttackId(Enum):
    T3_A = "T3_A"
    T3_B = "T3_B"
    T3_C = "T3_C"
    T3_D = "T3_D"
    T3_E = "T3_E"
    T3_F = "T3_F"
    T3_G = "T3_G"
    T3_H = "T3_H"
    T3_I = "T3_I"
    T3_K = "T3_K"
    T3_L = "T3_L"
    T3_M = "T3_M"
    T3_N = "T3_N"
    T4_A = "T4_A"
    T4_B = "T4_B"
    T4_C = "T4_C"
    FIG4_EEBL = "FIG4_EEBL"


class InjectionPoint(Enum):
    MESSAGE_OUT = "message_out"
    WORLD = "world"
    SENSOR_IN = "sensor_in"
    CLOCK = "clock"


@dataclass(frozen=True)
class AttackSpec:
    attack_id: AttackId
    attacker: int  # station id
    victim: Optional[int] = None
    parameters: dict = field(default_factory=dict)
    start_ms: int = 0
    stop_ms: int = 1 << 60
    profile: AttackerProfile = AttackerProfile()

    def active(self, t: int) -> bool:
        return self.start_ms <= t < self.stop_ms

    def param(self, key: str, default=None):
        if key in self.parameters:
            return self.parameters[key]
        info = CATALOG[self.attack_id]
        return info.default_params.get(key, default)


@dataclass(frozen=True)
class AttackInfo:
    attack_id: AttackId
    row: str  # catalog row reference
    injection_point: InjectionPoint
    mapped_detector: Optional[DetectorId]
    detected_by: str  # "attacker_cert" | "victim_cert" | "none"
    default_params: dict
    summary: str
    needs_victim: bool = False


@dataclass
class StationSenses:
    """Everything a station's sensors feed the pipeline on one tick."""

    readings: list[SensorReading]
    position_bias: Vec2 = (0.0, 0.0)


@dataclass
class InjectorContext:
    """What an injector may look at when rewriting the attacker's output."""

    world: WorldState
    attacker_entity: Entity
    attacker_specs: tuple[SensorSpec, ...]
    local_clock: int
    victim_entity: Optional[Entity] = None
    observed_foreign_objects: Sequence[tuple[int, int, Vec2]] = ()  # sender, object id, position
    trackable_limit: int = 255


@dataclass
class ActiveAttack:
    spec: AttackSpec
    index: int = 0
    state: dict = field(default_factory=dict)


_DECOY_BASE = 9000


def _own_cpms(messages: list[Message]) -> list[int]:
    return [i for i, m in enumerate(messages) if isinstance(m, CpmMessage)]


def _with_objects(cpm: CpmMessage, objects: Sequence[PerceivedObject]) -> CpmMessage:
    return dataclasses.replace(cpm, perceived_objects=tuple(objects))


def _fabricate_in_area(
    ctx: InjectorContext, rng, count: int, base_id: int, tom: int
) -> list[PerceivedObject]:
    """Random objects placed inside the attacker's true sensor coverage so a
    plausibility check on the declared area passes."""
    objects = []
    spec = ctx.attacker_specs[0]
    heading = ctx.attacker_entity.heading
    for k in range(count):
        if spec.aperture_deg >= 360.0:
            bearing = rng.uniform(0.0, 360.0)
        else:
            bearing = heading + rng.uniform(-spec.aperture_deg / 2 * 0.9, spec.aperture_deg / 2 * 0.9)
        distance = rng.uniform(5.0, spec.range_m * 0.9)
        rel = geo.scale(geo.heading_unit(bearing), distance)
        objects.append(
            PerceivedObject(
                object_id=base_id + k,
                relative_position=rel,
                speed=round(rng.uniform(0.0, 20.0), 2),
                heading=round(rng.uniform(0.0, 359.0), 2),
                dimensions=(4.5, 1.8),
                classification=ObjectClass.OTHER,
                time_of_measurement=tom,
                confidence=0.9,
            )
        )
    return objects


def _t3_a(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    limit = int(attack.spec.param("trackable_limit", ctx.trackable_limit))
    excess = int(attack.spec.param("excess", 1))
    for i in _own_cpms(messages):
        cpm = messages[i]
        have = list(cpm.perceived_objects or ())
        need = limit + excess - len(have)
        if need > 0:
            have.extend(_fabricate_in_area(ctx, rng, need, 50000, cpm.management.generation_time))
        messages[i] = _with_objects(cpm, have)
    return messages


def _t3_b(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    if not ctx.observed_foreign_objects:
        return messages
    ox, oy = attack.spec.param("position_offset", (10.0, 0.0))
    sender, oid, pos = sorted(ctx.observed_foreign_objects)[0]
    spoofed_abs = (pos[0] + ox, pos[1] + oy)
    for i in _own_cpms(messages):
        cpm = messages[i]
        have = list(cpm.perceived_objects or ())
        have.append(
            PerceivedObject(
                object_id=oid,
                relative_position=geo.sub(spoofed_abs, cpm.management.reference_position),
                speed=0.0,
                heading=0.0,
                dimensions=(4.5, 1.8),
                classification=ObjectClass.OTHER,
                time_of_measurement=cpm.management.generation_time,
                confidence=0.9,
            )
        )
        messages[i] = _with_objects(cpm, have)
    return messages


def _t3_h(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    declared = float(attack.spec.param("declared_range_m", 200.0))
    distance = float(attack.spec.param("object_distance_m", 190.0))
    heading = ctx.attacker_entity.heading
    for i in _own_cpms(messages):
        cpm = messages[i]
        sensors = tuple(
            dataclasses.replace(s, range_m=declared) for s in (cpm.sensor_info or ())
        )
        have = list(cpm.perceived_objects or ())
        have.append(
            PerceivedObject(
                object_id=60000,
                relative_position=geo.scale(geo.heading_unit(heading), distance),
                speed=0.0,
                heading=0.0,
                dimensions=(4.5, 1.8),
                classification=ObjectClass.OTHER,
                time_of_measurement=cpm.management.generation_time,
                confidence=0.9,
            )
        )
        messages[i] = dataclasses.replace(cpm, sensor_info=sensors or None, perceived_objects=tuple(have))
    return messages


def _t3_i(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    declared = float(attack.spec.param("declared_range_m", 1.0))
    distance = float(attack.spec.param("object_distance_m", 5000.0))
    spec = dataclasses.replace(attack.spec, parameters={**attack.spec.parameters,
                                                        "declared_range_m": declared,
                                                        "object_distance_m": distance})
    return _t3_h(ActiveAttack(spec, attack.index, attack.state), messages, ctx, rng)


def _t3_k(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    ray_count = int(attack.spec.param("ray_count", 24))
    for i in _own_cpms(messages):
        cpm = messages[i]
        if not cpm.sensor_info:
            continue
        s = cpm.sensor_info[0]
        spec = SensorSpec(s.sensor_id, s.sensor_type, s.range_m, s.aperture_deg, s.mount_offset)
        # Claim the whole wedge clear, shadowing nothing.
        poly = free_space_polygon((0.0, 0.0), ctx.attacker_entity.heading, spec, [], ray_count)
        addendum = FreeSpaceAddendum(free_space_id=s.sensor_id, polygon=tuple(poly), sensor_ids=(s.sensor_id,))
        messages[i] = dataclasses.replace(cpm, free_space=(addendum,))
    return messages


def _t3_m(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    factor = int(attack.spec.param("flood_factor", 20))
    out: list[Message] = []
    for m in messages:
        out.append(m)
        if isinstance(m, CpmMessage):
            for k in range(1, factor):
                mgmt = dataclasses.replace(m.management, generation_time=m.management.generation_time + k)
                out.append(dataclasses.replace(m, management=mgmt))
    return out


def _t4_a(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    target_id = attack.spec.param("target_entity_id")
    if target_id is None:
        return messages
    try:
        target = ctx.world.entity(int(target_id))
    except KeyError:
        return messages
    if not any(isinstance(m, CamMessage) for m in messages):
        return messages
    spoof_station = int(attack.spec.param("spoof_station_id", 65000 + attack.index))
    messages.append(
        CamMessage(
            header=Header(1, MessageId.CAM, spoof_station),
            position=target.position,
            speed=target.speed,
            heading=geo.norm_heading(target.heading),
            timestamp=ctx.local_clock,
        )
    )
    return messages


def _t3_c_noop(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    # Channel-side interruption; see should_drop_delivery.
    return messages


def _fig4(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    victim = ctx.victim_entity
    if victim is None:
        return messages
    denm_at = int(attack.spec.param("denm_at_ms", attack.spec.start_ms + 2000))
    ghost_count = int(attack.spec.param("ghost_count", 2))
    lateral = float(attack.spec.param("ghost_lateral_m", -3.5))
    aheads = attack.spec.param("ghost_ahead_m", [20.0, 30.0])
    stationary_ahead = float(attack.spec.param("stationary_ahead_m", 30.0))
    fwd = geo.heading_unit(victim.heading)
    left = (-fwd[1], fwd[0])
    in_brake_phase = ctx.local_clock >= denm_at
    if in_brake_phase and "stationary_pos" not in attack.state:
        attack.state["stationary_pos"] = geo.add(victim.position, geo.scale(fwd, stationary_ahead))
    for i in _own_cpms(messages):
        cpm = messages[i]
        have = list(cpm.perceived_objects or ())
        for k in range(ghost_count):
            ahead = float(aheads[k % len(aheads)])
            pos = geo.add(victim.position, geo.add(geo.scale(fwd, ahead), geo.scale(left, lateral)))
            have.append(
                PerceivedObject(
                    object_id=70001 + k,
                    relative_position=geo.sub(pos, cpm.management.reference_position),
                    speed=victim.speed,
                    heading=geo.norm_heading(victim.heading),
                    dimensions=(4.5, 1.8),
                    classification=ObjectClass.OTHER,
                    time_of_measurement=cpm.management.generation_time,
                    confidence=0.9,
                )
            )
        if in_brake_phase:
            pos = attack.state["stationary_pos"]
            have.append(
                PerceivedObject(
                    object_id=70000,
                    relative_position=geo.sub(pos, cpm.management.reference_position),
                    speed=0.0,
                    heading=geo.norm_heading(victim.heading),
                    dimensions=(4.5, 1.8),
                    classification=ObjectClass.OTHER,
                    time_of_measurement=cpm.management.generation_time,
                    confidence=0.95,
                )
            )
        messages[i] = _with_objects(cpm, have)
        if in_brake_phase:
            messages.append(
                DenmMessage(
                    header=Header(1, MessageId.DENM, cpm.header.station_id),
                    event_type=DenmEventType.EMERGENCY_BRAKE,
                    event_position=attack.state["stationary_pos"],
                    timestamp=ctx.local_clock,
                )
            )
    return messages


_MESSAGE_OUT: dict[AttackId, Callable] = {
    AttackId.T3_A: _t3_a,
    AttackId.T3_B: _t3_b,
    AttackId.T3_C: _t3_c_noop,
    AttackId.T3_H: _t3_h,
    AttackId.T3_I: _t3_i,
    AttackId.T3_K: _t3_k,
    AttackId.T3_M: _t3_m,
    AttackId.T4_A: _t4_a,
    AttackId.FIG4_EEBL: _fig4,
}


def inject_message_out(attack: ActiveAttack, messages: list[Message], ctx: InjectorContext, rng) -> list[Message]:
    """Mutate the attacker station's outgoing messages for this tick."""
    if attack.spec.profile.activity is Activity.PASSIVE:
        return messages
    handler = _MESSAGE_OUT.get(attack.spec.attack_id)
    if handler is None:
        return messages
    return handler(attack, messages, ctx, rng)


def _decoy_id(attack: ActiveAttack, k: int = 0) -> int:
    return _DECOY_BASE + attack.index * 10 + k


def _ensure_decoy(world: WorldState, entity: Entity) -> WorldState:
    if any(e.entity_id == entity.entity_id for e in world.entities):
        return world
    return replace(world, entities=world.entities + (entity,))


def inject_world(attack: ActiveAttack, world: WorldState, t: int) -> WorldState:
    """Apply physical-world attacks; called every tick so toggles can restore."""
    if attack.spec.profile.activity is Activity.PASSIVE:
        return world
    aid = attack.spec.attack_id
    if aid is AttackId.T3_D and attack.spec.active(t):
        pos = tuple(attack.spec.param("position", (0.0, 20.0)))
        return _ensure_decoy(
            world,
            Entity(
                entity_id=_decoy_id(attack),
                kind=EntityKind.DECOY,
                position=pos,
                heading=0.0,
                speed=0.0,
                footprint=(0.5, 0.5),
                classified_as=ObjectClass.PERSON_OR_ANIMAL,
            ),
        )
    if aid is AttackId.T3_F and attack.spec.active(t):
        pos = tuple(attack.spec.param("position", (0.0, 20.0)))
        speed = float(attack.spec.param("speed", 8.0))
        waypoints = tuple(Waypoint(tuple(w), speed) for w in attack.spec.param("waypoints", [(0.0, 120.0)]))
        return _ensure_decoy(
            world,
            Entity(
                entity_id=_decoy_id(attack),
                kind=EntityKind.DECOY,
                position=pos,
                heading=0.0,
                speed=speed,
                footprint=(0.5, 0.5),
                waypoints=waypoints,
                classified_as=ObjectClass.PERSON_OR_ANIMAL,
            ),
        )
    if aid is AttackId.T4_C and attack.spec.active(t):
        pos = tuple(attack.spec.param("position", (0.0, 25.0)))
        dims = tuple(attack.spec.param("dimensions", (8.0, 2.5)))
        speed = float(attack.spec.param("speed", 2.0))
        waypoints = tuple(Waypoint(tuple(w), speed) for w in attack.spec.param("waypoints", [(0.0, 120.0)]))
        return _ensure_decoy(
            world,
            Entity(
                entity_id=_decoy_id(attack),
                kind=EntityKind.DECOY,
                position=pos,
                heading=0.0,
                speed=speed,
                footprint=dims,
                waypoints=waypoints,
                classified_as=ObjectClass.OTHER,
            ),
        )
    if aid is AttackId.T3_G:
        entity_id = attack.spec.param("entity_id")
        if entity_id is None:
            return world
        period = int(attack.spec.param("period_ms", 400))
        hidden = False
        if attack.spec.active(t):
            hidden = ((t - attack.spec.start_ms) // period) % 2 == 1
        entities = []
        changed = False
        for e in world.entities:
            if e.entity_id == int(entity_id) and e.hidden != hidden:
                entities.append(replace(e, hidden=hidden))
                changed = True
            else:
                entities.append(e)
        if not changed:
            return world
        return replace(world, entities=tuple(entities))
    return world


def inject_sensor_in(attack: ActiveAttack, senses: StationSenses, specs: Sequence[SensorSpec], t: int, rng) -> StationSenses:
    """Corrupt a victim station's sensor inputs for this tick."""
    if attack.spec.profile.activity is Activity.PASSIVE or not attack.spec.active(t):
        return senses
    aid = attack.spec.attack_id
    if aid is AttackId.T3_E:
        error = float(attack.spec.param("heading_error_deg", 10.0))
        camera_ids = {s.sensor_id for s in specs if s.sensor_type.name == "CAMERA"}
        readings = [
            dataclasses.replace(r, heading=geo.norm_heading(r.heading + error)) if r.sensor_id in camera_ids else r
            for r in senses.readings
        ]
        return StationSenses(readings, senses.position_bias)
    if aid is AttackId.T3_L:
        targets = attack.spec.param("target_entity_ids")
        blinded = {s.sensor_id for s in specs if s.sensor_type.name in ("CAMERA", "LIDAR")}
        readings = []
        for r in senses.readings:
            if targets is not None and r.entity_id not in set(int(x) for x in targets):
                readings.append(r)
            elif r.sensor_id not in blinded:
                readings.append(r)
        return StationSenses(readings, senses.position_bias)
    if aid is AttackId.T3_N:
        bias = tuple(attack.spec.param("bias", (20.0, 0.0)))
        return StationSenses(list(senses.readings), (senses.position_bias[0] + bias[0], senses.position_bias[1] + bias[1]))
    return senses


def inject_clock(attack: ActiveAttack, t: int) -> int:
    """Millisecond offset applied to the victim's clock."""
    if attack.spec.attack_id is AttackId.T4_B and attack.spec.active(t) and attack.spec.profile.activity is Activity.ACTIVE:
        return int(attack.spec.param("offset_ms", 500))
    return 0


def should_drop_delivery(attack: ActiveAttack, sender_station: int, receiver_station: int, send_t: int) -> bool:
    """Channel interruption: cut the tail of the receiver's listen window for
    one sender, leaving only a partial perceived set."""
    if attack.spec.attack_id is not AttackId.T3_C or not attack.spec.active(send_t):
        return False
    if attack.spec.profile.activity is Activity.PASSIVE:
        return False
    if receiver_station != attack.spec.victim:
        return False
    target = attack.spec.param("target_sender")
    if target is not None and sender_station != int(target):
        return False
    window = int(attack.spec.param("listen_window_ms", 1000))
    tail = int(attack.spec.param("tail_ms", 500))
    return send_t % window >= window - tail


@dataclass(frozen=True)
class EeblCompositeTimeline:
    spec: AttackSpec
    ghost_phase: tuple[int, int]
    brake_phase: tuple[int, int]
    conflict_window: tuple[int, int]


def run_eebl_composite(
    attacker_station: int,
    victim_station: int,
    start_ms: int = 2000,
    denm_at_ms: int = 4000,
    stop_ms: int = 6000,
    channel_latency_ms: int = 100,
    parameters: Optional[dict] = None,
) -> EeblCompositeTimeline:
    """Plan the staged ghost-vehicle and fake-brake attack.

    Phase one floods ghost vehicles beside the victim; phase two adds the
    stationary ghost ahead plus the emergency-brake event; the conflict
    window marks when an unprotected victim is expected to contradict its
    own sensors.
    """
    params = {"denm_at_ms": denm_at_ms}
    if parameters:
        params.update(parameters)
    spec = AttackSpec(
        attack_id=AttackId.FIG4_EEBL,
        attacker=attacker_station,
        victim=victim_station,
        parameters=params,
        start_ms=start_ms,
        stop_ms=stop_ms,
    )
    return EeblCompositeTimeline(
        spec=spec,
        ghost_phase=(start_ms, denm_at_ms),
        brake_phase=(denm_at_ms, stop_ms),
        conflict_window=(denm_at_ms + channel_latency_ms, stop_ms),
    )


CATALOG: dict[AttackId, AttackInfo] = {
    AttackId.T3_A: AttackInfo(
        AttackId.T3_A, "III-A", InjectionPoint.MESSAGE_OUT, DetectorId.D7, "attacker_cert",
        {"excess": 1}, "flood the perceived-object list past the trackable limit"),
    AttackId.T3_B: AttackInfo(
        AttackId.T3_B, "III-B", InjectionPoint.MESSAGE_OUT, DetectorId.D9, "attacker_cert",
        {"position_offset": (10.0, 0.0)}, "reuse a foreign object id for a spoofed object with altered pose"),
    AttackId.T3_C: AttackInfo(
        AttackId.T3_C, "III-C", InjectionPoint.MESSAGE_OUT, None, "none",
        {"listen_window_ms": 1000, "tail_ms": 500}, "cut the tail of the victim's listen window for one sender",
        needs_victim=True),
    AttackId.T3_D: AttackInfo(
        AttackId.T3_D, "III-D", InjectionPoint.WORLD, None, "none",
        {"position": (0.0, 20.0)}, "place a static mannequin classified as a person"),
    AttackId.T3_E: AttackInfo(
        AttackId.T3_E, "III-E", InjectionPoint.SENSOR_IN, None, "none",
        {"heading_error_deg": 10.0}, "paint patterns that skew camera-derived headings", needs_victim=True),
    AttackId.T3_F: AttackInfo(
        AttackId.T3_F, "III-F", InjectionPoint.WORLD, None, "none",
        {"position": (0.0, 20.0), "speed": 8.0}, "roll a mannequin at scooter speed"),
    AttackId.T3_G: AttackInfo(
        AttackId.T3_G, "III-G", InjectionPoint.WORLD, None, "none",
        {"period_ms": 400}, "hop in and out of line of sight to force person re-inclusions"),
    AttackId.T3_H: AttackInfo(
        AttackId.T3_H, "III-H", InjectionPoint.MESSAGE_OUT, DetectorId.D3, "attacker_cert",
        {"declared_range_m": 200.0, "object_distance_m": 190.0},
        "inflate the declared sensor range and report an object only the lie covers"),
    AttackId.T3_I: AttackInfo(
        AttackId.T3_I, "III-I", InjectionPoint.MESSAGE_OUT, DetectorId.D2, "attacker_cert",
        {"declared_range_m": 1.0, "object_distance_m": 5000.0},
        "declare a 1 m sensor and report an object at 5000 m"),
    AttackId.T3_K: AttackInfo(
        AttackId.T3_K, "III-K", InjectionPoint.MESSAGE_OUT, DetectorId.D5, "attacker_cert",
        {"ray_count": 24}, "claim confirmed free space over occupied ground"),
    AttackId.T3_L: AttackInfo(
        AttackId.T3_L, "III-L", InjectionPoint.SENSOR_IN, DetectorId.D4, "victim_cert",
        {}, "blind the victim's lidar and camera so its reports go incomplete", needs_victim=True),
    AttackId.T3_M: AttackInfo(
        AttackId.T3_M, "III-M", InjectionPoint.MESSAGE_OUT, DetectorId.D6, "attacker_cert",
        {"flood_factor": 20}, "multiply the CPM emission rate"),
    AttackId.T3_N: AttackInfo(
        AttackId.T3_N, "III-N", InjectionPoint.SENSOR_IN, DetectorId.D4, "victim_cert",
        {"bias": (20.0, 0.0)}, "bias the victim's reference position at generation instants", needs_victim=True),
    AttackId.T4_A: AttackInfo(
        AttackId.T4_A, "IV-A", InjectionPoint.MESSAGE_OUT, None, "none",
        {}, "forge CAMs matching a non-connected object so reporters suppress it"),
    AttackId.T4_B: AttackInfo(
        AttackId.T4_B, "IV-B", InjectionPoint.CLOCK, DetectorId.D8, "victim_cert",
        {"offset_ms": 500}, "skew the victim's clock so compensated objects land elsewhere", needs_victim=True),
    AttackId.T4_C: AttackInfo(
        AttackId.T4_C, "IV-C", InjectionPoint.WORLD, None, "none",
        {"position": (0.0, 25.0), "dimensions": (8.0, 2.5), "speed": 2.0}, "wheel a truck-sized box onto the road"),
    AttackId.FIG4_EEBL: AttackInfo(
        AttackId.FIG4_EEBL, "Fig-4", InjectionPoint.MESSAGE_OUT, DetectorId.D9, "attacker_cert",
        {"ghost_count": 2, "ghost_lateral_m": -3.5, "ghost_ahead_m": [20.0, 30.0], "stationary_ahead_m": 30.0},
        "staged ghost vehicles, then a fake braking event with a stationary ghost ahead", needs_victim=True),
}


def validate_spec(spec: AttackSpec) -> list[str]:
    """Preflight problems with an attack spec; empty means runnable."""
    problems = []
    info = CATALOG.get(spec.attack_id)
    if info is None:
        return [f"unknown attack id {spec.attack_id}"]
    if info.needs_victim and spec.victim is None:
        problems.append(f"{spec.attack_id.value} requires a victim station")
    if spec.start_ms >= spec.stop_ms:
        problems.append(f"{spec.attack_id.value} window is empty")
    if spec.attack_id is AttackId.T3_G and spec.param("entity_id") is None:
        problems.append("T3_G requires an entity_id parameter")
    if spec.attack_id is AttackId.T4_A and spec.param("target_entity_id") is None:
        problems.append("T4_A requires a target_entity_id parameter")
    return problems
