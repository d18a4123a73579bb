"""Per-station Collective Perception Service.

Covers CPM generation (dynamics triggers, the person/animal completeness
rule, redundancy mitigation), CAM/CPM/DENM ingestion with fusion into the
local dynamic map, channel-busy-ratio accounting, and the emergency-brake
consumer application.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from . import geometry as geo
from .geometry import Vec2
from .messages.codec import DecodeError, decode, envelope_digest
from .messages.crypto import KeyRegistry, verify
from .messages.types import (
    CamMessage,
    CpmMessage,
    DenmEventType,
    DenmMessage,
    FreeSpaceAddendum,
    Header,
    ManagementContainer,
    MessageId,
    ObjectClass,
    PerceivedObject,
    SensorInformation,
    SignedEnvelope,
    StationDataContainer,
    StationType,
)
from .world import SensorReading, SensorSpec, in_sensor_area, line_of_sight_clear, sensor_origin


class TrackSource(Enum):
    LOCAL_SENSOR = "local_sensor"
    CPM = "cpm"
    CAM = "cam"


class TrackKind(Enum):
    CONNECTED = "connected"
    NON_CONNECTED = "non_connected"


DEFAULT_VEHICLE_DIMS = (4.5, 1.8)


@dataclass
class Track:
    object_id: int
    kind: TrackKind
    position: Vec2  # absolute, at last_update
    speed: float
    heading: float
    classification: ObjectClass
    dimensions: tuple[float, float]
    confidence: float
    last_update: int
    source: set[TrackSource] = field(default_factory=set)
    station_id: Optional[int] = None
    contributors: set[int] = field(default_factory=set)  # cert ids of message sources
    last_included_in_cpm: Optional[int] = None
    inclusion_snapshot: Optional[tuple[Vec2, float, float]] = None  # position, speed, heading
    last_local_update: Optional[int] = None

    def predicted_position(self, at_ms: int) -> Vec2:
        return geo.extrapolate(self.position, self.speed, self.heading, at_ms - self.last_update)


@dataclass
class LocalDynamicMap:
    """A station's fused view of connected and non-connected objects."""

    owner: int
    tracks: dict[int, Track] = field(default_factory=dict)
    next_object_id: int = 1
    seen_digests: dict[str, int] = field(default_factory=dict)

    def sorted_tracks(self) -> list[Track]:
        return [self.tracks[k] for k in sorted(self.tracks)]

    def connected_for_station(self, station_id: int) -> Optional[Track]:
        for t in self.sorted_tracks():
            if t.kind is TrackKind.CONNECTED and t.station_id == station_id:
                return t
        return None

    def nearest(self, position: Vec2, now: int, gate_m: float, kinds: Optional[set[TrackKind]] = None) -> Optional[Track]:
        best: Optional[Track] = None
        best_d = gate_m
        for t in self.sorted_tracks():
            if kinds is not None and t.kind not in kinds:
                continue
            d = geo.dist(t.predicted_position(now), position)
            if d <= best_d:
                best = t
                best_d = d
        return best

    def new_track(self, **kwargs) -> Track:
        t = Track(object_id=self.next_object_id, **kwargs)
        self.tracks[t.object_id] = t
        self.next_object_id += 1
        return t

    def snapshot_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for t in self.sorted_tracks():
            h.update(
                (
                    f"{t.object_id}:{t.kind.value}:{round(t.position[0] * 1e3)}:{round(t.position[1] * 1e3)}:"
                    f"{round(t.speed * 1e3)}:{round(t.heading * 1e3)}:{t.last_update}:{t.station_id}"
                ).encode()
            )
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class CamTriggerThresholds:
    position_m: float = 4.0
    speed_mps: float = 0.5
    heading_deg: float = 4.0
    max_interval_ms: int = 1000


@dataclass(frozen=True)
class CpsParams:
    triggers: CamTriggerThresholds = CamTriggerThresholds()
    person_interval_ms: int = 500
    association_gate_m: float = 3.0
    track_ttl_ms: int = 1500
    listen_window_ms: int = 1000
    trackable_limit: int = 255
    generation_latency_ms: int = 0
    reading_confidence: float = 0.95

    def __post_init__(self):
        if not 0 <= self.generation_latency_ms <= 50:
            raise ValueError("generation latency budget is 50 ms")


@dataclass(frozen=True)
class RedundancyParams:
    enabled: bool = False
    method: str = "frequency"
    cbr_threshold: float = 0.6
    window_ms: int = 500
    gate_m: float = 3.0

    def __post_init__(self):
        if self.enabled and self.method != "frequency":
            raise ValueError(f"redundancy mitigation method {self.method!r} is a stub; only 'frequency' runs")


@dataclass(frozen=True)
class IngestionRecord:
    accepted: bool
    reason: str
    kind: str
    digest: str
    sender_station: Optional[int] = None
    cert_id: Optional[int] = None
    objects_merged: int = 0
    objects_new: int = 0
    duplicate: bool = False


def should_include(track: Track, now: int, thresholds: CamTriggerThresholds) -> bool:
    """Dynamics-based inclusion trigger for the next CPM."""
    if track.last_included_in_cpm is None or track.inclusion_snapshot is None:
        return True
    pos0, speed0, heading0 = track.inclusion_snapshot
    if geo.dist(track.position, pos0) > thresholds.position_m:
        return True
    if abs(track.speed - speed0) > thresholds.speed_mps:
        return True
    if geo.ang_diff_deg(track.heading, heading0) > thresholds.heading_deg:
        return True
    if now - track.last_included_in_cpm >= thresholds.max_interval_ms:
        return True
    return False


def redundancy_filter(
    candidates: Sequence[Track],
    cbr_ratio: float,
    threshold: float,
    foreign_reports: Sequence[tuple[int, Vec2]],
    window_ms: int,
    now: int,
    gate_m: float = 3.0,
) -> list[Track]:
    """Frequency-based redundancy mitigation.

    Below the channel-busy threshold this is the identity. Above it, a
    candidate already reported by a foreign CPM inside the window is
    dropped. Person/animal tracks are never dropped so the completeness
    rule stays intact.
    """
    if cbr_ratio <= threshold:
        return list(candidates)
    kept: list[Track] = []
    for track in candidates:
        if track.classification is ObjectClass.PERSON_OR_ANIMAL:
            kept.append(track)
            continue
        reported = False
        for t_seen, pos in foreign_reports:
            if now - t_seen < window_ms and geo.dist(pos, track.predicted_position(now)) <= gate_m:
                reported = True
                break
        if not reported:
            kept.append(track)
    return kept


def expire_tracks(ldm: LocalDynamicMap, now: int, ttl_ms: int) -> None:
    """Drop tracks idle longer than the ttl; connected and non-connected alike."""
    if ttl_ms <= 0:
        raise ValueError("ttl must be > 0")
    stale = [oid for oid, t in ldm.tracks.items() if now - t.last_update > ttl_ms]
    for oid in stale:
        del ldm.tracks[oid]


def cbr(traffic_log: Iterable[tuple[int, int]], now: int, window_ms: int, capacity_bytes: int) -> float:
    """Bytes observed inside the window over capacity, clamped to [0, 1]."""
    total = sum(size for t, size in traffic_log if now - window_ms < t <= now)
    if capacity_bytes <= 0:
        return 1.0
    return max(0.0, min(1.0, total / capacity_bytes))


class CbrWindow:
    """Sliding channel-busy-ratio accounting over a global traffic log."""

    def __init__(self, window_ms: int, capacity_bytes_per_window: int):
        self.window_ms = window_ms
        self.capacity = capacity_bytes_per_window
        self._log: deque[tuple[int, int]] = deque()
        self._total = 0

    def observe(self, t: int, nbytes: int) -> None:
        self._log.append((t, nbytes))
        self._total += nbytes

    def ratio(self, now: int) -> float:
        while self._log and self._log[0][0] <= now - self.window_ms:
            _, size = self._log.popleft()
            self._total -= size
        return max(0.0, min(1.0, self._total / self.capacity)) if self.capacity > 0 else 1.0


def _merge_measurement(
    track: Track,
    position: Vec2,
    speed: float,
    heading: float,
    classification: ObjectClass,
    dimensions: tuple[float, float],
    confidence: float,
    now: int,
    source: TrackSource,
    cert_id: Optional[int],
) -> None:
    if now >= track.last_update:
        track.position = position
        track.speed = speed
        track.heading = heading
        track.classification = classification
        track.dimensions = dimensions
        track.confidence = confidence
        track.last_update = now
    track.source.add(source)
    if cert_id is not None:
        track.contributors.add(cert_id)
    if source is TrackSource.LOCAL_SENSOR:
        track.last_local_update = now


def _freshness(track: Track) -> tuple[int, int]:
    # Later data wins; on ties, data whose last writer was the local sensor.
    local_last = 1 if track.last_local_update == track.last_update else 0
    return (track.last_update, local_last)


def _dedupe(ldm: LocalDynamicMap, now: int, gate_m: float) -> None:
    """Merge track pairs closer than the association gate; connected wins."""
    merged = True
    while merged:
        merged = False
        tracks = ldm.sorted_tracks()
        predicted = [t.predicted_position(now) for t in tracks]
        for i in range(len(tracks)):
            for j in range(i + 1, len(tracks)):
                a, b = tracks[i], tracks[j]
                if a.kind is TrackKind.CONNECTED and b.kind is TrackKind.CONNECTED:
                    continue  # distinct stations are never the same object
                dx = predicted[i][0] - predicted[j][0]
                dy = predicted[i][1] - predicted[j][1]
                if dx * dx + dy * dy > gate_m * gate_m:
                    continue
                keep, drop = (a, b)
                if b.kind is TrackKind.CONNECTED and a.kind is not TrackKind.CONNECTED:
                    keep, drop = (b, a)
                if _freshness(drop) > _freshness(keep):
                    keep.position = drop.position
                    keep.speed = drop.speed
                    keep.heading = drop.heading
                    keep.classification = drop.classification
                    keep.dimensions = drop.dimensions
                    keep.confidence = drop.confidence
                    keep.last_update = drop.last_update
                keep.source |= drop.source
                keep.contributors |= drop.contributors
                if drop.last_local_update is not None:
                    keep.last_local_update = max(keep.last_local_update or 0, drop.last_local_update)
                del ldm.tracks[drop.object_id]
                merged = True
                break
            if merged:
                break


def fuse_local_readings(
    ldm: LocalDynamicMap,
    readings: Sequence[SensorReading],
    ego_position: Vec2,
    now: int,
    params: CpsParams,
) -> None:
    """Associate local sensor readings into the map; unmatched readings spawn
    non-connected tracks."""
    for r in sorted(readings, key=lambda x: x.entity_id):
        position = geo.add(ego_position, r.relative_position)
        track = ldm.nearest(position, now, params.association_gate_m)
        if track is None:
            track = ldm.new_track(
                kind=TrackKind.NON_CONNECTED,
                position=position,
                speed=r.speed,
                heading=r.heading,
                classification=r.classification,
                dimensions=r.dimensions,
                confidence=params.reading_confidence,
                last_update=now,
            )
            track.source.add(TrackSource.LOCAL_SENSOR)
            track.last_local_update = now
        else:
            _merge_measurement(
                track,
                position,
                r.speed,
                r.heading,
                r.classification,
                r.dimensions,
                params.reading_confidence,
                now,
                TrackSource.LOCAL_SENSOR,
                None,
            )
    _dedupe(ldm, now, params.association_gate_m)


def _upsert_connected(
    ldm: LocalDynamicMap,
    station_id: int,
    position: Vec2,
    speed: float,
    heading: float,
    now: int,
    cert_id: Optional[int],
    source: TrackSource,
    params: CpsParams,
) -> Track:
    track = ldm.connected_for_station(station_id)
    if track is None:
        candidate = ldm.nearest(position, now, params.association_gate_m, kinds={TrackKind.NON_CONNECTED})
        if candidate is not None:
            candidate.kind = TrackKind.CONNECTED
            candidate.station_id = station_id
            track = candidate
    if track is None:
        track = ldm.new_track(
            kind=TrackKind.CONNECTED,
            position=position,
            speed=speed,
            heading=heading,
            classification=ObjectClass.OTHER,
            dimensions=DEFAULT_VEHICLE_DIMS,
            confidence=1.0,
            last_update=now,
            station_id=station_id,
        )
    _merge_measurement(
        track, position, speed, heading, track.classification, track.dimensions, 1.0, now, source, cert_id
    )
    return track


def _ingest_cpm_message(
    ldm: LocalDynamicMap,
    msg: CpmMessage,
    cert_id: int,
    now: int,
    params: CpsParams,
    ego_position: Optional[Vec2],
    digest: str,
) -> IngestionRecord:
    sender = msg.header.station_id
    ref = msg.management.reference_position
    speed = msg.station_data.speed if msg.station_data else 0.0
    heading = msg.station_data.heading if msg.station_data else 0.0
    _upsert_connected(ldm, sender, ref, speed, heading, now, cert_id, TrackSource.CPM, params)
    merged = 0
    created = 0
    for obj in sorted(msg.perceived_objects or (), key=lambda o: o.object_id):
        absolute = geo.add(ref, obj.relative_position)
        at_now = geo.extrapolate(absolute, obj.speed, obj.heading, now - obj.time_of_measurement)
        if ego_position is not None and geo.dist(at_now, ego_position) <= params.association_gate_m:
            continue  # the reporter sees us; we do not track ourselves
        track = ldm.nearest(at_now, now, params.association_gate_m)
        if track is None:
            track = ldm.new_track(
                kind=TrackKind.NON_CONNECTED,
                position=at_now,
                speed=obj.speed,
                heading=obj.heading,
                classification=obj.classification,
                dimensions=obj.dimensions,
                confidence=obj.confidence,
                last_update=now,
            )
            track.source.add(TrackSource.CPM)
            track.contributors.add(cert_id)
            created += 1
        else:
            _merge_measurement(
                track, at_now, obj.speed, obj.heading, obj.classification, obj.dimensions, obj.confidence,
                now, TrackSource.CPM, cert_id,
            )
            merged += 1
    _dedupe(ldm, now, params.association_gate_m)
    return IngestionRecord(True, "ok", "cpm", digest, sender, cert_id, merged, created)


def _ingest_cam_message(
    ldm: LocalDynamicMap,
    msg: CamMessage,
    cert_id: int,
    now: int,
    params: CpsParams,
    digest: str,
) -> IngestionRecord:
    position = geo.extrapolate(msg.position, msg.speed, msg.heading, now - msg.timestamp)
    _upsert_connected(ldm, msg.header.station_id, position, msg.speed, msg.heading, now, cert_id, TrackSource.CAM, params)
    _dedupe(ldm, now, params.association_gate_m)
    return IngestionRecord(True, "ok", "cam", digest, msg.header.station_id, cert_id)


def _checked_ingest(
    ldm: LocalDynamicMap,
    envelope: SignedEnvelope,
    registry: KeyRegistry,
    now: int,
    params: CpsParams,
    ego_position: Optional[Vec2],
    expect: Optional[MessageId],
) -> tuple[Optional[object], IngestionRecord]:
    digest = envelope_digest(envelope)
    if digest in ldm.seen_digests:
        return None, IngestionRecord(True, "duplicate", "any", digest, duplicate=True)
    result = verify(envelope, registry, now)
    if not result:
        return None, IngestionRecord(False, result.reason.value, "any", digest, cert_id=envelope.cert_id)
    try:
        msg = decode(envelope.payload)
    except DecodeError as exc:
        return None, IngestionRecord(False, f"decode: {exc}", "any", digest, cert_id=envelope.cert_id)
    header = getattr(msg, "header", None)
    if expect is not None and (header is None or header.message_id != expect):
        return None, IngestionRecord(False, "unexpected message type", "any", digest, cert_id=envelope.cert_id)
    ldm.seen_digests[digest] = now
    if len(ldm.seen_digests) > 4096:
        cutoff = now - 10_000
        for k in [k for k, t in ldm.seen_digests.items() if t < cutoff]:
            del ldm.seen_digests[k]
    return msg, IngestionRecord(True, "ok", "any", digest, cert_id=envelope.cert_id)


def ingest_cpm(
    ldm: LocalDynamicMap,
    envelope: SignedEnvelope,
    registry: KeyRegistry,
    now: int,
    params: CpsParams = CpsParams(),
    ego_position: Optional[Vec2] = None,
) -> IngestionRecord:
    """Verify, decode, and fuse one CPM envelope; rejected envelopes leave the
    map untouched."""
    msg, record = _checked_ingest(ldm, envelope, registry, now, params, ego_position, MessageId.CPM)
    if msg is None:
        return record
    return _ingest_cpm_message(ldm, msg, envelope.cert_id, now, params, ego_position, record.digest)


def ingest_cam(
    ldm: LocalDynamicMap,
    envelope: SignedEnvelope,
    registry: KeyRegistry,
    now: int,
    params: CpsParams = CpsParams(),
) -> IngestionRecord:
    """As ingest_cpm, but the sender becomes (or upgrades to) a connected track."""
    msg, record = _checked_ingest(ldm, envelope, registry, now, params, None, MessageId.CAM)
    if msg is None:
        return record
    return _ingest_cam_message(ldm, msg, envelope.cert_id, now, params, record.digest)


@dataclass(frozen=True)
class CpmGenerationInputs:
    station_id: int
    station_type: StationType
    sensor_specs: tuple[SensorSpec, ...]
    now: int  # scheduler time
    local_clock: int  # what the station believes the time is
    self_position: Vec2  # ground truth
    reference_position: Vec2  # claimed (ground truth unless localization is attacked)
    self_speed: float
    self_heading: float
    free_space_polys: tuple[tuple[int, tuple[Vec2, ...]], ...] = ()
    cbr_ratio: float = 0.0
    redundancy: RedundancyParams = RedundancyParams()
    foreign_reports: tuple[tuple[int, Vec2], ...] = ()
    suppress_cam_covered: bool = False


def generate_cpm(ldm: LocalDynamicMap, inputs: CpmGenerationInputs, params: CpsParams = CpsParams()) -> CpmMessage:
    """Build this tick's CPM from currently sensed tracks.

    Inclusion follows the dynamics triggers, plus the completeness rule: if
    any person/animal track stayed out of every CPM for the person interval,
    all person/animal tracks ride along. Sensor information always mirrors
    the true sensor specs.
    """
    now = inputs.now
    candidates = [t for t in ldm.sorted_tracks() if t.last_local_update == now]
    if inputs.suppress_cam_covered:
        candidates = [t for t in candidates if TrackSource.CAM not in t.source]
    included = [t for t in candidates if should_include(t, now, params.triggers)]
    persons = [t for t in candidates if t.classification is ObjectClass.PERSON_OR_ANIMAL]
    person_trigger = any(
        t.last_included_in_cpm is None or now - t.last_included_in_cpm >= params.person_interval_ms for t in persons
    )
    if person_trigger:
        chosen = {t.object_id: t for t in included}
        for t in persons:
            chosen[t.object_id] = t
        included = [chosen[k] for k in sorted(chosen)]
    if inputs.redundancy.enabled:
        included = redundancy_filter(
            included,
            inputs.cbr_ratio,
            inputs.redundancy.cbr_threshold,
            inputs.foreign_reports,
            inputs.redundancy.window_ms,
            now,
            inputs.redundancy.gate_m,
        )
    included = included[: params.trackable_limit]

    objects = []
    for t in included:
        objects.append(
            PerceivedObject(
                object_id=t.object_id,
                relative_position=geo.sub(t.position, inputs.self_position),
                speed=t.speed,
                heading=geo.norm_heading(t.heading),
                dimensions=t.dimensions,
                classification=t.classification,
                time_of_measurement=inputs.local_clock,
                confidence=t.confidence,
            )
        )
        t.last_included_in_cpm = now
        t.inclusion_snapshot = (t.position, t.speed, t.heading)

    sensor_info = tuple(
        SensorInformation(s.sensor_id, s.sensor_type, s.range_m, s.aperture_deg, s.mount_offset)
        for s in sorted(inputs.sensor_specs, key=lambda s: s.sensor_id)
    )
    free_space = tuple(
        FreeSpaceAddendum(free_space_id=sid, polygon=tuple(poly), sensor_ids=(sid,))
        for sid, poly in inputs.free_space_polys
    )
    return CpmMessage(
        header=Header(1, MessageId.CPM, inputs.station_id),
        management=ManagementContainer(
            generation_time=inputs.local_clock + params.generation_latency_ms,
            reference_position=inputs.reference_position,
            station_type=inputs.station_type,
        ),
        station_data=StationDataContainer(inputs.self_speed, geo.norm_heading(inputs.self_heading)),
        sensor_info=sensor_info or None,
        perceived_objects=tuple(objects),
        free_space=free_space or None,
    )


class EeblState(Enum):
    NORMAL = "normal"
    WARN = "warn"
    FAIL_SAFE = "fail_safe"


@dataclass(frozen=True)
class EeblParams:
    corridor_length_m: float = 60.0
    corridor_width_m: float = 3.5
    min_ahead_m: float = 2.0
    stationary_speed_mps: float = 1.0
    corroborate_gate_m: float = 5.0
    denm_ttl_ms: int = 1500
    area_margin_m: float = 1.0


def eebl_decide(
    ldm: LocalDynamicMap,
    readings: Sequence[SensorReading],
    recent_denms: Sequence[tuple[int, DenmMessage]],
    now: int,
    ego_position: Vec2,
    ego_heading: float,
    ego_specs: Sequence[SensorSpec],
    params: EeblParams = EeblParams(),
) -> EeblState:
    """Equal-weight fusion of V2X and onboard sensing for the brake-light app.

    fail_safe: V2X claims a stationary vehicle in the forward corridor that
    the local sensors, with unobstructed view of the spot, do not see.
    warn: a recent emergency-brake event corroborated by a local reading or a
    V2X track near the event position. Otherwise normal.
    """
    fwd = geo.heading_unit(ego_heading)
    left = (-fwd[1], fwd[0])
    reading_abs = [geo.add(ego_position, r.relative_position) for r in readings]
    reading_rects = [
        geo.rect_corners(pos, r.heading, r.dimensions[0], r.dimensions[1])
        for pos, r in zip(reading_abs, readings)
        if r.dimensions[0] > 0 and r.dimensions[1] > 0
    ]
    for track in ldm.sorted_tracks():
        if not (track.source & {TrackSource.CPM, TrackSource.CAM}):
            continue
        if track.speed >= params.stationary_speed_mps:
            continue
        pos = track.predicted_position(now)
        d = geo.sub(pos, ego_position)
        ahead = geo.dot(d, fwd)
        lateral = geo.dot(d, left)
        if not (params.min_ahead_m <= ahead <= params.corridor_length_m):
            continue
        if abs(lateral) > params.corridor_width_m / 2.0:
            continue
        visible = False
        for spec in ego_specs:
            if not in_sensor_area(ego_position, ego_heading, spec, pos, margin_m=params.area_margin_m):
                continue
            origin = sensor_origin(ego_position, ego_heading, spec)
            blockers = [
                rect
                for rect, rpos in zip(reading_rects, reading_abs)
                if geo.dist(rpos, pos) > params.corroborate_gate_m
            ]
            if line_of_sight_clear(origin, pos, blockers):
                visible = True
                break
        if not visible:
            continue
        if any(geo.dist(rpos, pos) <= params.corroborate_gate_m for rpos in reading_abs):
            continue
        return EeblState.FAIL_SAFE
    for t_recv, denm in recent_denms:
        if now - t_recv > params.denm_ttl_ms or denm.event_type is not DenmEventType.EMERGENCY_BRAKE:
            continue
        corroborated = any(geo.dist(rpos, denm.event_position) <= params.corroborate_gate_m for rpos in reading_abs)
        if not corroborated:
            corroborated = any(
                geo.dist(t.predicted_position(now), denm.event_position) <= params.corroborate_gate_m
                for t in ldm.sorted_tracks()
            )
        if corroborated:
            return EeblState.WARN
    return EeblState.NORMAL
