"""Per-station misbehavior detector suite.

Nine checks run over received envelopes, the ego map, and ego sensor
readings. Each detector is a pure function of its declared inputs and
returns verdicts; the suite owns the little state there is (per-sender rate
logs, recent-CPM buffers, report throttling) and turns verdicts into
misbehavior reports.
"""

from __future__ import annotations

import dataclasses
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from . import geometry as geo
from .geometry import Vec2
from .messages.codec import envelope_digest
from .messages.types import (
    CamMessage,
    Certificate,
    CpmMessage,
    DetectorId,
    MisbehaviorReport,
    ObjectClass,
    SignedEnvelope,
)
from .world import SensorReading, SensorSpec, in_sensor_area, line_of_sight_clear, sensor_origin


class VerdictNote(Enum):
    ATTACKER_SUSPECTED = "attacker_suspected"
    VICTIM_POSSIBLE = "victim_possible"


@dataclass(frozen=True)
class DetectorVerdict:
    detector_id: DetectorId
    suspect_cert_id: int
    severity: float  # [0, 1]
    note: VerdictNote
    evidence_refs: tuple[str, ...]
    detail: str = ""


@dataclass(frozen=True)
class DetectorParams:
    max_speed_mps: float = 70.0
    gate_m: float = 3.0
    trackable_limit: int = 255
    max_cpm_rate_hz: float = 10.0
    reporting_threshold: float = 0.5
    d4_window_ms: int = 1000
    d2_margin_m: float = 1.0
    d4_area_margin_m: float = 1.0
    d5_margin_m: float = 1.0
    d5_high_confidence: float = 0.8
    d8_assoc_window_m: float = 20.0
    d6_rate_window_ms: int = 2000
    d6_min_observation_ms: int = 2000
    d6_silence_ms: int = 2000
    # Covers three-sigma position noise on both the blocker and the claim,
    # so grazing lines of sight stay conservative.
    occluder_inflation_m: float = 1.5
    mbr_aggregation_window_ms: int = 1000


SEVERITY = {
    DetectorId.D1: 1.0,
    DetectorId.D2: 1.0,
    DetectorId.D3: 1.0,
    DetectorId.D4: 0.6,
    DetectorId.D5: 0.9,
    DetectorId.D6: 0.8,
    DetectorId.D7: 1.0,
    DetectorId.D8: 0.8,
    DetectorId.D9: 0.7,
}


def _declared_sensor_poses(cpm: CpmMessage) -> list[tuple[Vec2, float, object]]:
    """Sensor origin, boresight, and declared spec per sensor-info entry.

    Needs the sender's heading to orient non-omnidirectional sensors; without
    station data only full-circle sensors can be judged.
    """
    if not cpm.sensor_info:
        return []
    ref = cpm.management.reference_position
    heading = cpm.station_data.heading if cpm.station_data else None
    poses = []
    for s in cpm.sensor_info:
        if heading is None:
            if s.aperture_deg < 360.0:
                continue
            poses.append((geo.add(ref, s.mount_offset), 0.0, s))
        else:
            poses.append((geo.add(ref, geo.body_to_world(s.mount_offset, heading)), heading, s))
    return poses


def _inside_declared_area(cpm: CpmMessage, point: Vec2, margin_m: float) -> Optional[bool]:
    """Membership in the union of the CPM's own declared sensor areas.

    Returns None when the CPM carries no judgeable sensor information.
    """
    poses = _declared_sensor_poses(cpm)
    if not poses:
        return None
    for origin, boresight, s in poses:
        d = geo.dist(origin, point)
        if d > s.range_m - margin_m:
            continue
        if s.aperture_deg >= 360.0 or d <= 1e-9:
            return True
        half = s.aperture_deg / 2.0
        if margin_m > 0 and d > 1e-6:
            half -= math.degrees(math.atan2(margin_m, d))
        if half > 0 and geo.ang_diff_deg(geo.bearing_deg(origin, point), boresight) <= half:
            return True
    return False


def d1_implausible_speed(
    message: CamMessage | CpmMessage,
    cert_id: int,
    max_speed_mps: float,
    evidence_ref: str = "",
) -> list[DetectorVerdict]:
    """Flag any claimed speed above the physical ceiling; the same check
    serves CAM senders and CPM perceived objects."""
    speeds: list[float] = []
    if isinstance(message, CamMessage):
        speeds.append(message.speed)
    else:
        if message.station_data is not None:
            speeds.append(message.station_data.speed)
        for obj in message.perceived_objects or ():
            speeds.append(obj.speed)
    bad = [s for s in speeds if s > max_speed_mps]
    if not bad:
        return []
    return [
        DetectorVerdict(
            DetectorId.D1,
            cert_id,
            SEVERITY[DetectorId.D1],
            VerdictNote.ATTACKER_SUSPECTED,
            (evidence_ref,) if evidence_ref else (),
            f"claimed speed {max(bad):.1f} m/s exceeds {max_speed_mps:.1f} m/s",
        )
    ]


def d2_sensor_area_plausibility(
    cpm: CpmMessage,
    cert_id: int,
    margin_m: float = 1.0,
    evidence_ref: str = "",
) -> list[DetectorVerdict]:
    """Flag perceived objects outside the union of the CPM's own declared
    sensor areas. A self-consistent lie (inflated range covering the object)
    passes; no sensor information means no verdict."""
    if not cpm.sensor_info:
        return []
    ref = cpm.management.reference_position
    outside = []
    for obj in cpm.perceived_objects or ():
        point = geo.add(ref, obj.relative_position)
        inside = _inside_declared_area(cpm, point, -margin_m)  # negative margin widens
        if inside is False:
            outside.append(obj.object_id)
    if not outside:
        return []
    return [
        DetectorVerdict(
            DetectorId.D2,
            cert_id,
            SEVERITY[DetectorId.D2],
            VerdictNote.ATTACKER_SUSPECTED,
            (evidence_ref,) if evidence_ref else (),
            f"objects {outside} lie outside the declared sensor area",
        )
    ]


def d3_capability_attestation(
    cpm: CpmMessage,
    certificate: Optional[Certificate],
    evidence_ref: str = "",
) -> list[DetectorVerdict]:
    """Compare declared sensor ranges against the certificate's attested
    capabilities; no attestation means indeterminate."""
    if certificate is None or certificate.attested_capabilities is None or not cpm.sensor_info:
        return []
    violations = []
    for s in cpm.sensor_info:
        attested = certificate.attested_range(s.sensor_type)
        if attested is None:
            continue
        if s.range_m > attested + 1e-9:
            violations.append((s.sensor_id, s.range_m, attested))
    if not violations:
        return []
    detail = "; ".join(f"sensor {sid} declares {r:.0f} m, attested {a:.0f} m" for sid, r, a in violations)
    return [
        DetectorVerdict(
            DetectorId.D3,
            certificate.cert_id,
            SEVERITY[DetectorId.D3],
            VerdictNote.ATTACKER_SUSPECTED,
            (evidence_ref,) if evidence_ref else (),
            detail,
        )
    ]


def _occluded_per_reported(
    cpm: CpmMessage,
    observer_origin: Vec2,
    target: Vec2,
    gate_m: float,
    inflation_m: float,
) -> bool:
    """Occlusion judged only from what the CPM itself reported.

    A reported object whose footprint reaches within the gate of the target
    plausibly is the target and cannot also shield it.
    """
    ref = cpm.management.reference_position
    for obj in cpm.perceived_objects or ():
        pos = geo.add(ref, obj.relative_position)
        length, width = obj.dimensions
        if length <= 0 or width <= 0:
            continue
        rect = geo.rect_corners(pos, obj.heading, length + 2 * inflation_m, width + 2 * inflation_m)
        if geo.point_rect_dist(target, rect) <= gate_m:
            continue
        if geo.segment_rect_intersect(observer_origin, target, rect):
            return True
    return False


def d4_cross_cpm_consistency(
    cpm_a: CpmMessage,
    cert_a: int,
    cpms_b: Sequence[CpmMessage],
    cert_b: int,
    params: DetectorParams = DetectorParams(),
    connected_positions: Sequence[Vec2] = (),
    evidence_refs: tuple[str, ...] = (),
) -> list[DetectorVerdict]:
    """Cross-check sender A's perceived objects against sender B's recent
    CPMs (B's listen-window assembly).

    An object A claims inside B's declared, unoccluded area that appears in
    none of B's CPMs raises suspicion for both senders: A may have inserted
    a fake object or B may have suppressed a real one. Objects explained by
    a known connected station, or sitting on B itself, are skipped.
    """
    window = [b for b in cpms_b if abs(b.management.generation_time - cpm_a.management.generation_time) <= params.d4_window_ms]
    if not window:
        return []
    ref_a = cpm_a.management.reference_position
    contradicted = []
    for obj in cpm_a.perceived_objects or ():
        claimed = geo.add(ref_a, obj.relative_position)
        skip = False
        for cpos in connected_positions:
            if geo.dist(claimed, cpos) <= params.gate_m:
                skip = True
                break
        if skip:
            continue
        eligible = 0
        present = False
        for b in window:
            ref_b = b.management.reference_position
            at_b = geo.extrapolate(claimed, obj.speed, obj.heading, b.management.generation_time - obj.time_of_measurement)
            if geo.dist(at_b, ref_b) <= max(params.gate_m, 2.0):
                present = True  # that is B itself; B never reports itself
                break
            for other in b.perceived_objects or ():
                if geo.dist(geo.add(ref_b, other.relative_position), at_b) <= params.gate_m:
                    present = True
                    break
            if present:
                break
            if _inside_declared_area(b, at_b, params.d4_area_margin_m) is not True:
                continue
            poses = _declared_sensor_poses(b)
            origin = poses[0][0] if poses else ref_b
            if _occluded_per_reported(b, origin, at_b, params.gate_m, params.occluder_inflation_m):
                continue
            eligible += 1
        if present or eligible == 0:
            continue
        contradicted.append(obj.object_id)
    if not contradicted:
        return []
    detail = f"objects {contradicted} inside the counterpart's area but absent from its reports"
    return [
        DetectorVerdict(DetectorId.D4, cert_a, SEVERITY[DetectorId.D4], VerdictNote.VICTIM_POSSIBLE, evidence_refs, detail),
        DetectorVerdict(DetectorId.D4, cert_b, SEVERITY[DetectorId.D4], VerdictNote.VICTIM_POSSIBLE, evidence_refs, detail),
    ]


def d5_free_space_contradiction(
    cpm: CpmMessage,
    cert_id: int,
    ego_readings: Sequence[SensorReading],
    ego_tracks: Sequence[tuple[Vec2, float, float, float]],  # position, speed, heading, confidence
    ego_position: Vec2,
    ego_heading: float,
    ego_specs: Sequence[SensorSpec],
    now: int,
    params: DetectorParams = DetectorParams(),
    evidence_ref: str = "",
) -> list[DetectorVerdict]:
    """Flag a claimed free-space polygon that covers something the ego can
    currently see.

    Witnesses are motion-compensated back to the claim's generation time so
    a vehicle that legitimately moved into freed ground is not a
    contradiction. Only the part of the polygon inside the ego's own visible
    region is judged; contradictions outside the ego's view wait for line of
    sight."""
    if not cpm.free_space:
        return []
    ref = cpm.management.reference_position
    gen_time = cpm.management.generation_time
    reading_abs = [geo.add(ego_position, r.relative_position) for r in ego_readings]
    reading_rects = [
        geo.rect_corners(pos, r.heading, r.dimensions[0], r.dimensions[1])
        for pos, r in zip(reading_abs, ego_readings)
        if r.dimensions[0] > 0 and r.dimensions[1] > 0
    ]
    # (position at claim time, current position, needs visibility check)
    witnesses: list[tuple[Vec2, Vec2, bool]] = [
        (geo.extrapolate(pos, r.speed, r.heading, gen_time - now), pos, False)
        for pos, r in zip(reading_abs, ego_readings)
    ]
    witnesses.extend(
        (geo.extrapolate(pos, speed, heading, gen_time - now), pos, True)
        for pos, speed, heading, conf in ego_tracks
        if conf >= params.d5_high_confidence
    )

    def ego_sees(point: Vec2) -> bool:
        for spec in ego_specs:
            if not in_sensor_area(ego_position, ego_heading, spec, point, margin_m=0.0):
                continue
            origin = sensor_origin(ego_position, ego_heading, spec)
            blockers = [
                rect for rect, rpos in zip(reading_rects, reading_abs) if geo.dist(rpos, point) > params.gate_m
            ]
            if line_of_sight_clear(origin, point, blockers):
                return True
        return False

    hits = []
    for addendum in cpm.free_space:
        polygon = [geo.add(ref, p) for p in addendum.polygon]
        for w_then, w_now, check_visibility in witnesses:
            if geo.dist(w_then, ref) <= max(params.gate_m, 3.0):
                continue  # the witness is the sender itself, sitting mid-fan
            if not geo.point_in_polygon(w_then, polygon):
                continue
            if geo.point_polygon_boundary_dist(w_then, polygon) < params.d5_margin_m:
                continue
            if check_visibility and not ego_sees(w_now):
                continue
            hits.append(addendum.free_space_id)
            break
    if not hits:
        return []
    return [
        DetectorVerdict(
            DetectorId.D5,
            cert_id,
            SEVERITY[DetectorId.D5],
            VerdictNote.ATTACKER_SUSPECTED,
            (evidence_ref,) if evidence_ref else (),
            f"free-space claims {sorted(set(hits))} cover objects the ego can see",
        )
    ]


@dataclass
class SenderLog:
    """Per-sender observation history used by the rate detector."""

    first_seen: int
    cpm_times: deque = field(default_factory=deque)
    last_objects: list[tuple[Vec2, float, float, int]] = field(default_factory=list)  # pos, speed, heading, tom
    last_cpm_at: int = 0
    last_digest: str = ""
    last_cert: int = 0


def d6_rate_anomaly(
    log: SenderLog,
    cert_id: int,
    now: int,
    nominal_rate_hz: float,
    ego_readings_abs: Sequence[Vec2] = (),
    params: DetectorParams = DetectorParams(),
    evidence_ref: str = "",
) -> list[DetectorVerdict]:
    """Flag senders emitting far too many CPMs, or falling silent while the
    objects they were reporting demonstrably persist in ego view."""
    if now - log.first_seen < params.d6_min_observation_ms:
        return []
    window = params.d6_rate_window_ms
    recent = sum(1 for t in log.cpm_times if now - window < t <= now)
    if recent > params.max_cpm_rate_hz * window / 1000.0:
        return [
            DetectorVerdict(
                DetectorId.D6,
                cert_id,
                SEVERITY[DetectorId.D6],
                VerdictNote.ATTACKER_SUSPECTED,
                (evidence_ref,) if evidence_ref else (),
                f"{recent} CPMs in {window} ms exceeds {params.max_cpm_rate_hz:.0f} Hz",
            )
        ]
    silence = now - log.last_cpm_at
    expected_period = 1000.0 / max(nominal_rate_hz, 1e-6)
    if log.cpm_times and silence >= max(params.d6_silence_ms, 2 * expected_period):
        for pos, speed, heading, tom in log.last_objects:
            predicted = geo.extrapolate(pos, speed, heading, now - tom)
            if any(geo.dist(predicted, r) <= params.gate_m for r in ego_readings_abs):
                return [
                    DetectorVerdict(
                        DetectorId.D6,
                        cert_id,
                        SEVERITY[DetectorId.D6],
                        VerdictNote.ATTACKER_SUSPECTED,
                        (evidence_ref,) if evidence_ref else (),
                        f"sender silent for {silence} ms while its reported objects persist",
                    )
                ]
    return []


def d7_object_flood(cpm: CpmMessage, cert_id: int, trackable_limit: int, evidence_ref: str = "") -> list[DetectorVerdict]:
    """Flag CPMs carrying more perceived objects than anyone can track."""
    count = len(cpm.perceived_objects or ())
    if count <= trackable_limit:
        return []
    return [
        DetectorVerdict(
            DetectorId.D7,
            cert_id,
            SEVERITY[DetectorId.D7],
            VerdictNote.ATTACKER_SUSPECTED,
            (evidence_ref,) if evidence_ref else (),
            f"{count} perceived objects exceeds the trackable limit {trackable_limit}",
        )
    ]


def d8_cam_cpm_crosscheck(
    cam: CamMessage,
    cpm: CpmMessage,
    cpm_cert: int,
    gate_m: float = 3.0,
    assoc_window_m: float = 20.0,
    evidence_refs: tuple[str, ...] = (),
    params: DetectorParams = DetectorParams(),
) -> list[DetectorVerdict]:
    """Cross-check the CPM's report of a connected station against that
    station's own CAM.

    The CAM state is propagated under constant velocity to the object's
    measurement time. The reporter must plausibly see the CAM sender
    (declared area, unoccluded per its own reports); the nearest perceived
    object then stands for the sender, and a deviation beyond the gate flags
    the CPM sender.
    """
    if cam.header.station_id == cpm.header.station_id:
        return []
    ref = cpm.management.reference_position
    best = None
    best_dev = float("inf")
    for obj in cpm.perceived_objects or ():
        claimed = geo.add(ref, obj.relative_position)
        predicted = geo.extrapolate(cam.position, cam.speed, cam.heading, obj.time_of_measurement - cam.timestamp)
        deviation = geo.dist(claimed, predicted)
        if deviation < best_dev:
            best, best_dev = obj, deviation
    if best is None or best_dev <= gate_m or best_dev > assoc_window_m:
        return []
    pred_at_gen = geo.extrapolate(cam.position, cam.speed, cam.heading, cpm.management.generation_time - cam.timestamp)
    if _inside_declared_area(cpm, pred_at_gen, params.d4_area_margin_m) is not True:
        return []
    poses = _declared_sensor_poses(cpm)
    origin = poses[0][0] if poses else ref
    if _occluded_per_reported(cpm, origin, pred_at_gen, gate_m, params.occluder_inflation_m):
        return []
    return [
        DetectorVerdict(
            DetectorId.D8,
            cpm_cert,
            SEVERITY[DetectorId.D8],
            VerdictNote.ATTACKER_SUSPECTED,
            evidence_refs,
            f"object {best.object_id} deviates {best_dev:.1f} m from station {cam.header.station_id}'s own motion report",
        )
    ]


def d9_local_perception_consistency(
    cpm: CpmMessage,
    cert_id: int,
    ego_readings: Sequence[SensorReading],
    ego_position: Vec2,
    ego_heading: float,
    ego_specs: Sequence[SensorSpec],
    now: int,
    params: DetectorParams = DetectorParams(),
    evidence_ref: str = "",
) -> list[DetectorVerdict]:
    """Flag claimed objects inside the ego's own sensor area, unoccluded per
    the ego's readings, yet absent from those readings.

    The verdict is tagged victim_possible: the sender may itself be blinded
    rather than lying.
    """
    ref = cpm.management.reference_position
    reading_abs = [geo.add(ego_position, r.relative_position) for r in ego_readings]
    reading_rects = [
        geo.rect_corners(pos, r.heading, r.dimensions[0] + 2 * params.occluder_inflation_m, r.dimensions[1] + 2 * params.occluder_inflation_m)
        for pos, r in zip(reading_abs, ego_readings)
        if r.dimensions[0] > 0 and r.dimensions[1] > 0
    ]
    ghosts = []
    for obj in cpm.perceived_objects or ():
        claimed_then = geo.add(ref, obj.relative_position)
        claimed = geo.extrapolate(claimed_then, obj.speed, obj.heading, now - obj.time_of_measurement)
        if geo.dist(claimed, ego_position) <= params.gate_m:
            continue  # that is the ego itself
        if any(geo.dist(claimed, r) <= params.gate_m for r in reading_abs):
            continue
        seen = False
        for spec in ego_specs:
            if not in_sensor_area(ego_position, ego_heading, spec, claimed, margin_m=params.d4_area_margin_m):
                continue
            origin = sensor_origin(ego_position, ego_heading, spec)
            blockers = [
                rect for rect, rpos in zip(reading_rects, reading_abs) if geo.dist(rpos, claimed) > params.gate_m
            ]
            if line_of_sight_clear(origin, claimed, blockers):
                seen = True
                break
        if seen:
            ghosts.append(obj.object_id)
    if not ghosts:
        return []
    return [
        DetectorVerdict(
            DetectorId.D9,
            cert_id,
            SEVERITY[DetectorId.D9],
            VerdictNote.VICTIM_POSSIBLE,
            (evidence_ref,) if evidence_ref else (),
            f"claimed objects {ghosts} are invisible to the ego's clear view",
        )
    ]


class MbrConstructionError(Exception):
    """An MBR references evidence the store no longer holds."""


def emit_mbr(
    verdicts: Sequence[DetectorVerdict],
    evidence_store: dict[str, SignedEnvelope],
    reporter: int,
    now: int,
    reporting_threshold: float = 0.5,
    synchronized_pairs: Optional[dict[str, tuple[CamMessage, CpmMessage]]] = None,
) -> list[MisbehaviorReport]:
    """Bundle qualifying verdicts into misbehavior reports with signed
    evidence copies."""
    reports = []
    for v in verdicts:
        if v.severity < reporting_threshold:
            continue
        evidence = []
        for ref in v.evidence_refs:
            env = evidence_store.get(ref)
            if env is None:
                raise MbrConstructionError(f"evidence {ref} missing from store")
            evidence.append(env)
        if not evidence:
            raise MbrConstructionError("verdict carries no evidence refs")
        pair = None
        if v.detector_id == DetectorId.D8 and synchronized_pairs:
            pair = synchronized_pairs.get(v.evidence_refs[0])
        reports.append(
            MisbehaviorReport(
                reporter=reporter,
                suspect_cert_id=v.suspect_cert_id,
                detector_id=v.detector_id,
                evidence=tuple(evidence),
                created_at=now,
                synchronized_pair=pair,
            )
        )
    return reports


@dataclass(frozen=True)
class DetectorConfig:
    enabled: frozenset[DetectorId] = frozenset(DetectorId)
    params: DetectorParams = DetectorParams()
    quarantine_on_mbr: bool = True


@dataclass
class _BufferedCpm:
    received_at: int
    cpm: CpmMessage
    digest: str
    cert_id: int


class DetectorSuite:
    """Runs the enabled detectors for one station and throttles reports."""

    def __init__(self, station_id: int, config: DetectorConfig, cert_registry):
        self.station_id = station_id
        self.config = config
        self.registry = cert_registry
        self.evidence_store: dict[str, SignedEnvelope] = {}
        self.sync_pairs: dict[str, tuple[CamMessage, CpmMessage]] = {}
        self.cpm_buffers: dict[int, deque] = {}  # sender station -> _BufferedCpm deque
        self.cam_latest: dict[int, tuple[CamMessage, str]] = {}
        self.sender_logs: dict[int, SenderLog] = {}
        self.distrusted: set[int] = set()
        self._last_mbr: dict[tuple[DetectorId, int], int] = {}
        self.nominal_rate_hz: float = 1.0

    def _on(self, det: DetectorId) -> bool:
        return det in self.config.enabled

    def _store_evidence(self, envelope: SignedEnvelope) -> str:
        digest = envelope_digest(envelope)
        self.evidence_store[digest] = envelope
        if len(self.evidence_store) > 8192:
            for k in list(self.evidence_store)[:2048]:
                self.evidence_store.pop(k, None)
        return digest

    def observe_cam(self, cam: CamMessage, envelope: SignedEnvelope, now: int) -> list[DetectorVerdict]:
        digest = self._store_evidence(envelope)
        self.cam_latest[cam.header.station_id] = (cam, digest)
        verdicts = []
        if self._on(DetectorId.D1):
            verdicts.extend(d1_implausible_speed(cam, envelope.cert_id, self.config.params.max_speed_mps, digest))
        return verdicts

    def observe_cpm(
        self,
        cpm: CpmMessage,
        envelope: SignedEnvelope,
        now: int,
        ego_readings: Sequence[SensorReading],
        ego_position: Vec2,
        ego_heading: float,
        ego_specs: Sequence[SensorSpec],
        ego_tracks: Sequence[tuple[Vec2, float, float, float]],
        connected_positions: Sequence[Vec2],
    ) -> list[DetectorVerdict]:
        p = self.config.params
        digest = self._store_evidence(envelope)
        sender = cpm.header.station_id
        log = self.sender_logs.get(sender)
        if log is None:
            log = SenderLog(first_seen=now)
            self.sender_logs[sender] = log
        log.cpm_times.append(now)
        while log.cpm_times and log.cpm_times[0] <= now - max(p.d6_rate_window_ms, 4000):
            log.cpm_times.popleft()
        log.last_cpm_at = now
        log.last_digest = digest
        log.last_cert = envelope.cert_id
        if cpm.perceived_objects:
            ref = cpm.management.reference_position
            log.last_objects = [
                (geo.add(ref, o.relative_position), o.speed, o.heading, o.time_of_measurement)
                for o in cpm.perceived_objects[:16]
            ]
        buffer = self.cpm_buffers.setdefault(sender, deque())
        buffer.append(_BufferedCpm(now, cpm, digest, envelope.cert_id))
        while buffer and buffer[0].received_at < now - 2 * p.d4_window_ms:
            buffer.popleft()

        verdicts: list[DetectorVerdict] = []
        if self._on(DetectorId.D1):
            verdicts.extend(d1_implausible_speed(cpm, envelope.cert_id, p.max_speed_mps, digest))
        if self._on(DetectorId.D2):
            verdicts.extend(d2_sensor_area_plausibility(cpm, envelope.cert_id, p.d2_margin_m, digest))
        if self._on(DetectorId.D3):
            cert = self.registry.certificate(envelope.cert_id) if self.registry else None
            verdicts.extend(d3_capability_attestation(cpm, cert, digest))
        if self._on(DetectorId.D7):
            verdicts.extend(d7_object_flood(cpm, envelope.cert_id, p.trackable_limit, digest))
        if self._on(DetectorId.D5):
            verdicts.extend(
                d5_free_space_contradiction(
                    cpm, envelope.cert_id, ego_readings, ego_tracks, ego_position, ego_heading, ego_specs, now, p, digest
                )
            )
        if self._on(DetectorId.D9):
            verdicts.extend(
                d9_local_perception_consistency(
                    cpm, envelope.cert_id, ego_readings, ego_position, ego_heading, ego_specs, now, p, digest
                )
            )
        if self._on(DetectorId.D8):
            for cam_station in sorted(self.cam_latest):
                cam, cam_digest = self.cam_latest[cam_station]
                if cam_station == sender:
                    continue
                found = d8_cam_cpm_crosscheck(
                    cam, cpm, envelope.cert_id, p.gate_m, p.d8_assoc_window_m, (digest, cam_digest), p
                )
                if found:
                    self.sync_pairs[digest] = (cam, cpm)
                    verdicts.extend(found)
        if self._on(DetectorId.D4):
            for other in sorted(self.cpm_buffers):
                if other == sender:
                    continue
                window = self.cpm_buffers[other]
                if not window:
                    continue
                refs = (digest, window[-1].digest)
                verdicts.extend(
                    d4_cross_cpm_consistency(
                        cpm, envelope.cert_id, [b.cpm for b in window], window[-1].cert_id, p, connected_positions, refs
                    )
                )
        return verdicts

    def tick(self, now: int, ego_readings_abs: Sequence[Vec2]) -> list[DetectorVerdict]:
        if not self._on(DetectorId.D6):
            return []
        verdicts = []
        for sender in sorted(self.sender_logs):
            log = self.sender_logs[sender]
            if not log.last_digest or log.last_cert in self.distrusted:
                continue  # quarantine already silenced this sender
            verdicts.extend(
                d6_rate_anomaly(
                    log, log.last_cert, now, self.nominal_rate_hz, ego_readings_abs, self.config.params, log.last_digest
                )
            )
        return verdicts

    def reports_for(self, verdicts: Sequence[DetectorVerdict], now: int) -> list[MisbehaviorReport]:
        """Threshold, throttle, and materialize reports; repeated violations
        aggregate into one report per suspect and window."""
        out: list[MisbehaviorReport] = []
        for v in verdicts:
            if v.severity < self.config.params.reporting_threshold:
                continue
            key = (v.detector_id, v.suspect_cert_id)
            last = self._last_mbr.get(key)
            if last is not None and now - last < self.config.params.mbr_aggregation_window_ms:
                continue
            reports = emit_mbr([v], self.evidence_store, self.station_id, now,
                               self.config.params.reporting_threshold, self.sync_pairs)
            if reports:
                self._last_mbr[key] = now
                out.extend(reports)
                if self.config.quarantine_on_mbr:
                    self.distrusted.add(v.suspect_cert_id)
        return out
