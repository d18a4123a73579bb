"""Scenario runner: the deterministic tick pipeline.

Per tick: step the world, apply world injections, deliver last tick's
channel queue, then per station ingest, fuse local sensing, detect, decide
the brake-light state, and generate outgoing traffic. Messages generated at
tick t become ingestible at t plus the channel latency.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .. import geometry as geo
from ..attacks import (
    CATALOG,
    ActiveAttack,
    Activity,
    AttackId,
    InjectionPoint,
    InjectorContext,
    Membership,
    StationSenses,
    inject_clock,
    inject_message_out,
    inject_sensor_in,
    inject_world,
    should_drop_delivery,
)
from ..cps import (
    CbrWindow,
    CpmGenerationInputs,
    EeblState,
    LocalDynamicMap,
    TrackSource,
    _ingest_cam_message,
    _ingest_cpm_message,
    eebl_decide,
    expire_tracks,
    fuse_local_readings,
    generate_cpm,
)
from ..detectors import DetectorSuite
from ..hashing import derive_rng
from ..messages.codec import DecodeError, canonical_bytes, decode, envelope_digest
from ..messages.crypto import KeyRegistry, sign, verify
from ..messages.types import (
    CamMessage,
    Certificate,
    CpmMessage,
    DenmMessage,
    Header,
    Message,
    MessageId,
    SignedEnvelope,
    StationType,
)
from ..world import EntityKind, WorldState, free_space, sense
from ..world import step as world_step
from .config import ScenarioConfig, StationConfig


@dataclass
class StationRuntime:
    cfg: StationConfig
    entity_id: int
    station_type: StationType
    cert_id: int
    ldm: LocalDynamicMap = field(init=False)
    suite: DetectorSuite = field(init=False)
    recent_denms: deque = field(default_factory=deque)
    foreign_reports: deque = field(default_factory=deque)
    observed_foreign_objects: deque = field(default_factory=deque)
    eebl_state: EeblState = EeblState.NORMAL
    sent_count: int = 0
    recv_count: int = 0

    def __post_init__(self):
        self.ldm = LocalDynamicMap(owner=self.cfg.station_id)


@dataclass
class QueuedEnvelope:
    send_t: int
    sender_station: int
    envelope: SignedEnvelope
    msg_kind: str


@dataclass
class AttackMetrics:
    attack_id: str
    attacker: int
    victim: Optional[int]
    start_ms: int
    stop_ms: int
    mapped_detector: Optional[str]
    detection_target: str
    detected: bool = False
    time_to_detection_ms: Optional[int] = None
    mbrs_naming_attacker: int = 0
    mbrs_naming_victim: int = 0


@dataclass
class RunMetrics:
    name: str
    config_hash: str
    seed: int
    duration_ms: int
    tick_ms: int
    trace_hash: str = ""
    mean_cbr: float = 0.0
    sent_envelopes: int = 0
    accepted_envelopes: int = 0
    rejected_envelopes: int = 0
    mbr_counts: dict = field(default_factory=dict)
    mbrs: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    attacks: list = field(default_factory=list)
    clean_run: bool = True
    false_positive_mbrs: int = 0
    eebl_timelines: dict = field(default_factory=dict)
    eebl_summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["attacks"] = [dict(a.__dict__) for a in self.attacks]
        return out


class TraceWriter:
    """Line-delimited JSON trace with a running hash."""

    def __init__(self):
        self.lines: list[str] = []
        self._hash = hashlib.sha256()

    def record(self, rec: dict) -> None:
        line = json.dumps(rec, sort_keys=True, separators=(",", ":"))
        self.lines.append(line)
        self._hash.update(line.encode("utf-8"))
        self._hash.update(b"\n")

    def finish(self) -> str:
        digest = self._hash.hexdigest()
        self.lines.append(json.dumps({"rec": "end", "trace_hash": digest}, sort_keys=True, separators=(",", ":")))
        return digest


def _build_world(config: ScenarioConfig) -> WorldState:
    sensors = {ec.station.station_id: ec.station.sensors for ec in config.entities if ec.station}
    return WorldState(
        time=0,
        entities=tuple(ec.entity for ec in config.entities),
        sensors=sensors,
        rng_seed=config.seed,
    )


def _build_registry(config: ScenarioConfig) -> KeyRegistry:
    registry = KeyRegistry()
    horizon = config.duration_ms + 1_000_000
    for ec in config.entities:
        st = ec.station
        if st is None or not st.registered:
            continue
        caps = None
        if config.attestation and st.sensors:
            caps = tuple((s.sensor_type, s.range_m) for s in st.sensors)
        cert = Certificate(
            cert_id=st.station_id,
            holder_station=st.station_id,
            valid_from=0,
            valid_to=horizon,
            attested_capabilities=caps,
        )
        registry.register(cert, registry.derive_key(st.station_id, config.seed))
    return registry


def _station_type(kind: EntityKind) -> StationType:
    if kind is EntityKind.RSU:
        return StationType.RSU
    return StationType.VEHICLE


def _period_ticks(rate_hz: float, tick_ms: int) -> int:
    if rate_hz <= 0:
        return 1 << 30
    return max(1, round(1000.0 / (rate_hz * tick_ms)))


def _bogus_envelope(message: Message, station_id: int) -> SignedEnvelope:
    # Unregistered stations cannot produce a verifying tag.
    return SignedEnvelope(canonical_bytes(message), 0xDEAD0000 + station_id, b"\x00" * 32)


def run_scenario(
    config: ScenarioConfig,
    seed_override: Optional[int] = None,
    collect_trace: bool = True,
) -> tuple[RunMetrics, list[str]]:
    """Execute the scenario; returns metrics and the trace lines."""
    if seed_override is not None:
        config = config.with_seed(seed_override)
    world = _build_world(config)
    registry = _build_registry(config)
    tick = config.tick_ms
    latency_ms = config.channel.latency_ticks * tick

    stations: dict[int, StationRuntime] = {}
    for ec in config.entities:
        if ec.station is None:
            continue
        rt = StationRuntime(
            cfg=ec.station,
            entity_id=ec.entity.entity_id,
            station_type=_station_type(ec.entity.kind),
            cert_id=ec.station.station_id,
        )
        rt.suite = DetectorSuite(ec.station.station_id, config.detectors.as_config(), registry)
        rt.suite.nominal_rate_hz = ec.station.cpm_rate_hz
        stations[ec.station.station_id] = rt
    station_ids = sorted(stations)

    attacks = [ActiveAttack(spec, index=i) for i, spec in enumerate(config.attacks)]
    world_attacks = [a for a in attacks if CATALOG[a.spec.attack_id].injection_point is InjectionPoint.WORLD]
    sensor_attacks = [a for a in attacks if CATALOG[a.spec.attack_id].injection_point is InjectionPoint.SENSOR_IN]
    clock_attacks = [a for a in attacks if CATALOG[a.spec.attack_id].injection_point is InjectionPoint.CLOCK]
    out_attacks = [a for a in attacks if CATALOG[a.spec.attack_id].injection_point is InjectionPoint.MESSAGE_OUT]
    drop_attacks = [a for a in attacks if a.spec.attack_id is AttackId.T3_C]

    attack_metrics = []
    for a in attacks:
        info = CATALOG[a.spec.attack_id]
        attack_metrics.append(
            AttackMetrics(
                attack_id=a.spec.attack_id.value,
                attacker=a.spec.attacker,
                victim=a.spec.victim,
                start_ms=a.spec.start_ms,
                stop_ms=a.spec.stop_ms,
                mapped_detector=info.mapped_detector.name if info.mapped_detector else None,
                detection_target=info.detected_by,
            )
        )

    channel_rng = derive_rng(config.seed, "channel")
    queue: deque[QueuedEnvelope] = deque()
    cbr_window = CbrWindow(config.channel.window_ms, config.channel.capacity_bytes_per_window)
    trace = TraceWriter()
    metrics = RunMetrics(
        name=config.name,
        config_hash=config.config_hash(),
        seed=config.seed,
        duration_ms=config.duration_ms,
        tick_ms=tick,
        clean_run=not config.attacks,
    )
    trace.record(
        {
            "rec": "header",
            "name": config.name,
            "config_hash": metrics.config_hash,
            "seed": config.seed,
            "version": 1,
            "tick_ms": tick,
            "duration_ms": config.duration_ms,
        }
    )
    for rt in stations.values():
        metrics.eebl_timelines[str(rt.cfg.station_id)] = [{"t": 0, "state": EeblState.NORMAL.value}]

    cbr_sum = 0.0
    ticks = 0

    for t in range(0, config.duration_ms, tick):
        if t > 0:
            world = world_step(world, tick)
        for attack in world_attacks:
            world = inject_world(attack, world, t)

        # Deliveries scheduled for this tick: verified and decoded once, the
        # result shared across receivers.
        deliveries: list[tuple[QueuedEnvelope, str, bool, str, object]] = []
        while queue and queue[0].send_t + latency_ms <= t:
            qd = queue.popleft()
            digest = envelope_digest(qd.envelope)
            result = verify(qd.envelope, registry, t)
            msg = None
            reason = "ok"
            if not result:
                reason = result.reason.value
            else:
                try:
                    msg = decode(qd.envelope.payload)
                except DecodeError as exc:
                    reason = f"decode: {exc}"
            deliveries.append((qd, digest, msg is not None, reason, msg))

        cbr_ratio = cbr_window.ratio(t)
        cbr_sum += cbr_ratio
        ticks += 1

        # Sense once per station per tick, then apply sensor-side injections.
        senses: dict[int, StationSenses] = {}
        for sid in station_ids:
            rt = stations[sid]
            if rt.cfg.sensors:
                readings = sense(sid, world, config.noise, derive_rng(config.seed, "sense", sid, t))
            else:
                readings = []
            bundle = StationSenses(readings)
            for attack in sensor_attacks:
                if attack.spec.victim == sid and attack.spec.active(t):
                    bundle = inject_sensor_in(attack, bundle, rt.cfg.sensors, t, derive_rng(config.seed, "att", attack.index, t))
            senses[sid] = bundle

        outgoing: list[tuple[int, Message, SignedEnvelope]] = []

        for sid in station_ids:
            rt = stations[sid]
            entity = world.station_entity(sid)
            bundle = senses[sid]
            local_clock = t + sum(inject_clock(a, t) for a in clock_attacks if a.spec.victim == sid)

            accepted_messages = []
            for qd, digest, ok, reason, msg in deliveries:
                if qd.sender_station == sid:
                    continue
                if any(should_drop_delivery(a, qd.sender_station, sid, qd.send_t) for a in drop_attacks):
                    continue
                if config.channel.loss_rate > 0 and channel_rng.random() < config.channel.loss_rate:
                    continue
                rt.recv_count += 1
                env = qd.envelope
                if env.cert_id in rt.suite.distrusted:
                    trace.record(
                        {"rec": "recv", "t": t, "station": sid, "digest": digest, "accepted": False,
                         "reason": "quarantined"}
                    )
                    metrics.rejected_envelopes += 1
                    continue
                if not ok:
                    trace.record(
                        {"rec": "recv", "t": t, "station": sid, "digest": digest, "accepted": False, "reason": reason}
                    )
                    metrics.rejected_envelopes += 1
                    continue
                if digest in rt.ldm.seen_digests:
                    trace.record(
                        {"rec": "recv", "t": t, "station": sid, "digest": digest, "accepted": True,
                         "reason": "duplicate"}
                    )
                    continue
                rt.ldm.seen_digests[digest] = t
                if len(rt.ldm.seen_digests) > 4096:
                    cutoff = t - 10_000
                    for k in [k for k, ts in rt.ldm.seen_digests.items() if ts < cutoff]:
                        del rt.ldm.seen_digests[k]
                metrics.accepted_envelopes += 1
                if isinstance(msg, CpmMessage):
                    _ingest_cpm_message(rt.ldm, msg, env.cert_id, t, config.cps, entity.position, digest)
                    ref = msg.management.reference_position
                    for obj in msg.perceived_objects or ():
                        pos = geo.add(ref, obj.relative_position)
                        rt.foreign_reports.append((t, pos))
                        rt.observed_foreign_objects.append((msg.header.station_id, obj.object_id, pos))
                    while rt.foreign_reports and rt.foreign_reports[0][0] < t - max(config.redundancy.window_ms, 4000):
                        rt.foreign_reports.popleft()
                    while len(rt.observed_foreign_objects) > 256:
                        rt.observed_foreign_objects.popleft()
                elif isinstance(msg, CamMessage):
                    _ingest_cam_message(rt.ldm, msg, env.cert_id, t, config.cps, digest)
                elif isinstance(msg, DenmMessage):
                    rt.recent_denms.append((t, msg))
                    while rt.recent_denms and rt.recent_denms[0][0] < t - config.eebl.denm_ttl_ms:
                        rt.recent_denms.popleft()
                accepted_messages.append((env, msg))
                trace.record(
                    {"rec": "recv", "t": t, "station": sid, "digest": digest, "accepted": True, "reason": "ok"}
                )

            fuse_local_readings(rt.ldm, bundle.readings, entity.position, t, config.cps)
            expire_tracks(rt.ldm, t, config.cps.track_ttl_ms)

            # Detection over this tick's accepted traffic.
            readings_abs = [geo.add(entity.position, r.relative_position) for r in bundle.readings]
            connected_positions = [
                tr.predicted_position(t)
                for tr in rt.ldm.sorted_tracks()
                if tr.kind.value == "connected" and TrackSource.CAM in tr.source
            ]
            # Witnesses for the free-space check: only positions whose last
            # writer was the local sensor, never remote-merged data.
            ego_tracks = [
                (tr.predicted_position(t), tr.speed, tr.heading, tr.confidence)
                for tr in rt.ldm.sorted_tracks()
                if tr.last_local_update is not None
                and t - tr.last_local_update <= 500
                and tr.last_update == tr.last_local_update
            ]
            verdicts = []
            for env, msg in accepted_messages:
                if isinstance(msg, CamMessage):
                    verdicts.extend(rt.suite.observe_cam(msg, env, t))
                elif isinstance(msg, CpmMessage):
                    verdicts.extend(
                        rt.suite.observe_cpm(
                            msg, env, t, bundle.readings, entity.position, entity.heading,
                            rt.cfg.sensors, ego_tracks, connected_positions,
                        )
                    )
            verdicts.extend(rt.suite.tick(t, readings_abs))
            for v in verdicts:
                metrics.verdicts.append(
                    {"t": t, "station": sid, "detector": v.detector_id.name, "suspect": v.suspect_cert_id,
                     "severity": v.severity, "note": v.note.value}
                )
                trace.record(
                    {"rec": "verdict", "t": t, "station": sid, "detector": v.detector_id.name,
                     "suspect": v.suspect_cert_id, "severity": v.severity, "note": v.note.value, "detail": v.detail}
                )
            reports = rt.suite.reports_for(verdicts, t)
            for mbr in reports:
                metrics.mbr_counts[mbr.detector_id.name] = metrics.mbr_counts.get(mbr.detector_id.name, 0) + 1
                metrics.mbrs.append(
                    {"t": t, "reporter": sid, "detector": mbr.detector_id.name, "suspect": mbr.suspect_cert_id}
                )
                trace.record(
                    {"rec": "mbr", "t": t, "station": sid, "detector": mbr.detector_id.name,
                     "suspect": mbr.suspect_cert_id,
                     "evidence": [envelope_digest(e) for e in mbr.evidence],
                     "bytes": canonical_bytes(mbr).hex()}
                )
            if config.detectors.quarantine_on_mbr and reports:
                # Remove tracks owed entirely to now-distrusted senders.
                doomed = [
                    oid
                    for oid, tr in rt.ldm.tracks.items()
                    if tr.contributors
                    and tr.contributors <= rt.suite.distrusted
                    and TrackSource.LOCAL_SENSOR not in tr.source
                ]
                for oid in doomed:
                    del rt.ldm.tracks[oid]

            # Brake-light application state.
            if rt.cfg.sensors and rt.cfg.eebl_enabled and rt.station_type is StationType.VEHICLE:
                state = eebl_decide(
                    rt.ldm, bundle.readings, list(rt.recent_denms), t,
                    entity.position, entity.heading, rt.cfg.sensors, config.eebl,
                )
            else:
                state = EeblState.NORMAL
            if state is not rt.eebl_state:
                rt.eebl_state = state
                metrics.eebl_timelines[str(sid)].append({"t": t, "state": state.value})

            # Generation.
            offline = rt.cfg.offline_after_ms is not None and t >= rt.cfg.offline_after_ms
            messages: list[Message] = []
            phase = station_ids.index(sid)
            cpm_period = _period_ticks(rt.cfg.cpm_rate_hz, tick)
            cam_period = _period_ticks(rt.cfg.cam_rate_hz, tick)
            tick_index = t // tick
            if not offline and rt.cfg.sensors and (tick_index + phase) % cpm_period == 0:
                polys = free_space(sid, world, config.free_space_rays)
                biased_ref = geo.add(entity.position, bundle.position_bias)
                inputs = CpmGenerationInputs(
                    station_id=sid,
                    station_type=rt.station_type,
                    sensor_specs=rt.cfg.sensors,
                    now=t,
                    local_clock=local_clock,
                    self_position=entity.position,
                    reference_position=biased_ref,
                    self_speed=entity.speed,
                    self_heading=entity.heading,
                    free_space_polys=tuple((sid_, tuple(poly)) for sid_, poly in polys),
                    cbr_ratio=cbr_ratio,
                    redundancy=config.redundancy,
                    foreign_reports=tuple(rt.foreign_reports),
                    suppress_cam_covered=rt.cfg.suppress_cam_covered,
                )
                messages.append(generate_cpm(rt.ldm, inputs, config.cps))
            if not offline and (tick_index + phase) % cam_period == 0:
                messages.append(
                    CamMessage(
                        header=Header(1, MessageId.CAM, sid),
                        position=entity.position,
                        speed=entity.speed,
                        heading=geo.norm_heading(entity.heading),
                        timestamp=local_clock,
                    )
                )

            for attack in out_attacks:
                if attack.spec.attacker == sid and attack.spec.active(t):
                    victim_entity = None
                    if attack.spec.victim is not None and attack.spec.victim in stations:
                        victim_entity = world.station_entity(attack.spec.victim)
                    ctx = InjectorContext(
                        world=world,
                        attacker_entity=entity,
                        attacker_specs=rt.cfg.sensors,
                        local_clock=local_clock,
                        victim_entity=victim_entity,
                        observed_foreign_objects=list(rt.observed_foreign_objects),
                        trackable_limit=config.cps.trackable_limit,
                    )
                    messages = inject_message_out(
                        attack, messages, ctx, derive_rng(config.seed, "attack-out", attack.index, t)
                    )

            for message in messages:
                if rt.cfg.registered and rt.cert_id in registry:
                    envelope = sign(message, rt.cert_id, registry)
                else:
                    envelope = _bogus_envelope(message, sid)
                outgoing.append((sid, message, envelope))
                rt.sent_count += 1

            trace.record(
                {
                    "rec": "station",
                    "t": t,
                    "sid": sid,
                    "ldm": rt.ldm.snapshot_hash(),
                    "eebl": rt.eebl_state.value,
                    "sent": len(messages),
                    "recv": rt.recv_count,
                }
            )

        # Send this tick's traffic.
        for sid, message, envelope in outgoing:
            kind = type(message).__name__.replace("Message", "").lower()
            cbr_window.observe(t, envelope.wire_size)
            metrics.sent_envelopes += 1
            queue.append(QueuedEnvelope(t, sid, envelope, kind))
            trace.record(
                {
                    "rec": "send",
                    "t": t,
                    "station": sid,
                    "msg": kind,
                    "digest": envelope_digest(envelope),
                    "size": envelope.wire_size,
                    "payload": envelope.payload.hex(),
                    "cert": envelope.cert_id,
                    "tag": envelope.signature_tag.hex(),
                }
            )

    # Attack detection bookkeeping.
    for am in attack_metrics:
        attacker_cert = stations[am.attacker].cert_id if am.attacker in stations else None
        victim_cert = stations[am.victim].cert_id if am.victim is not None and am.victim in stations else None
        target_cert = attacker_cert if am.detection_target == "attacker_cert" else (
            victim_cert if am.detection_target == "victim_cert" else None
        )
        for m in metrics.mbrs:
            if m["suspect"] == attacker_cert:
                am.mbrs_naming_attacker += 1
            if victim_cert is not None and m["suspect"] == victim_cert:
                am.mbrs_naming_victim += 1
            if am.detected or target_cert is None or m["t"] < am.start_ms:
                continue
            if m["suspect"] == target_cert and (am.mapped_detector is None or m["detector"] == am.mapped_detector):
                am.detected = True
                am.time_to_detection_ms = m["t"] - am.start_ms

    metrics.mean_cbr = cbr_sum / max(ticks, 1)
    metrics.attacks = attack_metrics
    if metrics.clean_run:
        metrics.false_positive_mbrs = sum(metrics.mbr_counts.values())
    for sid in station_ids:
        timeline = metrics.eebl_timelines[str(sid)]
        metrics.eebl_summary[str(sid)] = {
            "entered_fail_safe": any(e["state"] == "fail_safe" for e in timeline),
            "first_fail_safe_ms": next((e["t"] for e in timeline if e["state"] == "fail_safe"), None),
            "entered_warn": any(e["state"] == "warn" for e in timeline),
        }
    metrics.trace_hash = trace.finish()
    return metrics, (trace.lines if collect_trace else [])
