"""Scenario configuration: a versioned, strictly validated YAML schema.

Unknown keys are rejected with the offending path so typos never silently
change a run. See docs/scenarios.md for the schema.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from ..attacks import (
    CATALOG,
    Activity,
    AttackerProfile,
    AttackId,
    AttackSpec,
    InjectionPoint,
    Membership,
    Motivation,
    Path,
    Scope,
    validate_spec,
)
from ..cps import CamTriggerThresholds, CpsParams, EeblParams, RedundancyParams
from ..detectors import DetectorConfig, DetectorParams
from ..hashing import json_digest
from ..messages.types import DetectorId, ObjectClass, SensorType, StationType
from ..world import Entity, EntityKind, NoiseModel, SensorSpec, Waypoint

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Scenario file violates the schema."""


def _expect_mapping(obj: Any, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(obj).__name__}")
    return obj


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")


def _get(obj: dict, key: str, kind, path: str, default=None, required: bool = False):
    if key not in obj:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{path}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def _vec(obj: Any, path: str) -> tuple[float, float]:
    if not isinstance(obj, (list, tuple)) or len(obj) != 2:
        raise ConfigError(f"{path}: expected [x, y]")
    return (float(obj[0]), float(obj[1]))


@dataclass(frozen=True)
class ChannelConfig:
    loss_rate: float = 0.0
    latency_ticks: int = 1
    capacity_bytes_per_window: int = 125_000
    window_ms: int = 1000


@dataclass(frozen=True)
class StationConfig:
    station_id: int
    registered: bool = True
    cpm_rate_hz: float = 1.0
    cam_rate_hz: float = 10.0
    sensors: tuple[SensorSpec, ...] = ()
    suppress_cam_covered: bool = False
    offline_after_ms: Optional[int] = None
    eebl_enabled: bool = True


@dataclass(frozen=True)
class EntityConfig:
    entity: Entity
    station: Optional[StationConfig]


@dataclass(frozen=True)
class DetectorSettings:
    enabled: frozenset[DetectorId]
    params: DetectorParams
    quarantine_on_mbr: bool = True

    def as_config(self) -> DetectorConfig:
        return DetectorConfig(self.enabled, self.params, self.quarantine_on_mbr)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    duration_ms: int
    tick_ms: int
    seed: int
    entities: tuple[EntityConfig, ...]
    channel: ChannelConfig
    cps: CpsParams
    noise: NoiseModel
    detectors: DetectorSettings
    redundancy: RedundancyParams
    eebl: EeblParams
    attacks: tuple[AttackSpec, ...]
    attestation: bool = False
    free_space_rays: int = 32
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def config_hash(self) -> str:
        return json_digest(self.raw)

    def stations(self) -> list[StationConfig]:
        return [ec.station for ec in self.entities if ec.station is not None]

    def without_attacks(self) -> "ScenarioConfig":
        raw = dict(self.raw)
        raw.pop("attacks", None)
        return dataclasses.replace(self, attacks=(), raw=raw)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        raw = dict(self.raw)
        raw["seed"] = seed
        return dataclasses.replace(self, seed=seed, raw=raw)

    def with_redundancy(self, redundancy: RedundancyParams) -> "ScenarioConfig":
        raw = dict(self.raw)
        raw["redundancy"] = {
            "enabled": redundancy.enabled,
            "method": redundancy.method,
            "cbr_threshold": redundancy.cbr_threshold,
            "window_ms": redundancy.window_ms,
            "gate_m": redundancy.gate_m,
        }
        return dataclasses.replace(self, redundancy=redundancy, raw=raw)


_ENTITY_KEYS = {"id", "kind", "position", "heading", "speed", "footprint", "classified_as", "waypoints", "station"}
_STATION_KEYS = {
    "station_id",
    "registered",
    "cpm_rate_hz",
    "cam_rate_hz",
    "sensors",
    "suppress_cam_covered",
    "offline_after_ms",
    "eebl_enabled",
}
_SENSOR_KEYS = {"sensor_id", "type", "range_m", "aperture_deg", "mount"}
_ATTACK_KEYS = {"attack_id", "attacker", "victim", "start_ms", "stop_ms", "profile", "params"}
_PROFILE_KEYS = {"membership", "motivation", "activity", "scope", "path"}
_TOP_KEYS = {
    "version",
    "name",
    "duration_ms",
    "tick_ms",
    "seed",
    "channel",
    "attestation",
    "free_space_rays",
    "cps",
    "noise",
    "detectors",
    "redundancy",
    "eebl",
    "entities",
    "attacks",
}
_CHANNEL_KEYS = {"loss_rate", "latency_ticks", "capacity_bytes_per_window", "window_ms"}
_CPS_KEYS = {
    "position_trigger_m",
    "speed_trigger_mps",
    "heading_trigger_deg",
    "max_interval_ms",
    "person_interval_ms",
    "association_gate_m",
    "track_ttl_ms",
    "listen_window_ms",
    "trackable_limit",
    "generation_latency_ms",
}
_NOISE_KEYS = {"sigma_pos_m", "sigma_speed_mps"}
_DETECTOR_KEYS = {
    "enabled",
    "quarantine_on_mbr",
    "max_speed_mps",
    "gate_m",
    "trackable_limit",
    "max_cpm_rate_hz",
    "reporting_threshold",
    "d4_window_ms",
    "d2_margin_m",
    "d4_area_margin_m",
    "d5_margin_m",
    "d5_high_confidence",
    "d8_assoc_window_m",
    "d6_rate_window_ms",
    "d6_min_observation_ms",
    "d6_silence_ms",
    "occluder_inflation_m",
    "mbr_aggregation_window_ms",
}
_REDUNDANCY_KEYS = {"enabled", "method", "cbr_threshold", "window_ms", "gate_m"}
_EEBL_KEYS = {
    "corridor_length_m",
    "corridor_width_m",
    "min_ahead_m",
    "stationary_speed_mps",
    "corroborate_gate_m",
    "denm_ttl_ms",
    "area_margin_m",
}

_KIND_MAP = {k.value: k for k in EntityKind}
_SENSOR_TYPE_MAP = {"camera": SensorType.CAMERA, "radar": SensorType.RADAR, "lidar": SensorType.LIDAR}
_CLASS_MAP = {"person_or_animal": ObjectClass.PERSON_OR_ANIMAL, "other": ObjectClass.OTHER}


def _parse_sensor(obj: Any, path: str) -> SensorSpec:
    obj = _expect_mapping(obj, path)
    _check_keys(obj, _SENSOR_KEYS, path)
    type_name = _get(obj, "type", str, path, required=True)
    if type_name not in _SENSOR_TYPE_MAP:
        raise ConfigError(f"{path}.type: unknown sensor type {type_name!r}")
    mount = _vec(obj.get("mount", [0.0, 0.0]), f"{path}.mount")
    try:
        return SensorSpec(
            sensor_id=_get(obj, "sensor_id", int, path, required=True),
            sensor_type=_SENSOR_TYPE_MAP[type_name],
            range_m=_get(obj, "range_m", float, path, required=True),
            aperture_deg=_get(obj, "aperture_deg", float, path, required=True),
            mount_offset=mount,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_station(obj: Any, path: str, kind: EntityKind) -> StationConfig:
    obj = _expect_mapping(obj, path)
    _check_keys(obj, _STATION_KEYS, path)
    sensors = tuple(_parse_sensor(s, f"{path}.sensors[{i}]") for i, s in enumerate(obj.get("sensors", [])))
    ids = [s.sensor_id for s in sensors]
    if len(ids) != len(set(ids)):
        raise ConfigError(f"{path}.sensors: sensor ids must be unique")
    return StationConfig(
        station_id=_get(obj, "station_id", int, path, required=True),
        registered=_get(obj, "registered", bool, path, default=True),
        cpm_rate_hz=_get(obj, "cpm_rate_hz", float, path, default=1.0),
        cam_rate_hz=_get(obj, "cam_rate_hz", float, path, default=10.0),
        sensors=sensors,
        suppress_cam_covered=_get(obj, "suppress_cam_covered", bool, path, default=(kind is EntityKind.RSU)),
        offline_after_ms=_get(obj, "offline_after_ms", int, path),
        eebl_enabled=_get(obj, "eebl_enabled", bool, path, default=True),
    )


def _parse_entity(obj: Any, path: str) -> EntityConfig:
    obj = _expect_mapping(obj, path)
    _check_keys(obj, _ENTITY_KEYS, path)
    kind_name = _get(obj, "kind", str, path, required=True)
    if kind_name not in _KIND_MAP:
        raise ConfigError(f"{path}.kind: unknown kind {kind_name!r}")
    kind = _KIND_MAP[kind_name]
    entity_id = _get(obj, "id", int, path, required=True)
    if entity_id >= 9000:
        raise ConfigError(f"{path}.id: ids >= 9000 are reserved for injected decoys")
    station = None
    if "station" in obj:
        station = _parse_station(obj["station"], f"{path}.station", kind)
    if kind in (EntityKind.CONNECTED_VEHICLE, EntityKind.RSU) and station is None:
        raise ConfigError(f"{path}: {kind_name} needs a station block")
    if kind not in (EntityKind.CONNECTED_VEHICLE, EntityKind.RSU) and station is not None:
        raise ConfigError(f"{path}: {kind_name} must not carry a station block")
    classified_as = None
    if "classified_as" in obj:
        name = _get(obj, "classified_as", str, path)
        if name not in _CLASS_MAP:
            raise ConfigError(f"{path}.classified_as: unknown class {name!r}")
        classified_as = _CLASS_MAP[name]
    waypoints = []
    for i, w in enumerate(obj.get("waypoints", [])):
        w = _expect_mapping(w, f"{path}.waypoints[{i}]")
        _check_keys(w, {"position", "speed"}, f"{path}.waypoints[{i}]")
        waypoints.append(
            Waypoint(
                _vec(w.get("position"), f"{path}.waypoints[{i}].position"),
                float(w["speed"]) if "speed" in w else None,
            )
        )
    footprint = obj.get("footprint")
    if footprint is None:
        footprint = (0.0, 0.0) if kind is EntityKind.RSU else (4.5, 1.8)
        if kind in (EntityKind.PEDESTRIAN, EntityKind.ANIMAL):
            footprint = (0.5, 0.5)
    else:
        footprint = _vec(footprint, f"{path}.footprint")
    try:
        entity = Entity(
            entity_id=entity_id,
            kind=kind,
            position=_vec(_get(obj, "position", None, path, required=True), f"{path}.position"),
            heading=float(_get(obj, "heading", (int, float), path, default=0.0)),
            speed=float(_get(obj, "speed", (int, float), path, default=0.0)),
            footprint=footprint,
            station_id=station.station_id if station else None,
            waypoints=tuple(waypoints),
            classified_as=classified_as,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return EntityConfig(entity, station)


def _parse_profile(obj: Any, path: str) -> AttackerProfile:
    obj = _expect_mapping(obj, path)
    _check_keys(obj, _PROFILE_KEYS, path)

    def pick(enum_cls, key, default):
        if key not in obj:
            return default
        raw = obj[key]
        try:
            return enum_cls(raw)
        except ValueError:
            raise ConfigError(f"{path}.{key}: unknown value {raw!r}") from None

    return AttackerProfile(
        membership=pick(Membership, "membership", Membership.INTERNAL),
        motivation=pick(Motivation, "motivation", Motivation.MALICIOUS),
        activity=pick(Activity, "activity", Activity.ACTIVE),
        scope=pick(Scope, "scope", Scope.LOCAL),
        path=pick(Path, "path", Path.DIRECT),
    )


def _parse_attack(obj: Any, path: str, duration_ms: int) -> AttackSpec:
    obj = _expect_mapping(obj, path)
    _check_keys(obj, _ATTACK_KEYS, path)
    raw_id = _get(obj, "attack_id", str, path, required=True)
    try:
        attack_id = AttackId(raw_id)
    except ValueError:
        raise ConfigError(f"{path}.attack_id: unknown attack id {raw_id!r}") from None
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{path}.params: expected a mapping")
    profile = _parse_profile(obj["profile"], f"{path}.profile") if "profile" in obj else AttackerProfile()
    spec = AttackSpec(
        attack_id=attack_id,
        attacker=_get(obj, "attacker", int, path, required=True),
        victim=_get(obj, "victim", int, path),
        parameters=dict(params),
        start_ms=_get(obj, "start_ms", int, path, default=0),
        stop_ms=_get(obj, "stop_ms", int, path, default=duration_ms),
        profile=profile,
    )
    problems = validate_spec(spec)
    if problems:
        raise ConfigError(f"{path}: " + "; ".join(problems))
    return spec


def _parse_detectors(obj: Any, path: str) -> DetectorSettings:
    obj = _expect_mapping(obj, path)
    _check_keys(obj, _DETECTOR_KEYS, path)
    enabled_raw = obj.get("enabled", "all")
    if enabled_raw == "all":
        enabled = frozenset(DetectorId)
    elif enabled_raw == "none":
        enabled = frozenset()
    elif isinstance(enabled_raw, list):
        ids = []
        for name in enabled_raw:
            try:
                ids.append(DetectorId[str(name)])
            except KeyError:
                raise ConfigError(f"{path}.enabled: unknown detector {name!r}") from None
        enabled = frozenset(ids)
    else:
        raise ConfigError(f"{path}.enabled: expected 'all', 'none', or a list")
    defaults = DetectorParams()
    overrides = {}
    for key in _DETECTOR_KEYS - {"enabled", "quarantine_on_mbr"}:
        if key in obj:
            current = getattr(defaults, key)
            value = obj[key]
            if isinstance(current, float):
                value = float(value)
            overrides[key] = value
    params = dataclasses.replace(defaults, **overrides)
    return DetectorSettings(enabled, params, _get(obj, "quarantine_on_mbr", bool, path, default=True))


def parse_scenario(data: Any, source: str = "scenario") -> ScenarioConfig:
    data = _expect_mapping(data, source)
    _check_keys(data, _TOP_KEYS, source)
    version = _get(data, "version", int, source, required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{source}.version: expected {SCHEMA_VERSION}, got {version}")
    duration_ms = _get(data, "duration_ms", int, source, required=True)
    tick_ms = _get(data, "tick_ms", int, source, default=100)
    if tick_ms <= 0 or duration_ms <= 0:
        raise ConfigError(f"{source}: duration_ms and tick_ms must be positive")

    channel_obj = _expect_mapping(data.get("channel", {}), f"{source}.channel")
    _check_keys(channel_obj, _CHANNEL_KEYS, f"{source}.channel")
    channel = ChannelConfig(
        loss_rate=_get(channel_obj, "loss_rate", float, f"{source}.channel", default=0.0),
        latency_ticks=_get(channel_obj, "latency_ticks", int, f"{source}.channel", default=1),
        capacity_bytes_per_window=_get(
            channel_obj, "capacity_bytes_per_window", int, f"{source}.channel", default=125_000
        ),
        window_ms=_get(channel_obj, "window_ms", int, f"{source}.channel", default=1000),
    )
    if not 0.0 <= channel.loss_rate <= 1.0:
        raise ConfigError(f"{source}.channel.loss_rate: must be in [0, 1]")

    cps_obj = _expect_mapping(data.get("cps", {}), f"{source}.cps")
    _check_keys(cps_obj, _CPS_KEYS, f"{source}.cps")
    triggers = CamTriggerThresholds(
        position_m=_get(cps_obj, "position_trigger_m", float, f"{source}.cps", default=4.0),
        speed_mps=_get(cps_obj, "speed_trigger_mps", float, f"{source}.cps", default=0.5),
        heading_deg=_get(cps_obj, "heading_trigger_deg", float, f"{source}.cps", default=4.0),
        max_interval_ms=_get(cps_obj, "max_interval_ms", int, f"{source}.cps", default=1000),
    )
    try:
        cps_params = CpsParams(
            triggers=triggers,
            person_interval_ms=_get(cps_obj, "person_interval_ms", int, f"{source}.cps", default=500),
            association_gate_m=_get(cps_obj, "association_gate_m", float, f"{source}.cps", default=3.0),
            track_ttl_ms=_get(cps_obj, "track_ttl_ms", int, f"{source}.cps", default=1500),
            listen_window_ms=_get(cps_obj, "listen_window_ms", int, f"{source}.cps", default=1000),
            trackable_limit=_get(cps_obj, "trackable_limit", int, f"{source}.cps", default=255),
            generation_latency_ms=_get(cps_obj, "generation_latency_ms", int, f"{source}.cps", default=0),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}.cps: {exc}") from None

    noise_obj = _expect_mapping(data.get("noise", {}), f"{source}.noise")
    _check_keys(noise_obj, _NOISE_KEYS, f"{source}.noise")
    noise = NoiseModel(
        sigma_pos_m=_get(noise_obj, "sigma_pos_m", float, f"{source}.noise", default=0.2),
        sigma_speed_mps=_get(noise_obj, "sigma_speed_mps", float, f"{source}.noise", default=0.1),
    )

    detectors = _parse_detectors(data.get("detectors", {}), f"{source}.detectors")

    red_obj = _expect_mapping(data.get("redundancy", {}), f"{source}.redundancy")
    _check_keys(red_obj, _REDUNDANCY_KEYS, f"{source}.redundancy")
    try:
        redundancy = RedundancyParams(
            enabled=_get(red_obj, "enabled", bool, f"{source}.redundancy", default=False),
            method=_get(red_obj, "method", str, f"{source}.redundancy", default="frequency"),
            cbr_threshold=_get(red_obj, "cbr_threshold", float, f"{source}.redundancy", default=0.6),
            window_ms=_get(red_obj, "window_ms", int, f"{source}.redundancy", default=500),
            gate_m=_get(red_obj, "gate_m", float, f"{source}.redundancy", default=3.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}.redundancy: {exc}") from None

    eebl_obj = _expect_mapping(data.get("eebl", {}), f"{source}.eebl")
    _check_keys(eebl_obj, _EEBL_KEYS, f"{source}.eebl")
    eebl = EeblParams(
        corridor_length_m=_get(eebl_obj, "corridor_length_m", float, f"{source}.eebl", default=60.0),
        corridor_width_m=_get(eebl_obj, "corridor_width_m", float, f"{source}.eebl", default=3.5),
        min_ahead_m=_get(eebl_obj, "min_ahead_m", float, f"{source}.eebl", default=2.0),
        stationary_speed_mps=_get(eebl_obj, "stationary_speed_mps", float, f"{source}.eebl", default=1.0),
        corroborate_gate_m=_get(eebl_obj, "corroborate_gate_m", float, f"{source}.eebl", default=5.0),
        denm_ttl_ms=_get(eebl_obj, "denm_ttl_ms", int, f"{source}.eebl", default=1500),
        area_margin_m=_get(eebl_obj, "area_margin_m", float, f"{source}.eebl", default=1.0),
    )

    entities_raw = data.get("entities")
    if not isinstance(entities_raw, list) or not entities_raw:
        raise ConfigError(f"{source}.entities: expected a non-empty list")
    entities = tuple(_parse_entity(e, f"{source}.entities[{i}]") for i, e in enumerate(entities_raw))
    entity_ids = [ec.entity.entity_id for ec in entities]
    if len(entity_ids) != len(set(entity_ids)):
        raise ConfigError(f"{source}.entities: entity ids must be unique")
    station_ids = [ec.station.station_id for ec in entities if ec.station]
    if len(station_ids) != len(set(station_ids)):
        raise ConfigError(f"{source}.entities: station ids must be unique")

    attacks_raw = data.get("attacks", [])
    if not isinstance(attacks_raw, list):
        raise ConfigError(f"{source}.attacks: expected a list")
    attacks = tuple(_parse_attack(a, f"{source}.attacks[{i}]", duration_ms) for i, a in enumerate(attacks_raw))
    known_stations = set(station_ids)
    for i, spec in enumerate(attacks):
        info = CATALOG[spec.attack_id]
        needs_station = info.injection_point is InjectionPoint.MESSAGE_OUT and spec.attack_id is not AttackId.T3_C
        if needs_station and spec.attacker not in known_stations:
            raise ConfigError(
                f"{source}.attacks[{i}]: attacker station {spec.attacker} does not exist "
                f"({spec.attack_id.value} injects signed traffic)"
            )
        if spec.victim is not None and spec.victim not in known_stations:
            raise ConfigError(f"{source}.attacks[{i}]: victim station {spec.victim} does not exist")

    return ScenarioConfig(
        name=_get(data, "name", str, source, default="scenario"),
        duration_ms=duration_ms,
        tick_ms=tick_ms,
        seed=_get(data, "seed", int, source, default=0),
        entities=entities,
        channel=channel,
        cps=cps_params,
        noise=noise,
        detectors=detectors,
        redundancy=redundancy,
        eebl=eebl,
        attacks=attacks,
        attestation=_get(data, "attestation", bool, source, default=False),
        free_space_rays=_get(data, "free_space_rays", int, source, default=32),
        raw=data,
    )


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return parse_scenario(data, source=str(path))
