"""Message and certificate types exchanged between stations.

All value-carrying fields are snapped to the wire resolution at construction
time (millimeters for distances, millidegrees for angles, per-mille for
confidence) so that encoding and decoding round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional

from ..geometry import Vec2, polygon_is_simple


class MessageError(ValueError):
    """A message field violates its declared invariant."""


class MessageId(IntEnum):
    DENM = 1
    CAM = 2
    CPM = 14
    MBR = 100


class StationType(IntEnum):
    VEHICLE = 0
    RSU = 1
    PEDESTRIAN = 2


class SensorType(IntEnum):
    CAMERA = 0
    RADAR = 1
    LIDAR = 2


class ObjectClass(IntEnum):
    PERSON_OR_ANIMAL = 0
    OTHER = 1


class DenmEventType(IntEnum):
    EMERGENCY_BRAKE = 0
    OTHER = 1


class DetectorId(IntEnum):
    D1 = 1
    D2 = 2
    D3 = 3
    D4 = 4
    D5 = 5
    D6 = 6
    D7 = 7
    D8 = 8
    D9 = 9


def snap_m(v: float) -> float:
    """Snap a length or speed to millimeter resolution."""
    return round(v * 1000.0) / 1000.0


def snap_deg(v: float) -> float:
    """Snap an angle to millidegree resolution."""
    return round(v * 1000.0) / 1000.0


def snap_vec(v: Vec2) -> Vec2:
    return (snap_m(v[0]), snap_m(v[1]))


def _require(cond: bool, what: str) -> None:
    if not cond:
        raise MessageError(what)


@dataclass(frozen=True)
class Header:
    protocol_version: int
    message_id: MessageId
    station_id: int

    def __post_init__(self):
        _require(0 <= self.protocol_version <= 255, "header.protocol_version out of range")
        _require(0 <= self.station_id <= 0xFFFFFFFF, "header.station_id out of range")


@dataclass(frozen=True)
class ManagementContainer:
    generation_time: int  # ms since scenario epoch
    reference_position: Vec2
    station_type: StationType

    def __post_init__(self):
        object.__setattr__(self, "reference_position", snap_vec(self.reference_position))


@dataclass(frozen=True)
class StationDataContainer:
    speed: float  # m/s
    heading: float  # degrees [0, 360)

    def __post_init__(self):
        object.__setattr__(self, "speed", snap_m(self.speed))
        object.__setattr__(self, "heading", snap_deg(self.heading))
        _require(self.speed >= 0.0, "station_data.speed must be >= 0")
        _require(0.0 <= self.heading < 360.0, "station_data.heading must be in [0, 360)")


@dataclass(frozen=True)
class SensorInformation:
    sensor_id: int
    sensor_type: SensorType
    range_m: float
    aperture_deg: float  # (0, 360]
    mount_offset: Vec2  # body frame (forward, left) relative to reference position

    def __post_init__(self):
        object.__setattr__(self, "range_m", snap_m(self.range_m))
        object.__setattr__(self, "aperture_deg", snap_deg(self.aperture_deg))
        object.__setattr__(self, "mount_offset", snap_vec(self.mount_offset))
        _require(0 <= self.sensor_id <= 255, "sensor.sensor_id out of range")
        _require(self.range_m > 0.0, "sensor.range_m must be > 0")
        _require(0.0 < self.aperture_deg <= 360.0, "sensor.aperture_deg must be in (0, 360]")


@dataclass(frozen=True)
class PerceivedObject:
    object_id: int
    relative_position: Vec2  # world-frame offset from the reporter's reference position
    speed: float
    heading: float
    dimensions: tuple[float, float]  # length, width
    classification: ObjectClass
    time_of_measurement: int  # ms
    confidence: float  # [0, 1]

    def __post_init__(self):
        object.__setattr__(self, "relative_position", snap_vec(self.relative_position))
        object.__setattr__(self, "speed", snap_m(self.speed))
        object.__setattr__(self, "heading", snap_deg(self.heading))
        object.__setattr__(self, "dimensions", (snap_m(self.dimensions[0]), snap_m(self.dimensions[1])))
        object.__setattr__(self, "confidence", round(self.confidence * 1000.0) / 1000.0)
        _require(0 <= self.object_id <= 0xFFFFFFFF, "object.object_id out of range")
        _require(self.speed >= 0.0, "object.speed must be >= 0")
        _require(0.0 <= self.heading < 360.0, "object.heading must be in [0, 360)")
        _require(self.dimensions[0] >= 0.0 and self.dimensions[1] >= 0.0, "object.dimensions must be >= 0")
        _require(0.0 <= self.confidence <= 1.0, "object.confidence must be in [0, 1]")


@dataclass(frozen=True)
class FreeSpaceAddendum:
    free_space_id: int
    polygon: tuple[Vec2, ...]  # >= 3 reporter-relative points, simple
    sensor_ids: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "polygon", tuple(snap_vec(p) for p in self.polygon))
        if self.sensor_ids is not None:
            object.__setattr__(self, "sensor_ids", tuple(self.sensor_ids))
        _require(0 <= self.free_space_id <= 255, "free_space.free_space_id out of range")
        _require(len(self.polygon) >= 3, "free_space.polygon needs at least 3 points")
        _require(polygon_is_simple(self.polygon), "free_space.polygon must be simple")


@dataclass(frozen=True)
class CpmMessage:
    header: Header
    management: ManagementContainer
    station_data: Optional[StationDataContainer] = None
    sensor_info: Optional[tuple[SensorInformation, ...]] = None
    perceived_objects: Optional[tuple[PerceivedObject, ...]] = None
    free_space: Optional[tuple[FreeSpaceAddendum, ...]] = None

    def __post_init__(self):
        _require(self.header.message_id == MessageId.CPM, "cpm.header.message_id must be CPM")
        if self.sensor_info is not None:
            object.__setattr__(self, "sensor_info", tuple(self.sensor_info))
            ids = [s.sensor_id for s in self.sensor_info]
            _require(len(ids) == len(set(ids)), "cpm.sensor_info ids must be unique")
        if self.perceived_objects is not None:
            object.__setattr__(self, "perceived_objects", tuple(self.perceived_objects))
        if self.free_space is not None:
            object.__setattr__(self, "free_space", tuple(self.free_space))
            known = {s.sensor_id for s in self.sensor_info} if self.sensor_info else set()
            for fs in self.free_space:
                if fs.sensor_ids is not None:
                    _require(
                        set(fs.sensor_ids) <= known,
                        "cpm.free_space sensor_ids must reference sensor_info entries",
                    )


@dataclass(frozen=True)
class CamMessage:
    header: Header
    position: Vec2
    speed: float
    heading: float
    timestamp: int

    def __post_init__(self):
        _require(self.header.message_id == MessageId.CAM, "cam.header.message_id must be CAM")
        object.__setattr__(self, "position", snap_vec(self.position))
        object.__setattr__(self, "speed", snap_m(self.speed))
        object.__setattr__(self, "heading", snap_deg(self.heading))
        _require(self.speed >= 0.0, "cam.speed must be >= 0")
        _require(0.0 <= self.heading < 360.0, "cam.heading must be in [0, 360)")


@dataclass(frozen=True)
class DenmMessage:
    header: Header
    event_type: DenmEventType
    event_position: Vec2
    timestamp: int

    def __post_init__(self):
        _require(self.header.message_id == MessageId.DENM, "denm.header.message_id must be DENM")
        object.__setattr__(self, "event_position", snap_vec(self.event_position))


@dataclass(frozen=True)
class Certificate:
    cert_id: int
    holder_station: int
    valid_from: int
    valid_to: int
    attested_capabilities: Optional[tuple[tuple[SensorType, float], ...]] = None

    def __post_init__(self):
        _require(0 <= self.cert_id <= 0xFFFFFFFFFFFFFFFF, "certificate.cert_id out of range")
        _require(self.valid_from <= self.valid_to, "certificate validity window inverted")
        if self.attested_capabilities is not None:
            caps = tuple((SensorType(t), snap_m(r)) for t, r in self.attested_capabilities)
            object.__setattr__(self, "attested_capabilities", caps)
            for _, max_range in caps:
                _require(max_range > 0.0, "certificate attested max_range must be > 0")

    def attested_range(self, sensor_type: SensorType) -> Optional[float]:
        if self.attested_capabilities is None:
            return None
        ranges = [r for t, r in self.attested_capabilities if t == sensor_type]
        return max(ranges) if ranges else None


@dataclass(frozen=True)
class SignedEnvelope:
    payload: bytes
    cert_id: int
    signature_tag: bytes

    def __post_init__(self):
        _require(0 <= self.cert_id <= 0xFFFFFFFFFFFFFFFF, "envelope.cert_id out of range")
        _require(len(self.signature_tag) == 32, "envelope.signature_tag must be 32 bytes")

    @property
    def wire_size(self) -> int:
        # payload + length framing + cert id + tag
        return len(self.payload) + 4 + 8 + 32


@dataclass(frozen=True)
class MisbehaviorReport:
    reporter: int
    suspect_cert_id: int
    detector_id: DetectorId
    evidence: tuple[SignedEnvelope, ...]
    created_at: int
    synchronized_pair: Optional[tuple[CamMessage, CpmMessage]] = None

    def __post_init__(self):
        object.__setattr__(self, "evidence", tuple(self.evidence))
        _require(len(self.evidence) > 0, "mbr.evidence must be non-empty")
        _require(0 <= self.reporter <= 0xFFFFFFFF, "mbr.reporter out of range")
        if self.detector_id == DetectorId.D8:
            _require(self.synchronized_pair is not None, "mbr for D8 requires synchronized_pair")


Message = CpmMessage | CamMessage | DenmMessage | MisbehaviorReport


def message_timestamp(message: Message) -> int:
    """The timestamp a certificate validity check applies to."""
    if isinstance(message, CpmMessage):
        return message.management.generation_time
    if isinstance(message, (CamMessage, DenmMessage)):
        return message.timestamp
    return message.created_at


def cpm_header(station_id: int, protocol_version: int = 1) -> Header:
    return Header(protocol_version, MessageId.CPM, station_id)


def cam_header(station_id: int, protocol_version: int = 1) -> Header:
    return Header(protocol_version, MessageId.CAM, station_id)


def denm_header(station_id: int, protocol_version: int = 1) -> Header:
    return Header(protocol_version, MessageId.DENM, station_id)
