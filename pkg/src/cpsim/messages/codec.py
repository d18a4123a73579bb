"""Canonical binary codec for CAM, CPM, DENM, and misbehavior reports.

The format is fixed-width little-endian with presence flags ahead of each
optional container and length prefixes ahead of lists. Distances and speeds
travel as millimeter-scaled signed/unsigned integers, angles as
millidegrees, confidence as per-mille. See docs/wire-format.md for the full
layout and tests/golden for frozen reference encodings.
"""

from __future__ import annotations

import struct
from typing import Optional, Union

from .types import (
    CamMessage,
    Certificate,
    CpmMessage,
    DenmEventType,
    DenmMessage,
    DetectorId,
    FreeSpaceAddendum,
    Header,
    ManagementContainer,
    Message,
    MessageError,
    MessageId,
    MisbehaviorReport,
    ObjectClass,
    PerceivedObject,
    SensorInformation,
    SensorType,
    SignedEnvelope,
    StationDataContainer,
    StationType,
)


class CodecError(Exception):
    """Base class for encode/decode failures."""


class EncodeError(CodecError):
    """A field cannot be represented in the wire format."""

    def __init__(self, field: str, detail: str):
        super().__init__(f"{field}: {detail}")
        self.field = field


class DecodeError(CodecError):
    """Base class for decode failures."""


class TruncatedError(DecodeError):
    """Input ended in the middle of a container."""


class UnknownMessageIdError(DecodeError):
    """Leading message id byte is not a known message type."""


class InvariantViolationError(DecodeError):
    """Decoded field values violate a message invariant."""


_I64 = struct.Struct("<q")
_U64 = struct.Struct("<Q")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")
_U8 = struct.Struct("<B")

_MM_MAX = 2**63 - 1


def _mm(value_m: float, fieldname: str) -> int:
    q = round(value_m * 1000.0)
    if not -_MM_MAX <= q <= _MM_MAX:
        raise EncodeError(fieldname, "value out of representable range")
    return q


def _u32q(value: float, fieldname: str) -> int:
    q = round(value * 1000.0)
    if not 0 <= q <= 0xFFFFFFFF:
        raise EncodeError(fieldname, "value out of representable range")
    return q


def _u16(value: int, fieldname: str) -> bytes:
    if not 0 <= value <= 0xFFFF:
        raise EncodeError(fieldname, "value out of representable range")
    return _U16.pack(value)


def _u32(value: int, fieldname: str) -> bytes:
    if not 0 <= value <= 0xFFFFFFFF:
        raise EncodeError(fieldname, "value out of representable range")
    return _U32.pack(value)


def _u64(value: int, fieldname: str) -> bytes:
    if not 0 <= value <= 0xFFFFFFFFFFFFFFFF:
        raise EncodeError(fieldname, "value out of representable range")
    return _U64.pack(value)


def _i64(value: int, fieldname: str) -> bytes:
    if not -(2**63) <= value <= 2**63 - 1:
        raise EncodeError(fieldname, "value out of representable range")
    return _I64.pack(value)


def _u8(value: int, fieldname: str) -> bytes:
    if not 0 <= value <= 0xFF:
        raise EncodeError(fieldname, "value out of representable range")
    return _U8.pack(value)


def _vec(v: tuple[float, float], fieldname: str) -> bytes:
    return _I64.pack(_mm(v[0], fieldname)) + _I64.pack(_mm(v[1], fieldname))


def _header_bytes(h: Header) -> bytes:
    return _u8(int(h.message_id), "header.message_id") + _u8(h.protocol_version, "header.protocol_version") + _u32(
        h.station_id, "header.station_id"
    )


def _management_bytes(m: ManagementContainer) -> bytes:
    return (
        _i64(m.generation_time, "management.generation_time")
        + _vec(m.reference_position, "management.reference_position")
        + _u8(int(m.station_type), "management.station_type")
    )


def _sensor_bytes(s: SensorInformation) -> bytes:
    return (
        _u8(s.sensor_id, "sensor.sensor_id")
        + _u8(int(s.sensor_type), "sensor.sensor_type")
        + _U32.pack(_u32q(s.range_m, "sensor.range_m"))
        + _U32.pack(_u32q(s.aperture_deg, "sensor.aperture_deg"))
        + _vec(s.mount_offset, "sensor.mount_offset")
    )


def _object_bytes(o: PerceivedObject) -> bytes:
    return (
        _u32(o.object_id, "object.object_id")
        + _vec(o.relative_position, "object.relative_position")
        + _U32.pack(_u32q(o.speed, "object.speed"))
        + _U32.pack(_u32q(o.heading, "object.heading"))
        + _U32.pack(_u32q(o.dimensions[0], "object.dimensions"))
        + _U32.pack(_u32q(o.dimensions[1], "object.dimensions"))
        + _u8(int(o.classification), "object.classification")
        + _i64(o.time_of_measurement, "object.time_of_measurement")
        + _u16(round(o.confidence * 1000.0), "object.confidence")
    )


def _free_space_bytes(f: FreeSpaceAddendum) -> bytes:
    out = [_u8(f.free_space_id, "free_space.free_space_id"), _u16(len(f.polygon), "free_space.polygon")]
    for p in f.polygon:
        out.append(_vec(p, "free_space.polygon"))
    if f.sensor_ids is None:
        out.append(b"\x00")
    else:
        out.append(b"\x01")
        out.append(_u16(len(f.sensor_ids), "free_space.sensor_ids"))
        for sid in f.sensor_ids:
            out.append(_u8(sid, "free_space.sensor_ids"))
    return b"".join(out)


def _envelope_bytes(e: SignedEnvelope) -> bytes:
    return (
        _u32(len(e.payload), "envelope.payload")
        + e.payload
        + _u64(e.cert_id, "envelope.cert_id")
        + _u8(len(e.signature_tag), "envelope.signature_tag")
        + e.signature_tag
    )


def canonical_bytes(message: Message) -> bytes:
    """Deterministic byte encoding; equal messages yield identical bytes."""
    if isinstance(message, CpmMessage):
        out = [_header_bytes(message.header), _management_bytes(message.management)]
        if message.station_data is None:
            out.append(b"\x00")
        else:
            sd = message.station_data
            out.append(
                b"\x01"
                + _U32.pack(_u32q(sd.speed, "station_data.speed"))
                + _U32.pack(_u32q(sd.heading, "station_data.heading"))
            )
        if message.sensor_info is None:
            out.append(b"\x00")
        else:
            out.append(b"\x01" + _u16(len(message.sensor_info), "sensor_info"))
            out.extend(_sensor_bytes(s) for s in message.sensor_info)
        if message.perceived_objects is None:
            out.append(b"\x00")
        else:
            out.append(b"\x01" + _u16(len(message.perceived_objects), "perceived_objects"))
            out.extend(_object_bytes(o) for o in message.perceived_objects)
        if message.free_space is None:
            out.append(b"\x00")
        else:
            out.append(b"\x01" + _u16(len(message.free_space), "free_space"))
            out.extend(_free_space_bytes(f) for f in message.free_space)
        return b"".join(out)
    if isinstance(message, CamMessage):
        return (
            _header_bytes(message.header)
            + _vec(message.position, "cam.position")
            + _U32.pack(_u32q(message.speed, "cam.speed"))
            + _U32.pack(_u32q(message.heading, "cam.heading"))
            + _i64(message.timestamp, "cam.timestamp")
        )
    if isinstance(message, DenmMessage):
        return (
            _header_bytes(message.header)
            + _u8(int(message.event_type), "denm.event_type")
            + _vec(message.event_position, "denm.event_position")
            + _i64(message.timestamp, "denm.timestamp")
        )
    if isinstance(message, MisbehaviorReport):
        out = [
            _u8(int(MessageId.MBR), "mbr.message_id"),
            _u32(message.reporter, "mbr.reporter"),
            _u64(message.suspect_cert_id, "mbr.suspect_cert_id"),
            _u8(int(message.detector_id), "mbr.detector_id"),
            _u16(len(message.evidence), "mbr.evidence"),
        ]
        out.extend(_envelope_bytes(e) for e in message.evidence)
        if message.synchronized_pair is None:
            out.append(b"\x00")
        else:
            cam, cpm = message.synchronized_pair
            cam_b = canonical_bytes(cam)
            cpm_b = canonical_bytes(cpm)
            out.append(b"\x01")
            out.append(_u32(len(cam_b), "mbr.synchronized_pair") + cam_b)
            out.append(_u32(len(cpm_b), "mbr.synchronized_pair") + cpm_b)
        out.append(_i64(message.created_at, "mbr.created_at"))
        return b"".join(out)
    raise EncodeError("message", f"unsupported message type {type(message).__name__}")


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(f"needed {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return _U16.unpack(self.take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def i64(self) -> int:
        return _I64.unpack(self.take(8))[0]

    def mm_vec(self) -> tuple[float, float]:
        x = self.i64() / 1000.0
        y = self.i64() / 1000.0
        return (x, y)

    def q32(self) -> float:
        return self.u32() / 1000.0

    def flag(self) -> bool:
        b = self.u8()
        if b not in (0, 1):
            raise InvariantViolationError(f"presence flag must be 0 or 1, got {b}")
        return b == 1

    def done(self) -> bool:
        return self.pos == len(self.data)


def _decode_enum(enum_cls, raw: int, what: str):
    try:
        return enum_cls(raw)
    except ValueError:
        raise InvariantViolationError(f"{what}: unknown value {raw}") from None


def _decode_header(r: _Reader, expect: MessageId) -> Header:
    mid = r.u8()
    if mid != int(expect):
        raise InvariantViolationError(f"header.message_id: expected {int(expect)}, got {mid}")
    version = r.u8()
    station = r.u32()
    return Header(version, expect, station)


def _decode_sensor(r: _Reader) -> SensorInformation:
    return SensorInformation(
        sensor_id=r.u8(),
        sensor_type=_decode_enum(SensorType, r.u8(), "sensor.sensor_type"),
        range_m=r.q32(),
        aperture_deg=r.q32(),
        mount_offset=r.mm_vec(),
    )


def _decode_object(r: _Reader) -> PerceivedObject:
    return PerceivedObject(
        object_id=r.u32(),
        relative_position=r.mm_vec(),
        speed=r.q32(),
        heading=r.q32(),
        dimensions=(r.q32(), r.q32()),
        classification=_decode_enum(ObjectClass, r.u8(), "object.classification"),
        time_of_measurement=r.i64(),
        confidence=r.u16() / 1000.0,
    )


def _decode_free_space(r: _Reader) -> FreeSpaceAddendum:
    fs_id = r.u8()
    n = r.u16()
    polygon = tuple(r.mm_vec() for _ in range(n))
    sensor_ids: Optional[tuple[int, ...]] = None
    if r.flag():
        k = r.u16()
        sensor_ids = tuple(r.u8() for _ in range(k))
    return FreeSpaceAddendum(fs_id, polygon, sensor_ids)


def _decode_envelope(r: _Reader) -> SignedEnvelope:
    n = r.u32()
    payload = r.take(n)
    cert_id = r.u64()
    tag_len = r.u8()
    tag = r.take(tag_len)
    return SignedEnvelope(payload, cert_id, tag)


def _decode_cpm(r: _Reader) -> CpmMessage:
    header = _decode_header(r, MessageId.CPM)
    management = ManagementContainer(
        generation_time=r.i64(),
        reference_position=r.mm_vec(),
        station_type=_decode_enum(StationType, r.u8(), "management.station_type"),
    )
    station_data = None
    if r.flag():
        station_data = StationDataContainer(speed=r.q32(), heading=r.q32())
    sensor_info = None
    if r.flag():
        sensor_info = tuple(_decode_sensor(r) for _ in range(r.u16()))
    perceived = None
    if r.flag():
        perceived = tuple(_decode_object(r) for _ in range(r.u16()))
    free_space = None
    if r.flag():
        free_space = tuple(_decode_free_space(r) for _ in range(r.u16()))
    return CpmMessage(header, management, station_data, sensor_info, perceived, free_space)


def _decode_cam(r: _Reader) -> CamMessage:
    header = _decode_header(r, MessageId.CAM)
    return CamMessage(header, position=r.mm_vec(), speed=r.q32(), heading=r.q32(), timestamp=r.i64())


def _decode_denm(r: _Reader) -> DenmMessage:
    header = _decode_header(r, MessageId.DENM)
    return DenmMessage(
        header,
        event_type=_decode_enum(DenmEventType, r.u8(), "denm.event_type"),
        event_position=r.mm_vec(),
        timestamp=r.i64(),
    )


def _decode_mbr(r: _Reader) -> MisbehaviorReport:
    mid = r.u8()
    if mid != int(MessageId.MBR):
        raise InvariantViolationError(f"mbr.message_id: expected {int(MessageId.MBR)}, got {mid}")
    reporter = r.u32()
    suspect = r.u64()
    detector = _decode_enum(DetectorId, r.u8(), "mbr.detector_id")
    evidence = tuple(_decode_envelope(r) for _ in range(r.u16()))
    pair = None
    if r.flag():
        cam_len = r.u32()
        cam = decode(r.take(cam_len))
        cpm_len = r.u32()
        cpm = decode(r.take(cpm_len))
        if not isinstance(cam, CamMessage) or not isinstance(cpm, CpmMessage):
            raise InvariantViolationError("mbr.synchronized_pair must hold a CAM and a CPM")
        pair = (cam, cpm)
    created_at = r.i64()
    return MisbehaviorReport(reporter, suspect, detector, evidence, created_at, pair)


_DECODERS = {
    int(MessageId.CPM): _decode_cpm,
    int(MessageId.CAM): _decode_cam,
    int(MessageId.DENM): _decode_denm,
    int(MessageId.MBR): _decode_mbr,
}


def decode(data: bytes) -> Message:
    """Inverse of canonical_bytes; fails closed on malformed input."""
    if len(data) == 0:
        raise TruncatedError("empty input")
    decoder = _DECODERS.get(data[0])
    if decoder is None:
        raise UnknownMessageIdError(f"unknown message id {data[0]}")
    r = _Reader(data)
    try:
        message = decoder(r)
    except MessageError as exc:
        raise InvariantViolationError(str(exc)) from exc
    if not r.done():
        raise InvariantViolationError(f"{len(data) - r.pos} trailing bytes after message")
    return message


def envelope_digest(envelope: SignedEnvelope) -> str:
    """Stable short identifier for an envelope, used in traces and evidence refs."""
    import hashlib

    h = hashlib.sha256()
    h.update(envelope.payload)
    h.update(envelope.cert_id.to_bytes(8, "little"))
    h.update(envelope.signature_tag)
    return h.hexdigest()[:16]
