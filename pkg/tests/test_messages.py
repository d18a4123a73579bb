import pytest

from cpsim.messages.types import (
    Certificate,
    CpmMessage,
    DetectorId,
    FreeSpaceAddendum,
    MessageError,
    MisbehaviorReport,
    SensorInformation,
    SensorType,
    SignedEnvelope,
    StationDataContainer,
)

from conftest import make_cam, make_cpm, make_header, make_management, make_object, make_sensor


def test_sensor_aperture_bounds():
    make_sensor(aperture_deg=360.0)
    with pytest.raises(MessageError):
        make_sensor(aperture_deg=0.0)
    with pytest.raises(MessageError):
        make_sensor(aperture_deg=361.0)
    with pytest.raises(MessageError):
        make_sensor(range_m=0.0)


def test_object_field_ranges():
    with pytest.raises(MessageError):
        make_object(speed=-1.0)
    with pytest.raises(MessageError):
        make_object(heading=360.0)
    with pytest.raises(MessageError):
        make_object(confidence=1.5)


def test_values_snap_to_wire_grid():
    obj = make_object(rel=(1.23456789, -2.0004999), speed=3.14159)
    assert obj.relative_position == (1.235, -2.0)
    assert obj.speed == 3.142


def test_cpm_sensor_ids_unique():
    with pytest.raises(MessageError):
        make_cpm(sensors=(make_sensor(sensor_id=1), make_sensor(sensor_id=1)))


def test_cpm_optional_containers_independent():
    cpm = make_cpm(station_data=None, sensors=None, objects=None, free_space=None)
    assert cpm.station_data is None
    assert cpm.sensor_info is None
    assert cpm.perceived_objects is None
    assert cpm.free_space is None


def test_free_space_polygon_must_be_simple():
    with pytest.raises(MessageError):
        FreeSpaceAddendum(1, ((0, 0), (10, 10), (10, 0), (0, 10)))
    with pytest.raises(MessageError):
        FreeSpaceAddendum(1, ((0, 0), (10, 10)))


def test_free_space_sensor_ids_resolve_within_cpm():
    fs = FreeSpaceAddendum(1, ((0, 0), (10, 0), (10, 10)), sensor_ids=(7,))
    with pytest.raises(MessageError):
        make_cpm(sensors=(make_sensor(sensor_id=1),), free_space=(fs,))
    make_cpm(sensors=(make_sensor(sensor_id=7),), free_space=(fs,))


def test_cam_heading_range():
    with pytest.raises(MessageError):
        make_cam(heading=360.0)
    assert make_cam(heading=359.999).heading == 359.999


def test_certificate_attested_range():
    cert = Certificate(1, 101, 0, 10, attested_capabilities=((SensorType.LIDAR, 100.0), (SensorType.LIDAR, 50.0)))
    assert cert.attested_range(SensorType.LIDAR) == 100.0
    assert cert.attested_range(SensorType.RADAR) is None
    with pytest.raises(MessageError):
        Certificate(1, 101, 0, 10, attested_capabilities=((SensorType.LIDAR, 0.0),))


def test_envelope_tag_width():
    with pytest.raises(MessageError):
        SignedEnvelope(b"x", 1, b"short")


def test_mbr_requires_evidence_and_d8_pair():
    env = SignedEnvelope(b"payload", 1, b"\x00" * 32)
    with pytest.raises(MessageError):
        MisbehaviorReport(101, 1, DetectorId.D2, (), 0)
    with pytest.raises(MessageError):
        MisbehaviorReport(101, 1, DetectorId.D8, (env,), 0, synchronized_pair=None)
    mbr = MisbehaviorReport(101, 1, DetectorId.D8, (env,), 0, synchronized_pair=(make_cam(), make_cpm()))
    assert mbr.synchronized_pair is not None
