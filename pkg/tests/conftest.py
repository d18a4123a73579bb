import random

import pytest

from cpsim.messages.types import (
    CamMessage,
    Certificate,
    CpmMessage,
    DenmEventType,
    DenmMessage,
    DetectorId,
    FreeSpaceAddendum,
    Header,
    ManagementContainer,
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


def make_header(message_id=MessageId.CPM, station_id=101):
    return Header(1, message_id, station_id)


def make_management(generation_time=1000, position=(0.0, 0.0), station_type=StationType.VEHICLE):
    return ManagementContainer(generation_time, position, station_type)


def make_sensor(sensor_id=1, sensor_type=SensorType.LIDAR, range_m=100.0, aperture_deg=120.0, mount=(0.0, 0.0)):
    return SensorInformation(sensor_id, sensor_type, range_m, aperture_deg, mount)


def make_object(
    object_id=1,
    rel=(10.0, 20.0),
    speed=5.0,
    heading=0.0,
    dims=(4.5, 1.8),
    classification=ObjectClass.OTHER,
    tom=1000,
    confidence=0.9,
):
    return PerceivedObject(object_id, rel, speed, heading, dims, classification, tom, confidence)


def make_cpm(
    station_id=101,
    generation_time=1000,
    position=(0.0, 0.0),
    station_data=StationDataContainer(10.0, 0.0),
    sensors=(make_sensor(),),
    objects=(make_object(),),
    free_space=None,
):
    return CpmMessage(
        header=make_header(MessageId.CPM, station_id),
        management=make_management(generation_time, position),
        station_data=station_data,
        sensor_info=tuple(sensors) if sensors is not None else None,
        perceived_objects=tuple(objects) if objects is not None else None,
        free_space=tuple(free_space) if free_space is not None else None,
    )


def make_cam(station_id=101, position=(0.0, 0.0), speed=10.0, heading=0.0, timestamp=1000):
    return CamMessage(make_header(MessageId.CAM, station_id), position, speed, heading, timestamp)


def make_denm(station_id=101, event=DenmEventType.EMERGENCY_BRAKE, position=(0.0, 30.0), timestamp=1000):
    return DenmMessage(make_header(MessageId.DENM, station_id), event, position, timestamp)


def make_certificate(cert_id=101, holder=101, valid_from=0, valid_to=10_000_000, caps=None):
    return Certificate(cert_id, holder, valid_from, valid_to, caps)


class MessageGenerator:
    """Structured random generator for codec round-trip properties.

    Values land on the wire grid (millimeters, millidegrees, per-mille) so
    decode(encode(m)) must reproduce m exactly.
    """

    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def position(self, span_m=10_000):
        r = self.rng
        return (r.randint(-span_m * 1000, span_m * 1000) / 1000.0, r.randint(-span_m * 1000, span_m * 1000) / 1000.0)

    def speed(self):
        return self.rng.randint(0, 90_000) / 1000.0

    def heading(self):
        return self.rng.randint(0, 359_999) / 1000.0

    def timestamp(self):
        return self.rng.randint(0, 10**9)

    def header(self, message_id):
        return Header(self.rng.randint(0, 255), message_id, self.rng.randint(0, 0xFFFFFFFF))

    def sensor_info(self, sensor_id):
        return SensorInformation(
            sensor_id=sensor_id,
            sensor_type=self.rng.choice(list(SensorType)),
            range_m=self.rng.randint(1, 500_000) / 1000.0,
            aperture_deg=self.rng.randint(1, 360_000) / 1000.0,
            mount_offset=self.position(5),
        )

    def perceived_object(self):
        return PerceivedObject(
            object_id=self.rng.randint(0, 0xFFFFFFFF),
            relative_position=self.position(500),
            speed=self.speed(),
            heading=self.heading(),
            dimensions=(self.rng.randint(0, 20_000) / 1000.0, self.rng.randint(0, 20_000) / 1000.0),
            classification=self.rng.choice(list(ObjectClass)),
            time_of_measurement=self.timestamp(),
            confidence=self.rng.randint(0, 1000) / 1000.0,
        )

    def polygon(self):
        # Fan with the apex as a vertex, ascending bearings inside a span
        # under 180 degrees: every edge stays in its angular slice, so the
        # polygon is simple by construction.
        n = self.rng.randint(2, 8)
        base = self.rng.randint(0, 3599)
        angles = [(base + off) / 10.0 % 360.0 for off in sorted(self.rng.sample(range(0, 1700), n))]
        points = [(0.0, 0.0)]
        import math

        for deg in angles:
            a = math.radians(deg)
            radius = self.rng.randint(2_000, 100_000) / 1000.0
            points.append(
                (round(radius * math.sin(a) * 1000) / 1000.0, round(radius * math.cos(a) * 1000) / 1000.0)
            )
        return tuple(points)

    def free_space(self, free_space_id, sensor_ids):
        use_ids = None
        if sensor_ids and self.rng.random() < 0.7:
            k = self.rng.randint(0, len(sensor_ids))
            use_ids = tuple(sorted(self.rng.sample(sensor_ids, k)))
        return FreeSpaceAddendum(free_space_id, self.polygon(), use_ids)

    def cpm(self):
        r = self.rng
        station_data = StationDataContainer(self.speed(), self.heading()) if r.random() < 0.8 else None
        sensors = None
        if r.random() < 0.8:
            ids = r.sample(range(0, 256), r.randint(1, 3))
            sensors = tuple(self.sensor_info(i) for i in sorted(ids))
        objects = None
        if r.random() < 0.8:
            objects = tuple(self.perceived_object() for _ in range(r.randint(0, 5)))
        free_space = None
        if r.random() < 0.5:
            sensor_ids = [s.sensor_id for s in sensors] if sensors else []
            free_space = tuple(self.free_space(i, sensor_ids) for i in range(r.randint(1, 2)))
        return CpmMessage(
            header=self.header(MessageId.CPM),
            management=ManagementContainer(
                self.timestamp(), self.position(), r.choice(list(StationType))
            ),
            station_data=station_data,
            sensor_info=sensors,
            perceived_objects=objects,
            free_space=free_space,
        )

    def cam(self):
        return CamMessage(self.header(MessageId.CAM), self.position(), self.speed(), self.heading(), self.timestamp())

    def denm(self):
        return DenmMessage(
            self.header(MessageId.DENM),
            self.rng.choice(list(DenmEventType)),
            self.position(),
            self.timestamp(),
        )

    def envelope(self):
        payload = bytes(self.rng.getrandbits(8) for _ in range(self.rng.randint(1, 64)))
        return SignedEnvelope(payload, self.rng.randint(0, 2**64 - 1), bytes(self.rng.getrandbits(8) for _ in range(32)))

    def mbr(self):
        detector = self.rng.choice(list(DetectorId))
        pair = (self.cam(), self.cpm()) if (detector == DetectorId.D8 or self.rng.random() < 0.3) else None
        return MisbehaviorReport(
            reporter=self.rng.randint(0, 0xFFFFFFFF),
            suspect_cert_id=self.rng.randint(0, 2**64 - 1),
            detector_id=detector,
            evidence=tuple(self.envelope() for _ in range(self.rng.randint(1, 3))),
            created_at=self.timestamp(),
            synchronized_pair=pair,
        )

    def any_message(self):
        return self.rng.choice([self.cpm, self.cam, self.denm, self.mbr])()


@pytest.fixture
def msg_gen():
    return MessageGenerator(20240817)
