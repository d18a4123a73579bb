import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpsim.messages.codec import (
    EncodeError,
    InvariantViolationError,
    TruncatedError,
    UnknownMessageIdError,
    canonical_bytes,
    decode,
)
from cpsim.messages.types import MessageId

from conftest import MessageGenerator, make_cam, make_cpm, make_denm, make_object


def test_equal_messages_identical_bytes():
    a = make_cpm()
    b = make_cpm()
    assert a == b
    assert canonical_bytes(a) == canonical_bytes(b)


def test_header_and_management_only_roundtrip():
    cpm = make_cpm(station_data=None, sensors=None, objects=None, free_space=None)
    back = decode(canonical_bytes(cpm))
    assert back == cpm
    assert back.station_data is None
    assert back.sensor_info is None
    assert back.perceived_objects is None
    assert back.free_space is None


@pytest.mark.parametrize("builder", [make_cpm, make_cam, make_denm])
def test_simple_roundtrips(builder):
    msg = builder()
    assert decode(canonical_bytes(msg)) == msg


def test_structured_random_roundtrip_1000():
    gen = MessageGenerator(1234)
    for _ in range(1000):
        msg = gen.any_message()
        assert decode(canonical_bytes(msg)) == msg


def test_truncated_input_fails_closed():
    data = canonical_bytes(make_cpm())
    with pytest.raises(TruncatedError):
        decode(data[: len(data) // 2])
    with pytest.raises(TruncatedError):
        decode(b"")


def test_unknown_message_id():
    with pytest.raises(UnknownMessageIdError):
        decode(b"\x42" + b"\x00" * 20)


def test_zero_aperture_is_invariant_violation():
    cpm = make_cpm()
    data = bytearray(canonical_bytes(cpm))
    # Locate the first sensor's aperture field: header(6) + mgmt(25) +
    # station flag(1)+8 + sensor flag(1)+count(2)+id(1)+type(1)+range(4).
    offset = 6 + 25 + 9 + 3 + 2 + 4
    data[offset : offset + 4] = (0).to_bytes(4, "little")
    with pytest.raises(InvariantViolationError):
        decode(bytes(data))


def test_trailing_bytes_rejected():
    data = canonical_bytes(make_cam())
    with pytest.raises(InvariantViolationError):
        decode(data + b"\x00")


def test_out_of_range_field_raises_encode_error():
    bad = make_object(rel=(1e16, 0.0))
    cpm = make_cpm(objects=(bad,))
    with pytest.raises(EncodeError) as err:
        canonical_bytes(cpm)
    assert "relative_position" in str(err.value)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_hypothesis_roundtrip_seeded_messages(seed):
    gen = MessageGenerator(seed)
    msg = gen.any_message()
    assert decode(canonical_bytes(msg)) == msg
