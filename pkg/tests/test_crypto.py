import pytest

from cpsim.messages.codec import canonical_bytes
from cpsim.messages.crypto import (
    ExpiredCertificateError,
    KeyRegistry,
    UnknownCertificateError,
    VerifyReason,
    sign,
    verify,
)
from cpsim.messages.types import SignedEnvelope

from conftest import make_cam, make_certificate, make_cpm


@pytest.fixture
def registry():
    reg = KeyRegistry()
    reg.register(make_certificate(cert_id=101, valid_from=0, valid_to=100_000), reg.derive_key(101, seed=1))
    return reg


def test_sign_then_verify_accepts(registry):
    env = sign(make_cpm(generation_time=1000), 101, registry)
    assert verify(env, registry, now=1000).accepted


def test_payload_bit_flip_rejected(registry):
    env = sign(make_cpm(generation_time=1000), 101, registry)
    for bit in (0, 7, len(env.payload) * 8 - 1):
        flipped = bytearray(env.payload)
        flipped[bit // 8] ^= 1 << (bit % 8)
        tampered = SignedEnvelope(bytes(flipped), env.cert_id, env.signature_tag)
        result = verify(tampered, registry, now=1000)
        assert not result.accepted
        assert result.reason is VerifyReason.BAD_SIGNATURE


def test_unknown_cert_cannot_sign(registry):
    with pytest.raises(UnknownCertificateError):
        sign(make_cpm(), 999, registry)


def test_unknown_cert_rejected_on_verify(registry):
    env = SignedEnvelope(canonical_bytes(make_cam()), 999, b"\x00" * 32)
    result = verify(env, registry, now=1000)
    assert not result.accepted
    assert result.reason is VerifyReason.UNKNOWN_CERT


def test_expired_certificate(registry):
    with pytest.raises(ExpiredCertificateError):
        sign(make_cpm(generation_time=200_000), 101, registry)
    env = sign(make_cpm(generation_time=1000), 101, registry)
    result = verify(env, registry, now=200_000)
    assert not result.accepted
    assert result.reason is VerifyReason.EXPIRED


def test_tag_over_different_payload_rejected(registry):
    env_a = sign(make_cpm(generation_time=1000), 101, registry)
    other = canonical_bytes(make_cpm(generation_time=2000))
    swapped = SignedEnvelope(other, 101, env_a.signature_tag)
    result = verify(swapped, registry, now=1500)
    assert not result.accepted
    assert result.reason is VerifyReason.BAD_SIGNATURE


def test_keys_are_per_certificate():
    reg = KeyRegistry()
    reg.register(make_certificate(cert_id=1), reg.derive_key(1, seed=9))
    reg.register(make_certificate(cert_id=2, holder=2), reg.derive_key(2, seed=9))
    env = sign(make_cpm(generation_time=100), 1, reg)
    cross = SignedEnvelope(env.payload, 2, env.signature_tag)
    assert not verify(cross, reg, now=100).accepted
