"""Simplified credential model: registered certificates and keyed tags.

The default scheme is a deterministic HMAC-SHA256 tag over the canonical
payload bytes. Any scheme producing a 32-byte tag can be plugged in behind
the same interface; the security model only needs "valid credentials or
rejected at ingestion".
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

from .codec import canonical_bytes
from .types import Certificate, Message, SignedEnvelope, message_timestamp


class SignatureScheme(Protocol):
    def tag(self, key: bytes, payload: bytes) -> bytes: ...


class HmacTagScheme:
    """Deterministic keyed tag; the default scheme."""

    def tag(self, key: bytes, payload: bytes) -> bytes:
        return hmac.new(key, payload, hashlib.sha256).digest()


class CryptoError(Exception):
    pass


class UnknownCertificateError(CryptoError):
    pass


class ExpiredCertificateError(CryptoError):
    pass


class VerifyReason(Enum):
    OK = "ok"
    UNKNOWN_CERT = "unknown_cert"
    EXPIRED = "expired"
    BAD_SIGNATURE = "bad_signature"


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    reason: VerifyReason

    def __bool__(self) -> bool:
        return self.accepted


@dataclass
class KeyRegistry:
    """Maps certificate ids to certificates and signing keys."""

    scheme: SignatureScheme = field(default_factory=HmacTagScheme)
    _entries: dict[int, tuple[Certificate, bytes]] = field(default_factory=dict)

    def register(self, certificate: Certificate, key: bytes) -> None:
        self._entries[certificate.cert_id] = (certificate, key)

    def certificate(self, cert_id: int) -> Optional[Certificate]:
        entry = self._entries.get(cert_id)
        return entry[0] if entry else None

    def __contains__(self, cert_id: int) -> bool:
        return cert_id in self._entries

    def derive_key(self, cert_id: int, seed: int) -> bytes:
        """Deterministic per-run key material for scenario setup."""
        return hashlib.sha256(f"cpsim-key:{cert_id}:{seed}".encode()).digest()


def sign(message: Message, cert_id: int, registry: KeyRegistry) -> SignedEnvelope:
    """Sign a message under a registered certificate valid at its timestamp."""
    entry = registry._entries.get(cert_id)
    if entry is None:
        raise UnknownCertificateError(f"cert {cert_id} is not registered")
    certificate, key = entry
    ts = message_timestamp(message)
    if not certificate.valid_from <= ts <= certificate.valid_to:
        raise ExpiredCertificateError(f"cert {cert_id} not valid at t={ts}")
    payload = canonical_bytes(message)
    return SignedEnvelope(payload, cert_id, registry.scheme.tag(key, payload))


def verify(envelope: SignedEnvelope, registry: KeyRegistry, now: int) -> VerifyResult:
    """Accept iff the tag matches the payload under the registered key and
    the certificate validity covers now. Rejection is a value, not an error."""
    entry = registry._entries.get(envelope.cert_id)
    if entry is None:
        return VerifyResult(False, VerifyReason.UNKNOWN_CERT)
    certificate, key = entry
    if not certificate.valid_from <= now <= certificate.valid_to:
        return VerifyResult(False, VerifyReason.EXPIRED)
    expected = registry.scheme.tag(key, envelope.payload)
    if not hmac.compare_digest(expected, envelope.signature_tag):
        return VerifyResult(False, VerifyReason.BAD_SIGNATURE)
    return VerifyResult(True, VerifyReason.OK)
