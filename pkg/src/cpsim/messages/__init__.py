"""Message types, canonical codec, and the simplified sign/verify scheme."""

from .codec import (
    CodecError,
    DecodeError,
    EncodeError,
    InvariantViolationError,
    TruncatedError,
    UnknownMessageIdError,
    canonical_bytes,
    decode,
    envelope_digest,
)
from .crypto import (
    CryptoError,
    ExpiredCertificateError,
    HmacTagScheme,
    KeyRegistry,
    UnknownCertificateError,
    VerifyReason,
    VerifyResult,
    sign,
    verify,
)
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
    cam_header,
    cpm_header,
    denm_header,
    message_timestamp,
)

__all__ = [
    "CamMessage",
    "Certificate",
    "CodecError",
    "CpmMessage",
    "CryptoError",
    "DecodeError",
    "DenmEventType",
    "DenmMessage",
    "DetectorId",
    "EncodeError",
    "ExpiredCertificateError",
    "FreeSpaceAddendum",
    "Header",
    "HmacTagScheme",
    "InvariantViolationError",
    "KeyRegistry",
    "ManagementContainer",
    "Message",
    "MessageError",
    "MessageId",
    "MisbehaviorReport",
    "ObjectClass",
    "PerceivedObject",
    "SensorInformation",
    "SensorType",
    "SignedEnvelope",
    "StationDataContainer",
    "StationType",
    "TruncatedError",
    "UnknownCertificateError",
    "UnknownMessageIdError",
    "VerifyReason",
    "VerifyResult",
    "cam_header",
    "canonical_bytes",
    "cpm_header",
    "decode",
    "denm_header",
    "envelope_digest",
    "message_timestamp",
    "sign",
    "verify",
]
