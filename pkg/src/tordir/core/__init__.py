"""Shared domain types, canonical encoding, digests and signatures."""

from .crypto import (
    Context,
    Ed25519Scheme,
    Keyring,
    MacScheme,
    MalformedKeyError,
    SignatureScheme,
    digest,
    generate_keys,
    hash_bytes,
)
from .encoding import EncodingError, canonical_encode, decode_status
from .types import (
    DEFAULT_ENTRY_SIZE,
    DIGEST_SIZE,
    AuthorityId,
    ConsensusDocument,
    RelayDescriptor,
    Signature,
    StatusDocument,
    canonical_relays,
)

__all__ = [
    "AuthorityId",
    "ConsensusDocument",
    "Context",
    "DEFAULT_ENTRY_SIZE",
    "DIGEST_SIZE",
    "Ed25519Scheme",
    "EncodingError",
    "Keyring",
    "MacScheme",
    "MalformedKeyError",
    "RelayDescriptor",
    "Signature",
    "SignatureScheme",
    "StatusDocument",
    "canonical_encode",
    "canonical_relays",
    "decode_status",
    "digest",
    "generate_keys",
    "hash_bytes",
]
