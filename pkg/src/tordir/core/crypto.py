"""Hashing and domain-separated signatures.

Every signature covers ``b"TORDIR" || context tag || epoch || payload`` so
that a signature made for one purpose, or one hourly run, never verifies
for another.
"""

from __future__ import annotations

import abc
import enum
import hashlib
import hmac
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from .types import DIGEST_SIZE, AuthorityId, Signature, StatusDocument

_DOMAIN = b"TORDIR"


class Context(enum.IntEnum):
    DOC = 1
    PROPOSAL_SLOT = 2
    ABSENT_SLOT = 3
    AGREE_VOTE = 4
    NEWVIEW = 5
    CONSENSUS = 6


class MalformedKeyError(ValueError):
    pass


def hash_bytes(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def digest(doc: StatusDocument) -> bytes:
    """SHA-256 of the canonical encoding of ``doc``."""
    return doc.digest


def signing_bytes(context: Context, epoch: int, payload: bytes) -> bytes:
    return _DOMAIN + struct.pack(">BQ", Context(context), epoch) + payload


class SignatureScheme(abc.ABC):
    name: str

    @abc.abstractmethod
    def keypair(self, seed: bytes) -> tuple[bytes, bytes]:
        """Deterministically derive (secret, public) from a seed."""

    @abc.abstractmethod
    def sign_raw(self, secret: bytes, message: bytes) -> bytes: ...

    @abc.abstractmethod
    def verify_raw(self, public: bytes, message: bytes, sig: bytes) -> bool: ...

    def sign(self, secret: bytes, signer: AuthorityId, context: Context, epoch: int, payload: bytes) -> Signature:
        return Signature(signer, self.sign_raw(secret, signing_bytes(context, epoch, payload)))

    def verify(self, public: bytes, context: Context, epoch: int, payload: bytes, sig: Signature) -> bool:
        return self.verify_raw(public, signing_bytes(context, epoch, payload), sig.value)


@lru_cache(maxsize=1024)
def _ed_secret(secret: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(secret)


@lru_cache(maxsize=1024)
def _ed_public(public: bytes) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(public)


@lru_cache(maxsize=1 << 18)
def _ed_verify(public: bytes, message: bytes, sig: bytes) -> bool:
    # Pure function of its arguments; the cache only saves repeated work
    # when many simulated nodes check the same certificate.
    try:
        _ed_public(public).verify(sig, message)
    except InvalidSignature:
        return False
    return True


class Ed25519Scheme(SignatureScheme):
    name = "ed25519"

    def keypair(self, seed: bytes) -> tuple[bytes, bytes]:
        secret = hashlib.sha256(b"ed25519-key" + seed).digest()
        from cryptography.hazmat.primitives import serialization

        pub = _ed_secret(secret).public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        return secret, pub

    def sign_raw(self, secret: bytes, message: bytes) -> bytes:
        if len(secret) != 32:
            raise MalformedKeyError("ed25519 secret must be 32 bytes")
        return _ed_secret(bytes(secret)).sign(message)

    def verify_raw(self, public: bytes, message: bytes, sig: bytes) -> bool:
        if len(public) != 32:
            raise MalformedKeyError("ed25519 public key must be 32 bytes")
        if len(sig) != 64:
            return False
        return _ed_verify(bytes(public), bytes(message), bytes(sig))


class MacScheme(SignatureScheme):
    """Keyed-MAC stand-in for fast tests.

    Public and secret keys are the same bytes, so anyone holding the keyring
    could forge. Only use it where no simulated node attempts forgery.
    """

    name = "hmac-sha256"

    def keypair(self, seed: bytes) -> tuple[bytes, bytes]:
        k = hashlib.sha256(b"mac-key" + seed).digest()
        return k, k

    def sign_raw(self, secret: bytes, message: bytes) -> bytes:
        if len(secret) != 32:
            raise MalformedKeyError("mac key must be 32 bytes")
        return hmac.new(secret, message, hashlib.sha256).digest()

    def verify_raw(self, public: bytes, message: bytes, sig: bytes) -> bool:
        if len(public) != 32:
            raise MalformedKeyError("mac key must be 32 bytes")
        return hmac.compare_digest(self.sign_raw(public, message), sig)


SCHEMES = {"ed25519": Ed25519Scheme, "mac": MacScheme}


@dataclass(frozen=True)
class Keyring:
    """Public keys of all n authorities plus the scheme that checks them."""

    scheme: SignatureScheme
    publics: tuple[bytes, ...]

    @property
    def n(self) -> int:
        return len(self.publics)

    def verify(self, sig: Signature, context: Context, epoch: int, payload: bytes) -> bool:
        if not 0 <= sig.signer < len(self.publics):
            return False
        return self.scheme.verify(self.publics[sig.signer], context, epoch, payload, sig)


def generate_keys(n: int, scheme: SignatureScheme, seed: int = 0) -> tuple[list[bytes], Keyring]:
    secrets, publics = [], []
    for i in range(n):
        s, p = scheme.keypair(struct.pack(">QQ", seed, i))
        secrets.append(s)
        publics.append(p)
    return secrets, Keyring(scheme, tuple(publics))


def is_digest(value: object) -> bool:
    return isinstance(value, bytes) and len(value) == DIGEST_SIZE


def distinct_signers(sigs: Sequence[Signature]) -> bool:
    return len({s.signer for s in sigs}) == len(sigs)
