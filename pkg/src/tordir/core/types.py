from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

DIGEST_SIZE = 32
DEFAULT_ENTRY_SIZE = 500

AuthorityId = int


@dataclass(frozen=True)
class RelayDescriptor:
    """One relay as seen by one authority."""

    fingerprint: bytes
    nickname: str
    flags: frozenset[str] = frozenset()
    version: tuple[int, ...] = (0,)
    protocols: int = 0
    exit_policy_summary: str = "reject 1-65535"
    bandwidth: Optional[int] = None
    measured: bool = False

    def __post_init__(self) -> None:
        if not self.fingerprint:
            raise ValueError("relay fingerprint must be non-empty")
        if self.bandwidth is not None and self.bandwidth < 0:
            raise ValueError("relay bandwidth must be non-negative")
        if not isinstance(self.flags, frozenset):
            object.__setattr__(self, "flags", frozenset(self.flags))


def canonical_relays(relays) -> tuple[RelayDescriptor, ...]:
    """Sort by fingerprint; reject duplicate fingerprints."""
    out = tuple(sorted(relays, key=lambda r: r.fingerprint))
    for a, b in zip(out, out[1:]):
        if a.fingerprint == b.fingerprint:
            raise ValueError(f"duplicate relay fingerprint {a.fingerprint.hex()}")
    return out


@dataclass(frozen=True)
class StatusDocument:
    """An authority's vote: the relays it knows about for one epoch."""

    author: AuthorityId
    relays: tuple[RelayDescriptor, ...]
    epoch: int
    entry_size: int = DEFAULT_ENTRY_SIZE

    @classmethod
    def build(cls, author: AuthorityId, relays, epoch: int, entry_size: int = DEFAULT_ENTRY_SIZE) -> "StatusDocument":
        return cls(author, canonical_relays(relays), epoch, entry_size)

    @cached_property
    def encoded(self) -> bytes:
        from .encoding import canonical_encode

        return canonical_encode(self)

    @cached_property
    def digest(self) -> bytes:
        from .crypto import hash_bytes

        return hash_bytes(self.encoded)


@dataclass(frozen=True)
class Signature:
    signer: AuthorityId
    value: bytes


@dataclass(frozen=True)
class ConsensusDocument:
    relays: tuple[RelayDescriptor, ...]
    epoch: int
    signatures: frozenset[Signature] = field(default_factory=frozenset)
    entry_size: int = DEFAULT_ENTRY_SIZE

    @cached_property
    def body(self) -> bytes:
        from .encoding import encode_consensus_body

        return encode_consensus_body(self)

    def with_signatures(self, sigs) -> "ConsensusDocument":
        return ConsensusDocument(self.relays, self.epoch, frozenset(sigs), self.entry_size)
