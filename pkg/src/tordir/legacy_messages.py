"""Messages of the lock-step four-round directory protocol."""

from __future__ import annotations

from dataclasses import dataclass

from .core import Signature, StatusDocument


@dataclass(frozen=True)
class LegacyVote:
    doc: StatusDocument


@dataclass(frozen=True)
class VoteRequest:
    authors: tuple[int, ...]


@dataclass(frozen=True)
class LegacySig:
    body_digest: bytes
    sig: Signature


@dataclass(frozen=True)
class SigRequest:
    body_digest: bytes
