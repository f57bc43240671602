"""Length-prefixed binary helpers and the canonical document layout.

Status document layout (all integers big-endian)::

    magic      4 bytes   b"TSD1"
    author     u16
    epoch      u64
    entry_size u32       padded size of one relay entry
    count      u32       number of relay entries
    entries    count x entry

Each relay entry is ``u32 length`` followed by ``length`` bytes: the relay
body, then zero padding so that the whole entry (prefix included) occupies
``max(entry_size, 4 + len(body))`` bytes. The body is::

    u16 len + fingerprint bytes
    u16 len + nickname (utf-8)
    u8 count, then per flag: u8 len + ascii name   (flags sorted)
    u8 count, then per component: u32               (version)
    u32                                             (protocols)
    u16 len + exit policy summary (utf-8)
    u8 has_bandwidth, then u64 bandwidth if set
    u8 measured

Consensus documents use magic b"TCD1" and omit the author field.
"""

from __future__ import annotations

import struct
from typing import Iterable

from .types import ConsensusDocument, RelayDescriptor, StatusDocument

STATUS_MAGIC = b"TSD1"
CONSENSUS_MAGIC = b"TCD1"
STATUS_HEADER_SIZE = 4 + 2 + 8 + 4 + 4
CONSENSUS_HEADER_SIZE = 4 + 8 + 4 + 4


class EncodingError(ValueError):
    """Raised for non-canonical input or undecodable bytes."""


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">B", v))
        return self

    def u16(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">H", v))
        return self

    def u32(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">I", v))
        return self

    def u64(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">Q", v))
        return self

    def raw(self, b: bytes) -> "Writer":
        self._parts.append(bytes(b))
        return self

    def blob16(self, b: bytes) -> "Writer":
        if len(b) > 0xFFFF:
            raise EncodingError("field longer than 65535 bytes")
        return self.u16(len(b)).raw(b)

    def blob32(self, b: bytes) -> "Writer":
        return self.u32(len(b)).raw(b)

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes) -> None:
        self._data = memoryview(data)
        self._pos = 0

    def _take(self, k: int) -> bytes:
        if self._pos + k > len(self._data):
            raise EncodingError("truncated input")
        out = bytes(self._data[self._pos : self._pos + k])
        self._pos += k
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def raw(self, k: int) -> bytes:
        return self._take(k)

    def blob16(self) -> bytes:
        return self._take(self.u16())

    def blob32(self) -> bytes:
        return self._take(self.u32())

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def expect_end(self) -> None:
        if self.remaining:
            raise EncodingError(f"{self.remaining} trailing bytes")


def _relay_body(r: RelayDescriptor) -> bytes:
    w = Writer()
    w.blob16(r.fingerprint)
    w.blob16(r.nickname.encode("utf-8"))
    flags = sorted(r.flags)
    w.u8(len(flags))
    for name in flags:
        b = name.encode("ascii")
        w.u8(len(b)).raw(b)
    w.u8(len(r.version))
    for part in r.version:
        w.u32(part)
    w.u32(r.protocols)
    w.blob16(r.exit_policy_summary.encode("utf-8"))
    if r.bandwidth is None:
        w.u8(0)
    else:
        w.u8(1).u64(r.bandwidth)
    w.u8(1 if r.measured else 0)
    return w.getvalue()


def encode_relay(r: RelayDescriptor, entry_size: int) -> bytes:
    body = _relay_body(r)
    length = max(len(body), entry_size - 4)
    return struct.pack(">I", length) + body + bytes(length - len(body))


def decode_relay(rd: Reader, entry_size: int) -> RelayDescriptor:
    length = rd.u32()
    inner = Reader(rd.raw(length))
    fingerprint = inner.blob16()
    nickname = inner.blob16().decode("utf-8")
    flags = frozenset(inner.raw(inner.u8()).decode("ascii") for _ in range(inner.u8()))
    version = tuple(inner.u32() for _ in range(inner.u8()))
    protocols = inner.u32()
    exit_policy = inner.blob16().decode("utf-8")
    bandwidth = inner.u64() if inner.u8() else None
    measured = bool(inner.u8())
    body_len = length - inner.remaining
    if inner.raw(inner.remaining).strip(b"\x00"):
        raise EncodingError("non-zero relay padding")
    if length != max(body_len, entry_size - 4):
        raise EncodingError("non-canonical relay padding")
    return RelayDescriptor(
        fingerprint=fingerprint,
        nickname=nickname,
        flags=flags,
        version=version,
        protocols=protocols,
        exit_policy_summary=exit_policy,
        bandwidth=bandwidth,
        measured=measured,
    )


def check_canonical(relays: Iterable[RelayDescriptor]) -> None:
    prev = None
    for r in relays:
        if prev is not None and r.fingerprint <= prev:
            raise EncodingError(
                "relays must be sorted by fingerprint without duplicates "
                f"({prev.hex()} then {r.fingerprint.hex()})"
            )
        prev = r.fingerprint


def canonical_encode(doc: StatusDocument) -> bytes:
    """Deterministic, decodable byte form of a status document.

    Raises EncodingError when the relays are not sorted by fingerprint or
    contain a duplicate fingerprint.
    """
    check_canonical(doc.relays)
    w = Writer()
    w.raw(STATUS_MAGIC).u16(doc.author).u64(doc.epoch).u32(doc.entry_size)
    w.u32(len(doc.relays))
    for r in doc.relays:
        w.raw(encode_relay(r, doc.entry_size))
    return w.getvalue()


def decode_status(data: bytes) -> StatusDocument:
    rd = Reader(data)
    if rd.raw(4) != STATUS_MAGIC:
        raise EncodingError("bad status document magic")
    author, epoch, entry_size = rd.u16(), rd.u64(), rd.u32()
    relays = tuple(decode_relay(rd, entry_size) for _ in range(rd.u32()))
    rd.expect_end()
    check_canonical(relays)
    return StatusDocument(author=author, relays=relays, epoch=epoch, entry_size=entry_size)


def encode_consensus_body(doc: ConsensusDocument) -> bytes:
    """Bytes that consensus signatures cover (signatures excluded)."""
    check_canonical(doc.relays)
    w = Writer()
    w.raw(CONSENSUS_MAGIC).u64(doc.epoch).u32(doc.entry_size).u32(len(doc.relays))
    for r in doc.relays:
        w.raw(encode_relay(r, doc.entry_size))
    return w.getvalue()


def encode_consensus(doc: ConsensusDocument) -> bytes:
    """Consensus body followed by its signature set, sorted by signer."""
    w = Writer().raw(encode_consensus_body(doc))
    sigs = sorted(doc.signatures, key=lambda s: s.signer)
    w.u16(len(sigs))
    for s in sigs:
        w.u16(s.signer).blob16(s.value)
    return w.getvalue()


def decode_consensus(data: bytes) -> ConsensusDocument:
    from .types import Signature

    rd = Reader(data)
    if rd.raw(4) != CONSENSUS_MAGIC:
        raise EncodingError("bad consensus document magic")
    epoch, entry_size = rd.u64(), rd.u32()
    relays = tuple(decode_relay(rd, entry_size) for _ in range(rd.u32()))
    sigs = frozenset(Signature(rd.u16(), rd.blob16()) for _ in range(rd.u16()))
    rd.expect_end()
    check_canonical(relays)
    return ConsensusDocument(relays=relays, epoch=epoch, signatures=sigs, entry_size=entry_size)
