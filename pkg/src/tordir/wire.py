"""Binary frames for every protocol message.

Frame = ``tag u8 | epoch u64 | view u64 | body_len u32 | body``. Tags:

    0x01 DOCUMENT      0x02 PROPOSAL
    0x10 PROPOSE       0x11 PREPARE     0x12 COMMIT     0x13 NEWVIEW
    0x20 FETCH_REQ     0x21 FETCH_RESP  0x22 CONSENSUS_SIG
    0x30 LEGACY_VOTE   0x31 VOTE_REQ    0x32 LEGACY_SIG  0x33 SIG_REQ

Messages that carry no view encode view 0.
"""

from __future__ import annotations

import struct
from typing import Any, Optional

from .agreement import CommitVote, NewView, PrepareQC, PrepareVote, Propose
from .aggregation import ConsensusSig, FetchRequest, FetchResponse
from .core import Signature
from .core.encoding import EncodingError, Reader, Writer, canonical_encode, decode_status
from .core.types import DIGEST_SIZE
from .dissemination import (
    Absent,
    DigestVector,
    DocumentMessage,
    Equivocation,
    Exclusion,
    Inclusion,
    Present,
    Proposal,
)
from .legacy_messages import LegacySig, LegacyVote, SigRequest, VoteRequest

HEADER_SIZE = 1 + 8 + 8 + 4

TAGS = {
    DocumentMessage: 0x01,
    Proposal: 0x02,
    Propose: 0x10,
    PrepareVote: 0x11,
    CommitVote: 0x12,
    NewView: 0x13,
    FetchRequest: 0x20,
    FetchResponse: 0x21,
    ConsensusSig: 0x22,
    LegacyVote: 0x30,
    VoteRequest: 0x31,
    LegacySig: 0x32,
    SigRequest: 0x33,
}

CLASS_NAMES = {
    0x01: "DOCUMENT",
    0x02: "PROPOSAL",
    0x10: "PROPOSE",
    0x11: "PREPARE",
    0x12: "COMMIT",
    0x13: "NEWVIEW",
    0x20: "FETCH_REQ",
    0x21: "FETCH_RESP",
    0x22: "CONSENSUS_SIG",
    0x30: "LEGACY_VOTE",
    0x31: "VOTE_REQ",
    0x32: "LEGACY_SIG",
    0x33: "SIG_REQ",
}


def class_name(msg: Any) -> str:
    return CLASS_NAMES[TAGS[type(msg)]]


# -- primitives -------------------------------------------------------------


def _sig(w: Writer, s: Signature) -> None:
    w.u16(s.signer).blob16(s.value)


def _read_sig(r: Reader) -> Signature:
    return Signature(r.u16(), r.blob16())


def _digest(r: Reader) -> bytes:
    return r.raw(DIGEST_SIZE)


def _vector(w: Writer, H: DigestVector) -> None:
    w.u64(H.view).u16(len(H.entries))
    for entry, proof in zip(H.entries, H.proofs):
        if isinstance(proof, Inclusion):
            w.u8(0).raw(entry).u8(len(proof.sigs))
            for s in proof.sigs:
                _sig(w, s)
        elif isinstance(proof, Equivocation):
            w.u8(1)
            _equivocation(w, proof)
        else:
            w.u8(2).u8(len(proof.sigs))
            for s in proof.sigs:
                _sig(w, s)


def _read_vector(r: Reader) -> DigestVector:
    view, n = r.u64(), r.u16()
    entries, proofs = [], []
    for _ in range(n):
        kind = r.u8()
        if kind == 0:
            entries.append(_digest(r))
            proofs.append(Inclusion(tuple(_read_sig(r) for _ in range(r.u8()))))
        elif kind == 1:
            entries.append(None)
            proofs.append(_read_equivocation(r))
        elif kind == 2:
            entries.append(None)
            proofs.append(Exclusion(tuple(_read_sig(r) for _ in range(r.u8()))))
        else:
            raise EncodingError(f"unknown slot proof kind {kind}")
    return DigestVector(tuple(entries), tuple(proofs), view)


def _equivocation(w: Writer, ev: Equivocation) -> None:
    w.raw(ev.h1)
    _sig(w, ev.sig1)
    w.raw(ev.h2)
    _sig(w, ev.sig2)


def _read_equivocation(r: Reader) -> Equivocation:
    h1, s1 = _digest(r), _read_sig(r)
    h2, s2 = _digest(r), _read_sig(r)
    return Equivocation(h1, s1, h2, s2)


def _qc(w: Writer, qc: Optional[PrepareQC]) -> None:
    if qc is None:
        w.u8(0)
        return
    w.u8(1).u64(qc.view).raw(qc.h_H).u16(len(qc.sigs))
    for s in qc.sigs:
        _sig(w, s)


def _read_qc(r: Reader) -> Optional[PrepareQC]:
    if not r.u8():
        return None
    view, h = r.u64(), _digest(r)
    return PrepareQC(view, h, tuple(_read_sig(r) for _ in range(r.u16())))


# -- bodies -----------------------------------------------------------------


def _body(msg: Any) -> tuple[int, int, bytes]:
    """Returns (epoch, view, body bytes)."""
    w = Writer()
    if isinstance(msg, DocumentMessage):
        w.blob32(msg.doc.encoded).raw(msg.h)
        _sig(w, msg.sig)
        return msg.doc.epoch, 0, w.getvalue()
    if isinstance(msg, Proposal):
        w.u16(msg.proposer).u16(len(msg.slots))
        for slot in msg.slots:
            if isinstance(slot, Present):
                w.u8(1).raw(slot.h)
                _sig(w, slot.sender_sig)
                _sig(w, slot.proposer_sig)
            else:
                w.u8(0)
                _sig(w, slot.proposer_sig)
        w.u16(len(msg.evidence))
        for ev in msg.evidence:
            _equivocation(w, ev)
        return 0, msg.view, w.getvalue()
    if isinstance(msg, Propose):
        _vector(w, msg.H)
        _qc(w, msg.justify)
        return 0, msg.view, w.getvalue()
    if isinstance(msg, (PrepareVote, CommitVote)):
        w.raw(msg.h_H)
        _sig(w, msg.sig)
        return 0, msg.view, w.getvalue()
    if isinstance(msg, NewView):
        _qc(w, msg.highest_prepare)
        if msg.locked is None:
            w.u8(0)
        else:
            w.u8(1)
            _vector(w, msg.locked)
        _sig(w, msg.sig)
        return 0, msg.view, w.getvalue()
    if isinstance(msg, FetchRequest):
        w.u16(msg.slot).raw(msg.h)
        return 0, 0, w.getvalue()
    if isinstance(msg, FetchResponse):
        w.u16(msg.slot)
        if msg.doc is None:
            w.u8(0)
        else:
            w.u8(1).blob32(msg.doc.encoded)
        return 0, 0, w.getvalue()
    if isinstance(msg, (ConsensusSig, LegacySig)):
        w.raw(msg.body_digest)
        _sig(w, msg.sig)
        return 0, 0, w.getvalue()
    if isinstance(msg, LegacyVote):
        w.blob32(msg.doc.encoded)
        return msg.doc.epoch, 0, w.getvalue()
    if isinstance(msg, VoteRequest):
        w.u16(len(msg.authors))
        for a in msg.authors:
            w.u16(a)
        return 0, 0, w.getvalue()
    if isinstance(msg, SigRequest):
        w.raw(msg.body_digest)
        return 0, 0, w.getvalue()
    raise TypeError(f"no wire encoding for {type(msg).__name__}")


def encode(msg: Any, epoch: Optional[int] = None) -> bytes:
    msg_epoch, view, body = _body(msg)
    if epoch is None:
        epoch = msg_epoch
    return struct.pack(">BQQI", TAGS[type(msg)], epoch, view, len(body)) + body


def _sig_size(s: Signature) -> int:
    return 4 + len(s.value)


def frame_size(msg: Any) -> int:
    """Encoded length, computed without copying document bodies."""
    if isinstance(msg, DocumentMessage):
        return HEADER_SIZE + 4 + len(msg.doc.encoded) + len(msg.h) + _sig_size(msg.sig)
    if isinstance(msg, LegacyVote):
        return HEADER_SIZE + 4 + len(msg.doc.encoded)
    if isinstance(msg, FetchResponse) and msg.doc is not None:
        return HEADER_SIZE + 2 + 1 + 4 + len(msg.doc.encoded)
    return HEADER_SIZE + len(_body(msg)[2])


def decode(frame: bytes) -> tuple[int, Any]:
    """Parse one frame; returns (epoch, message)."""
    if len(frame) < HEADER_SIZE:
        raise EncodingError("short frame")
    tag, epoch, view, length = struct.unpack(">BQQI", frame[:HEADER_SIZE])
    if len(frame) != HEADER_SIZE + length:
        raise EncodingError("frame length mismatch")
    r = Reader(frame[HEADER_SIZE:])
    if tag == 0x01:
        doc = decode_status(r.blob32())
        msg: Any = DocumentMessage(doc, _digest(r), _read_sig(r))
    elif tag == 0x02:
        proposer, n = r.u16(), r.u16()
        slots = []
        for _ in range(n):
            if r.u8():
                slots.append(Present(_digest(r), _read_sig(r), _read_sig(r)))
            else:
                slots.append(Absent(_read_sig(r)))
        evidence = tuple(_read_equivocation(r) for _ in range(r.u16()))
        msg = Proposal(proposer, view, tuple(slots), evidence)
    elif tag == 0x10:
        msg = Propose(view, _read_vector(r), _read_qc(r))
    elif tag in (0x11, 0x12):
        cls = PrepareVote if tag == 0x11 else CommitVote
        msg = cls(view, _digest(r), _read_sig(r))
    elif tag == 0x13:
        qc = _read_qc(r)
        locked = _read_vector(r) if r.u8() else None
        msg = NewView(view, qc, locked, _read_sig(r))
    elif tag == 0x20:
        msg = FetchRequest(r.u16(), _digest(r))
    elif tag == 0x21:
        slot = r.u16()
        msg = FetchResponse(slot, decode_status(r.blob32()) if r.u8() else None)
    elif tag in (0x22, 0x32):
        cls = ConsensusSig if tag == 0x22 else LegacySig
        msg = cls(_digest(r), _read_sig(r))
    elif tag == 0x30:
        msg = LegacyVote(decode_status(r.blob32()))
    elif tag == 0x31:
        msg = VoteRequest(tuple(r.u16() for _ in range(r.u16())))
    elif tag == 0x33:
        msg = SigRequest(_digest(r))
    else:
        raise EncodingError(f"unknown frame tag {tag:#x}")
    r.expect_end()
    return epoch, msg


__all__ = ["CLASS_NAMES", "HEADER_SIZE", "TAGS", "class_name", "decode", "encode", "frame_size"]
