"""Document broadcast, per-view proposals, and leader assembly of (H, proofs).

Every authority broadcasts its signed status document. Once it holds enough
documents it sends the current leader a proposal listing, per slot, either
the digest it received (countersigned) or a signed "absent" marker. The
leader turns proposals into a digest vector whose every entry carries a
proof that any third party can check.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from .core import Context, Keyring, Signature, StatusDocument
from .core.crypto import hash_bytes, is_digest
from .core.types import DIGEST_SIZE, AuthorityId

log = logging.getLogger(__name__)

DEFAULT_DELTA_S = 30.0


def doc_payload(j: AuthorityId, h: bytes) -> bytes:
    return struct.pack(">H", j) + h


def absent_payload(j: AuthorityId) -> bytes:
    return struct.pack(">H", j)


@dataclass(frozen=True)
class DocumentMessage:
    doc: StatusDocument
    h: bytes
    sig: Signature

    @property
    def author(self) -> AuthorityId:
        return self.doc.author


@dataclass(frozen=True)
class Present:
    h: bytes
    sender_sig: Signature
    proposer_sig: Signature


@dataclass(frozen=True)
class Absent:
    proposer_sig: Signature


ProposalSlot = Union[Present, Absent]


@dataclass(frozen=True)
class Equivocation:
    """Two different digests signed by the same slot owner."""

    h1: bytes
    sig1: Signature
    h2: bytes
    sig2: Signature

    @property
    def owner(self) -> AuthorityId:
        return self.sig1.signer

    def normalized(self) -> "Equivocation":
        if self.h1 <= self.h2:
            return self
        return Equivocation(self.h2, self.sig2, self.h1, self.sig1)


@dataclass(frozen=True)
class Proposal:
    proposer: AuthorityId
    view: int
    slots: tuple[ProposalSlot, ...]
    evidence: tuple[Equivocation, ...] = ()

    @property
    def present_count(self) -> int:
        return sum(isinstance(s, Present) for s in self.slots)


@dataclass(frozen=True)
class Inclusion:
    sigs: tuple[Signature, ...]


@dataclass(frozen=True)
class Exclusion:
    sigs: tuple[Signature, ...]


SlotProof = Union[Inclusion, Equivocation, Exclusion]


@dataclass(frozen=True)
class DigestVector:
    entries: tuple[Optional[bytes], ...]
    proofs: tuple[SlotProof, ...]
    view: int

    @property
    def present_count(self) -> int:
        return sum(e is not None for e in self.entries)

    def vector_digest(self) -> bytes:
        return vector_digest(self.entries)


def vector_digest(entries: Sequence[Optional[bytes]]) -> bytes:
    """Hash of the entries alone; proofs are witnesses, not content."""
    parts = [b"HVEC", struct.pack(">H", len(entries))]
    for e in entries:
        parts.append(b"\x00" if e is None else b"\x01" + e)
    return hash_bytes(b"".join(parts))


def proposal_gate(received: int, clock: float, n: int, f: int, delta: float) -> bool:
    """All n documents in hand, or the wait expired with at least n - f."""
    return received == n or (clock >= delta and received >= n - f)


def check_document(msg: DocumentMessage, keyring: Keyring, epoch: int) -> bool:
    doc = msg.doc
    if doc.epoch != epoch or not 0 <= doc.author < keyring.n:
        return False
    if msg.sig.signer != doc.author or not is_digest(msg.h):
        return False
    try:
        if msg.h != doc.digest:
            return False
    except ValueError:
        return False
    return keyring.verify(msg.sig, Context.DOC, epoch, doc_payload(doc.author, msg.h))


def check_equivocation(ev: Equivocation, keyring: Keyring, epoch: int, slot: Optional[int] = None) -> bool:
    j = ev.sig1.signer
    if ev.sig2.signer != j or (slot is not None and j != slot):
        return False
    if ev.h1 == ev.h2 or not (is_digest(ev.h1) and is_digest(ev.h2)):
        return False
    return keyring.verify(ev.sig1, Context.DOC, epoch, doc_payload(j, ev.h1)) and keyring.verify(
        ev.sig2, Context.DOC, epoch, doc_payload(j, ev.h2)
    )


def check_proposal(p: Proposal, n: int, f: int, keyring: Keyring, epoch: int) -> bool:
    """Full signature check of a received proposal; any bad slot rejects all of it."""
    if len(p.slots) != n or not 0 <= p.proposer < n or p.present_count < n - f:
        return False
    for j, slot in enumerate(p.slots):
        if isinstance(slot, Present):
            if not is_digest(slot.h) or slot.sender_sig.signer != j or slot.proposer_sig.signer != p.proposer:
                return False
            if not keyring.verify(slot.sender_sig, Context.DOC, epoch, doc_payload(j, slot.h)):
                return False
            if not keyring.verify(slot.proposer_sig, Context.PROPOSAL_SLOT, epoch, doc_payload(j, slot.h)):
                return False
        elif isinstance(slot, Absent):
            if slot.proposer_sig.signer != p.proposer:
                return False
            if not keyring.verify(slot.proposer_sig, Context.ABSENT_SLOT, epoch, absent_payload(j)):
                return False
        else:
            return False
    return all(check_equivocation(ev, keyring, epoch) for ev in p.evidence)


def leader_assemble(
    proposals: Iterable[Proposal],
    evidence: Iterable[Equivocation],
    n: int,
    f: int,
    view: int = 0,
) -> Optional[DigestVector]:
    """Combine proposals into a ready digest vector, or None if not ready yet.

    Inputs must already be signature-checked. A slot with known equivocation
    is excluded even if f + 1 proposals carry one of the two digests.
    """
    by_proposer: dict[int, Proposal] = {}
    for p in proposals:
        by_proposer.setdefault(p.proposer, p)
    if len(by_proposer) < n - f:
        return None

    equivocations: dict[int, Equivocation] = {}
    for ev in evidence:
        equivocations.setdefault(ev.owner, ev.normalized())
    for p in by_proposer.values():
        for ev in p.evidence:
            equivocations.setdefault(ev.owner, ev.normalized())

    entries: list[Optional[bytes]] = []
    proofs: list[SlotProof] = []
    order = sorted(by_proposer)
    for j in range(n):
        present: dict[bytes, list[Present]] = {}
        absent: list[Signature] = []
        for pid in order:
            slot = by_proposer[pid].slots[j]
            if isinstance(slot, Present):
                present.setdefault(slot.h, []).append(slot)
            else:
                absent.append(slot.proposer_sig)
        if j not in equivocations and len(present) > 1:
            (h1, s1), (h2, s2) = sorted(present.items())[:2]
            equivocations[j] = Equivocation(h1, s1[0].sender_sig, h2, s2[0].sender_sig)
        if j in equivocations:
            entries.append(None)
            proofs.append(equivocations[j])
            continue
        winner = next((h for h, slots in sorted(present.items()) if len(slots) >= f + 1), None)
        if winner is not None:
            entries.append(winner)
            proofs.append(Inclusion(tuple(s.proposer_sig for s in present[winner][: f + 1])))
        elif len(absent) >= f + 1:
            entries.append(None)
            proofs.append(Exclusion(tuple(absent[: f + 1])))
        else:
            return None
    if sum(e is not None for e in entries) < n - f:
        return None
    return DigestVector(tuple(entries), tuple(proofs), view)


def verify_vector(H: DigestVector, n: int, f: int, keyring: Keyring, epoch: int) -> bool:
    """Check a digest vector and every proof it carries."""
    if len(H.entries) != n or len(H.proofs) != n:
        return False
    present = 0
    for j, (entry, proof) in enumerate(zip(H.entries, H.proofs)):
        if entry is not None:
            if not isinstance(proof, Inclusion) or not is_digest(entry):
                return False
            if not _quorum_sigs(proof.sigs, f, keyring, Context.PROPOSAL_SLOT, epoch, doc_payload(j, entry)):
                return False
            present += 1
        elif isinstance(proof, Equivocation):
            if not check_equivocation(proof, keyring, epoch, slot=j):
                return False
        elif isinstance(proof, Exclusion):
            if not _quorum_sigs(proof.sigs, f, keyring, Context.ABSENT_SLOT, epoch, absent_payload(j)):
                return False
        else:
            return False
    return present >= n - f


def _quorum_sigs(sigs: Sequence[Signature], f: int, keyring: Keyring, ctx: Context, epoch: int, payload: bytes) -> bool:
    if len(sigs) != f + 1 or len({s.signer for s in sigs}) != f + 1:
        return False
    return all(keyring.verify(s, ctx, epoch, payload) for s in sigs)


@dataclass
class Disseminator:
    """Per-node dissemination state.

    Holds the first valid document from each author, any equivocation seen,
    and caches the node's own slot countersignatures across views.
    """

    node: AuthorityId
    n: int
    f: int
    epoch: int
    keyring: Keyring
    secret: bytes
    docs: dict[int, DocumentMessage] = field(default_factory=dict)
    evidence: dict[int, Equivocation] = field(default_factory=dict)
    dropped_invalid: int = 0
    _slot_sigs: dict[tuple[int, Optional[bytes]], Signature] = field(default_factory=dict)

    def _sign(self, ctx: Context, payload: bytes) -> Signature:
        return self.keyring.scheme.sign(self.secret, self.node, ctx, self.epoch, payload)

    def make_document(self, doc: StatusDocument) -> DocumentMessage:
        h = doc.digest
        return DocumentMessage(doc, h, self._sign(Context.DOC, doc_payload(doc.author, h)))

    def start_epoch(self, own_doc: StatusDocument) -> DocumentMessage:
        if own_doc.author != self.node or own_doc.epoch != self.epoch:
            raise ValueError("own document must be authored by this node for this epoch")
        msg = self.make_document(own_doc)
        self.docs[self.node] = msg
        return msg

    @property
    def received(self) -> int:
        return len(self.docs)

    def on_document(self, msg: DocumentMessage) -> bool:
        """Store a valid document; record equivocation on a second distinct one."""
        if not check_document(msg, self.keyring, self.epoch):
            self.dropped_invalid += 1
            log.debug("node %d dropped invalid document", self.node)
            return False
        j = msg.author
        prior = self.docs.get(j)
        if prior is None:
            self.docs[j] = msg
            return True
        if prior.h != msg.h and j not in self.evidence:
            self.evidence[j] = Equivocation(prior.h, prior.sig, msg.h, msg.sig).normalized()
        return False

    def gate(self, clock: float, delta: float) -> bool:
        return proposal_gate(self.received, clock, self.n, self.f, delta)

    def build_proposal(self, view: int) -> Proposal:
        if self.received < self.n - self.f:
            raise RuntimeError(f"proposal needs {self.n - self.f} documents, have {self.received}")
        slots: list[ProposalSlot] = []
        for j in range(self.n):
            msg = self.docs.get(j)
            if msg is not None and j not in self.evidence:
                key = (j, msg.h)
                if key not in self._slot_sigs:
                    self._slot_sigs[key] = self._sign(Context.PROPOSAL_SLOT, doc_payload(j, msg.h))
                slots.append(Present(msg.h, msg.sig, self._slot_sigs[key]))
            else:
                key = (j, None)
                if key not in self._slot_sigs:
                    self._slot_sigs[key] = self._sign(Context.ABSENT_SLOT, absent_payload(j))
                slots.append(Absent(self._slot_sigs[key]))
        evidence = tuple(self.evidence[j] for j in sorted(self.evidence))
        return Proposal(self.node, view, tuple(slots), evidence)


@dataclass
class ProposalCollector:
    """Leader-side buffer of checked proposals for one view."""

    n: int
    f: int
    epoch: int
    keyring: Keyring
    view: int
    proposals: dict[int, Proposal] = field(default_factory=dict)
    rejected: int = 0

    def add(self, sender: AuthorityId, p: Proposal) -> bool:
        if p.view != self.view or p.proposer != sender or p.proposer in self.proposals:
            return False
        if not check_proposal(p, self.n, self.f, self.keyring, self.epoch):
            self.rejected += 1
            return False
        self.proposals[p.proposer] = p
        return True

    def assemble(self, extra_evidence: Mapping[int, Equivocation] = {}) -> Optional[DigestVector]:
        return leader_assemble(self.proposals.values(), extra_evidence.values(), self.n, self.f, self.view)


__all__ = [
    "Absent",
    "DEFAULT_DELTA_S",
    "DIGEST_SIZE",
    "DigestVector",
    "Disseminator",
    "DocumentMessage",
    "Equivocation",
    "Exclusion",
    "Inclusion",
    "Present",
    "Proposal",
    "ProposalCollector",
    "ProposalSlot",
    "SlotProof",
    "absent_payload",
    "check_document",
    "check_equivocation",
    "check_proposal",
    "doc_payload",
    "leader_assemble",
    "proposal_gate",
    "verify_vector",
    "vector_digest",
]
