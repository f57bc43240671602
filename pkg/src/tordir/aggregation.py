"""Recover the decided documents and merge them into a consensus document."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .core import Context, ConsensusDocument, Keyring, RelayDescriptor, Signature, StatusDocument
from .core.crypto import hash_bytes
from .core.types import DEFAULT_ENTRY_SIZE, AuthorityId
from .dissemination import DigestVector, Inclusion

log = logging.getLogger(__name__)


def default_threshold(n: int) -> int:
    """Strict majority of the configured authorities."""
    return n // 2 + 1


@dataclass(frozen=True)
class FetchRequest:
    slot: int
    h: bytes


@dataclass(frozen=True)
class FetchResponse:
    slot: int
    doc: Optional[StatusDocument]


@dataclass(frozen=True)
class ConsensusSig:
    body_digest: bytes
    sig: Signature


def missing(decided: DigestVector, store: Mapping[int, StatusDocument]) -> set[tuple[int, bytes]]:
    """Non-bottom slots of ``decided`` whose document is not held locally."""
    out = set()
    for j, h in enumerate(decided.entries):
        if h is None:
            continue
        doc = store.get(j)
        if doc is None or doc.digest != h:
            out.add((j, h))
    return out


@dataclass
class Fetcher:
    """Fills the missing slots of a decided vector from peers.

    Candidates for slot j are tried in order: the signers of j's inclusion
    proof, then j itself, then everyone else. A wrong or empty answer moves
    on to the next candidate, wrapping around.
    """

    node: AuthorityId
    n: int
    decided: DigestVector
    store: dict[int, StatusDocument]
    pending: dict[int, bytes] = field(default_factory=dict)
    faulty: set[int] = field(default_factory=set)
    _order: dict[int, list[int]] = field(default_factory=dict)
    _cursor: dict[int, int] = field(default_factory=dict)
    _asked: dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for j, h in sorted(missing(self.decided, self.store)):
            self.pending[j] = h
            proof = self.decided.proofs[j]
            first = [s.signer for s in proof.sigs] if isinstance(proof, Inclusion) else []
            order = []
            for peer in first + [j] + list(range(self.n)):
                if peer != self.node and peer not in order:
                    order.append(peer)
            self._order[j] = order
            self._cursor[j] = 0

    @property
    def done(self) -> bool:
        return not self.pending

    def next_requests(self) -> list[tuple[int, FetchRequest]]:
        """One request per pending slot that has no request outstanding."""
        out = []
        for j, h in sorted(self.pending.items()):
            if j in self._asked:
                continue
            order = self._order[j]
            peer = order[self._cursor[j] % len(order)]
            self._cursor[j] += 1
            self._asked[j] = peer
            out.append((peer, FetchRequest(j, h)))
        return out

    def give_up(self, slot: int) -> None:
        """Forget the outstanding request for ``slot`` (timeout)."""
        self._asked.pop(slot, None)

    def on_response(self, sender: AuthorityId, resp: FetchResponse) -> bool:
        """Store a digest-matching document; returns True if it filled a slot."""
        j = resp.slot
        if j not in self.pending:
            return False
        ok = resp.doc is not None and _safe_digest(resp.doc) == self.pending[j] and resp.doc.author == j
        if ok:
            self.store[j] = resp.doc
            del self.pending[j]
            self._asked.pop(j, None)
            return True
        if resp.doc is not None:
            self.faulty.add(sender)
            log.info("node %d: peer %d answered slot %d with wrong bytes", self.node, sender, j)
        if self._asked.get(j) == sender:
            del self._asked[j]
        return False


def _safe_digest(doc: StatusDocument) -> Optional[bytes]:
    try:
        return doc.digest
    except ValueError:
        return None


def answer_fetch(req: FetchRequest, store: Mapping[int, StatusDocument]) -> FetchResponse:
    doc = store.get(req.slot)
    if doc is not None and doc.digest == req.h:
        return FetchResponse(req.slot, doc)
    return FetchResponse(req.slot, None)


def slot_vector(decided: DigestVector, store: Mapping[int, StatusDocument]) -> list[Optional[StatusDocument]]:
    """Documents aligned with the decided entries; raises if one is missing."""
    slots: list[Optional[StatusDocument]] = []
    for j, h in enumerate(decided.entries):
        if h is None:
            slots.append(None)
            continue
        doc = store.get(j)
        if doc is None or doc.digest != h:
            raise LookupError(f"slot {j} not available locally")
        slots.append(doc)
    return slots


def _lower_median(values: list[int]) -> int:
    values = sorted(values)
    return values[(len(values) - 1) // 2]


def _popular(values: Iterable, tie_key=None):
    """Most common value; ties go to the largest value."""
    counts = Counter(values)
    top = max(counts.values())
    return max((v for v, c in counts.items() if c == top), key=tie_key)


def merge_relay(votes: Sequence[tuple[AuthorityId, RelayDescriptor]]) -> RelayDescriptor:
    """Combine one relay's entries from the votes that list it."""
    votes = sorted(votes, key=lambda av: av[0])
    entries = [r for _, r in votes]
    k = len(entries)
    flags = frozenset(
        name
        for name in set().union(*(r.flags for r in entries))
        if 2 * sum(name in r.flags for r in entries) > k
    )
    measured = [r.bandwidth for r in entries if r.measured and r.bandwidth is not None]
    return RelayDescriptor(
        fingerprint=entries[0].fingerprint,
        nickname=entries[-1].nickname,
        flags=flags,
        version=_popular(r.version for r in entries),
        protocols=_popular(r.protocols for r in entries),
        exit_policy_summary=_popular(r.exit_policy_summary for r in entries),
        bandwidth=_lower_median(measured) if measured else None,
        measured=bool(measured),
    )


def aggregate(slots: Sequence[Optional[StatusDocument]], n: int, t: Optional[int] = None) -> ConsensusDocument:
    """Merge the non-bottom slots into an unsigned consensus document.

    A relay is kept when at least ``t`` slots list it (default: strict
    majority of n). See :func:`merge_relay` for the per-field rules.
    """
    if t is None:
        t = default_threshold(n)
    grouped: dict[bytes, list[tuple[int, RelayDescriptor]]] = {}
    epoch, entry_size = 0, DEFAULT_ENTRY_SIZE
    for j, doc in enumerate(slots):
        if doc is None:
            continue
        epoch, entry_size = doc.epoch, doc.entry_size
        for r in doc.relays:
            grouped.setdefault(r.fingerprint, []).append((j, r))
    relays = tuple(merge_relay(grouped[fp]) for fp in sorted(grouped) if len(grouped[fp]) >= t)
    return ConsensusDocument(relays=relays, epoch=epoch, entry_size=entry_size)


@dataclass
class ConsensusCollector:
    """Signs the local aggregate and gathers 2f+1 matching signatures."""

    node: AuthorityId
    n: int
    f: int
    epoch: int
    keyring: Keyring
    secret: bytes
    doc: Optional[ConsensusDocument] = None
    sigs: dict[int, Signature] = field(default_factory=dict)
    divergent: int = 0
    finalized: Optional[ConsensusDocument] = None
    _early: list[tuple[AuthorityId, ConsensusSig]] = field(default_factory=list)

    @property
    def body_digest(self) -> bytes:
        return hash_bytes(self.doc.body)

    def sign_local(self, doc: ConsensusDocument) -> ConsensusSig:
        self.doc = doc
        h = self.body_digest
        msg = ConsensusSig(h, self.keyring.scheme.sign(self.secret, self.node, Context.CONSENSUS, self.epoch, h))
        self.on_signature(self.node, msg)
        early, self._early = self._early, []
        for sender, m in early:
            self.on_signature(sender, m)
        return msg

    def on_signature(self, sender: AuthorityId, msg: ConsensusSig) -> bool:
        if msg.sig.signer != sender or sender in self.sigs:
            return False
        if not self.keyring.verify(msg.sig, Context.CONSENSUS, self.epoch, msg.body_digest):
            return False
        if self.doc is None:
            self._early.append((sender, msg))
            return False
        if msg.body_digest != self.body_digest:
            self.divergent += 1
            log.warning("node %d: consensus signature from %d over different bytes", self.node, sender)
            return False
        self.sigs[sender] = msg.sig
        if self.finalized is None and len(self.sigs) >= 2 * self.f + 1:
            self.finalized = self.doc.with_signatures(self.sigs.values())
            return True
        return False


def verify_consensus(doc: ConsensusDocument, f: int, keyring: Keyring) -> bool:
    h = hash_bytes(doc.body)
    signers = {s.signer for s in doc.signatures}
    if len(signers) != len(doc.signatures) or len(signers) < 2 * f + 1:
        return False
    return all(keyring.verify(s, Context.CONSENSUS, doc.epoch, h) for s in doc.signatures)
