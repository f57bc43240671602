"""Single-shot view-based Byzantine agreement on a digest vector.

PBFT-style: the view leader broadcasts Propose, every node broadcasts a
PrepareVote, a node holding 2f+1 matching PrepareVotes locks on the value
and broadcasts a CommitVote, and 2f+1 matching CommitVotes decide. On a
view timeout nodes move to the next view (timer doubles) and send the new
leader a NewView carrying their lock; the new leader re-proposes the value
of the highest lock it sees among 2f+1 NewViews, or a fresh ready vector.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .core import Context, Keyring, Signature
from .core.crypto import is_digest
from .core.types import AuthorityId
from .dissemination import DigestVector, verify_vector

log = logging.getLogger(__name__)

DEFAULT_VIEW_TIMEOUT_S = 10.0


def leader_of(view: int, n: int) -> AuthorityId:
    if n < 1:
        raise ValueError("n must be positive")
    return view % n


def quorum(f: int) -> int:
    return 2 * f + 1


def vote_payload(phase: bytes, view: int, h_H: bytes) -> bytes:
    return phase + struct.pack(">Q", view) + h_H


@dataclass(frozen=True)
class PrepareQC:
    view: int
    h_H: bytes
    sigs: tuple[Signature, ...]


@dataclass(frozen=True)
class Propose:
    view: int
    H: DigestVector
    justify: Optional[PrepareQC] = None


@dataclass(frozen=True)
class PrepareVote:
    view: int
    h_H: bytes
    sig: Signature


@dataclass(frozen=True)
class CommitVote:
    view: int
    h_H: bytes
    sig: Signature


@dataclass(frozen=True)
class NewView:
    view: int
    highest_prepare: Optional[PrepareQC]
    locked: Optional[DigestVector]
    sig: Signature


AgreementMsg = Union[Propose, PrepareVote, CommitVote, NewView]


@dataclass(frozen=True)
class ViewTimeout:
    view: int


@dataclass(frozen=True)
class LocalReady:
    H: DigestVector


def newview_payload(view: int, qc: Optional[PrepareQC]) -> bytes:
    if qc is None:
        return struct.pack(">QB", view, 0)
    return struct.pack(">QBQ", view, 1, qc.view) + qc.h_H


def check_qc(qc: PrepareQC, n: int, f: int, keyring: Keyring, epoch: int) -> bool:
    if not is_digest(qc.h_H) or len(qc.sigs) != quorum(f):
        return False
    if len({s.signer for s in qc.sigs}) != len(qc.sigs):
        return False
    payload = vote_payload(b"P", qc.view, qc.h_H)
    return all(0 <= s.signer < n and keyring.verify(s, Context.AGREE_VOTE, epoch, payload) for s in qc.sigs)


def validate_proposal(sender: AuthorityId, msg: Propose, n: int, f: int, keyring: Keyring, epoch: int) -> bool:
    if sender != leader_of(msg.view, n):
        return False
    if not verify_vector(msg.H, n, f, keyring, epoch):
        return False
    if msg.justify is not None:
        if msg.justify.h_H != msg.H.vector_digest() or msg.justify.view >= msg.view:
            return False
        if not check_qc(msg.justify, n, f, keyring, epoch):
            return False
    return True


@dataclass
class Send:
    """Outbound message; ``dest=None`` means every other node."""

    dest: Optional[AuthorityId]
    msg: AgreementMsg


@dataclass
class AgreementEngine:
    """Agreement state machine for one node.

    Feed it events with :meth:`step`; it returns the messages to send and the
    decided vector the first time a decision is reached. Own broadcasts are
    applied locally before returning.
    """

    node: AuthorityId
    n: int
    f: int
    epoch: int
    keyring: Keyring
    secret: bytes
    base_timeout: float = DEFAULT_VIEW_TIMEOUT_S
    on_event: Optional[Callable[[str, dict], None]] = None

    view: int = 0
    lock_qc: Optional[PrepareQC] = None
    lock_H: Optional[DigestVector] = None
    decided: Optional[DigestVector] = None
    decided_view: Optional[int] = None
    rejected_proposals: int = 0

    _voted: set[int] = field(default_factory=set)
    _proposed: set[int] = field(default_factory=set)
    _known: dict[bytes, DigestVector] = field(default_factory=dict)
    _accepted: dict[int, bytes] = field(default_factory=dict)
    _prepares: dict[tuple[int, bytes], dict[int, Signature]] = field(default_factory=dict)
    _commits: dict[tuple[int, bytes], dict[int, Signature]] = field(default_factory=dict)
    _committed: set[int] = field(default_factory=set)
    _newviews: dict[int, dict[int, NewView]] = field(default_factory=dict)
    _ready: dict[int, DigestVector] = field(default_factory=dict)
    _future: list[tuple[AuthorityId, AgreementMsg]] = field(default_factory=list)
    _out: list[Send] = field(default_factory=list)

    # -- public surface -------------------------------------------------

    @property
    def leader(self) -> AuthorityId:
        return leader_of(self.view, self.n)

    def timeout_for(self, view: int) -> float:
        return self.base_timeout * (2**view)

    def step(self, event, sender: Optional[AuthorityId] = None) -> tuple[list[Send], Optional[DigestVector]]:
        before = self.decided
        if isinstance(event, LocalReady):
            self._local_ready(event.H)
        elif isinstance(event, ViewTimeout):
            self._timeout(event.view)
        else:
            if sender is None:
                raise ValueError("network messages need a sender")
            self._receive(sender, event)
        out, self._out = self._out, []
        return out, (self.decided if before is None and self.decided is not None else None)

    def needs_fresh_vector(self) -> bool:
        """True when this node leads the current view and may propose a fresh vector."""
        if self.decided is not None or self.leader != self.node or self.view in self._proposed:
            return False
        if self.view == 0:
            return True
        nvs = self._newviews.get(self.view, {})
        return len(nvs) >= quorum(self.f) and not any(nv.highest_prepare for nv in nvs.values())

    def clone(self) -> "AgreementEngine":
        """Copy of the mutable bookkeeping; immutable messages are shared."""
        c = AgreementEngine.__new__(AgreementEngine)
        c.__dict__.update(self.__dict__)
        c._voted = set(self._voted)
        c._proposed = set(self._proposed)
        c._known = dict(self._known)
        c._accepted = dict(self._accepted)
        c._prepares = {k: dict(v) for k, v in self._prepares.items()}
        c._commits = {k: dict(v) for k, v in self._commits.items()}
        c._committed = set(self._committed)
        c._newviews = {k: dict(v) for k, v in self._newviews.items()}
        c._ready = dict(self._ready)
        c._future = list(self._future)
        c._out = []
        return c

    def fingerprint(self) -> tuple:
        """Hashable summary of everything that affects future behaviour.

        Bookkeeping for views the engine has left is never read again, so it
        is left out; two engines with equal fingerprints react identically
        to every future event.
        """
        if self.decided is not None:
            return (self.node, "decided", self.decided.vector_digest())
        v = self.view
        return (
            self.node,
            v,
            self.lock_qc,
            frozenset(x for x in self._voted if x >= v),
            frozenset(x for x in self._proposed if x >= v),
            frozenset(self._known.items()),
            frozenset((k, h) for k, h in self._accepted.items() if k >= v),
            frozenset(
                (k, frozenset(b)) for k, b in self._prepares.items() if k[0] >= v and k[0] not in self._committed
            ),
            frozenset((k, frozenset(b)) for k, b in self._commits.items()),
            frozenset(x for x in self._committed if x >= v),
            frozenset((k, frozenset(b.items())) for k, b in self._newviews.items() if k >= v and k not in self._proposed),
            frozenset((k, H) for k, H in self._ready.items() if k >= v),
            tuple(self._future),
        )

    # -- internals ------------------------------------------------------

    def _emit(self, kind: str, **info) -> None:
        if self.on_event is not None:
            self.on_event(kind, info)

    def _sign(self, ctx: Context, payload: bytes) -> Signature:
        return self.keyring.scheme.sign(self.secret, self.node, ctx, self.epoch, payload)

    def _broadcast(self, msg: AgreementMsg) -> None:
        self._out.append(Send(None, msg))
        self._receive(self.node, msg)

    def _send(self, dest: AuthorityId, msg: AgreementMsg) -> None:
        if dest == self.node:
            self._receive(self.node, msg)
        else:
            self._out.append(Send(dest, msg))

    def _local_ready(self, H: DigestVector) -> None:
        self._ready.setdefault(H.view, H)
        self._maybe_propose()

    def _maybe_propose(self) -> None:
        v = self.view
        if self.decided is not None or self.leader != self.node or v in self._proposed:
            return
        if v == 0:
            H = self._ready.get(0)
            if H is not None:
                self._proposed.add(v)
                self._broadcast(Propose(v, H, None))
            return
        nvs = self._newviews.get(v, {})
        if len(nvs) < quorum(self.f):
            return
        best = max(
            (nv for nv in nvs.values() if nv.highest_prepare is not None),
            key=lambda nv: nv.highest_prepare.view,
            default=None,
        )
        if best is not None:
            self._proposed.add(v)
            self._broadcast(Propose(v, best.locked, best.highest_prepare))
        elif v in self._ready:
            self._proposed.add(v)
            self._broadcast(Propose(v, self._ready[v], None))

    def _timeout(self, view: int) -> None:
        if self.decided is not None or view != self.view:
            return
        self.view += 1
        self._emit("view_change", view=self.view)
        qc = self.lock_qc
        sig = self._sign(Context.NEWVIEW, newview_payload(self.view, qc))
        self._send(leader_of(self.view, self.n), NewView(self.view, qc, self.lock_H if qc else None, sig))
        pending, self._future = self._future, []
        for sender, msg in pending:
            self._receive(sender, msg)
        self._maybe_propose()

    def _receive(self, sender: AuthorityId, msg: AgreementMsg) -> None:
        if isinstance(msg, CommitVote):
            self._on_commit(sender, msg)
            return
        if msg.view > self.view:
            if self.decided is None:
                self._future.append((sender, msg))
            return
        if msg.view < self.view or self.decided is not None:
            if isinstance(msg, Propose) and msg.H.vector_digest() not in self._known:
                if validate_proposal(sender, msg, self.n, self.f, self.keyring, self.epoch):
                    self._known[msg.H.vector_digest()] = msg.H
                    self._try_decide()
            return
        if isinstance(msg, Propose):
            self._on_propose(sender, msg)
        elif isinstance(msg, PrepareVote):
            self._on_prepare(sender, msg)
        elif isinstance(msg, NewView):
            self._on_newview(sender, msg)

    def _on_propose(self, sender: AuthorityId, msg: Propose) -> None:
        if msg.view in self._accepted:
            return
        if not validate_proposal(sender, msg, self.n, self.f, self.keyring, self.epoch):
            self.rejected_proposals += 1
            self._emit("reject_propose", view=msg.view, sender=sender)
            return
        h_H = msg.H.vector_digest()
        self._known[h_H] = msg.H
        self._accepted[msg.view] = h_H
        safe = (
            self.lock_qc is None
            or self.lock_qc.h_H == h_H
            or (msg.justify is not None and msg.justify.view >= self.lock_qc.view)
        )
        if safe and msg.view not in self._voted:
            self._voted.add(msg.view)
            sig = self._sign(Context.AGREE_VOTE, vote_payload(b"P", msg.view, h_H))
            self._broadcast(PrepareVote(msg.view, h_H, sig))
        self._check_prepared(msg.view, h_H)
        self._try_decide()

    def _on_prepare(self, sender: AuthorityId, vote: PrepareVote) -> None:
        if vote.sig.signer != sender or not is_digest(vote.h_H):
            return
        key = (vote.view, vote.h_H)
        bucket = self._prepares.setdefault(key, {})
        if sender in bucket:
            return
        if not self.keyring.verify(vote.sig, Context.AGREE_VOTE, self.epoch, vote_payload(b"P", vote.view, vote.h_H)):
            return
        bucket[sender] = vote.sig
        self._check_prepared(vote.view, vote.h_H)

    def _check_prepared(self, view: int, h_H: bytes) -> None:
        bucket = self._prepares.get((view, h_H), {})
        if view in self._committed or view != self.view or len(bucket) < quorum(self.f):
            return
        if self._accepted.get(view) != h_H:
            return
        signers = sorted(bucket)[: quorum(self.f)]
        qc = PrepareQC(view, h_H, tuple(bucket[s] for s in signers))
        if self.lock_qc is None or qc.view >= self.lock_qc.view:
            self.lock_qc, self.lock_H = qc, self._known[h_H]
            self._emit("lock", view=view, h_H=h_H.hex())
        self._committed.add(view)
        sig = self._sign(Context.AGREE_VOTE, vote_payload(b"C", view, h_H))
        self._broadcast(CommitVote(view, h_H, sig))

    def _on_commit(self, sender: AuthorityId, vote: CommitVote) -> None:
        if vote.sig.signer != sender or not is_digest(vote.h_H):
            return
        key = (vote.view, vote.h_H)
        bucket = self._commits.setdefault(key, {})
        if sender in bucket:
            return
        if not self.keyring.verify(vote.sig, Context.AGREE_VOTE, self.epoch, vote_payload(b"C", vote.view, vote.h_H)):
            return
        bucket[sender] = vote.sig
        self._try_decide()

    def _try_decide(self) -> None:
        if self.decided is not None:
            return
        for (view, h_H), bucket in sorted(self._commits.items()):
            if len(bucket) >= quorum(self.f) and h_H in self._known:
                self.decided = self._known[h_H]
                self.decided_view = view
                self._emit("decide", view=view, h_H=h_H.hex())
                return

    def _on_newview(self, sender: AuthorityId, nv: NewView) -> None:
        if leader_of(nv.view, self.n) != self.node or nv.sig.signer != sender:
            return
        bucket = self._newviews.setdefault(nv.view, {})
        if sender in bucket:
            return
        if not self.keyring.verify(nv.sig, Context.NEWVIEW, self.epoch, newview_payload(nv.view, nv.highest_prepare)):
            return
        qc = nv.highest_prepare
        if qc is not None:
            if nv.locked is None or qc.view >= nv.view or nv.locked.vector_digest() != qc.h_H:
                return
            if not check_qc(qc, self.n, self.f, self.keyring, self.epoch):
                return
            if not verify_vector(nv.locked, self.n, self.f, self.keyring, self.epoch):
                return
        bucket[sender] = nv
        self._maybe_propose()

