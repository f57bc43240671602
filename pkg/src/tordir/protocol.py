"""Per-node program for the partially synchronous directory protocol.

Glues dissemination, agreement and aggregation together on top of the
simulator's node interface, and defines the Byzantine variants used in
adversarial runs.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Any, Optional

from .aggregation import (
    ConsensusCollector,
    ConsensusSig,
    Fetcher,
    FetchRequest,
    FetchResponse,
    aggregate,
    answer_fetch,
    slot_vector,
)
from .agreement import (
    AgreementEngine,
    CommitVote,
    LocalReady,
    NewView,
    PrepareVote,
    Propose,
    Send,
    ViewTimeout,
    leader_of,
)
from .core import Keyring, StatusDocument
from .dissemination import (
    DigestVector,
    Disseminator,
    DocumentMessage,
    Inclusion,
    Proposal,
    ProposalCollector,
)
from .program import NodeContext, NodeProgram
from .synth import equivocation_twin

AGREEMENT_TYPES = (Propose, PrepareVote, CommitVote, NewView)


class IcpsNode(NodeProgram):
    def __init__(
        self,
        node: int,
        n: int,
        f: int,
        epoch: int,
        doc: StatusDocument,
        secret: bytes,
        keyring: Keyring,
        delta_s: float = 30.0,
        view_timeout_s: float = 10.0,
        fetch_timeout_s: float = 5.0,
        aggregate_cache: Optional[dict] = None,
    ) -> None:
        self.node, self.n, self.f, self.epoch = node, n, f, epoch
        self.doc = doc
        self.keyring = keyring
        self.delta_s = delta_s
        self.fetch_timeout_s = fetch_timeout_s
        self.diss = Disseminator(node, n, f, epoch, keyring, secret)
        self.engine = AgreementEngine(node, n, f, epoch, keyring, secret, base_timeout=view_timeout_s, on_event=self._engine_event)
        self.consensus = ConsensusCollector(node, n, f, epoch, keyring, secret)
        self.collectors: dict[int, ProposalCollector] = {}
        self.proposed_views: set[int] = set()
        self.held: dict[bytes, StatusDocument] = {}
        self.fetcher: Optional[Fetcher] = None
        self.decided: Optional[DigestVector] = None
        self.depths: dict[str, int] = {}
        self._propose_depth: dict[int, int] = {}
        self._ctx: Optional[NodeContext] = None
        self._aggregate_cache = {} if aggregate_cache is None else aggregate_cache

    # -- simulator hooks ------------------------------------------------

    def start(self, ctx: NodeContext) -> None:
        self._ctx = ctx
        self.send_documents(ctx)
        ctx.set_timer(self.delta_s, "delta")
        ctx.set_timer(self.engine.timeout_for(0), ("view", 0))
        self._maybe_send_proposal(ctx)

    def send_documents(self, ctx: NodeContext) -> None:
        msg = self.diss.start_epoch(self.doc)
        self.held[msg.h] = msg.doc
        ctx.broadcast(msg)

    def on_timer(self, ctx: NodeContext, key: Any) -> None:
        self._ctx = ctx
        if key == "delta":
            self._maybe_send_proposal(ctx)
        elif key[0] == "view":
            self._engine_step(ctx, ViewTimeout(key[1]))
        elif key[0] == "fetch":
            _, slot, attempt = key
            if self.fetcher is not None and self.fetcher._cursor.get(slot) == attempt and slot in self.fetcher.pending:
                self.fetcher.give_up(slot)
                self._issue_fetches(ctx)

    def on_message(self, ctx: NodeContext, src: int, msg: Any) -> None:
        self._ctx = ctx
        if isinstance(msg, DocumentMessage):
            self._on_document(ctx, msg)
        elif isinstance(msg, Proposal):
            if leader_of(msg.view, self.n) == self.node:
                self._collector(msg.view).add(src, msg)
                self._try_ready(ctx)
        elif isinstance(msg, AGREEMENT_TYPES):
            if isinstance(msg, Propose) and msg.view not in self._propose_depth:
                self._propose_depth[msg.view] = ctx.depth
            self._engine_step(ctx, msg, src)
        elif isinstance(msg, FetchRequest):
            ctx.send(src, self.answer_fetch(msg))
        elif isinstance(msg, FetchResponse):
            if self.fetcher is not None and self.fetcher.on_response(src, msg):
                self._issue_fetches(ctx)
        elif isinstance(msg, ConsensusSig):
            if self.consensus.on_signature(src, msg):
                self._finalized(ctx)

    # -- dissemination --------------------------------------------------

    def _on_document(self, ctx: NodeContext, msg: DocumentMessage) -> None:
        before = dict(self.diss.evidence)
        stored = self.diss.on_document(msg)
        if stored or self.diss.evidence != before:
            self.held[msg.h] = msg.doc
        if self.fetcher is not None and msg.author in self.fetcher.pending:
            if self.fetcher.on_response(msg.author, FetchResponse(msg.author, msg.doc)):
                self._issue_fetches(ctx)
        self._maybe_send_proposal(ctx)

    def _collector(self, view: int) -> ProposalCollector:
        if view not in self.collectors:
            self.collectors[view] = ProposalCollector(self.n, self.f, self.epoch, self.keyring, view)
        return self.collectors[view]

    def _maybe_send_proposal(self, ctx: NodeContext) -> None:
        v = self.engine.view
        if v in self.proposed_views or self.engine.decided is not None:
            return
        ready = self.diss.gate(ctx.now, self.delta_s) or (v > 0 and self.diss.received >= self.n - self.f)
        if not ready:
            return
        self.proposed_views.add(v)
        p = self.diss.build_proposal(v)
        leader = leader_of(v, self.n)
        if leader == self.node:
            self._collector(v).add(self.node, p)
            self._try_ready(ctx)
        else:
            ctx.send(leader, p)

    def _try_ready(self, ctx: NodeContext) -> None:
        v = self.engine.view
        if not self.engine.needs_fresh_vector() or v not in self.collectors:
            return
        H = self.collectors[v].assemble(self.diss.evidence)
        if H is not None:
            self._engine_step(ctx, LocalReady(H))

    # -- agreement ------------------------------------------------------

    def _engine_event(self, kind: str, info: dict) -> None:
        if self._ctx is not None:
            self._ctx.log(kind, **info)

    def transform_outbound(self, sends: list[Send]) -> list[Send]:
        return sends

    def _engine_step(self, ctx: NodeContext, event: Any, sender: Optional[int] = None) -> None:
        prev_view = self.engine.view
        out, decided = self.engine.step(event, sender)
        for s in self.transform_outbound(out):
            if isinstance(s.msg, Propose):
                self._propose_depth.setdefault(s.msg.view, ctx.depth + 1)
            if s.dest is None:
                ctx.broadcast(s.msg)
            else:
                ctx.send(s.dest, s.msg)
        if self.engine.view != prev_view:
            v = self.engine.view
            if self.engine.decided is None:
                ctx.set_timer(self.engine.timeout_for(v), ("view", v))
            self._maybe_send_proposal(ctx)
        self._try_ready(ctx)
        if decided is not None:
            self._on_decide(ctx, decided)

    # -- aggregation ----------------------------------------------------

    def answer_fetch(self, req: FetchRequest) -> FetchResponse:
        doc = self.held.get(req.h)
        if doc is not None and doc.author == req.slot:
            return FetchResponse(req.slot, doc)
        return answer_fetch(req, {})

    def _on_decide(self, ctx: NodeContext, H: DigestVector) -> None:
        self.decided = H
        self.depths["decide"] = ctx.depth
        self.depths["propose"] = self._propose_depth.get(self.engine.decided_view, 0)
        ctx.log("decided", view=self.engine.decided_view, present=H.present_count, h_H=H.vector_digest())
        store = {j: self.held[h] for j, h in enumerate(H.entries) if h is not None and h in self.held}
        self.fetcher = Fetcher(self.node, self.n, H, store)
        self._issue_fetches(ctx)

    def _issue_fetches(self, ctx: NodeContext) -> None:
        fetcher = self.fetcher
        for peer, req in fetcher.next_requests():
            ctx.send(peer, req)
            ctx.set_timer(self.fetch_timeout_s, ("fetch", req.slot, fetcher._cursor[req.slot]))
        if fetcher.done and "fetched" not in self.depths:
            self.depths["fetched"] = ctx.depth
            self._aggregate_and_sign(ctx)

    def _aggregate_and_sign(self, ctx: NodeContext) -> None:
        H = self.decided
        key = H.vector_digest()
        if key not in self._aggregate_cache:
            self._aggregate_cache[key] = aggregate(slot_vector(H, self.fetcher.store), self.n)
        msg = self.consensus.sign_local(self._aggregate_cache[key])
        ctx.broadcast(msg)
        if self.consensus.finalized is not None:
            self._finalized(ctx)

    def _finalized(self, ctx: NodeContext) -> None:
        self.depths["finalize"] = ctx.depth
        doc = self.consensus.finalized
        ctx.finish(
            decided_view=self.engine.decided_view,
            h_H=self.decided.vector_digest().hex(),
            present=self.decided.present_count,
            body=self.consensus.body_digest.hex(),
            relays=len(doc.relays),
            signatures=len(doc.signatures),
            faulty_fetch=len(self.fetcher.faulty),
        )


class SilentNode(NodeProgram):
    """Sends nothing and ignores everything."""


class EquivocatingNode(IcpsNode):
    """Sends one document to half of its peers and a different one to the rest."""

    def send_documents(self, ctx: NodeContext) -> None:
        a = self.diss.start_epoch(self.doc)
        b = self.diss.make_document(equivocation_twin(self.doc))
        self.held[a.h] = a.doc
        self.held[b.h] = b.doc
        peers = [p for p in range(self.n) if p != self.node]
        half = len(peers) // 2
        for p in peers[:half]:
            ctx.send(p, a)
        for p in peers[half:]:
            ctx.send(p, b)


class BogusProposeNode(IcpsNode):
    """Honest except that, as leader, it proposes a vector with a broken proof."""

    def transform_outbound(self, sends: list[Send]) -> list[Send]:
        out = []
        for s in sends:
            if isinstance(s.msg, Propose):
                s = Send(s.dest, replace(s.msg, H=_break_vector(s.msg.H)))
            out.append(s)
        return out


def _break_vector(H: DigestVector) -> DigestVector:
    proofs = list(H.proofs)
    for j, proof in enumerate(proofs):
        if isinstance(proof, Inclusion):
            proofs[j] = Inclusion(proof.sigs[:-1])
            break
    return DigestVector(H.entries, tuple(proofs), H.view)


class WrongFetchNode(IcpsNode):
    """Answers every fetch with a document that does not match the request."""

    def answer_fetch(self, req: FetchRequest) -> FetchResponse:
        wrong = self.doc if self.doc.digest != req.h else equivocation_twin(self.doc)
        return FetchResponse(req.slot, wrong)


BEHAVIOUR_CLASSES = {
    "equivocate": EquivocatingNode,
    "bogus_propose": BogusProposeNode,
    "wrong_fetch": WrongFetchNode,
}
