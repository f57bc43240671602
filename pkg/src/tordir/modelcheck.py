"""Exhaustive bounded exploration of the agreement engine at n=4, f=1.

Node 0 is Byzantine and leads view 0. It holds two different valid
vectors, proposes both, votes for both in both phases and sends an empty
NewView; any correct node may receive any of these at any moment, or
never. Correct nodes 1-3 run the real engine. The explorer tries every
interleaving of message deliveries and view timeouts (views 0 and 1; node 1
leads view 1 with a third vector ready) and checks that no two correct
nodes ever decide different vectors and that locks never move backwards.

Messages are never consumed: once sent, a message stays deliverable, so
the network may also duplicate. Engines ignore duplicates, which keeps the
model finite, and it lets the adversary's messages live outside the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .agreement import (
    AgreementEngine,
    CommitVote,
    LocalReady,
    NewView,
    PrepareVote,
    Propose,
    ViewTimeout,
    newview_payload,
    vote_payload,
)
from .core import Context, Ed25519Scheme, Keyring, RelayDescriptor, SignatureScheme, StatusDocument, generate_keys
from .dissemination import Disseminator, leader_assemble

N, F, EPOCH, BYZ = 4, 1, 1, 0
CORRECT = (1, 2, 3)


@dataclass
class CheckResult:
    states: int
    transitions: int
    complete: bool
    violations: list[str] = field(default_factory=list)
    decisions: set = field(default_factory=set)
    schedules: int = 0
    local_states: int = 0


class _MemoKeyring(Keyring):
    """Keyring that remembers verification results; the explorer re-checks
    the same few signatures millions of times."""

    def verify(self, sig, context, epoch, payload) -> bool:
        cache = self.__dict__.setdefault("_cache", {})
        key = (sig, context, epoch, payload)
        if key not in cache:
            cache[key] = Keyring.verify(self, sig, context, epoch, payload)
        return cache[key]


def _vectors(scheme: SignatureScheme):
    secrets, plain = generate_keys(N, scheme, seed=7)
    keyring = _MemoKeyring(plain.scheme, plain.publics)
    docs = [
        StatusDocument.build(i, [RelayDescriptor(bytes([i + 1]) * 20, f"r{i}")], EPOCH, 64) for i in range(N)
    ]

    def proposal(node: int, held: set[int], view: int):
        d = Disseminator(node, N, F, EPOCH, keyring, secrets[node])
        for j in held:
            msg = Disseminator(j, N, F, EPOCH, keyring, secrets[j]).make_document(docs[j])
            d.on_document(msg)
        return d.build_proposal(view)

    full = {0, 1, 2, 3}
    H_a = leader_assemble([proposal(i, full, 0) for i in (0, 1, 2)], [], N, F, 0)
    H_b = leader_assemble([proposal(0, {0, 1, 2}, 0), proposal(1, {0, 1, 2}, 0), proposal(2, full, 0)], [], N, F, 0)
    H_c = leader_assemble([proposal(1, {0, 1, 3}, 1), proposal(3, {0, 1, 3}, 1), proposal(2, full, 1)], [], N, F, 1)
    assert H_a and H_b and H_c
    assert len({H_a.vector_digest(), H_b.vector_digest(), H_c.vector_digest()}) == 3
    return secrets, keyring, H_a, H_b, H_c


def _noop(engine: AgreementEngine, src: int, msg) -> bool:
    """True when delivering msg can never change the engine again."""
    if engine.decided is not None:
        return True
    if isinstance(msg, CommitVote):
        return msg.sig.signer in engine._commits.get((msg.view, msg.h_H), {})
    if isinstance(msg, Propose):
        if msg.view > engine.view:
            return (src, msg) in engine._future
        return msg.view in engine._accepted and msg.H.vector_digest() in engine._known
    if msg.view < engine.view:
        return True
    if msg.view > engine.view:
        return (src, msg) in engine._future
    if isinstance(msg, PrepareVote):
        return msg.view in engine._committed or msg.sig.signer in engine._prepares.get((msg.view, msg.h_H), {})
    if isinstance(msg, NewView):
        return msg.view in engine._proposed or msg.sig.signer in engine._newviews.get(msg.view, {})
    return False


def split_proposal(node: int, msg) -> bool:
    """Adversary bound: node 2 only ever sees the full vector proposed and
    node 3 only the one excluding slot 3; all Byzantine votes go everywhere."""
    if not isinstance(msg, Propose):
        return True
    return (node, msg.H.entries[3] is None) in ((2, False), (3, True))


def explore(
    scheme: Optional[SignatureScheme] = None,
    max_view: int = 1,
    max_states: int = 2_000_000,
    adversary_filter=None,
    stop_at_first: bool = False,
) -> CheckResult:
    """Depth-first search over all schedules, deduplicating equal states.

    ``adversary_filter(node, msg)`` selects which Byzantine messages may
    ever reach which correct node; None allows all of them.
    """
    scheme = scheme or Ed25519Scheme()
    secrets, keyring, H_a, H_b, H_c = _vectors(scheme)

    def bsign(ctx, payload):
        return scheme.sign(secrets[BYZ], BYZ, ctx, EPOCH, payload)

    byz: list = [Propose(0, H_a), Propose(0, H_b)]
    for H in (H_a, H_b):
        h = H.vector_digest()
        byz.append(PrepareVote(0, h, bsign(Context.AGREE_VOTE, vote_payload(b"P", 0, h))))
        byz.append(CommitVote(0, h, bsign(Context.AGREE_VOTE, vote_payload(b"C", 0, h))))
    byz.append(NewView(1, None, None, bsign(Context.NEWVIEW, newview_payload(1, None))))

    by_id: list[tuple] = []
    intern: dict = {}

    def mid(src, dst, msg) -> int:
        key = (src, dst, msg)
        if key not in intern:
            intern[key] = len(by_id)
            by_id.append(key)
        return intern[key]

    adversary = frozenset(
        mid(BYZ, node, m) for node in CORRECT for m in byz if adversary_filter is None or adversary_filter(node, m)
    )

    # A node's reaction depends only on its fingerprint, so each local state
    # is stepped once per event and the result reused across global states.
    reps: list[AgreementEngine] = []
    local_ids: dict = {}
    memo: dict = {}

    def local_id(engine: AgreementEngine) -> int:
        fp = engine.fingerprint()
        if fp not in local_ids:
            local_ids[fp] = len(reps)
            reps.append(engine)
        return local_ids[fp]

    def step(lid: int, src, msg):
        key = (lid, src, msg)
        if key not in memo:
            eng = reps[lid].clone()
            lock_before = eng.lock_qc.view if eng.lock_qc else -1
            if msg is None:
                out, _ = eng.step(ViewTimeout(eng.view))
            else:
                out, _ = eng.step(msg, src)
            backwards = (eng.lock_qc.view if eng.lock_qc else -1) < lock_before
            memo[key] = (local_id(eng), tuple(out), backwards)
        return memo[key]

    engines = {i: AgreementEngine(i, N, F, EPOCH, keyring, secrets[i], base_timeout=1.0) for i in CORRECT}
    engines[1].step(LocalReady(H_c))
    result = CheckResult(0, 0, True)
    visited: set = set()
    stack = [(tuple(local_id(engines[i]) for i in CORRECT), frozenset())]
    while stack:
        key = stack.pop()
        if key in visited:
            continue
        visited.add(key)
        ids, sent = key
        result.states += 1
        if result.states > max_states:
            result.complete = False
            break
        local = dict(zip(CORRECT, (reps[i] for i in ids)))
        decided = {e.decided.vector_digest() for e in local.values() if e.decided is not None}
        result.decisions |= decided
        if len(decided) > 1:
            result.violations.append("two correct nodes decided different vectors")
            if stop_at_first:
                result.complete = False
                break
            continue
        moves: list[tuple] = []
        for i in sorted(adversary | sent):
            src, dst, msg = by_id[i]
            if not _noop(local[dst], src, msg):
                moves.append((dst, src, msg))
        moves += [(n, None, None) for n, e in local.items() if e.decided is None and e.view < max_view]
        if not moves:
            result.schedules += 1
        for dst, src, msg in moves:
            pos = CORRECT.index(dst)
            new_id, out, backwards = step(ids[pos], src, msg)
            result.transitions += 1
            if backwards:
                result.violations.append(f"lock moved backwards at node {dst}")
            if new_id == ids[pos] and not out:
                continue
            more = [
                mid(dst, t, s.msg)
                for s in out
                for t in ([s.dest] if s.dest is not None else range(N))
                if t != dst and t in local
            ]
            stack.append((ids[:pos] + (new_id,) + ids[pos + 1 :], sent.union(more)))
    result.local_states = len(reps)
    return result
