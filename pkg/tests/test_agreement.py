from __future__ import annotations

import pytest

from tordir.agreement import (
    AgreementEngine,
    CommitVote,
    LocalReady,
    PrepareQC,
    PrepareVote,
    Propose,
    ViewTimeout,
    leader_of,
    quorum,
    validate_proposal,
    vote_payload,
)
from tordir.core import Context


def engines(cluster, silent=()):
    return {
        i: AgreementEngine(i, cluster.n, cluster.f, cluster.epoch, cluster.keyring, cluster.secrets[i], base_timeout=1.0)
        for i in range(cluster.n)
        if i not in silent
    }


def lockstep(nodes, first):
    """Deliver everything sent in round k at round k+1; return rounds used."""
    inflight = [(src, s) for src, out in first for s in out]
    rounds = 0
    while inflight:
        rounds += 1
        nxt = []
        for src, s in inflight:
            targets = [s.dest] if s.dest is not None else [t for t in nodes if t != src]
            for t in targets:
                if t in nodes:
                    out, _ = nodes[t].step(s.msg, src)
                    nxt += [(t, o) for o in out]
        inflight = nxt
        if all(e.decided is not None for e in nodes.values()):
            break
    return rounds


def test_leader_rotation():
    assert [leader_of(v, 4) for v in range(6)] == [0, 1, 2, 3, 0, 1]
    with pytest.raises(ValueError):
        leader_of(0, 0)
    assert quorum(2) == 5


def test_happy_path_three_rounds(cluster):
    H = cluster.vector({i: range(4) for i in range(3)})
    nodes = engines(cluster)
    out, _ = nodes[0].step(LocalReady(H))
    rounds = lockstep(nodes, [(0, out)])
    assert rounds == 3
    assert all(e.decided == H and e.decided_view == 0 for e in nodes.values())


def test_silent_leader_decides_in_view_one(cluster):
    H1 = cluster.vector({i: range(4) for i in (1, 2, 3)}, view=1)
    nodes = engines(cluster, silent={0})
    nodes[1].step(LocalReady(H1))
    first = [(i, nodes[i].step(ViewTimeout(0))[0]) for i in nodes]
    lockstep(nodes, first)
    assert all(e.decided == H1 and e.decided_view == 1 for e in nodes.values())


def test_timeouts_double(cluster):
    e = engines(cluster)[1]
    assert [e.timeout_for(v) for v in range(4)] == [1.0, 2.0, 4.0, 8.0]


def _qc(cluster, view, h, signers=(0, 1, 2)):
    sigs = tuple(
        cluster.scheme.sign(cluster.secrets[s], s, Context.AGREE_VOTE, cluster.epoch, vote_payload(b"P", view, h))
        for s in signers
    )
    return PrepareQC(view, h, sigs)


def test_locked_node_refuses_conflicting_proposal_without_justify(cluster):
    Ha = cluster.vector({i: range(4) for i in range(3)}, view=2)
    Hb = cluster.vector({0: [0, 1, 2], 1: [0, 1, 2], 2: range(4)}, view=3)
    e = engines(cluster)[1]
    e.view = 3
    e.lock_qc, e.lock_H = _qc(cluster, 2, Ha.vector_digest()), Ha
    out, _ = e.step(Propose(3, Hb), 3)
    assert not any(isinstance(s.msg, PrepareVote) for s in out)
    # a justify QC at least as high as the lock unlocks it
    e2 = engines(cluster)[2]
    e2.view = 3
    e2.lock_qc, e2.lock_H = _qc(cluster, 1, Ha.vector_digest()), Ha
    out, _ = e2.step(Propose(3, Hb, _qc(cluster, 2, Hb.vector_digest())), 3)
    assert any(isinstance(s.msg, PrepareVote) for s in out)


def test_propose_from_non_leader_rejected(cluster):
    H = cluster.vector({i: range(4) for i in range(3)})
    assert not validate_proposal(1, Propose(0, H), 4, 1, cluster.keyring, cluster.epoch)
    e = engines(cluster)[2]
    e.step(Propose(0, H), 1)
    assert e.rejected_proposals == 1


def test_justify_must_match_and_be_older(cluster):
    H = cluster.vector({i: range(4) for i in range(3)})
    h = H.vector_digest()
    ok = Propose(2, H, _qc(cluster, 1, h))
    assert validate_proposal(2, ok, 4, 1, cluster.keyring, cluster.epoch)
    assert not validate_proposal(2, Propose(2, H, _qc(cluster, 2, h)), 4, 1, cluster.keyring, cluster.epoch)
    assert not validate_proposal(2, Propose(2, H, _qc(cluster, 1, bytes(32))), 4, 1, cluster.keyring, cluster.epoch)
    assert not validate_proposal(2, Propose(2, H, _qc(cluster, 1, h, (0, 0, 1))), 4, 1, cluster.keyring, cluster.epoch)


def test_duplicate_and_misattributed_votes_ignored(cluster):
    H = cluster.vector({i: range(4) for i in range(3)})
    h = H.vector_digest()
    e = engines(cluster)[3]
    e.step(Propose(0, H), 0)
    sig1 = cluster.scheme.sign(cluster.secrets[1], 1, Context.AGREE_VOTE, cluster.epoch, vote_payload(b"P", 0, h))
    e.step(PrepareVote(0, h, sig1), 1)
    e.step(PrepareVote(0, h, sig1), 1)
    e.step(PrepareVote(0, h, sig1), 2)
    assert set(e._prepares[(0, h)]) == {1, 3}
    assert e.lock_qc is None


def test_future_messages_are_buffered(cluster):
    H1 = cluster.vector({i: range(4) for i in (1, 2, 3)}, view=1)
    e = engines(cluster)[2]
    e.step(Propose(1, H1), 1)
    assert e._accepted == {}
    out, _ = e.step(ViewTimeout(0))
    assert e._accepted == {1: H1.vector_digest()}
    assert any(isinstance(s.msg, PrepareVote) and s.msg.view == 1 for s in out)


def test_stale_timeout_ignored(cluster):
    e = engines(cluster)[1]
    e.step(ViewTimeout(0))
    out, _ = e.step(ViewTimeout(0))
    assert e.view == 1 and out == []


def test_commit_quorum_from_earlier_view_decides(cluster):
    H = cluster.vector({i: range(4) for i in range(3)})
    h = H.vector_digest()
    e = engines(cluster)[3]
    e.step(Propose(0, H), 0)
    e.step(ViewTimeout(0))
    for s in (0, 1, 2):
        sig = cluster.scheme.sign(cluster.secrets[s], s, Context.AGREE_VOTE, cluster.epoch, vote_payload(b"C", 0, h))
        e.step(CommitVote(0, h, sig), s)
    assert e.decided == H and e.decided_view == 0


def test_lock_never_moves_backwards(cluster):
    H = cluster.vector({i: range(4) for i in range(3)})
    nodes = engines(cluster)
    seen = {i: -1 for i in nodes}
    out, _ = nodes[0].step(LocalReady(H))
    inflight = [(0, s) for s in out]
    while inflight:
        src, s = inflight.pop()
        for t in [s.dest] if s.dest is not None else [t for t in nodes if t != src]:
            more, _ = nodes[t].step(s.msg, src)
            inflight += [(t, m) for m in more]
            v = nodes[t].lock_qc.view if nodes[t].lock_qc else -1
            assert v >= seen[t]
            seen[t] = v
