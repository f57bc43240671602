from __future__ import annotations

import dataclasses

import pytest

from tordir.core import RelayDescriptor, Signature, StatusDocument
from tordir.dissemination import (
    Absent,
    DigestVector,
    DocumentMessage,
    Equivocation,
    Exclusion,
    Inclusion,
    Present,
    ProposalCollector,
    check_equivocation,
    check_proposal,
    leader_assemble,
    proposal_gate,
    verify_vector,
)


def twin(cluster, j):
    """A second, different document signed by author j."""
    d = cluster.docs[j]
    return StatusDocument.build(j, list(d.relays) + [RelayDescriptor(b"\xfe" * 8, "extra")], d.epoch, d.entry_size)


def test_document_message_contract(cluster):
    msg = cluster.doc_msg(3)
    assert msg.doc == cluster.docs[3] and msg.h == cluster.docs[3].digest and msg.sig.signer == 3


def test_invalid_documents_dropped_and_counted(cluster):
    d = cluster.node(0)
    good = cluster.doc_msg(1)
    assert not d.on_document(DocumentMessage(good.doc, bytes(32), good.sig))
    assert not d.on_document(DocumentMessage(good.doc, good.h, Signature(2, good.sig.value)))
    assert d.dropped_invalid == 2 and d.received == 0
    assert d.on_document(good)


def test_second_document_from_same_author_is_evidence(cluster):
    d = cluster.node(0)
    d.on_document(cluster.doc_msg(1))
    d.on_document(cluster.doc_msg(1, twin(cluster, 1)))
    ev = d.evidence[1]
    assert ev.h1 != ev.h2 and check_equivocation(ev, cluster.keyring, cluster.epoch, slot=1)


def test_all_honest_cluster_everyone_holds_everything(cluster):
    nodes = [cluster.node(i) for i in range(4)]
    msgs = [nodes[i].start_epoch(cluster.docs[i]) for i in range(4)]
    for node in nodes:
        for m in msgs:
            node.on_document(m)
    assert all(node.received == 4 for node in nodes)


@pytest.mark.parametrize(
    "received,clock,expected",
    [(4, 0.0, True), (3, 0.0, False), (3, 30.0, True), (2, 100.0, False)],
)
def test_gate(received, clock, expected):
    assert proposal_gate(received, clock, 4, 1, 30.0) is expected


def test_proposal_slots(cluster):
    p = cluster.proposal(0, [0, 1, 2])
    assert [type(s) for s in p.slots] == [Present, Present, Present, Absent]
    assert check_proposal(p, 4, 1, cluster.keyring, cluster.epoch)


def test_proposal_refused_below_n_minus_f(cluster):
    d = cluster.node(0)
    for j in (0, 1):
        d.on_document(cluster.doc_msg(j))
    with pytest.raises(RuntimeError):
        d.build_proposal(0)


def test_equivocating_sender_marked_absent_with_evidence(cluster):
    d = cluster.node(0)
    for j in (0, 1, 2, 3):
        d.on_document(cluster.doc_msg(j))
    d.on_document(cluster.doc_msg(1, twin(cluster, 1)))
    p = d.build_proposal(0)
    assert isinstance(p.slots[1], Absent)
    assert p.evidence[0].owner == 1
    assert check_proposal(p, 4, 1, cluster.keyring, cluster.epoch)


def test_inclusion_with_f_plus_one_signatures(cluster):
    H = cluster.vector({i: range(4) for i in range(3)})
    assert H.entries[2] == cluster.docs[2].digest
    assert isinstance(H.proofs[2], Inclusion) and len(H.proofs[2].sigs) == 2
    assert verify_vector(H, 4, 1, cluster.keyring, cluster.epoch)


def test_exclusion_when_f_plus_one_absent(cluster):
    H = cluster.vector({0: [0, 1, 2], 1: [0, 1, 2], 2: range(4)})
    assert H.entries[3] is None and isinstance(H.proofs[3], Exclusion) and len(H.proofs[3].sigs) == 2
    assert verify_vector(H, 4, 1, cluster.keyring, cluster.epoch)


def test_equivocation_from_evidence(cluster):
    props = [cluster.proposal(i, range(4)) for i in range(3)]
    a, b = cluster.doc_msg(1), cluster.doc_msg(1, twin(cluster, 1))
    ev = Equivocation(a.h, a.sig, b.h, b.sig).normalized()
    H = leader_assemble(props, [ev], 4, 1, 0)
    assert H.entries[1] is None and isinstance(H.proofs[1], Equivocation)
    assert verify_vector(H, 4, 1, cluster.keyring, cluster.epoch)


def test_equivocation_from_conflicting_present_slots(cluster):
    p0 = cluster.proposal(0, range(4))
    d = cluster.node(1)
    for j in (0, 2, 3):
        d.on_document(cluster.doc_msg(j))
    d.on_document(cluster.doc_msg(1, twin(cluster, 1)))
    p1 = d.build_proposal(0)
    p2 = cluster.proposal(2, range(4))
    H = leader_assemble([p0, p1, p2], [], 4, 1, 0)
    assert H.entries[1] is None and isinstance(H.proofs[1], Equivocation)


def test_not_ready_with_too_few_entries(cluster):
    props = [cluster.proposal(i, range(4)) for i in range(3)]
    evidence = []
    for j in (2, 3):
        a, b = cluster.doc_msg(j), cluster.doc_msg(j, twin(cluster, j))
        evidence.append(Equivocation(a.h, a.sig, b.h, b.sig))
    assert leader_assemble(props, evidence, 4, 1, 0) is None


def test_split_slot_is_undecided(cluster):
    props = [cluster.proposal(0, [0, 1, 3]), cluster.proposal(1, [0, 1, 2])]
    assert leader_assemble(props, [], 4, 1, 0) is None


def test_undecided_slot_means_not_ready(cluster):
    props = [cluster.proposal(0, [0, 1, 2]), cluster.proposal(1, range(4)), cluster.proposal(2, [0, 1, 2])]
    H = leader_assemble(props, [], 4, 1, 0)
    assert H is not None and H.entries[3] is None
    props = [cluster.proposal(0, [0, 1, 2]), cluster.proposal(1, range(4)), cluster.proposal(3, range(4))]
    H = leader_assemble(props, [], 4, 1, 0)
    assert H.entries[3] == cluster.docs[3].digest


def test_verify_vector_rejects_tampering(cluster):
    H = cluster.vector({i: range(4) for i in range(3)})
    ring, ep = cluster.keyring, cluster.epoch
    entries = list(H.entries)
    entries[0] = bytes(32)
    assert not verify_vector(dataclasses.replace(H, entries=tuple(entries)), 4, 1, ring, ep)
    proofs = list(H.proofs)
    proofs[0] = Inclusion(H.proofs[0].sigs[:1])
    assert not verify_vector(dataclasses.replace(H, proofs=tuple(proofs)), 4, 1, ring, ep)
    proofs[0] = Inclusion((H.proofs[0].sigs[0], H.proofs[0].sigs[0]))
    assert not verify_vector(dataclasses.replace(H, proofs=tuple(proofs)), 4, 1, ring, ep)
    assert not verify_vector(H, 4, 1, ring, ep + 1)
    empty = DigestVector((None,) * 4, (Exclusion(()),) * 4, 0)
    assert not verify_vector(empty, 4, 1, ring, ep)


def test_collector_ignores_duplicates_and_wrong_view(cluster):
    col = ProposalCollector(4, 1, cluster.epoch, cluster.keyring, view=0)
    p = cluster.proposal(0, range(4))
    assert col.add(0, p)
    assert not col.add(0, p)
    assert not col.add(1, p)
    assert not col.add(1, cluster.proposal(1, range(4), view=1))
    forged = dataclasses.replace(cluster.proposal(2, range(4)), slots=p.slots)
    assert not col.add(2, forged) and col.rejected == 1
