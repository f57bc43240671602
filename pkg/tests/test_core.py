from __future__ import annotations

import hashlib
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tordir.core import (
    Context,
    Ed25519Scheme,
    EncodingError,
    MacScheme,
    RelayDescriptor,
    StatusDocument,
    canonical_encode,
    decode_status,
    generate_keys,
)
from tordir.core.encoding import decode_consensus, encode_consensus
from tordir.core.types import ConsensusDocument, Signature

EMPTY_DIGEST_EPOCH7 = "14e485b15fc6351910f0b401064ab020f7888f79e46f7866b1583ff3e128703a"


# -- independent byte-layout oracle -------------------------------------


def oracle_relay(r: RelayDescriptor, entry_size: int) -> bytes:
    body = bytearray()
    body += struct.pack(">H", len(r.fingerprint)) + r.fingerprint
    nick = r.nickname.encode()
    body += struct.pack(">H", len(nick)) + nick
    body += struct.pack(">B", len(r.flags))
    for flag in sorted(r.flags):
        body += struct.pack(">B", len(flag)) + flag.encode("ascii")
    body += struct.pack(">B", len(r.version))
    for part in r.version:
        body += struct.pack(">I", part)
    body += struct.pack(">I", r.protocols)
    pol = r.exit_policy_summary.encode()
    body += struct.pack(">H", len(pol)) + pol
    if r.bandwidth is None:
        body += b"\x00"
    else:
        body += b"\x01" + struct.pack(">Q", r.bandwidth)
    body += b"\x01" if r.measured else b"\x00"
    total = max(entry_size, 4 + len(body))
    body += bytes(total - 4 - len(body))
    return struct.pack(">I", len(body)) + bytes(body)


def oracle_status(author: int, epoch: int, relays: list[RelayDescriptor], entry_size: int) -> bytes:
    head = b"TSD1" + struct.pack(">HQII", author, epoch, entry_size, len(relays))
    return head + b"".join(oracle_relay(r, entry_size) for r in sorted(relays, key=lambda r: r.fingerprint))


RELAY = RelayDescriptor(
    fingerprint=bytes(range(20)),
    nickname="moria1",
    flags=frozenset({"Running", "Fast", "Guard"}),
    version=(0, 4, 8, 9),
    protocols=7,
    exit_policy_summary="accept 80,443",
    bandwidth=12000,
    measured=True,
)


def test_empty_document_is_header_only():
    doc = StatusDocument.build(0, [], 7)
    expected = b"TSD1" + b"\x00\x00" + (7).to_bytes(8, "big") + (500).to_bytes(4, "big") + bytes(4)
    assert doc.encoded == expected
    assert len(doc.encoded) == 22


def test_empty_document_digest_is_pinned():
    doc = StatusDocument.build(0, [], 7)
    assert doc.digest.hex() == EMPTY_DIGEST_EPOCH7
    assert hashlib.sha256(doc.encoded).hexdigest() == EMPTY_DIGEST_EPOCH7


def test_one_relay_matches_oracle():
    doc = StatusDocument.build(3, [RELAY], 11)
    assert doc.encoded == oracle_status(3, 11, [RELAY], 500)
    assert len(doc.encoded) == 22 + 500


def test_oversized_entry_grows_past_padding():
    doc = StatusDocument.build(1, [RELAY], 1, entry_size=16)
    assert doc.encoded == oracle_status(1, 1, [RELAY], 16)
    assert len(doc.encoded) > 22 + 16


def test_order_of_input_relays_does_not_matter():
    a = RelayDescriptor(b"\x01", "a")
    b = RelayDescriptor(b"\x02", "b")
    assert StatusDocument.build(0, [a, b], 1).encoded == StatusDocument.build(0, [b, a], 1).encoded


def test_unsorted_or_duplicate_relays_rejected():
    a = RelayDescriptor(b"\x01", "a")
    b = RelayDescriptor(b"\x02", "b")
    with pytest.raises(EncodingError):
        canonical_encode(StatusDocument(0, (b, a), 1))
    with pytest.raises(EncodingError):
        canonical_encode(StatusDocument(0, (a, a), 1))
    with pytest.raises(ValueError):
        StatusDocument.build(0, [a, a], 1)


def test_relay_validation():
    with pytest.raises(ValueError):
        RelayDescriptor(b"", "x")
    with pytest.raises(ValueError):
        RelayDescriptor(b"\x01", "x", bandwidth=-1)


def test_flipping_one_flag_changes_digest():
    flags = ["Fast", "Guard", "Running", "Stable", "Exit"]
    base = [RelayDescriptor(bytes([i]), f"r{i}", frozenset(flags[:i])) for i in range(1, 5)]
    d0 = StatusDocument.build(0, base, 1).digest
    for i in range(len(base)):
        for flag in flags:
            r = base[i]
            changed = r.flags ^ {flag}
            relays = base[:i] + [RelayDescriptor(r.fingerprint, r.nickname, changed)] + base[i + 1 :]
            assert StatusDocument.build(0, relays, 1).digest != d0


relay_st = st.builds(
    RelayDescriptor,
    fingerprint=st.binary(min_size=1, max_size=6),
    nickname=st.text(max_size=6),
    flags=st.frozensets(st.sampled_from(["Fast", "Guard", "Running", "Stable", "Exit", "V2Dir"])),
    version=st.lists(st.integers(0, 2**32 - 1), min_size=1, max_size=4).map(tuple),
    protocols=st.integers(0, 2**32 - 1),
    exit_policy_summary=st.text(max_size=8),
    bandwidth=st.one_of(st.none(), st.integers(0, 2**64 - 1)),
    measured=st.booleans(),
)


def _doc(author, epoch, relays, entry_size):
    unique = {r.fingerprint: r for r in relays}
    return StatusDocument.build(author, unique.values(), epoch, entry_size)


doc_st = st.builds(
    _doc,
    st.integers(0, 8),
    st.integers(0, 2**64 - 1),
    st.lists(relay_st, max_size=4),
    st.sampled_from([0, 16, 64, 500]),
)


@settings(max_examples=10_000, deadline=None)
@given(doc_st, doc_st)
def test_encoding_is_injective(d1, d2):
    if d1 != d2:
        assert d1.encoded != d2.encoded
    else:
        assert d1.encoded == d2.encoded


@settings(max_examples=500, deadline=None)
@given(doc_st)
def test_encoding_round_trips_and_matches_oracle(doc):
    assert decode_status(doc.encoded) == doc
    assert doc.encoded == oracle_status(doc.author, doc.epoch, list(doc.relays), doc.entry_size)


def test_truncated_bytes_rejected():
    enc = StatusDocument.build(3, [RELAY], 11).encoded
    for cut in (0, 5, 21, 30, len(enc) - 1):
        with pytest.raises(EncodingError):
            decode_status(enc[:cut])
    with pytest.raises(EncodingError):
        decode_status(enc + b"\x00")


def test_consensus_round_trip():
    doc = ConsensusDocument((RELAY,), 5, frozenset({Signature(2, b"x" * 64), Signature(0, b"y" * 64)}))
    back = decode_consensus(encode_consensus(doc))
    assert back.relays == doc.relays and back.epoch == 5 and back.signatures == doc.signatures


# -- signatures ---------------------------------------------------------


@pytest.mark.parametrize("scheme", [Ed25519Scheme(), MacScheme()], ids=["ed25519", "mac"])
def test_sign_verify_round_trip(scheme):
    secrets, ring = generate_keys(3, scheme, seed=1)
    sig = scheme.sign(secrets[1], 1, Context.DOC, 4, b"payload")
    assert ring.verify(sig, Context.DOC, 4, b"payload")
    assert not ring.verify(sig, Context.DOC, 4, b"payloae")
    assert not ring.verify(Signature(2, sig.value), Context.DOC, 4, b"payload")
    assert not ring.verify(Signature(9, sig.value), Context.DOC, 4, b"payload")


@pytest.mark.parametrize("scheme", [Ed25519Scheme(), MacScheme()], ids=["ed25519", "mac"])
def test_domain_separation_over_all_tags(scheme):
    secrets, ring = generate_keys(2, scheme, seed=2)
    for signed_ctx in Context:
        sig = scheme.sign(secrets[0], 0, signed_ctx, 9, b"m")
        for ctx in Context:
            assert ring.verify(sig, ctx, 9, b"m") == (ctx == signed_ctx)
        assert not ring.verify(sig, signed_ctx, 10, b"m")
        assert not ring.verify(sig, signed_ctx, 8, b"m")


def test_six_contexts():
    assert len(Context) == 6


def test_keys_are_deterministic_per_seed():
    a, _ = generate_keys(2, Ed25519Scheme(), seed=5)
    b, _ = generate_keys(2, Ed25519Scheme(), seed=5)
    c, _ = generate_keys(2, Ed25519Scheme(), seed=6)
    assert a == b and a != c


def test_authority_order_is_integer_order():
    ids = [5, 0, 3, 8, 1]
    assert sorted(ids) == [0, 1, 3, 5, 8]
