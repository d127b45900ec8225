from __future__ import annotations

import hashlib

from hypothesis import given, strategies as st

from arranger_arena.core import (
    TAG_DOMAIN, AgentId, AggregateSignature, BatchTag, Certification, KeyRegistry, TransactionRequest,
    replica, sign_aggregate, sign_tag, user, validate_transaction_request, verify_aggregate,
)

from conftest import make_registry


def test_signed_request_validates(registry):
    tr = TransactionRequest.create(b"hello", user(0), registry)
    assert validate_transaction_request(tr, registry)


def test_flipped_payload_bit_fails(registry):
    tr = TransactionRequest.create(b"hello", user(0), registry)
    flipped = TransactionRequest(bytes([tr.payload[0] ^ 1]) + tr.payload[1:], tr.author, tr.author_signature)
    assert not validate_transaction_request(flipped, registry)


def test_unregistered_key_fails(registry):
    outsider = KeyRegistry(seed=99)
    stranger = user(7)
    outsider.register(stranger)
    tr = TransactionRequest.create(b"hi", stranger, outsider)
    assert validate_transaction_request(tr, outsider)
    assert not validate_transaction_request(tr, registry)


@given(st.binary(max_size=200), st.integers(0, 5))
def test_request_encoding_roundtrip(payload, u):
    reg = make_registry(users=6)
    tr = TransactionRequest.create(payload, user(u), reg)
    assert TransactionRequest.decode(tr.encode()) == tr
    assert TransactionRequest.create(payload, user(u), reg).encode() == tr.encode()


def test_sign_tag_deterministic_and_keyed(registry):
    tag = BatchTag(1, b"\x11" * 32, 3)
    assert sign_tag(registry, replica(0), tag) == sign_tag(registry, replica(0), tag)
    assert sign_tag(registry, replica(0), tag) != sign_tag(registry, replica(1), tag)


def test_sign_tag_matches_hash_oracle(registry):
    tag = BatchTag(5, b"\x22" * 32, 2)
    secret = registry._secrets[replica(2)]
    assert sign_tag(registry, replica(2), tag) == hashlib.sha256(secret + TAG_DOMAIN + tag.encode()).digest()


def test_distinct_tags_distinct_signatures(registry):
    sigs = {sign_tag(registry, replica(0), BatchTag(i, bytes([i % 256]) * 32, i % 13)) for i in range(300)}
    assert len(sigs) == 300


def test_verify_aggregate_cases(registry):
    tag = BatchTag(1, b"\x33" * 32, 2)
    two = sign_aggregate(registry, [0, 1], TAG_DOMAIN, tag.encode())
    assert verify_aggregate(two, tag, registry, 2) is Certification.CERTIFIED
    one = sign_aggregate(registry, [0], TAG_DOMAIN, tag.encode())
    assert verify_aggregate(one, tag, registry, 2) is Certification.TOO_FEW
    bad = AggregateSignature(two.signers_mask, (two.per_signer[0], bytes([two.per_signer[1][0] ^ 1]) + two.per_signer[1][1:]))
    assert verify_aggregate(bad, tag, registry, 2) is Certification.BAD_SIGNATURE


@given(st.sets(st.integers(0, 3), max_size=4), st.integers(0, 4))
def test_certified_implies_each_signer_verifies(signers, S):
    reg = make_registry()
    tag = BatchTag(9, b"\x44" * 32, 1)
    sig = sign_aggregate(reg, sorted(signers), TAG_DOMAIN, tag.encode())
    verdict = verify_aggregate(sig, tag, reg, S)
    assert (verdict is Certification.CERTIFIED) == (len(signers) >= S)
    if verdict is Certification.CERTIFIED:
        for i, s in zip(sig.signers, sig.per_signer):
            assert reg.verify(replica(i), TAG_DOMAIN, tag.encode(), s)


def test_agent_id_text_roundtrip():
    for a in (replica(3), user(0), AgentId.parse("stf:2")):
        assert AgentId.parse(str(a)) == a


@given(st.integers(0, 2**64 - 1), st.binary(min_size=32, max_size=32), st.integers(0, 255))
def test_tag_encoding_roundtrip(i, root, levels):
    t = BatchTag(i, root, levels)
    assert BatchTag.decode(t.encode()) == t
