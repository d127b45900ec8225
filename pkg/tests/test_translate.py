from __future__ import annotations

import random

import pytest

from arranger_arena.chain import Chain
from arranger_arena.core import BatchTag, replica, stf
from arranger_arena.economics import UNIT, derive_costs, concrete_params
from arranger_arena.errors import BadPreimage, PreconditionFailed
from arranger_arena.merkle import MerkleTree
from arranger_arena.translate import (
    DEFAULT_DELTA, PaymentState, accuse_silent, claim, client_accept, decode_batch, encode_batch, recover_batch,
    replica_offer, tamper, verify_offer, withdraw,
)

import interleave
from conftest import Setup, make_registry, valid_requests


def _offer(reg, batch, seed=0, who=replica(0)):
    t = MerkleTree(batch)
    return replica_offer(batch, BatchTag(1, t.root, t.height), who, reg, random.Random(seed))


def _funded(reg):
    chain = Chain(reg, S=2)
    chain.mint(replica(0), 100 * UNIT)
    chain.mint(stf(0), 100 * UNIT)
    return chain


def test_encoding_roundtrip():
    batch = [b"", b"a", b"\x00" * 70]
    assert decode_batch(encode_batch(batch)) == batch
    with pytest.raises(ValueError):
        decode_batch(encode_batch(batch) + b"\x01")


def test_offer_verifies_and_is_fresh():
    reg = make_registry()
    batch = valid_requests(reg, 3)
    o1, k1 = _offer(reg, batch, seed=1)
    o2, k2 = _offer(reg, batch, seed=2)
    assert verify_offer(o1, reg) and verify_offer(o2, reg)
    assert k1 != k2 and o1.y != o2.y and o1.w != o2.w


def test_tampered_offer_rejected():
    reg = make_registry()
    o, _ = _offer(reg, valid_requests(reg, 3))
    w = bytearray(o.w)
    w[0] ^= 1
    assert not verify_offer(tamper(o, w=bytes(w)), reg)
    assert not verify_offer(tamper(o, y=b"\x00" * 32), reg)
    assert not verify_offer(tamper(o, replica=replica(1)), reg)


def test_offer_for_wrong_root_has_no_proof():
    reg = make_registry()
    batch = valid_requests(reg, 3)
    o, _ = replica_offer(batch, BatchTag(1, b"\x00" * 32, 2), replica(0), reg, random.Random(0))
    assert not o.proof_ok


def test_accept_moves_funds_and_sets_deadline():
    reg = make_registry()
    chain = _funded(reg)
    o, _ = _offer(reg, valid_requests(reg, 2))
    before = chain.balance(stf(0))
    pc = client_accept(chain, stf(0), o, UNIT)
    assert pc.state is PaymentState.OPEN and pc.secret == o.y and pc.beneficiary == replica(0)
    assert pc.deadline == chain.now + DEFAULT_DELTA == chain.now + 50
    assert chain.balance(stf(0)) == before - UNIT - chain.params.cost("deploy_payment")


def test_accept_bad_proof_moves_nothing():
    reg = make_registry()
    chain = _funded(reg)
    o, _ = _offer(reg, valid_requests(reg, 2))
    before = chain.balance(stf(0))
    with pytest.raises(PreconditionFailed):
        client_accept(chain, stf(0), tamper(o, proof=None), UNIT)
    assert chain.balance(stf(0)) == before and not chain.contracts


def test_claim_roundtrip_and_errors():
    reg = make_registry()
    chain = _funded(reg)
    batch = valid_requests(reg, 4)
    o, k = _offer(reg, batch)
    pc = client_accept(chain, stf(0), o, 2 * UNIT)
    assert recover_batch(pc) is None
    with pytest.raises(BadPreimage):
        claim(chain, pc, replica(0), b"\x00" * 32)
    with pytest.raises(PreconditionFailed):
        claim(chain, pc, replica(1), k)
    before = chain.balance(replica(0))
    claim(chain, pc, replica(0), k)
    assert chain.balance(replica(0)) == before + 2 * UNIT - chain.params.cost("claim_payment")
    assert recover_batch(pc) == batch
    with pytest.raises(PreconditionFailed):
        claim(chain, pc, replica(0), k)
    chain.advance_time(100)
    with pytest.raises(PreconditionFailed):
        withdraw(chain, pc, stf(0))


def test_withdraw_only_after_deadline():
    reg = make_registry()
    chain = _funded(reg)
    o, k = _offer(reg, valid_requests(reg, 2))
    pc = client_accept(chain, stf(0), o, UNIT, delta=10)
    chain.advance_time(10)
    with pytest.raises(PreconditionFailed):
        withdraw(chain, pc, stf(0))
    chain.advance_time(1)
    with pytest.raises(PreconditionFailed):
        withdraw(chain, pc, replica(0))
    before = chain.balance(stf(0))
    withdraw(chain, pc, stf(0))
    assert chain.balance(stf(0)) == before + UNIT
    with pytest.raises(PreconditionFailed):
        claim(chain, pc, replica(0), k)


def test_late_claim_allowed_before_withdraw():
    reg = make_registry()
    chain = _funded(reg)
    o, k = _offer(reg, valid_requests(reg, 2))
    pc = client_accept(chain, stf(0), o, UNIT, delta=5)
    chain.advance_time(20)
    claim(chain, pc, replica(0), k)
    assert pc.state is PaymentState.CLAIMED


def test_accuse_silent_removes_stake():
    reg = make_registry()
    batch = valid_requests(reg, 3)
    s = Setup(batch, registry=reg, stakers=(0, 1))
    o, _ = replica_offer(batch, s.sbt.tag, replica(0), reg, random.Random(0))
    pc = client_accept(s.chain, stf(0), o, UNIT, tag_handle=s.handle, delta=5)
    with pytest.raises(PreconditionFailed):
        accuse_silent(s.chain, stf(0), o.replica_sig_over_y, pc)
    s.chain.advance_time(6)
    withdraw(s.chain, pc, stf(0))
    forged = reg.sign(replica(1), b"arena/offer-y", o.y + o.tag.encode())
    with pytest.raises(PreconditionFailed):
        accuse_silent(s.chain, stf(0), forged, pc)
    before = s.chain.balance(stf(0))
    comp = accuse_silent(s.chain, stf(0), o.replica_sig_over_y, pc)
    stake = s.chain.params.s
    assert comp == int(stake * s.chain.params.rho) > 0
    assert s.chain.balance(stf(0)) == before + comp - s.chain.params.cost("accuse_silent")
    assert s.chain.stakers(s.handle) == [replica(1)]
    with pytest.raises(PreconditionFailed):
        accuse_silent(s.chain, stf(0), o.replica_sig_over_y, pc)
    assert s.chain.conservation_gap() == 0


def test_accuse_after_claim_rejected():
    reg = make_registry()
    batch = valid_requests(reg, 3)
    s = Setup(batch, registry=reg)
    o, k = replica_offer(batch, s.sbt.tag, replica(0), reg, random.Random(0))
    pc = client_accept(s.chain, stf(0), o, UNIT, tag_handle=s.handle, delta=5)
    claim(s.chain, pc, replica(0), k)
    s.chain.advance_time(10)
    with pytest.raises(PreconditionFailed):
        accuse_silent(s.chain, stf(0), o.replica_sig_over_y, pc)


def test_translation_cheaper_than_data_game():
    p = concrete_params()
    gc = derive_costs(p)
    assert gc.CC_translate < gc.CC["data"] + p.stake("data")
    assert p.SR_translate - gc.SC_translate > 0


def test_interleavings_are_atomic():
    for seed in range(200):
        o = interleave.run(seed)
        assert o.paid == o.revealed
        assert not o.paid or o.recovered
        assert not o.withdrawn or o.refunded
        assert o.gap == 0
