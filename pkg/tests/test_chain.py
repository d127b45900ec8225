from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from arranger_arena.chain import Chain
from arranger_arena.core import TAG_DOMAIN, BatchTag, SignedBatchTag, replica, sign_aggregate, stf
from arranger_arena.economics import UNIT
from arranger_arena.errors import ArenaError, NotChallengeable, NotTimedOut, Underfunded
from arranger_arena.games.availability import open_data_availability
from arranger_arena.games.legality import open_certifiability, open_integrity1, open_validity
from arranger_arena.merkle import MerkleTree
from arranger_arena.strategies import HonestClient, honest_initial_middle, honest_staker_response, play_game, silent

from conftest import Setup, invalid_request, make_registry, valid_requests


def _sbt(reg, tag_id, root, signers):
    tag = BatchTag(tag_id, root, 2)
    return SignedBatchTag(tag, sign_aggregate(reg, signers, TAG_DOMAIN, tag.encode()))


def test_post_accepts_unsigned_and_forks():
    reg = make_registry()
    chain = Chain(reg, S=2)
    chain.mint(replica(0), UNIT)
    h0 = chain.post_signed_batch_tag(replica(0), _sbt(reg, 1, b"\x01" * 32, []))
    h1 = chain.post_signed_batch_tag(replica(0), _sbt(reg, 1, b"\x02" * 32, [0, 1]))
    assert chain.tag(h0).status.value == chain.tag(h1).status.value == "pending"


def test_post_underfunded():
    reg = make_registry()
    chain = Chain(reg, S=2)
    with pytest.raises(Underfunded):
        chain.post_signed_batch_tag(replica(0), _sbt(reg, 1, b"\x01" * 32, [0, 1]))


def test_stake_debits_stake_and_communal():
    reg = make_registry()
    s = Setup(valid_requests(reg, 2), registry=reg, stakers=())
    before = s.chain.balance(replica(1))
    s.chain.place_stake(replica(1), s.handle)
    p = s.chain.params
    assert p.s == 10 * UNIT
    assert s.chain.balance(replica(1)) == before - p.s - p.s_com_data
    s.chain.place_stake(replica(2), s.handle)
    assert s.chain.stakers(s.handle) == [replica(1), replica(2)]


def test_stake_on_consolidated_rejected():
    reg = make_registry()
    s = Setup(valid_requests(reg, 2), registry=reg)
    s.chain.advance_time(s.chain.challenge_period + 1)
    assert s.chain.tag(s.handle).status.value == "consolidated"
    with pytest.raises(NotChallengeable):
        s.chain.place_stake(replica(1), s.handle)


def test_consolidation_returns_stake():
    reg = make_registry()
    s = Setup(valid_requests(reg, 2), registry=reg)
    before = s.chain.balance(replica(0))
    s.chain.advance_time(s.chain.challenge_period + 1)
    assert s.chain.balance(replica(0)) - before == s.chain.params.s + s.chain.params.s_com_data


def test_unstaked_tag_discarded():
    reg = make_registry()
    s = Setup(valid_requests(reg, 2), registry=reg, stakers=())
    s.chain.advance_time(s.chain.challenge_period + 1)
    rec = s.chain.tag(s.handle)
    assert rec.status.value == "discarded" and rec.discard_reason == "unstaked"


def test_no_timeout_before_clock_runs_out():
    reg = make_registry()
    s = Setup(_invalid_batch(reg), registry=reg)
    gid = open_validity(s.chain, s.client, s.handle, s.elements[1], 1, honest_initial_middle(s.tree, 1, 2),
                        s.stakers[0])
    events = s.chain.advance_time(s.chain.clock_ticks - 1)
    assert not any(ev.kind == "clockExpired" for ev in events)
    with pytest.raises(NotTimedOut):
        s.chain.timeout(gid)
    s.chain.advance_time(1)
    st = s.chain.timeout(gid)
    assert st.side == "client"


def _invalid_batch(reg):
    return valid_requests(reg, 1) + [invalid_request()] + valid_requests(reg, 2, b"more")


def test_claimer_loses_membership_stake_to_winner():
    reg = make_registry()
    s = Setup(valid_requests(reg, 4), registry=reg)
    # a validity claim needs an invalid element, so play the membership loss through integrity
    k = s.knowledge()
    gid = open_integrity1(s.chain, s.client, s.handle, s.elements[0], [0, 2])
    staker_before = s.chain.balance(s.stakers[0])
    burned_before = s.chain.burned
    play_game(s.chain, gid, lambda who: HonestClient(k) if who == s.client
              else (lambda g, me: honest_staker_response(g, k, me)))
    stake = s.chain.params.stake("integrity1")
    half = stake // 2
    assert s.chain.settlements[gid].winner == s.stakers[0]
    moves_paid = sum(s.chain.params.cost(m) for m in ("select_path", "bisect_subpath", "reveal_sibling"))
    assert s.chain.balance(s.stakers[0]) >= staker_before + half - 3 * moves_paid
    assert s.chain.burned - burned_before == stake - half


def test_certifiability_win_removes_all_stakes():
    reg = make_registry()
    s = Setup(valid_requests(reg, 2), registry=reg, S=3, signers=[0, 1], stakers=(0, 1))
    open_certifiability(s.chain, s.client, s.handle, "length")
    assert s.chain.tag(s.handle).status.value == "discarded"
    assert not s.chain.stakes[s.handle]
    removed = [ev for ev in s.chain.events if ev.kind == "stakeRemoved"]
    assert {ev.payload["agent"] for ev in removed} == {replica(0), replica(1)}


def test_data_responses_paid_from_communal_pool():
    reg = make_registry()
    s = Setup(valid_requests(reg, 3), registry=reg, stakers=(0, 1))
    pool_before = s.chain.communal[s.handle]
    bal_before = s.chain.balance(replica(0))
    k = s.knowledge()
    gid = open_data_availability(s.chain, s.client, s.handle)
    play_game(s.chain, gid, lambda who: HonestClient(s.knowledge(learn=False)) if who == s.client
              else (lambda g, me: honest_staker_response(g, k, me)))
    post_cost = s.chain.params.cost("post_compressed")
    assert s.chain.communal[s.handle] == pool_before - post_cost
    assert s.chain.balance(replica(0)) >= bal_before


def test_settlement_has_prior_opening_and_events_serialize():
    reg = make_registry()
    s = Setup(_invalid_batch(reg), registry=reg)
    k = s.knowledge()
    gid = open_validity(s.chain, s.client, s.handle, s.elements[1], 1, honest_initial_middle(s.tree, 1, 2),
                        s.stakers[0])
    play_game(s.chain, gid, lambda who: HonestClient(k) if who == s.client else silent)
    _check_log(s.chain)
    for line in s.chain.export_events().splitlines():
        json.loads(line)


def _check_log(chain: Chain) -> None:
    opened, terminal = set(), set()
    for ev in chain.events:
        p = ev.payload
        if ev.kind == "gameOpened":
            opened.add(p["gid"])
        if ev.kind == "gameSettled":
            assert p["gid"] in opened
        if ev.kind in ("staked", "stakeRemoved"):
            assert p["tag"] not in terminal, f"{ev.kind} on terminal tag {p['tag']}"
        if ev.kind in ("consolidated", "discarded"):
            assert p["tag"] not in terminal
            terminal.add(p["tag"])


# -- random operation sequences --------------------------------------------------------------

OPS = st.lists(st.tuples(st.sampled_from(["post", "stake", "cert", "validity", "integrity", "data", "move",
                                          "advance", "timeout"]),
                         st.integers(0, 7)), max_size=40)


@settings(max_examples=120, deadline=None)
@given(OPS)
def test_conservation_and_log_invariants(ops):
    reg = make_registry()
    chain = Chain(reg, S=2)
    for r in reg.replicas:
        chain.mint(r, 200 * UNIT)
    chain.mint(stf(0), 200 * UNIT)
    batches = [valid_requests(reg, 3, b"g"), _invalid_batch(reg), valid_requests(reg, 2, b"d") * 2]
    known = {}
    for op, x in ops:
        try:
            if op == "post":
                elems = batches[x % 3]
                t = MerkleTree(elems)
                tag = BatchTag(x, t.root, t.height)
                signers = [0, 1] if x % 4 else [0]
                h = chain.post_signed_batch_tag(replica(x % 4), SignedBatchTag(
                    tag, sign_aggregate(reg, signers, TAG_DOMAIN, tag.encode())))
                known[h] = elems
            elif op == "stake" and known:
                chain.place_stake(replica(x % 4), sorted(known)[x % len(known)])
            elif op == "cert" and known:
                open_certifiability(chain, stf(0), sorted(known)[x % len(known)], "length")
            elif op == "validity" and known:
                h = sorted(known)[x % len(known)]
                stakers = chain.stakers(h)
                if stakers:
                    t = MerkleTree(known[h])
                    open_validity(chain, stf(0), h, known[h][x % len(known[h])], x % len(known[h]),
                                  honest_initial_middle(t, x % len(known[h]), t.height), stakers[0])
            elif op == "integrity" and known:
                h = sorted(known)[x % len(known)]
                if chain.stakers(h):
                    open_integrity1(chain, stf(0), h, known[h][0], [0, 1])
            elif op == "data" and known:
                open_data_availability(chain, stf(0), sorted(known)[x % len(known)])
            elif op == "move":
                live = [g for g in chain.games.values() if not g.finished and g.active is not None]
                if live:
                    g = live[x % len(live)]
                    chain.advance_time(1)
                    who = g.active if g.active != "stakers" else (chain.stakers(g.tags[0]) or [replica(0)])[0]
                    chain.move(g.gid, who, {"type": "select", "bottom": bool(x & 1)})
            elif op == "advance":
                chain.advance_time(x * 20)
            elif op == "timeout":
                chain.run_timeouts()
        except ArenaError:
            pass
        assert chain.conservation_gap() == 0
    _check_log(chain)
