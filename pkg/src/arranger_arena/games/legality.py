"""Legality fraud proofs: certifiability, validity, integrity and unique-batch.

Each ``open_*`` function is the contract entry point.  It checks the
preconditions against the chain, builds the game and registers it with
:meth:`Chain.open_game`, which locks the opener's stake.
"""
from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

from ..core import AgentId, Certification, element_is_valid, verify_aggregate
from ..errors import ElementIsValid, IllegalMove, NotChallengeable, PreconditionFailed
from ..merkle import MembershipProof, leaf_hash
from .base import CLIENT, DEFENDER, Effect, Game, emit, finish
from .membership import MembershipGame, PathGame, membership_init, membership_one_step

if TYPE_CHECKING:
    from ..chain import Chain


def _pending(chain: "Chain", handle: int):
    rec = chain.tag(handle)
    if rec.status.value != "pending":
        raise NotChallengeable(f"tag {handle} is {rec.status.value}")
    return rec


class OneShotGame(Game):
    """A game decided at opening: no moves, settled in the same tick."""

    move_costs: dict[str, str] = {}

    def __init__(self, kind: str, client: AgentId, tags: tuple[int, ...], client_wins: bool,
                 effects_on_win: list[Effect], beneficiary: AgentId | None, payload: dict):
        super().__init__(client, tags, 0)
        self.kind = kind
        self.client_wins = client_wins
        self._win_effects = effects_on_win
        self.beneficiary = beneficiary
        self._payload = payload

    def start(self, now: int) -> list[Effect]:
        self.last_move_tick = now
        if self.client_wins:
            self.side_won = CLIENT
            return self._win_effects + [finish(CLIENT)]
        self.side_won = DEFENDER
        return [finish(DEFENDER, self.beneficiary)]

    def init_payload(self) -> dict:
        return dict(self._payload, client_wins=self.client_wins)


# -- certifiability --------------------------------------------------------------------

def open_certifiability(chain: "Chain", caller: AgentId, handle: int, mode: str) -> int:
    """``mode`` is ``"length"`` (popcount < S) or ``"signature"`` (aggregate check fails)."""
    rec = _pending(chain, handle)
    sig = rec.sbt.sig
    if mode == "length":
        wins = sig.popcount < chain.S
        cost = "check_size"
    elif mode == "signature":
        wins = verify_aggregate(sig, rec.sbt.tag, chain.registry, 0) is not Certification.CERTIFIED
        cost = "check_agg"
    else:
        raise PreconditionFailed(f"unknown certifiability mode {mode!r}")
    game = OneShotGame(
        "certifiability", caller, (handle,), wins,
        [Effect("falsify_tag", {"tag": handle})], rec.poster,
        {"tag": handle, "mode": mode},
    )
    return chain.open_game(game, init_cost=cost)


# -- validity -----------------------------------------------------------------------------

def _require_staker(chain: "Chain", staker: AgentId, handle: int) -> None:
    if not chain.has_stake(staker, handle):
        raise PreconditionFailed(f"{staker} has no stake on tag {handle}")


def open_validity(chain: "Chain", client: AgentId, handle: int, e: bytes, i: int,
                  h_m: bytes | None, staker: AgentId) -> int:
    """Multi-step validity: ``client`` claims the invalid element ``e`` is leaf ``i``."""
    rec = _pending(chain, handle)
    if element_is_valid(e, chain.registry):
        raise ElementIsValid(f"element at {i} is a valid transaction request")
    _require_staker(chain, staker, handle)
    tag = rec.sbt.tag
    inner = membership_init(e, i, leaf_hash(e), h_m, tag.root, tag.levels, client, staker)
    game = PathGame(inner, handle, chain.clock_ticks, "validity", e)
    return chain.open_game(game, init_cost="init_validity")


def open_validity_one_step(chain: "Chain", client: AgentId, handle: int, e: bytes, i: int,
                           proof: MembershipProof, staker: AgentId) -> int:
    rec = _pending(chain, handle)
    if element_is_valid(e, chain.registry):
        raise ElementIsValid(f"element at {i} is a valid transaction request")
    _require_staker(chain, staker, handle)
    tag = rec.sbt.tag
    winner = membership_one_step(tag.root, tag.levels, e, i, proof, client, staker)
    game = OneShotGame(
        "validity", client, (handle,), winner == client,
        [Effect("defeat_staker", {"staker": staker, "tag": handle})], staker,
        {"tag": handle, "element": e.hex(), "index": i, "staker": str(staker),
         "proof": proof.encode().hex()},
    )
    return chain.open_game(game, init_cost="init_validity")


# -- integrity ------------------------------------------------------------------------------

class IntegrityGame(Game):
    """Client claims ``e`` sits at two positions; each staker in turn may refute one.

    A staker refutes by claiming a different element at one of the positions
    and winning the spawned membership game as claimer.  Stakers are handled
    sequentially, each with fresh clocks.
    """

    move_costs = {
        "select_path": "select_path",
        "select": "select_subpath",
        "bisect": "bisect_subpath",
        "reveal": "reveal_sibling",
    }

    def __init__(self, kind: str, client: AgentId, tags: tuple[int, ...],
                 trees: Sequence[tuple[bytes, int]], e: bytes, positions: Sequence[int],
                 stakers: Sequence[AgentId], clock_ticks: int):
        super().__init__(client, tags, clock_ticks)
        if len(positions) != 2 or len(trees) != 2:
            raise PreconditionFailed("integrity games take exactly two positions")
        if not stakers:
            raise PreconditionFailed("integrity game needs at least one staker")
        self.kind = kind
        self.trees = [(bytes(r), int(lv)) for r, lv in trees]
        self.e = e
        self.positions = [int(p) for p in positions]
        self.stakers = list(stakers)
        self.k = 0
        self.inner: MembershipGame | None = None
        self.pos = 0
        self.defeated: list[AgentId] = []

    @property
    def current_staker(self) -> AgentId:
        return self.stakers[self.k]

    def start(self, now: int) -> list[Effect]:
        self.set_turn(self.current_staker, now, fresh_clock=True)
        return []

    def _begin_sub_game(self, now: int) -> None:
        self.clocks = {}
        self.set_turn(self.current_staker, now)

    def _staker_lost(self, now: int) -> list[Effect]:
        staker = self.current_staker
        self.defeated.append(staker)
        effects = [Effect("defeat_staker", {"staker": staker, "tag": self.tags[0]})]
        self.k += 1
        self.inner = None
        if self.k == len(self.stakers):
            self.side_won = CLIENT
            self.active = None
            return effects + [finish(CLIENT)]
        self._begin_sub_game(now)
        return effects

    def _resolve_inner(self, now: int) -> list[Effect]:
        g = self.inner
        if g is None or not g.finished:
            return []
        if g.winner == self.current_staker:
            self.side_won = DEFENDER
            self.active = None
            return [finish(DEFENDER, self.current_staker)]
        return self._staker_lost(now)

    def _apply(self, player: AgentId, move: dict, now: int) -> list[Effect]:
        kind = move["type"]
        if self.inner is None:
            if kind != "select_path":
                raise IllegalMove("the staker must select a path first")
            pos = move.get("pos")
            if pos not in (0, 1):
                raise IllegalMove("pos must be 0 or 1")
            e2 = bytes.fromhex(move["element"])
            if e2 == self.e:
                raise IllegalMove("the exhibited element must differ from the accused one")
            h_m = move.get("middle")
            root, levels = self.trees[pos]
            self.pos = pos
            self.inner = membership_init(
                e2, self.positions[pos], leaf_hash(e2), None if h_m is None else bytes.fromhex(h_m),
                root, levels, player, self.client,
            )
            self.set_turn(self.inner.active, now)
            effects = [
                emit("selectedPath", staker=str(player), pos=pos, element=e2.hex()),
                emit("initMultistepMembership", **self.inner.snapshot()),
            ]
            return effects + self._resolve_inner(now)
        if kind == "select_path":
            raise IllegalMove("path already selected for this staker")
        self.inner.apply(player, move)
        self.set_turn(self.inner.active, now)
        effects = []
        if kind == "select":
            effects.append(emit("challengedSubpath", **self.inner.snapshot()))
        elif kind == "bisect":
            effects.append(emit("bisectedSubpath", **self.inner.snapshot()))
        return effects + self._resolve_inner(now)

    def _on_timeout(self, now: int) -> list[Effect]:
        if self.inner is None:
            return self._staker_lost(now)
        self.inner.forfeit()
        return self._resolve_inner(now)

    def init_payload(self) -> dict:
        return {
            "tags": list(self.tags),
            "trees": [[r.hex(), lv] for r, lv in self.trees],
            "element": self.e.hex(),
            "positions": self.positions,
            "stakers": [str(s) for s in self.stakers],
        }


def open_integrity1(chain: "Chain", client: AgentId, handle: int, e: bytes, positions: Sequence[int]) -> int:
    """Claim that ``e`` appears twice in the tag's batch."""
    rec = _pending(chain, handle)
    if positions[0] == positions[1]:
        raise PreconditionFailed("duplicate positions must differ")
    tree = (rec.sbt.tag.root, rec.sbt.tag.levels)
    game = IntegrityGame("integrity1", client, (handle,), [tree, tree], e, positions,
                         chain.stakers(handle), chain.clock_ticks)
    return chain.open_game(game, init_cost="init_integrity1")


def open_integrity2(chain: "Chain", client: AgentId, handle: int, prev_handle: int, e: bytes,
                    positions: Sequence[int]) -> int:
    """Claim that ``e`` is at ``positions[0]`` of the pending tag and ``positions[1]`` of an earlier one."""
    rec = _pending(chain, handle)
    prev = chain.tag(prev_handle)
    if prev_handle == handle or prev.status.value == "discarded":
        raise PreconditionFailed("the earlier tag must be a distinct, non-discarded tag")
    trees = [(rec.sbt.tag.root, rec.sbt.tag.levels), (prev.sbt.tag.root, prev.sbt.tag.levels)]
    game = IntegrityGame("integrity2", client, (handle, prev_handle), trees, e, positions,
                         chain.stakers(handle), chain.clock_ticks)
    return chain.open_game(game, init_cost="init_integrity2")


# -- unique batch ---------------------------------------------------------------------------

def open_unique_batch(chain: "Chain", caller: AgentId, h1: int, h2: int) -> int:
    """Prove two certified tags share an id but not a root; discards the pending one(s)."""
    r1, r2 = chain.tag(h1), chain.tag(h2)
    if h1 == h2:
        raise PreconditionFailed("need two distinct tags")
    if r1.sbt.tag.id != r2.sbt.tag.id:
        raise PreconditionFailed("identifiers differ")
    if r1.sbt.tag.root == r2.sbt.tag.root:
        raise PreconditionFailed("roots are equal")
    for r in (r1, r2):
        if verify_aggregate(r.sbt.sig, r.sbt.tag, chain.registry, chain.S) is not Certification.CERTIFIED:
            raise PreconditionFailed(f"tag {r.handle} is not certified")
        if r.status.value == "discarded":
            raise PreconditionFailed(f"tag {r.handle} is already discarded")
    pending = [r.handle for r in (r1, r2) if r.status.value == "pending"]
    if not pending:
        raise PreconditionFailed("both tags are consolidated")
    effects = [emit("replaceReplicas", id=r1.sbt.tag.id,
                    masks=[r1.sbt.sig.signers_mask, r2.sbt.sig.signers_mask])]
    effects += [Effect("falsify_tag", {"tag": h, "reward": k == 0}) for k, h in enumerate(pending)]
    game = OneShotGame("uniqueness", caller, (h1, h2), True, effects, None, {"tags": [h1, h2]})
    return chain.open_game(game, init_cost="unique_batch")
