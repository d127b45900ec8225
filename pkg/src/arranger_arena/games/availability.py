"""Data-availability game and its decompress-and-hash bisection.

Flow:

1. ``await_data``: any staker of the tag may post the compressed batch with
   an aggregate signature whose signer mask equals the tag's.  If none does
   before the stakers' clock runs out, the tag is falsified.
2. ``await_requester``: the requester either concedes (it learned the batch)
   or claims the posted data does not decompress to the tag's root.
3. ``bisect``: the requester commits to a failing trace; the poster selects
   halves until one step is left, which is checked by :func:`one_step_verify`.

Invariant of the bisection interval ``[lo, hi]``: the poster agrees with the
commitment at ``lo`` and disputes the one at ``hi``.
"""
from __future__ import annotations

from typing import TYPE_CHECKING, Callable

from ..core import DATA_DOMAIN, AgentId, AggregateSignature, Certification, verify_aggregate_message
from ..errors import IllegalMove, NotChallengeable
from ..trace import Phase, TraceState, commitment, initial_state, one_step_verify
from .base import CLIENT, DEFENDER, Effect, Game, emit, finish

if TYPE_CHECKING:
    from ..chain import Chain
    from ..core import KeyRegistry

STAKERS = "stakers"


def _sig_to_json(sig: AggregateSignature) -> dict:
    return {"mask": sig.signers_mask, "sigs": [s.hex() for s in sig.per_signer]}


def _sig_from_json(d: dict) -> AggregateSignature:
    return AggregateSignature(int(d["mask"]), tuple(bytes.fromhex(s) for s in d["sigs"]))


def post_move(data: bytes, sig: AggregateSignature) -> dict:
    return {"type": "post", "data": data.hex(), "sig": _sig_to_json(sig)}


class DataAvailabilityGame(Game):
    kind = "data"
    move_costs = {
        "post": "post_compressed",
        "concede": "concede",
        "challenge": "bisect_subtrace",
        "bisect": "bisect_subtrace",
        "reveal": "bisect_subtrace",
        "select": "select_subtrace",
    }
    communal_moves = frozenset({"post", "select"})

    def __init__(self, client: AgentId, tag: int, root: bytes, mask: int, registry: "KeyRegistry", S: int,
                 is_staker: Callable[[AgentId], bool], clock_ticks: int):
        super().__init__(client, (tag,), clock_ticks)
        self.root = root
        self.mask = mask
        self.registry = registry
        self.S = S
        self.is_staker = is_staker
        self.stage = "await_data"
        self.data: bytes | None = None
        self.poster: AgentId | None = None
        self.lo = self.hi = 0
        self.c_lo = self.c_hi = b""
        self.middle: bytes | None = None
        self.requester_moves = 0
        self.selector_moves = 0

    def start(self, now: int) -> list[Effect]:
        self.set_turn(STAKERS, now)
        return []

    def may_move(self, player: AgentId) -> bool:
        if self.active == STAKERS:
            return self.is_staker(player)
        return player == self.active

    @property
    def mid(self) -> int:
        return (self.lo + self.hi) // 2

    def _after_select_or_challenge(self, now: int) -> None:
        self.middle = None
        self.set_turn(self.client, now)
        if self.hi - self.lo > 1:
            self.stage = "bisect"
        else:
            self.stage = "reveal"

    def _apply(self, player: AgentId, move: dict, now: int) -> list[Effect]:
        kind = move["type"]
        if self.stage == "await_data":
            if kind != "post":
                raise IllegalMove("waiting for the compressed batch")
            data = bytes.fromhex(move["data"])
            sig = _sig_from_json(move["sig"])
            if sig.signers_mask != self.mask:
                raise IllegalMove("signer mask differs from the tag's")
            verdict = verify_aggregate_message(sig, DATA_DOMAIN, data, self.registry, self.S)
            if verdict is not Certification.CERTIFIED:
                raise IllegalMove(f"data not certified: {verdict.value}")
            self.data, self.poster = data, player
            self.stage = "await_requester"
            self.set_turn(self.client, now)
            return [emit("compressedBatch", tag=self.tags[0], poster=str(player), data=data.hex())]
        if self.stage == "await_requester":
            if kind == "concede":
                self.side_won = DEFENDER
                self.active = None
                return [finish(DEFENDER, self.poster)]
            if kind != "challenge":
                raise IllegalMove("requester must concede or challenge")
            n = int(move["n"])
            if n < 1:
                raise IllegalMove("trace length must be positive")
            final = TraceState.decode(bytes.fromhex(move["final"]))
            if final.phase is not Phase.DONE_FAIL or final.target_root != self.root:
                raise IllegalMove("the claimed final state must be a failing run against the tag root")
            self.lo, self.hi = 0, n
            self.c_lo = commitment(initial_state(self.root))
            self.c_hi = commitment(final)
            self.requester_moves += 1
            if n == 1:
                self._after_select_or_challenge(now)
            else:
                self.middle = bytes.fromhex(move["middle"])
                self.stage = "select"
                self.set_turn(self.poster, now)
            return [emit("challengedData", n=n, c_lo=self.c_lo.hex(), c_hi=self.c_hi.hex(),
                         middle=None if self.middle is None else self.middle.hex())]
        if self.stage == "select":
            if kind != "select":
                raise IllegalMove("poster must select a half")
            if move["agree"]:
                self.lo, self.c_lo = self.mid, self.middle
            else:
                self.hi, self.c_hi = self.mid, self.middle
            self.selector_moves += 1
            self._after_select_or_challenge(now)
            return [emit("selectedSubtrace", lo=self.lo, hi=self.hi)]
        if self.stage == "bisect":
            if kind != "bisect":
                raise IllegalMove("requester must bisect")
            self.middle = bytes.fromhex(move["hash"])
            self.requester_moves += 1
            self.stage = "select"
            self.set_turn(self.poster, now)
            return [emit("bisectedSubtrace", lo=self.lo, hi=self.hi, middle=self.middle.hex())]
        if self.stage == "reveal":
            if kind != "reveal":
                raise IllegalMove("requester must reveal the pre-state")
            pre = TraceState.decode(bytes.fromhex(move["state"]))
            if commitment(pre) != self.c_lo:
                raise IllegalMove("revealed state does not match the agreed commitment")
            self.requester_moves += 1
            self.active = None
            if one_step_verify(pre, self.c_hi, self.data):
                self.side_won = CLIENT
                return [emit("oneStepProof", index=self.lo, requester_wins=True),
                        Effect("falsify_tag", {"tag": self.tags[0]}), finish(CLIENT)]
            self.side_won = DEFENDER
            return [emit("oneStepProof", index=self.lo, requester_wins=False), finish(DEFENDER, self.poster)]
        raise IllegalMove(f"no moves in stage {self.stage}")

    def _on_timeout(self, now: int) -> list[Effect]:
        loser = self.active
        self.active = None
        if loser == STAKERS or loser == self.poster:
            self.side_won = CLIENT
            return [Effect("falsify_tag", {"tag": self.tags[0]}), finish(CLIENT)]
        self.side_won = DEFENDER
        return [finish(DEFENDER, self.poster)]

    def init_payload(self) -> dict:
        return {"tag": self.tags[0], "root": self.root.hex(), "mask": self.mask}


def open_data_availability(chain: "Chain", client: AgentId, handle: int) -> int:
    rec = chain.tag(handle)
    if rec.status.value != "pending":
        raise NotChallengeable(f"tag {handle} is {rec.status.value}")
    game = DataAvailabilityGame(
        client, handle, rec.sbt.tag.root, rec.sbt.sig.signers_mask, chain.registry, chain.S,
        lambda a: chain.has_stake(a, handle), chain.clock_ticks,
    )
    return chain.open_game(game, init_cost="init_data")
