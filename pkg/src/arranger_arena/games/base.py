"""Chess-clock bookkeeping and the effect protocol between games and the chain.

A game never touches balances.  Every accepted move returns a list of
:class:`Effect` values that :class:`~arranger_arena.chain.Chain` turns into
ledger transfers and log events.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Hashable

from ..core import AgentId
from ..errors import IllegalMove, NotTimedOut

CLIENT = "client"
DEFENDER = "defender"


@dataclass(frozen=True)
class Effect:
    kind: str  # emit | defeat_staker | falsify_tag | finish
    data: dict[str, Any] = field(default_factory=dict)


def emit(kind: str, /, **payload) -> Effect:
    return Effect("emit", {"kind": kind, "payload": payload})


def finish(side: str, beneficiary: AgentId | None = None) -> Effect:
    return Effect("finish", {"side": side, "beneficiary": beneficiary})


class Game:
    """Base class: turn order, per-player clocks, move history."""

    kind = "game"
    # move type -> cost key in EconomicParams.costs
    move_costs: dict[str, str] = {}
    # move types whose cost is drawn from the tag's communal pool
    communal_moves: frozenset[str] = frozenset()

    def __init__(self, client: AgentId, tags: tuple[int, ...], clock_ticks: int):
        self.gid = -1
        self.client = client
        self.tags = tags
        self.clock_ticks = clock_ticks
        self.clocks: dict[Hashable, int] = {}
        self.active: Hashable | None = None
        self.last_move_tick = 0
        self.side_won: str | None = None
        self.history: list[dict] = []
        self.expiry_reported = False

    # -- turn and clock handling -------------------------------------------

    @property
    def finished(self) -> bool:
        return self.side_won is not None

    def set_turn(self, who: Hashable | None, now: int, fresh_clock: bool = False) -> None:
        self.active = who
        if who is not None and (fresh_clock or who not in self.clocks):
            self.clocks[who] = self.clock_ticks
        self.last_move_tick = now

    def time_left(self, now: int) -> int:
        if self.active is None:
            return 0
        return self.clocks[self.active] - (now - self.last_move_tick)

    def expired(self, now: int) -> bool:
        return not self.finished and self.active is not None and self.time_left(now) <= 0

    def may_move(self, player: AgentId) -> bool:
        return player == self.active

    def apply(self, player: AgentId, move: dict, now: int) -> list[Effect]:
        if self.finished:
            raise IllegalMove(f"game {self.gid} is over")
        if not self.may_move(player):
            raise IllegalMove(f"{player} may not move now (active: {self.active})")
        if self.expired(now):
            raise IllegalMove(f"clock of {self.active} is exhausted")
        if move.get("type") not in self.move_costs:
            raise IllegalMove(f"unknown move {move.get('type')!r} for {self.kind}")
        mover_key = self.active
        saved = self.clocks[mover_key]
        self.clocks[mover_key] -= now - self.last_move_tick
        try:
            effects = self._apply(player, move, now)
        except IllegalMove:
            self.clocks[mover_key] = saved
            raise
        self.history.append({"tick": now, "player": str(player), "move": move})
        return effects

    def timeout(self, now: int) -> list[Effect]:
        if not self.expired(now):
            raise NotTimedOut(f"game {self.gid}: {self.active} still has {self.time_left(now)} ticks")
        self.history.append({"tick": now, "player": None, "move": {"type": "timeout", "active": str(self.active)}})
        return self._on_timeout(now)

    # -- subclass hooks ---------------------------------------------------------

    def _apply(self, player: AgentId, move: dict, now: int) -> list[Effect]:
        raise NotImplementedError

    def _on_timeout(self, now: int) -> list[Effect]:
        raise NotImplementedError

    def init_payload(self) -> dict:
        raise NotImplementedError

    def summary(self) -> dict:
        return {"gid": self.gid, "kind": self.kind, "active": None if self.active is None else str(self.active)}
