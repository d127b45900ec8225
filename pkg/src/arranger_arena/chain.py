"""Simulated L1: logger contract, stake ledger, game registry and event log.

Time is logical: one tick is one L1 slot.  Every token movement goes
through this module so that

    sum(balances) + stakes + communal pools + game escrows + move allowances
    + payment contracts + burned + gas == minted

holds after every transition (see :meth:`Chain.conservation_gap`).
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable

from .core import AgentId, KeyRegistry, SignedBatchTag
from .economics import EconomicParams, derive_costs, distribute_rewards
from .errors import IllegalMove, NotChallengeable, NotTimedOut, PreconditionFailed, Underfunded
from .games.base import CLIENT, Effect, Game

log = logging.getLogger(__name__)

DEFAULT_CHALLENGE_PERIOD = 100
DEFAULT_CLOCK = 50


class TagStatus(str, enum.Enum):
    PENDING = "pending"
    CONSOLIDATED = "consolidated"
    DISCARDED = "discarded"


@dataclass
class TagRecord:
    handle: int
    sbt: SignedBatchTag
    poster: AgentId
    post_tick: int
    deadline: int
    status: TagStatus = TagStatus.PENDING
    discard_reason: str | None = None
    evidence: list[str] = field(default_factory=list)


def _jsonify(o: Any):
    if isinstance(o, AgentId):
        return str(o)
    if isinstance(o, (bytes, bytearray)):
        return o.hex()
    if isinstance(o, enum.Enum):
        return o.value
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps({"tick": self.tick, "kind": self.kind, "payload": self.payload},
                          sort_keys=True, separators=(",", ":"), default=_jsonify)


@dataclass
class Settlement:
    gid: int
    kind: str
    side: str
    winner: AgentId | None
    transfers: list[tuple[str, Any, int]] = field(default_factory=list)
    discarded: list[int] = field(default_factory=list)


class Chain:
    def __init__(self, registry: KeyRegistry, params: EconomicParams | None = None, S: int = 1,
                 challenge_period: int = DEFAULT_CHALLENGE_PERIOD, clock_ticks: int = DEFAULT_CLOCK):
        self.registry = registry
        self.params = params or EconomicParams()
        self.costs = derive_costs(self.params)
        self.S = S
        self.challenge_period = challenge_period
        self.clock_ticks = clock_ticks
        self.now = 0
        self.balances: dict[AgentId, int] = {}
        self.tags: list[TagRecord] = []
        self.stakes: dict[int, dict[AgentId, int]] = {}
        self.communal: dict[int, int] = {}
        self.games: dict[int, Game] = {}
        self.game_stake: dict[int, int] = {}
        self.allowance: dict[int, dict[AgentId, int]] = {}
        self.settlements: dict[int, Settlement] = {}
        self.contracts: dict[int, Any] = {}
        self.events: list[Event] = []
        self.minted = 0
        self.burned = 0
        self.gas = 0
        self.l2_balances: dict[AgentId, int] = {}
        self.l2_fee_pool = 0
        self.l2_minted = 0
        self.l2_fees_in = 0

    # -- event log -----------------------------------------------------------------

    def emit(self, kind: str, /, **payload) -> Event:
        ev = Event(self.now, kind, payload)
        self.events.append(ev)
        log.debug("t=%d %s %s", self.now, kind, payload)
        return ev

    def export_events(self) -> str:
        return "".join(ev.to_json() + "\n" for ev in self.events)

    # -- ledger -------------------------------------------------------------------------

    def mint(self, agent: AgentId, amount: int) -> None:
        self.balances[agent] = self.balances.get(agent, 0) + amount
        self.minted += amount
        self.emit("mint", agent=agent, amount=amount)

    def balance(self, agent: AgentId) -> int:
        return self.balances.get(agent, 0)

    def _debit(self, agent: AgentId, amount: int) -> None:
        have = self.balances.get(agent, 0)
        if have < amount:
            raise Underfunded(agent, amount, have)
        self.balances[agent] = have - amount

    def _credit(self, agent: AgentId, amount: int) -> None:
        if amount:
            self.balances[agent] = self.balances.get(agent, 0) + amount

    def _can_pay(self, agent: AgentId, amount: int, gid: int | None = None, tag: int | None = None) -> bool:
        avail = self.balance(agent)
        if gid is not None:
            avail += self.allowance.get(gid, {}).get(agent, 0)
        if tag is not None:
            avail += self.communal.get(tag, 0)
        return avail >= amount

    def pay_cost(self, agent: AgentId, cost_key: str, gid: int | None = None, tag: int | None = None) -> int:
        """Pay a move cost, drawing on the game allowance and the communal pool first."""
        amount = self.params.cost(cost_key)
        if not self._can_pay(agent, amount, gid, tag):
            raise Underfunded(agent, amount, self.balance(agent))
        due = amount
        if tag is not None:
            take = min(due, self.communal.get(tag, 0))
            self.communal[tag] = self.communal.get(tag, 0) - take
            due -= take
        if gid is not None and due:
            pot = self.allowance.get(gid, {})
            take = min(due, pot.get(agent, 0))
            if take:
                pot[agent] -= take
                due -= take
        self._debit(agent, due)
        self.gas += amount
        return amount

    def conservation_gap(self) -> int:
        held = (
            sum(self.balances.values())
            + sum(sum(s.values()) for s in self.stakes.values())
            + sum(self.communal.values())
            + sum(self.game_stake.values())
            + sum(sum(a.values()) for a in self.allowance.values())
            + sum(getattr(c, "balance", 0) for c in self.contracts.values())
            + self.burned
            + self.gas
        )
        return held - self.minted

    # -- logger contract ----------------------------------------------------------------

    def post_signed_batch_tag(self, sender: AgentId, sbt: SignedBatchTag) -> int:
        """Record a tag without any validation; returns its handle."""
        self.pay_cost(sender, "post_tag")
        handle = len(self.tags)
        rec = TagRecord(handle, sbt, sender, self.now, self.now + self.challenge_period)
        self.tags.append(rec)
        self.stakes[handle] = {}
        self.communal[handle] = 0
        self.emit("postedBatchTag", handle=handle, id=sbt.tag.id, root=sbt.tag.root, levels=sbt.tag.levels,
                  signers_mask=sbt.sig.signers_mask, poster=sender, deadline=rec.deadline)
        return handle

    def tag(self, handle: int) -> TagRecord:
        return self.tags[handle]

    def pending_tags(self) -> list[TagRecord]:
        return [t for t in self.tags if t.status is TagStatus.PENDING]

    def place_stake(self, agent: AgentId, handle: int, amount: int | None = None, communal: int | None = None) -> None:
        rec = self.tags[handle]
        if rec.status is not TagStatus.PENDING:
            raise NotChallengeable(f"tag {handle} is {rec.status.value}")
        amount = self.params.s if amount is None else amount
        communal = self.params.s_com_data if communal is None else communal
        self._debit(agent, amount + communal)
        self.stakes[handle][agent] = self.stakes[handle].get(agent, 0) + amount
        self.communal[handle] += communal
        self.emit("staked", tag=handle, agent=agent, amount=amount, communal=communal)

    def stakers(self, handle: int) -> list[AgentId]:
        return list(self.stakes.get(handle, {}))

    def has_stake(self, agent: AgentId, handle: int) -> bool:
        return self.stakes.get(handle, {}).get(agent, 0) > 0

    def _discard(self, handle: int, reason: str, evidence: bool) -> None:
        rec = self.tags[handle]
        if rec.status is not TagStatus.PENDING:
            return
        rec.status = TagStatus.DISCARDED
        rec.discard_reason = reason
        for agent, amount in list(self.stakes[handle].items()):
            # stakes still present on an unstaked/evidence discard are forfeited
            self.burned += amount
        self.stakes[handle] = {}
        self.burned += self.communal[handle]
        self.communal[handle] = 0
        self.emit("discarded", tag=handle, reason=reason)
        if evidence:
            rec.evidence.append(reason)
            self.emit("fraudEvidence", tag=handle, fp=reason, id=rec.sbt.tag.id)

    def _consolidate(self, handle: int) -> None:
        rec = self.tags[handle]
        rec.status = TagStatus.CONSOLIDATED
        stakers = list(self.stakes[handle].items())
        for agent, amount in stakers:
            self._credit(agent, amount)
        self.stakes[handle] = {}
        pool = self.communal[handle]
        self.communal[handle] = 0
        if stakers:
            share, rest = divmod(pool, len(stakers))
            for k, (agent, _) in enumerate(stakers):
                self._credit(agent, share + (rest if k == 0 else 0))
        else:
            self.burned += pool
        self.emit("consolidated", tag=handle, id=rec.sbt.tag.id, root=rec.sbt.tag.root)
        self._pay_l2_rewards(rec)

    def _pay_l2_rewards(self, rec: TagRecord) -> None:
        from .core import replica

        signers = [replica(i) for i in rec.sbt.sig.signers]
        dist = distribute_rewards(self.registry.replicas, signers, rec.poster, self.params, self.l2_fee_pool)
        self.l2_fee_pool -= dist.total - dist.minted
        self.l2_minted += dist.minted
        for agent, amount in dist.deltas.items():
            self.l2_balances[agent] = self.l2_balances.get(agent, 0) + amount
        self.emit("l2Rewards", tag=rec.handle, total=dist.total, minted=dist.minted)

    def collect_fee(self, payer: AgentId, amount: int) -> None:
        """L2 fee paid by a user into the reward pool."""
        self.l2_fee_pool += amount
        self.l2_fees_in += amount

    # -- time -----------------------------------------------------------------------------

    def open_games_on(self, handle: int) -> list[Game]:
        return [g for g in self.games.values() if not g.finished and handle in g.tags]

    def advance_time(self, ticks: int) -> list[Event]:
        start = len(self.events)
        self.now += ticks
        for g in self.games.values():
            if g.expired(self.now) and not g.expiry_reported:
                g.expiry_reported = True
                self.emit("clockExpired", gid=g.gid, active=str(g.active))
        for rec in self.tags:
            if rec.status is not TagStatus.PENDING or self.now <= rec.deadline:
                continue
            if self.open_games_on(rec.handle):
                continue
            if self.stakes[rec.handle]:
                self._consolidate(rec.handle)
            else:
                self._discard(rec.handle, "unstaked", evidence=False)
        return self.events[start:]

    def expired_games(self) -> list[int]:
        return [gid for gid, g in self.games.items() if g.expired(self.now)]

    def run_timeouts(self) -> list[Settlement | None]:
        return [self.timeout(gid) for gid in self.expired_games()]

    # -- games ----------------------------------------------------------------------------

    def open_game(self, game: Game, init_cost: str | None = None, stake: bool = True) -> int:
        """Register a game, locking the opener's stake and worst-case move allowance."""
        fp = game.kind
        client = game.client
        s = self.params.stake(fp) if stake else 0
        allowance = self.costs.CC.get(fp, 0) if stake else 0
        init = self.params.cost(init_cost) if init_cost else 0
        need = s + max(allowance, init)
        if self.balance(client) < need:
            raise Underfunded(client, need, self.balance(client))
        gid = len(self.games)
        game.gid = gid
        self._debit(client, s + allowance)
        self.game_stake[gid] = s
        self.allowance[gid] = {client: allowance}
        if init_cost:
            self.pay_cost(client, init_cost, gid=gid)
        self.games[gid] = game
        self.emit("gameOpened", gid=gid, kind=fp, client=client, tags=list(game.tags), stake=s,
                  clock_ticks=game.clock_ticks,
                  init=game.init_payload())
        effects = list(getattr(game, "opening_effects", []))
        effects += game.start(self.now)
        self._process(game, effects)
        return gid

    def move(self, gid: int, player: AgentId, move: dict) -> list[Event]:
        game = self.games[gid]
        start = len(self.events)
        kind = move.get("type")
        cost_key = game.move_costs.get(kind)
        if cost_key is None:
            raise IllegalMove(f"unknown move {kind!r} for {game.kind}")
        tag = game.tags[0] if kind in game.communal_moves else None
        if not self._can_pay(player, self.params.cost(cost_key), gid, tag):
            raise Underfunded(player, self.params.cost(cost_key), self.balance(player))
        effects = game.apply(player, move, self.now)
        self.pay_cost(player, cost_key, gid=gid, tag=tag)
        self.emit("gameMove", gid=gid, player=player, move=move)
        self._process(game, effects)
        return self.events[start:]

    def timeout(self, gid: int) -> Settlement | None:
        """None when the game goes on, e.g. an integrity game moving to its next staker."""
        game = self.games[gid]
        if game.finished or not game.expired(self.now):
            raise NotTimedOut(f"game {gid} cannot be timed out at tick {self.now}")
        loser = game.active
        effects = game.timeout(self.now)
        self.emit("timeout", gid=gid, loser=str(loser))
        self._process(game, effects)
        return self.settlements.get(gid)

    def settle_game(self, gid: int, side: str, beneficiary: AgentId | None = None) -> Settlement:
        game = self.games[gid]
        if gid in self.settlements:
            raise PreconditionFailed(f"game {gid} already settled")
        if not game.finished:
            raise PreconditionFailed(f"game {gid} is not terminal")
        st = Settlement(gid, game.kind, side, game.client if side == CLIENT else beneficiary)
        stake = self.game_stake.pop(gid, 0)
        if side == CLIENT:
            self._credit(game.client, stake)
            st.transfers.append(("stake_refund", game.client, stake))
        else:
            to_winner = int(stake * self.params.rho) if beneficiary is not None else 0
            self._credit(beneficiary, to_winner) if to_winner else None
            self.burned += stake - to_winner
            st.transfers.append(("stake_to_winner", beneficiary, to_winner))
            st.transfers.append(("stake_burned", None, stake - to_winner))
        for agent, left in self.allowance.pop(gid, {}).items():
            self._credit(agent, left)
            st.transfers.append(("allowance_refund", agent, left))
        self.settlements[gid] = st
        self.emit("gameSettled", gid=gid, kind=game.kind, side=side, winner=st.winner)
        return st

    def _reward_from(self, forfeited: int, fp: str, client: AgentId) -> int:
        reward = min(self.params.reward(fp), forfeited)
        self._credit(client, reward)
        self.burned += forfeited - reward
        return reward

    def remove_stake(self, handle: int, staker: AgentId, fp: str, client: AgentId | None) -> int:
        amount = self.stakes.get(handle, {}).pop(staker, 0)
        if not amount:
            return 0
        reward = self._reward_from(amount, fp, client) if client is not None else 0
        if client is None:
            self.burned += amount
        self.emit("stakeRemoved", tag=handle, agent=staker, amount=amount, reason=fp, reward=reward)
        if not self.stakes[handle] and self.tags[handle].status is TagStatus.PENDING:
            self._discard(handle, fp, evidence=True)
        return amount

    def falsify_tag(self, handle: int, fp: str, client: AgentId | None) -> int:
        """Remove every stake on a tag at once and discard it, rewarding the client once."""
        removed = self.stakes.get(handle, {})
        total = sum(removed.values())
        for agent, amount in removed.items():
            self.emit("stakeRemoved", tag=handle, agent=agent, amount=amount, reason=fp, reward=0)
        self.stakes[handle] = {}
        reward = self._reward_from(total, fp, client) if client is not None else 0
        if client is None:
            self.burned += total
        if reward:
            self.emit("reward", agent=client, amount=reward, fp=fp)
        self._discard(handle, fp, evidence=True)
        return total

    def _process(self, game: Game, effects: Iterable[Effect]) -> None:
        for eff in effects:
            d = eff.data
            if eff.kind == "emit":
                self.emit(d["kind"], gid=game.gid, **d["payload"])
            elif eff.kind == "defeat_staker":
                self.remove_stake(d["tag"], d["staker"], game.kind, game.client)
            elif eff.kind == "falsify_tag":
                self.falsify_tag(d["tag"], game.kind, game.client if d.get("reward", True) else None)
            elif eff.kind == "finish":
                self.settle_game(game.gid, d["side"], d.get("beneficiary"))
            else:
                raise ValueError(f"unknown effect {eff.kind}")
