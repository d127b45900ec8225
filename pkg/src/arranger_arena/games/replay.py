"""Rebuild a game from a transcript and re-apply its moves under the arbitration rules."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

from ..core import AgentId, KeyRegistry
from ..errors import ArenaError
from ..merkle import leaf_hash
from .availability import DataAvailabilityGame
from .base import CLIENT, DEFENDER, Game
from .legality import IntegrityGame
from .membership import MembershipGame, PathGame


class ReplayError(ArenaError):
    """The transcript's record of a game disagrees with the rules."""


class UnknownGame(ArenaError):
    pass


@dataclass
class ReplayReport:
    gid: int
    kind: str
    lines: list[str] = field(default_factory=list)
    side: str | None = None

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def parse_transcript(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _agent(text: str) -> AgentId:
    return AgentId.parse(text)


def _short(v) -> str:
    if isinstance(v, str) and len(v) > 16:
        return v[:12] + ".."
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}={_short(x)}" for k, x in sorted(v.items())) + "}"
    return str(v)


def _membership(p: dict) -> MembershipGame:
    A, B = _agent(p["A"]), _agent(p["B"])
    bottom = bytes.fromhex(p["bottom"])
    g = MembershipGame(A, B, bytes.fromhex(p["top"]), bottom,
                       None if p["middle"] is None else bytes.fromhex(p["middle"]),
                       p["initial_position"], p["path_length"], p["bottom_level"])
    if p.get("element") is not None and leaf_hash(bytes.fromhex(p["element"])) != bottom:
        g.winner, g.active = B, None
    return g


def rebuild(opened: dict, registry: KeyRegistry | None, S: int, stakes: dict[int, set[AgentId]]) -> Game | None:
    """Game object for a ``gameOpened`` event, or None for games decided at opening."""
    p = opened["payload"]
    init, kind, ticks = p["init"], p["kind"], p["clock_ticks"]
    client = _agent(p["client"])
    if "client_wins" in init:
        return None
    if kind == "validity":
        return PathGame(_membership(init), init["tag"], ticks, kind, bytes.fromhex(init["element"]))
    if kind in ("integrity1", "integrity2"):
        trees = [(bytes.fromhex(r), lv) for r, lv in init["trees"]]
        return IntegrityGame(kind, client, tuple(init["tags"]), trees, bytes.fromhex(init["element"]),
                             init["positions"], [_agent(s) for s in init["stakers"]], ticks)
    if kind == "data":
        if registry is None:
            raise ReplayError("replaying a data-availability game needs the key registry")
        tag = init["tag"]
        return DataAvailabilityGame(client, tag, bytes.fromhex(init["root"]), init["mask"], registry, S,
                                    lambda a: a in stakes.get(tag, set()), ticks)
    raise ReplayError(f"no replay rules for game kind {kind!r}")


def replay_game(events: Iterable[dict], gid: int, registry: KeyRegistry | None = None, S: int = 1) -> ReplayReport:
    """Re-validate every recorded move of game ``gid``; raises ReplayError on divergence."""
    stakes: dict[int, set[AgentId]] = {}
    game: Game | None = None
    report: ReplayReport | None = None
    opened_payload: dict | None = None
    for ev in events:
        kind, p = ev.get("kind"), ev.get("payload", {})
        if kind == "staked":
            stakes.setdefault(p["tag"], set()).add(_agent(p["agent"]))
        elif kind == "stakeRemoved":
            stakes.get(p["tag"], set()).discard(_agent(p["agent"]))
        if p.get("gid") != gid:
            continue
        if kind == "gameOpened":
            opened_payload = p
            report = ReplayReport(gid, p["kind"])
            report.lines.append(f"game {gid} ({p['kind']}) opened at tick {ev['tick']} by {p['client']}, "
                                f"stake {p['stake']}, tags {p['tags']}")
            game = rebuild(ev, registry, S, stakes)
            if game is None:
                report.lines.append(f"  decided at opening: client wins = {p['init']['client_wins']}")
            else:
                game.gid = gid
                game.start(ev["tick"])
        elif report is None:
            continue
        elif kind == "gameMove":
            if game is None:
                raise ReplayError(f"game {gid} takes no moves but the transcript records one")
            player = _agent(p["player"])
            mover = game.active
            try:
                game.apply(player, p["move"], ev["tick"])
            except (ArenaError, KeyError, ValueError, TypeError) as exc:
                raise ReplayError(f"tick {ev['tick']}: move by {player} rejected: {exc}") from exc
            left = game.clocks.get(mover)
            report.lines.append(f"  tick {ev['tick']:>5}  {player}  {p['move']['type']:<11} "
                                f"{_short({k: v for k, v in p['move'].items() if k != 'type'})}  clock left {left}")
        elif kind == "timeout":
            if game is None or not game.expired(ev["tick"]):
                raise ReplayError(f"tick {ev['tick']}: timeout recorded but no clock had run out")
            report.lines.append(f"  tick {ev['tick']:>5}  timeout, {p['loser']} ran out of time")
            game.timeout(ev["tick"])
        elif kind == "gameSettled":
            side = p["side"]
            expected = (CLIENT if opened_payload["init"]["client_wins"] else DEFENDER) if game is None \
                else game.side_won
            if expected != side:
                raise ReplayError(f"transcript settles game {gid} for {side}, rules give {expected}")
            report.side = side
            report.lines.append(f"  settled at tick {ev['tick']}: {side} side wins, winner {p['winner']}")
    if report is None:
        raise UnknownGame(f"no game {gid} in transcript")
    if game is not None and game.finished and report.side is None:
        raise ReplayError(f"rules finish game {gid} but the transcript never settles it")
    return report
