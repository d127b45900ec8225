"""One-step and multi-step (path bisection) membership games.

Levels are counted from the leaves (level 0) up to the root (level
``height``).  The challenged sub-path spans ``path_length`` edges between
``bottom`` (at ``bottom_level``) and ``top``.
"""
from __future__ import annotations

from typing import Sequence

from ..core import AgentId
from ..errors import IllegalMove
from ..merkle import MembershipProof, bit_at_level, fold_proof, leaf_hash, node_hash
from .base import CLIENT, DEFENDER, Effect, Game, emit, finish


def membership_one_step(
    root: bytes, height: int, e: bytes, i: int, proof: MembershipProof | Sequence[bytes],
    A: AgentId, B: AgentId, h_e: bytes | None = None,
) -> AgentId:
    """Winner of the one-step membership game: A iff the proof folds to ``root``."""
    siblings = proof.sibling_hashes if isinstance(proof, MembershipProof) else tuple(proof)
    if h_e is not None and leaf_hash(e) != h_e:
        return B
    if len(siblings) != height or i < 0 or i >> height:
        return B
    return A if fold_proof(leaf_hash(e), i, siblings) == root else B


class MembershipGame:
    """Arbitration rules of the multi-step membership game, without clocks."""

    def __init__(self, A: AgentId, B: AgentId, top: bytes, bottom: bytes, middle: bytes | None,
                 initial_position: int, path_length: int, bottom_level: int = 0):
        self.A, self.B = A, B
        self.top, self.bottom, self.middle = top, bottom, middle
        self.initial_position = initial_position
        self.path_length = path_length
        self.bottom_level = bottom_level
        self.winner: AgentId | None = None
        self.claimer_moves = 0
        self.challenger_moves = 0
        if path_length <= 0:
            self.active = None
            self.winner = A if bottom == top else B
        elif path_length == 1:
            # no interior node to bisect: open straight at the reveal stage
            self.middle = None
            self.active = A
        else:
            self.active = B

    @property
    def finished(self) -> bool:
        return self.winner is not None

    @property
    def middle_level(self) -> int:
        return self.bottom_level + self.path_length // 2

    def _require(self, player: AgentId, who: AgentId, what: str) -> None:
        if self.finished:
            raise IllegalMove("membership game is over")
        if player != who or self.active != who:
            raise IllegalMove(f"{what} is not a legal move for {player}")

    def select_subpath(self, player: AgentId, select_bottom: bool) -> None:
        self._require(player, self.B, "selectSubpath")
        if self.path_length < 2 or self.middle is None:
            raise IllegalMove("nothing to select: sub-path has no middle")
        if select_bottom:
            self.top = self.middle
            self.path_length //= 2
        else:
            self.bottom = self.middle
            self.bottom_level += self.path_length // 2
            self.path_length = -(-self.path_length // 2)
        self.middle = None
        self.active = self.A
        self.challenger_moves += 1

    def bisect_subpath(self, player: AgentId, h_m: bytes) -> None:
        self._require(player, self.A, "bisectSubpath")
        if self.path_length < 2:
            raise IllegalMove("bisectSubpath needs a sub-path of length >= 2")
        self.middle = h_m
        self.active = self.B
        self.claimer_moves += 1

    def reveal_sibling(self, player: AgentId, h_s: bytes) -> None:
        self._require(player, self.A, "revealSibling")
        if self.path_length != 1:
            raise IllegalMove("revealSibling needs a sub-path of length 1")
        if bit_at_level(self.initial_position, self.bottom_level):
            c = node_hash(h_s, self.bottom)
        else:
            c = node_hash(self.bottom, h_s)
        self.winner = self.A if c == self.top else self.B
        self.active = None
        self.claimer_moves += 1

    def apply(self, player: AgentId, move: dict) -> None:
        kind = move.get("type")
        if kind == "select":
            self.select_subpath(player, bool(move["bottom"]))
        elif kind == "bisect":
            self.bisect_subpath(player, bytes.fromhex(move["hash"]))
        elif kind == "reveal":
            self.reveal_sibling(player, bytes.fromhex(move["hash"]))
        else:
            raise IllegalMove(f"unknown membership move {kind!r}")

    def forfeit(self) -> None:
        """The active player ran out of time."""
        self.winner = self.B if self.active == self.A else self.A
        self.active = None

    def snapshot(self) -> dict:
        return {
            "top": self.top.hex(),
            "bottom": self.bottom.hex(),
            "middle": None if self.middle is None else self.middle.hex(),
            "initial_position": self.initial_position,
            "path_length": self.path_length,
            "bottom_level": self.bottom_level,
        }


def membership_init(e: bytes, i: int, h_e: bytes, h_m: bytes | None, root: bytes, levels: int,
                    A: AgentId, B: AgentId) -> MembershipGame:
    """Open a multi-step game claiming ``e`` is leaf ``i`` of the tree with ``root``.

    ``levels`` is the tree height, so the leaf-to-root path has ``levels``
    edges.  A lie about ``h_e`` hands the game to B immediately.
    """
    if leaf_hash(e) != h_e:
        g = MembershipGame(A, B, root, h_e, h_m, i, 1)
        g.winner, g.active = B, None
        return g
    if levels >= 2 and h_m is None:
        raise IllegalMove("a path of two or more edges needs a committed middle hash")
    return MembershipGame(A, B, root, h_e, h_m, i, levels)


def membership_event(g: MembershipGame) -> Effect:
    return emit("initMultistepMembership", **g.snapshot())


class PathGame(Game):
    """Chain wrapper: a client claims an element sits at a position; a staker disputes."""

    kind = "validity"
    move_costs = {"select": "select_subpath", "bisect": "bisect_subpath", "reveal": "reveal_sibling"}

    def __init__(self, inner: MembershipGame, tag: int, clock_ticks: int, kind: str = "validity",
                 element: bytes = b"", init_extra: dict | None = None):
        super().__init__(inner.A, (tag,), clock_ticks)
        self.kind = kind
        self.inner = inner
        self.element = element
        self._init_extra = init_extra or {}
        self._initial = inner.snapshot()
        self.opening_effects: list[Effect] = [membership_event(inner)]

    def start(self, now: int) -> list[Effect]:
        self.set_turn(self.inner.active, now)
        return self._settle_if_done()

    def _settle_if_done(self) -> list[Effect]:
        g = self.inner
        if not g.finished:
            return []
        if g.winner == self.client:
            self.side_won = CLIENT
            return [Effect("defeat_staker", {"staker": g.B, "tag": self.tags[0]}), finish(CLIENT)]
        self.side_won = DEFENDER
        return [finish(DEFENDER, g.B)]

    def _apply(self, player: AgentId, move: dict, now: int) -> list[Effect]:
        self.inner.apply(player, move)
        kind = move["type"]
        self.set_turn(self.inner.active, now)
        effects = []
        if kind == "select":
            effects.append(emit("challengedSubpath", **self.inner.snapshot()))
        elif kind == "bisect":
            effects.append(emit("bisectedSubpath", **self.inner.snapshot()))
        return effects + self._settle_if_done()

    def _on_timeout(self, now: int) -> list[Effect]:
        self.inner.forfeit()
        self.active = None
        return self._settle_if_done()

    def init_payload(self) -> dict:
        g = self.inner
        d = {
            "A": str(g.A), "B": str(g.B), "tag": self.tags[0], "element": self.element.hex(),
            **self._initial,
        }
        d.update(self._init_extra)
        return d
