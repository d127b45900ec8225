"""Honest strategies for every role, the honest accuser's decision procedure,
the localValid/globalValid predicates, and a seeded adversary library.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Mapping, Sequence

from .core import (
    DATA_DOMAIN, TAG_DOMAIN, AgentId, AggregateSignature, Certification, KeyRegistry, SignedBatchTag,
    element_is_valid, verify_aggregate,
)
from .errors import ConfigError, IllegalMove
from .merkle import MerkleTree, leaf_hash
from .trace import TraceResult, run_trace

if TYPE_CHECKING:
    from .games.availability import DataAvailabilityGame
    from .games.legality import IntegrityGame
    from .games.membership import MembershipGame


# -- knowledge -------------------------------------------------------------------

@dataclass
class PlayerKnowledge:
    registry: KeyRegistry
    S: int
    trees: dict[int, MerkleTree] = field(default_factory=dict)
    batches: dict[int, list[bytes]] = field(default_factory=dict)
    # element -> (tag handle, position) of its first occurrence in a prior legal tag
    history: dict[bytes, tuple[int, int]] = field(default_factory=dict)
    compressed: dict[int, tuple[bytes, AggregateSignature]] = field(default_factory=dict)
    # tag id -> handles of certified tags seen with that id, in posting order
    seen: dict[int, list[tuple[int, bytes]]] = field(default_factory=dict)

    def learn(self, handle: int, elements: Sequence[bytes]) -> None:
        self.batches[handle] = list(elements)
        self.trees[handle] = MerkleTree(list(elements))

    def record_legal(self, handle: int) -> None:
        for pos, e in enumerate(self.batches.get(handle, [])):
            self.history.setdefault(e, (handle, pos))

    def observe_tag(self, handle: int, sbt: SignedBatchTag) -> None:
        if verify_aggregate(sbt.sig, sbt.tag, self.registry, self.S) is Certification.CERTIFIED:
            self.seen.setdefault(sbt.tag.id, []).append((handle, sbt.tag.root))


# -- validity predicates ------------------------------------------------------------

def _no_dup(elements: Sequence[bytes]) -> bool:
    return len(set(elements)) == len(elements)


def local_valid(elements: Sequence[bytes], h: bytes, registry: KeyRegistry) -> bool:
    return (
        bool(elements)
        and MerkleTree(list(elements)).root == h
        and all(element_is_valid(e, registry) for e in elements)
        and _no_dup(elements)
    )


def global_valid(elements: Sequence[bytes], h: bytes, history, registry: KeyRegistry) -> bool:
    return local_valid(elements, h, registry) and not any(e in history for e in elements)


# -- membership strategies -------------------------------------------------------------

def _path_hash(tree: MerkleTree, i: int, level: int) -> bytes | None:
    try:
        return tree.node_hash_at(level, i >> level)
    except Exception:
        return None


def honest_initial_middle(tree: MerkleTree, i: int, levels: int) -> bytes | None:
    """Middle committed at opening for a claim over a path of ``levels`` edges."""
    if levels < 2:
        return None
    return _path_hash(tree, i, levels // 2)


def honest_claimer_move(g: "MembershipGame", tree: MerkleTree) -> dict:
    i = g.initial_position
    if g.path_length >= 2:
        return {"type": "bisect", "hash": tree.node_hash_at(g.middle_level, i >> g.middle_level).hex()}
    return {"type": "reveal", "hash": tree.sibling(i, g.bottom_level).hex()}


def honest_challenger_move(g: "MembershipGame", tree: MerkleTree) -> dict:
    """Keep the top on the true path and the bottom off it."""
    expected = _path_hash(tree, g.initial_position, g.middle_level)
    return {"type": "select", "bottom": g.middle == expected}


def random_membership_move(g: "MembershipGame", player: AgentId, rng: random.Random,
                           hashes: Sequence[bytes]) -> dict | None:
    """Any legal move for ``player``; committed hashes are drawn from ``hashes``."""
    if g.finished or g.active != player:
        return None
    if player == g.B:
        return {"type": "select", "bottom": rng.random() < 0.5}
    kind = "bisect" if g.path_length >= 2 else "reveal"
    return {"type": kind, "hash": rng.choice(hashes).hex()}


ADVERSARIAL_CONSTANTS = (b"\x00" * 32, b"\xff" * 32, leaf_hash(b"adversary"))


def tree_hashes(*trees: MerkleTree) -> list[bytes]:
    out: list[bytes] = []
    for t in trees:
        for layer in t.levels:
            out.extend(layer)
    return sorted(set(out) | set(ADVERSARIAL_CONSTANTS))


# -- decompress-and-hash strategies -----------------------------------------------------

def honest_requester_move(g: "DataAvailabilityGame", trace: TraceResult) -> dict:
    if g.stage == "await_requester":
        if trace.ok:
            return {"type": "concede"}
        n = trace.length
        move = {"type": "challenge", "n": n, "final": trace.state_at(n).encode().hex()}
        if n > 1:
            move["middle"] = trace.commitment_at(n // 2).hex()
        return move
    if g.stage == "bisect":
        return {"type": "bisect", "hash": trace.commitment_at(g.mid).hex()}
    if g.stage == "reveal":
        return {"type": "reveal", "state": trace.state_at(g.lo).encode().hex()}
    raise ValueError(f"requester has no move in stage {g.stage}")


def honest_selector_move(g: "DataAvailabilityGame", trace: TraceResult) -> dict:
    return {"type": "select", "agree": g.middle == trace.commitment_at(g.mid)}


def honest_staker_response(g: Any, k: PlayerKnowledge, me: AgentId) -> dict | None:
    """Move of an honest staker in a game opened against a tag it backs, or ``None``."""
    from .games.availability import DataAvailabilityGame, post_move
    from .games.legality import IntegrityGame
    from .games.membership import PathGame

    handle = g.tags[0]
    if isinstance(g, DataAvailabilityGame):
        if g.stage == "await_data":
            if handle not in k.compressed:
                return None
            data, sig = k.compressed[handle]
            return post_move(data, sig)
        if g.stage == "select" and g.poster == me:
            return honest_selector_move(g, run_trace(g.data, g.root))
        return None
    if isinstance(g, IntegrityGame):
        return honest_integrity_defense(g, k, me)
    if isinstance(g, PathGame) and g.inner.active == me and handle in k.trees:
        return honest_challenger_move(g.inner, k.trees[handle])
    return None


def _tree_for(g: "IntegrityGame", k: PlayerKnowledge, pos: int) -> MerkleTree | None:
    return k.trees.get(g.tags[min(pos, len(g.tags) - 1)])


def honest_integrity_defense(g: "IntegrityGame", k: PlayerKnowledge, me: AgentId) -> dict | None:
    if g.finished or g.active != me:
        return None
    if g.inner is None:
        for pos in (0, 1):
            tree = _tree_for(g, k, pos)
            i = g.positions[pos]
            handle = g.tags[min(pos, len(g.tags) - 1)]
            batch = k.batches.get(handle)
            if tree is None or batch is None or not 0 <= i < len(batch):
                continue
            if batch[i] != g.e:
                _, levels = g.trees[pos]
                mid = honest_initial_middle(tree, i, levels)
                return {"type": "select_path", "pos": pos, "element": batch[i].hex(),
                        "middle": None if mid is None else mid.hex()}
        return None  # a true accusation: no winning move exists
    return honest_claimer_move(g.inner, _tree_for(g, k, g.pos))


def honest_integrity_accuser_move(g: "IntegrityGame", k: PlayerKnowledge) -> dict | None:
    if g.finished or g.inner is None or g.active != g.client:
        return None
    return honest_challenger_move(g.inner, _tree_for(g, k, g.pos))


# -- honest accuser ----------------------------------------------------------------------

@dataclass(frozen=True)
class Action:
    kind: str  # Accept | OpenCertifiability | OpenDAorHashDispute | OpenValidity | OpenIntegrity1 | OpenIntegrity2 | OpenUniqueBatch
    args: tuple = ()


ACCEPT = Action("Accept")

# fraud proof opened by each action, for cost comparison
ACTION_FP = {
    "OpenCertifiability": "certifiability",
    "OpenDAorHashDispute": "data",
    "OpenValidity": "validity",
    "OpenIntegrity1": "integrity1",
    "OpenIntegrity2": "integrity2",
    "OpenUniqueBatch": "uniqueness",
}


def _legality_action(batch: list[bytes], k: PlayerKnowledge) -> Action | None:
    for i, e in enumerate(batch):
        if not element_is_valid(e, k.registry):
            return Action("OpenValidity", (e, i))
    first: dict[bytes, int] = {}
    for i, e in enumerate(batch):
        if e in first:
            return Action("OpenIntegrity1", (e, first[e], i))
        first[e] = i
    for i, e in enumerate(batch):
        if e in k.history:
            prev, j = k.history[e]
            return Action("OpenIntegrity2", (e, prev, i, j))
    return None


def honest_accuse(handle: int, sbt: SignedBatchTag, k: PlayerKnowledge,
                  costs: Mapping[str, int] | None = None) -> Action:
    """Decide how to treat a posted tag.

    Checks run in a fixed order: certification, availability and root,
    element validity, intra-batch duplicates, history duplicates, same-id
    forks.  When several fraud proofs apply and ``costs`` (client cost per
    fraud proof) is given, the cheapest one is chosen, ties going to the
    earlier check.
    """
    verdict = verify_aggregate(sbt.sig, sbt.tag, k.registry, k.S)
    if verdict is not Certification.CERTIFIED:
        return Action("OpenCertifiability", ("length" if verdict is Certification.TOO_FEW else "signature",))
    found: list[Action] = []
    batch = k.batches.get(handle)
    if batch is None or k.trees[handle].root != sbt.tag.root or k.trees[handle].height != sbt.tag.levels:
        found.append(Action("OpenDAorHashDispute"))
    else:
        act = _legality_action(batch, k)
        if act is not None:
            found.append(act)
    for other, root in k.seen.get(sbt.tag.id, []):
        if other != handle and root != sbt.tag.root:
            found.append(Action("OpenUniqueBatch", (other,)))
            break
    if not found:
        return ACCEPT
    if costs is None:
        return found[0]
    return min(found, key=lambda a: costs.get(ACTION_FP[a.kind], 0))


# -- adversary scripts ---------------------------------------------------------------------

MISBEHAVIORS = (
    "post_uncertified",
    "post_invalid_element",
    "post_intra_duplicate",
    "post_cross_duplicate",
    "post_fork_same_id",
    "withhold_translation",
    "post_garbage_data",
    "go_silent_in_game",
    "play_random_moves",
    "censor",
)


@dataclass(frozen=True)
class Misbehavior:
    kind: str
    round: int | None = None  # None: every round
    arg: int = 0


@dataclass(frozen=True)
class AdversaryScript:
    entries: tuple[Misbehavior, ...] = ()
    seed: int = 0

    @classmethod
    def parse(cls, items: Any, seed: int = 0) -> "AdversaryScript":
        """Accepts a list of names or ``{"kind", "round", "arg"}`` objects."""
        entries = []
        for item in items or []:
            if isinstance(item, str):
                item = {"kind": item}
            kind = item.get("kind")
            if kind not in MISBEHAVIORS:
                raise ConfigError(f"unknown misbehavior {kind!r}")
            entries.append(Misbehavior(kind, item.get("round"), int(item.get("arg", 0))))
        return cls(tuple(entries), seed)

    def kinds(self) -> set[str]:
        return {m.kind for m in self.entries}

    def to_json(self) -> list[dict]:
        return [{"kind": m.kind, "round": m.round, "arg": m.arg} for m in self.entries]


def adversary_step(script: AdversaryScript, round_no: int) -> list[Misbehavior]:
    """Misbehaviors scheduled for ``round_no``."""
    return [m for m in script.entries if m.round is None or m.round == round_no]


def adversary_rng(script: AdversaryScript, round_no: int) -> random.Random:
    return random.Random(script.seed * 1_000_003 + round_no)


# -- game driver ------------------------------------------------------------------------------

Strategy = Callable[[Any, AgentId], "dict | None"]


def silent(g: Any, me: AgentId) -> None:
    return None


def random_defender(rng: random.Random, hashes: Sequence[bytes], elements: Sequence[bytes] = ()) -> Strategy:
    """Seeded adversary choosing uniformly among legal-looking moves."""
    from .games.availability import DataAvailabilityGame
    from .games.legality import IntegrityGame
    from .games.membership import PathGame

    pool = list(elements) + [b"adversary-element"]

    def act(g: Any, me: AgentId) -> dict | None:
        if isinstance(g, PathGame):
            return random_membership_move(g.inner, me, rng, hashes)
        if isinstance(g, IntegrityGame):
            if g.active != me:
                return None
            if g.inner is None:
                e2 = rng.choice([e for e in pool if e != g.e] or [b"x"])
                return {"type": "select_path", "pos": rng.randrange(2), "element": e2.hex(),
                        "middle": rng.choice(hashes).hex()}
            return random_membership_move(g.inner, me, rng, hashes)
        if isinstance(g, DataAvailabilityGame) and g.stage == "select" and g.poster == me:
            return {"type": "select", "agree": rng.random() < 0.5}
        return None

    return act


class HonestClient:
    """Client side of every game, played from the client's knowledge."""

    def __init__(self, k: PlayerKnowledge):
        self.k = k
        self._traces: dict[bytes, TraceResult] = {}

    def _trace(self, data: bytes, root: bytes) -> TraceResult:
        key = sha256_pair(data, root)
        if key not in self._traces:
            self._traces[key] = run_trace(data, root)
        return self._traces[key]

    def __call__(self, g: Any, me: AgentId) -> dict | None:
        from .games.availability import DataAvailabilityGame
        from .games.legality import IntegrityGame
        from .games.membership import PathGame

        if g.finished or g.active != me:
            return None
        if isinstance(g, PathGame):
            return honest_claimer_move(g.inner, self.k.trees[g.tags[0]])
        if isinstance(g, IntegrityGame):
            return honest_integrity_accuser_move(g, self.k)
        if isinstance(g, DataAvailabilityGame):
            return honest_requester_move(g, self._trace(g.data, g.root))
        return None


def sha256_pair(a: bytes, b: bytes) -> bytes:
    from .core import sha256
    return sha256(sha256(a) + b)


def play_game(chain: Any, gid: int, actor_for: Callable[[AgentId], Strategy | None], max_moves: int = 100_000):
    """Drive a game to settlement: one tick per move; a silent active player is timed out."""
    from .games.availability import STAKERS

    g = chain.games[gid]
    for _ in range(max_moves):
        if g.finished:
            return chain.settlements[gid]
        movers = chain.stakers(g.tags[0]) if g.active == STAKERS else [g.active]
        moved = False
        for who in movers:
            strat = actor_for(who)
            mv = strat(g, who) if strat is not None else None
            if mv is None:
                continue
            chain.advance_time(1)
            try:
                chain.move(gid, who, mv)
            except IllegalMove:
                continue
            moved = True
            break
        if not moved:
            chain.advance_time(max(0, g.time_left(chain.now)))
            chain.timeout(gid)
    raise RuntimeError(f"game {gid} did not terminate")


def execute_action(chain: Any, k: PlayerKnowledge, client: AgentId, handle: int, action: Action,
                   actor_for: Callable[[AgentId], Strategy | None]) -> list[int]:
    """Open and play the fraud proof(s) an action calls for; returns the game ids."""
    from .games.availability import open_data_availability
    from .games.legality import (
        open_certifiability, open_integrity1, open_integrity2, open_unique_batch, open_validity,
    )
    from .trace import decompress

    me = HonestClient(k)

    def actors(who: AgentId) -> Strategy | None:
        return me if who == client else actor_for(who)

    kind = action.kind
    gids: list[int] = []
    if kind == "Accept":
        return gids
    if kind == "OpenCertifiability":
        gids.append(open_certifiability(chain, client, handle, action.args[0]))
    elif kind == "OpenUniqueBatch":
        gids.append(open_unique_batch(chain, client, action.args[0], handle))
    elif kind == "OpenDAorHashDispute":
        gid = open_data_availability(chain, client, handle)
        gids.append(gid)
        play_game(chain, gid, actors)
        g = chain.games[gid]
        if g.data is not None and chain.tag(handle).status.value == "pending":
            k.learn(handle, decompress(g.data))
            follow = honest_accuse(handle, chain.tag(handle).sbt, k, chain.costs.CC)
            if follow.kind not in ("Accept", "OpenDAorHashDispute"):
                gids += execute_action(chain, k, client, handle, follow, actor_for)
    elif kind == "OpenValidity":
        e, i = action.args
        tree = k.trees[handle]
        for staker in chain.stakers(handle):
            if chain.tag(handle).status.value != "pending":
                break
            gid = open_validity(chain, client, handle, e, i, honest_initial_middle(tree, i, tree.height), staker)
            gids.append(gid)
            play_game(chain, gid, actors)
    elif kind in ("OpenIntegrity1", "OpenIntegrity2"):
        if kind == "OpenIntegrity1":
            e, i, j = action.args
            gid = open_integrity1(chain, client, handle, e, [i, j])
        else:
            e, prev, i, j = action.args
            gid = open_integrity2(chain, client, handle, prev, e, [i, j])
        gids.append(gid)
        play_game(chain, gid, actors)
    else:
        raise ValueError(f"unknown action {kind}")
    return gids


# -- the linear protocol of one proposer and one honest checker ----------------------------------

def linear_protocol(elements: Sequence[bytes], h: bytes, history: Sequence[bytes], registry: KeyRegistry,
                    adversary: str = "silent", seed: int = 0, S: int = 3) -> bool:
    """A proposer posts ``(elements, h)``; the honest checker accepts or disputes.

    Returns whether the proposal consolidates.  ``history`` elements are first
    consolidated in an earlier tag.  ``adversary`` is ``"silent"`` or
    ``"random"`` and drives the proposer in every game.
    """
    from .chain import Chain
    from .core import BatchTag, SignedBatchTag, replica, sign_aggregate, stf
    from .economics import UNIT
    from .trace import compress

    proposer, client = replica(0), stf(0)
    for agent in [replica(i) for i in range(S)] + [client]:
        if agent not in registry:
            registry.register(agent)
    signers = list(range(S))
    chain = Chain(registry, S=S)
    chain.mint(proposer, 1000 * UNIT)
    chain.mint(client, 1000 * UNIT)
    k = PlayerKnowledge(registry, S)

    def post(tag_id: int, leaves: Sequence[bytes], root: bytes) -> int:
        levels = MerkleTree(list(leaves)).height
        tag = BatchTag(tag_id, root, levels)
        sbt = SignedBatchTag(tag, sign_aggregate(registry, signers, TAG_DOMAIN, tag.encode()))
        handle = chain.post_signed_batch_tag(proposer, sbt)
        chain.place_stake(proposer, handle)
        data = compress(list(leaves))
        k.compressed[handle] = (data, sign_aggregate(registry, signers, DATA_DOMAIN, data))
        return handle

    if history:
        prev = post(0, history, MerkleTree(list(history)).root)
        k.learn(prev, history)
        chain.advance_time(chain.challenge_period + 1)
        k.record_legal(prev)
    handle = post(1, elements, h)
    k.learn(handle, elements)
    k.observe_tag(handle, chain.tag(handle).sbt)
    action = honest_accuse(handle, chain.tag(handle).sbt, k)
    if action.kind == "OpenDAorHashDispute":
        # the checker holds the proposed tree but its root disagrees: dispute the posted data
        del k.batches[handle]
        del k.trees[handle]
    rng = random.Random(seed)
    if adversary == "random":
        hashes = tree_hashes(MerkleTree(list(elements)), *([MerkleTree(list(history))] if history else []))
        proposer_play: Strategy = random_defender(rng, hashes, list(elements) + list(history))
    else:
        proposer_play = silent
    # the proposer always publishes its data when asked
    from .games.availability import DataAvailabilityGame

    def proposer_strategy(g: Any, me: AgentId) -> dict | None:
        if isinstance(g, DataAvailabilityGame) and g.stage == "await_data":
            return honest_staker_response(g, k, me)
        return proposer_play(g, me)

    execute_action(chain, k, client, handle, action,
                   lambda who: proposer_strategy if who == proposer else None)
    chain.advance_time(chain.challenge_period + 1)
    return chain.tag(handle).status.value == "consolidated"
