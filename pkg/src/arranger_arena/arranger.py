"""Simulated arranger replicas, threat models and end-to-end scenarios.

A round: users submit requests, the replicas agree on a batch (a
deterministic stub standing in for set Byzantine consensus), sign and post
its tag, and the scripted adversary may post extra tags.  An honest STF
client checks every posted tag as soon as it appears: it obtains the batch
through the paid translation protocol (or the data-availability game when
nobody translates), runs :func:`~arranger_arena.strategies.honest_accuse`
and plays whichever fraud proof is called for.
"""
from __future__ import annotations

import enum
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .chain import Chain, TagStatus
from .core import (
    DATA_DOMAIN, TAG_DOMAIN, AgentId, BatchTag, KeyRegistry, SignedBatchTag, TransactionRequest,
    is_certified, replica, sign_aggregate, stf, user,
)
from .economics import UNIT, EconomicParams, derive_costs, safety_budget, user_fee
from .errors import ConfigError, PreconditionFailed, Underfunded
from .merkle import MerkleTree
from .strategies import (
    AdversaryScript, PlayerKnowledge, adversary_rng, adversary_step, execute_action,
    global_valid, honest_accuse, honest_staker_response, random_defender, tree_hashes,
)
from .trace import compress
from . import translate

log = logging.getLogger(__name__)

ROUND_TICKS = 10


class Implementation(str, enum.Enum):
    CENTRALIZED = "Centralized"
    SEMI_DECENTRALIZED = "SemiDecentralized"
    FULLY_DECENTRALIZED = "FullyDecentralized"


class Behavior(str, enum.Enum):
    HONEST = "Honest"
    CORRUPT = "Corrupt"
    BYZANTINE = "Byzantine"


class Adversary(str, enum.Enum):
    BFT = "BFT"
    DAC = "DAC"
    ARRANGER = "Arranger"


@dataclass(frozen=True)
class ReplicaRole:
    id: AgentId
    behavior: Behavior


@dataclass(frozen=True)
class ThreatScenario:
    adversary: Adversary
    f: int = 0
    b_f: int = 0
    script: AdversaryScript = AdversaryScript()


@dataclass(frozen=True)
class ArrangerConfig:
    implementation: Implementation
    n: int
    S: int
    roles: tuple[ReplicaRole, ...]

    @property
    def honest(self) -> list[AgentId]:
        return [r.id for r in self.roles if r.behavior is Behavior.HONEST]

    @property
    def faulty(self) -> list[AgentId]:
        return [r.id for r in self.roles if r.behavior is not Behavior.HONEST]

    def behavior(self, agent: AgentId) -> Behavior:
        return self.roles[agent.index].behavior


def place_faults(n: int, f: int, b_f: int, seed: int, protect_sequencer: bool) -> tuple[ReplicaRole, ...]:
    """Seed-deterministic choice of which replicas are Byzantine or corrupt."""
    rng = random.Random(seed)
    candidates = list(range(1, n) if protect_sequencer else range(n))
    if f > len(candidates):
        raise ConfigError(f"cannot place {f} faulty replicas among {len(candidates)} candidates")
    faulty = rng.sample(candidates, f)
    byz = set(faulty[:b_f])
    roles = []
    for i in range(n):
        if i in byz:
            b = Behavior.BYZANTINE
        elif i in faulty:
            b = Behavior.CORRUPT
        else:
            b = Behavior.HONEST
        roles.append(ReplicaRole(replica(i), b))
    return tuple(roles)


def validate(cfg: ArrangerConfig, threat: ThreatScenario) -> list[str]:
    """Raise ``ConfigError`` on impossible configurations; return boundary warnings."""
    n, S = cfg.n, cfg.S
    warnings: list[str] = []
    if n < 1 or not 1 <= S <= n:
        raise ConfigError(f"need 1 <= S <= n (n={n}, S={S})")
    if not 0 <= threat.b_f <= threat.f <= n:
        raise ConfigError("need 0 <= b_f <= f <= n")
    if cfg.implementation is Implementation.FULLY_DECENTRALIZED:
        if 3 * S <= n:
            raise ConfigError(f"fully decentralized arranger needs S > n/3 (n={n}, S={S})")
        if S == n // 3 + 1:
            warnings.append(f"S={S} is the smallest threshold above n/3")
    honest = n - threat.f
    if threat.adversary is Adversary.BFT:
        if 3 * threat.b_f >= n:
            raise ConfigError("BFT threat requires fewer than n/3 Byzantine replicas")
        if honest < S:
            raise ConfigError("BFT threat requires at least S honest replicas")
    elif threat.adversary is Adversary.DAC:
        if 3 * threat.b_f >= n:
            raise ConfigError("DAC threat requires fewer than n/3 Byzantine replicas")
        if honest < S:
            raise ConfigError(f"DAC threat requires at least S={S} honest replicas, got {honest}")
        if honest == S:
            warnings.append(f"honest count equals S={S}: boundary of the DAC assumption")
    return warnings


@dataclass
class ScenarioConfig:
    implementation: Implementation = Implementation.FULLY_DECENTRALIZED
    n: int = 4
    S: int = 2
    SZ: int = 4096
    threat: ThreatScenario = ThreatScenario(Adversary.BFT)
    seed: int = 0
    rounds: int = 5
    requests_per_round: int = 3
    users: int = 3
    economics: EconomicParams = field(default_factory=EconomicParams)
    accuser_funds: int | None = None
    raw: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScenarioConfig":
        known = {"implementation", "n", "S", "SZ", "threat", "script", "seed", "rounds", "economics",
                 "requests_per_round", "users", "accuser_funds", "name", "description"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        try:
            impl = Implementation(d.get("implementation", "FullyDecentralized"))
            t = d.get("threat", {"adversary": "BFT"})
            if isinstance(t, str):
                t = {"adversary": t}
            seed = int(d.get("seed", 0))
            script = AdversaryScript.parse(d.get("script", t.get("script", [])), seed)
            threat = ThreatScenario(Adversary(t.get("adversary", "BFT")), int(t.get("f", 0)),
                                    int(t.get("b_f", 0)), script)
            n = int(d.get("n", 4))
            S = int(d.get("S", 2))
            SZ = int(d.get("SZ", 4096))
            econ = dict(d.get("economics") or {})
            econ.setdefault("SZ", SZ)
            econ.setdefault("n", n)
            econ.setdefault("S", S)
            params = EconomicParams.from_dict(econ)
            funds = d.get("accuser_funds")
        except (ValueError, TypeError, AttributeError) as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc
        return cls(impl, n, S, SZ, threat, seed, int(d.get("rounds", 5)), int(d.get("requests_per_round", 3)),
                   int(d.get("users", 3)), params,
                   None if funds is None else int(round(float(funds) * UNIT)), dict(d))

    @classmethod
    def load(cls, path: str) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d)

    def arranger(self) -> ArrangerConfig:
        protect = (self.implementation is not Implementation.FULLY_DECENTRALIZED
                   and self.threat.adversary is not Adversary.ARRANGER)
        roles = place_faults(self.n, self.threat.f, self.threat.b_f, self.seed, protect)
        return ArrangerConfig(self.implementation, self.n, self.S, roles)


@dataclass
class TagTruth:
    """What the scenario driver knows about each posted tag."""

    elements: list[bytes] | None
    origin: str  # consensus | adversary
    requests: list[bytes] = field(default_factory=list)


@dataclass
class Transcript:
    lines: list[str]
    classification: dict[int, str]
    checks: dict[str, bool]
    chain: Chain
    truth: dict[int, TagTruth]
    aborted: str | None = None

    @property
    def ok(self) -> bool:
        return self.aborted is None and all(self.checks.values())

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.text())


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class World:
    """Mutable state of one scenario run."""

    def __init__(self, cfg: ScenarioConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.arr = cfg.arranger()
        self.script = AdversaryScript(cfg.threat.script.entries, seed)
        self.rng = random.Random(seed)
        self.registry = KeyRegistry(seed)
        for i in range(cfg.n):
            self.registry.register(replica(i))
        self.client = self.registry.register(stf(0))
        self.users = [self.registry.register(user(u)) for u in range(cfg.users)]
        self.rogue_user = self.registry.register(user(cfg.users))
        self.chain = Chain(self.registry, cfg.economics, S=cfg.S)
        params = cfg.economics
        gc = derive_costs(params)
        funds = cfg.accuser_funds
        if funds is None:
            funds = safety_budget(params, gc) + 100 * UNIT
        self.chain.mint(self.client, funds)
        for r in self.registry.replicas:
            self.chain.mint(r, 1000 * UNIT)
        self.k = PlayerKnowledge(self.registry, cfg.S)
        self.replica_k = PlayerKnowledge(self.registry, cfg.S)
        self.mempool: list[bytes] = []
        self.submitted: list[bytes] = []
        self.censored: set[bytes] = set()
        self.truth: dict[int, TagTruth] = {}
        self.accepted: list[int] = []
        self.withheld: set[int] = set()
        self.garbage: dict[int, dict] = {}
        self.next_req = 0
        self.fee = user_fee(params)

    # -- helpers ---------------------------------------------------------------

    def new_request(self, author: AgentId) -> bytes:
        payload = b"req-%d-%d" % (self.next_req, self.rng.randrange(1 << 30))
        self.next_req += 1
        return TransactionRequest.create(payload, author, self.registry).encode()

    def included(self) -> set[bytes]:
        """Requests in consensus tags that are not discarded."""
        out: set[bytes] = set()
        for h, t in self.truth.items():
            if t.origin == "consensus" and self.chain.tag(h).status is not TagStatus.DISCARDED:
                out.update(t.requests)
        return out

    def refresh_history(self) -> None:
        self.k.history = {}
        for h in self.accepted:
            if self.chain.tag(h).status is not TagStatus.DISCARDED:
                for pos, e in enumerate(self.k.batches.get(h, [])):
                    self.k.history.setdefault(e, (h, pos))

    def signers_for(self, origin: str, kinds: set[str]) -> list[int]:
        if origin == "consensus":
            return [r.index for r in self.registry.replicas
                    if self.arr.behavior(r) is not Behavior.BYZANTINE or self.cfg.threat.adversary is Adversary.ARRANGER]
        return [r.index for r in self.arr.faulty]

    def post(self, poster: AgentId, tag_id: int, elements: list[bytes] | None, root: bytes, levels: int,
             signers: Sequence[int], origin: str, stakers: Sequence[AgentId], requests: Sequence[bytes] = (),
             data: bytes | None = None) -> int:
        tag = BatchTag(tag_id, root, levels)
        sbt = SignedBatchTag(tag, sign_aggregate(self.registry, list(signers), TAG_DOMAIN, tag.encode()))
        h = self.chain.post_signed_batch_tag(poster, sbt)
        self.truth[h] = TagTruth(elements, origin, list(requests))
        for s in stakers:
            self.chain.place_stake(s, h)
        if data is None and elements is not None:
            data = compress(elements)
        if data is not None:
            dsig = sign_aggregate(self.registry, list(signers), DATA_DOMAIN, data)
            self.replica_k.compressed[h] = (data, dsig)
        if elements is not None:
            self.replica_k.learn(h, elements)
        return h

    # -- agent strategies ---------------------------------------------------

    def actor_for(self, who: AgentId):
        if who.kind.name != "REPLICA":
            return None
        behavior = self.arr.behavior(who)
        if behavior is Behavior.HONEST:
            return lambda g, me: honest_staker_response(g, self.replica_k, me)
        kinds = self.script.kinds()
        if behavior is Behavior.CORRUPT and self.cfg.threat.adversary is not Adversary.ARRANGER:
            # corrupt replicas still follow the games for tags they back
            return lambda g, me: self._faulty_move(g, me, kinds, honest_default=True)
        return lambda g, me: self._faulty_move(g, me, kinds, honest_default=False)

    def _faulty_move(self, g: Any, me: AgentId, kinds: set[str], honest_default: bool):
        from .games.availability import DataAvailabilityGame

        h = g.tags[0]
        withheld = h in self.withheld
        if isinstance(g, DataAvailabilityGame) and g.stage == "await_data":
            if h in self.garbage:
                return self.garbage[h]
            if withheld:
                return None
        if "play_random_moves" in kinds:
            rng = adversary_rng(self.script, g.gid)
            known = [t for t in self.replica_k.trees.values()]
            return random_defender(rng, tree_hashes(*known[-3:]) if known else tree_hashes())(g, me)
        if honest_default or not withheld:
            return honest_staker_response(g, self.replica_k, me)
        return None

    # -- translation -----------------------------------------------------------

    def obtain_batch(self, h: int) -> None:
        """Pay a replica for the batch; accuse replicas that take the offer but stay silent."""
        rec = self.chain.tag(h)
        truth = self.truth[h]
        if truth.elements is None:
            return
        p = self.cfg.economics
        signers = rec.sbt.sig.signers
        # spread translation requests over the signers, starting at a tag-dependent one
        start = h % len(signers) if signers else 0
        for idx in signers[start:] + signers[:start]:
            r = replica(idx)
            behavior = self.arr.behavior(r)
            refuses = h in self.withheld and behavior is not Behavior.HONEST
            if h in self.withheld and self.cfg.threat.adversary is Adversary.ARRANGER:
                return
            rng = random.Random(self.seed * 7919 + h * 31 + r.index)
            offer, key = translate.replica_offer(truth.elements, rec.sbt.tag, r, self.registry, rng)
            try:
                pc = translate.client_accept(self.chain, self.client, offer, p.SR_translate, h)
            except PreconditionFailed:
                continue
            if refuses:
                self.chain.advance_time(pc.deadline - self.chain.now + 1)
                translate.withdraw(self.chain, pc, self.client)
                translate.accuse_silent(self.chain, self.client, offer.replica_sig_over_y, pc)
                continue
            translate.claim(self.chain, pc, r, key)
            self.k.learn(h, translate.recover_batch(pc))
            return

    # -- checking ----------------------------------------------------------------

    def check_tag(self, h: int) -> None:
        rec = self.chain.tag(h)
        self.refresh_history()
        self.k.observe_tag(h, rec.sbt)
        if rec.status is not TagStatus.PENDING:
            return
        if is_certified(rec.sbt, self.registry, self.cfg.S) and h not in self.k.batches:
            self.obtain_batch(h)
        if rec.status is not TagStatus.PENDING:
            return
        action = honest_accuse(h, rec.sbt, self.k, self.chain.costs.CC)
        self.chain.emit("accuserDecision", tag=h, action=action.kind)
        if action.kind == "Accept":
            self.accepted.append(h)
            return
        execute_action(self.chain, self.k, self.client, h, action, self.actor_for)
        if self.chain.tag(h).status is TagStatus.PENDING:
            follow = honest_accuse(h, rec.sbt, self.k, self.chain.costs.CC)
            if follow.kind == "Accept":
                self.accepted.append(h)

    # -- one round -----------------------------------------------------------------

    def run_round(self, round_no: int, submit: bool = True) -> list[int]:
        cfg = self.cfg
        misbehaviors = adversary_step(self.script, round_no)
        kinds = {m.kind for m in misbehaviors}
        if submit:
            for _ in range(cfg.requests_per_round):
                author = self.users[self.rng.randrange(len(self.users))]
                req = self.new_request(author)
                self.mempool.append(req)
                self.submitted.append(req)
                self.chain.collect_fee(author, int(self.fee * UNIT))
        for m in misbehaviors:
            if m.kind == "censor":
                victim = user(m.arg)
                for e in self.mempool:
                    if TransactionRequest.decode(e).author == victim:
                        self.censored.add(e)
        taken = self.included()
        batch = sorted(e for e in dict.fromkeys(self.mempool) if e not in taken and e not in self.censored)
        batch = batch[:cfg.SZ]
        posted: list[int] = []
        if batch:
            posted.append(self._post_consensus(round_no, batch, kinds))
        for m in misbehaviors:
            h = self._post_adversarial(round_no, m, batch)
            if h is not None:
                posted.append(h)
        self.mempool = [e for e in self.mempool if e not in self.included()]
        return posted

    def _post_consensus(self, round_no: int, batch: list[bytes], kinds: set[str]) -> int:
        elements = list(batch)
        arranger_threat = self.cfg.threat.adversary is Adversary.ARRANGER
        if arranger_threat and "post_invalid_element" in kinds:
            elements.append(TransactionRequest(b"forged", self.users[0], b"\x00" * 32).encode())
        if arranger_threat and "post_intra_duplicate" in kinds:
            elements.append(elements[0])
        if arranger_threat and "post_cross_duplicate" in kinds:
            old = sorted(self.included())
            if old:
                elements.append(old[0])
        tree = MerkleTree(elements)
        signers = self.signers_for("consensus", kinds)
        poster = replica(0) if self.cfg.implementation is not Implementation.FULLY_DECENTRALIZED else \
            min((replica(i) for i in signers), default=replica(0))
        stakers = [replica(i) for i in signers]
        data = None
        withhold = "withhold_translation" in kinds
        if arranger_threat and "post_garbage_data" in kinds:
            data = compress(elements[:-1] or [b"garbage"])
        h = self.post(poster, round_no, elements, tree.root, tree.height, signers, "consensus", stakers,
                      requests=batch, data=data)
        if withhold:
            self.withheld.add(h)
            if data is not None:
                from .games.availability import post_move
                self.garbage[h] = post_move(*self.replica_k.compressed[h])
        self.check_tag(h)
        return h

    def _post_adversarial(self, round_no: int, m, batch: list[bytes]) -> int | None:
        faulty = self.arr.faulty
        if not faulty or self.cfg.threat.adversary is Adversary.ARRANGER and m.kind not in ("post_uncertified", "post_fork_same_id"):
            return None
        signers = [r.index for r in faulty]
        poster = faulty[0]
        kind = m.kind
        if kind == "post_uncertified":
            junk = [self.new_request(self.rogue_user)]
            tree = MerkleTree(junk)
            h = self.post(poster, round_no, junk, tree.root, tree.height, signers[: max(0, self.cfg.S - 1)],
                          "adversary", [poster])
        elif kind == "post_fork_same_id":
            fresh = sorted(self.new_request(self.rogue_user) for _ in range(2))
            tree = MerkleTree(fresh)
            h = self.post(poster, round_no, fresh, tree.root, tree.height, signers, "adversary",
                          [replica(i) for i in signers])
        elif kind in ("post_invalid_element", "post_intra_duplicate", "post_cross_duplicate"):
            elements = [self.new_request(self.rogue_user) for _ in range(3)]
            if kind == "post_invalid_element":
                elements[1] = TransactionRequest(b"forged", self.rogue_user, b"\x00" * 32).encode()
            elif kind == "post_intra_duplicate":
                elements.append(elements[0])
            else:
                old = sorted(self.included())
                if not old:
                    return None
                elements.append(old[0])
            tree = MerkleTree(elements)
            h = self.post(poster, round_no, elements, tree.root, tree.height, signers, "adversary",
                          [replica(i) for i in signers])
        else:
            return None
        self.check_tag(h)
        return h


def classify(chain: Chain, h: int) -> str:
    rec = chain.tag(h)
    if rec.status is TagStatus.CONSOLIDATED:
        return "consolidated-legal"
    if rec.status is TagStatus.DISCARDED:
        return "discarded-with-fraud-evidence" if rec.evidence else "discarded-unstaked"
    return "pending"


def consolidation_sound(world: World, h: int, prior: set[bytes], ids: dict[int, bytes]) -> bool:
    """A consolidated tag must be certified, available, legal and unique per id."""
    rec = world.chain.tag(h)
    truth = world.truth[h]
    if not is_certified(rec.sbt, world.registry, world.cfg.S) or truth.elements is None:
        return False
    if not global_valid(truth.elements, rec.sbt.tag.root, prior, world.registry):
        return False
    if MerkleTree(truth.elements).height != rec.sbt.tag.levels:
        return False
    other = ids.get(rec.sbt.tag.id)
    return other is None or other == rec.sbt.tag.root


def run_scenario(cfg: ScenarioConfig, seed: int | None = None, rounds: int | None = None) -> Transcript:
    seed = cfg.seed if seed is None else seed
    rounds = cfg.rounds if rounds is None else rounds
    warnings = validate(cfg.arranger(), cfg.threat)
    world = World(cfg, seed)
    chain = world.chain
    header = {
        "kind": "header",
        "seed": seed,
        "rounds": rounds,
        "config": {k: v for k, v in cfg.raw.items() if k != "seed"},
        "roles": [[str(r.id), r.behavior.value] for r in world.arr.roles],
        "warnings": warnings,
    }
    aborted = None
    try:
        for r in range(rounds):
            world.run_round(r)
            chain.advance_time(ROUND_TICKS)
        drain = rounds
        while world.mempool and drain < rounds + 5:
            world.run_round(drain, submit=False)
            chain.advance_time(ROUND_TICKS)
            drain += 1
        chain.advance_time(chain.challenge_period + chain.clock_ticks + 1)
        chain.run_timeouts()
        chain.advance_time(1)
    except Underfunded as exc:
        aborted = f"underfunded: {exc}"
        chain.emit("aborted", reason=aborted)

    classification = {h: classify(chain, h) for h in range(len(chain.tags))}
    prior: set[bytes] = set()
    ids: dict[int, bytes] = {}
    sound = True
    for h in range(len(chain.tags)):
        if classification[h] != "consolidated-legal":
            continue
        if not consolidation_sound(world, h, prior, ids):
            sound = False
            classification[h] = "consolidated-ILLEGAL"
        ids.setdefault(chain.tag(h).sbt.tag.id, chain.tag(h).sbt.tag.root)
        prior.update(world.truth[h].elements or [])
    checks = {"conservation": chain.conservation_gap() == 0, "consolidated_sound": sound}
    if cfg.threat.adversary in (Adversary.BFT, Adversary.DAC):
        consolidated = set()
        for h, c in classification.items():
            if c == "consolidated-legal":
                consolidated.update(world.truth[h].elements or [])
        checks["termination"] = all(e in consolidated for e in world.submitted)
    if cfg.threat.adversary is Adversary.ARRANGER and world.script.kinds() <= {"censor"}:
        checks["censorship_undetected"] = not any(ev.kind == "fraudEvidence" for ev in chain.events)

    lines = [_dumps(header)] + [ev.to_json() for ev in chain.events]
    for h, c in classification.items():
        lines.append(_dumps({"kind": "tagOutcome", "tag": h, "class": c,
                             "reason": chain.tag(h).discard_reason}))
    lines.append(_dumps({"kind": "summary", "checks": checks, "aborted": aborted,
                         "ok": aborted is None and all(checks.values())}))
    return Transcript(lines, classification, checks, chain, world.truth, aborted)


# -- scripted worst case for the minimum budget ----------------------------------------------------

@dataclass
class BudgetRun:
    ok: bool
    error: Underfunded | None
    chain: Chain
    tag: int
    games: list[int]
    peak_committed: int  # budget minus the accuser's lowest liquid balance


def budget_scenario(budget: int, params: EconomicParams | None = None, stakers: int = 3, seed: int = 0) -> BudgetRun:
    """An accuser holding ``budget`` removes an unavailable tag whose batch turns out to be invalid.

    The tag's data is withheld, so the accuser opens the data-availability
    game first.  A staker publishes the batch but the accuser keeps that game
    open (its stake and cost allowance stay locked) while it plays one
    validity game per staker.  This is the branch where the locked amount
    peaks at ``s_data + CC_data + s_validity + CC_validity``.
    """
    from .economics import concrete_params
    from .games.availability import open_data_availability
    from .games.legality import open_validity
    from .strategies import HonestClient, honest_challenger_move, honest_initial_middle, play_game
    from .trace import decompress

    params = params or concrete_params()
    S = stakers
    registry = KeyRegistry(seed)
    reps = [registry.register(replica(i)) for i in range(max(S, stakers) + 1)]
    client = registry.register(stf(0))
    author = registry.register(user(0))
    chain = Chain(registry, params, S=S)
    chain.mint(client, budget)
    for r in reps:
        chain.mint(r, 1000 * UNIT)
    elements = [TransactionRequest.create(b"payload-%d" % j, author, registry).encode() for j in range(3)]
    elements.insert(2, TransactionRequest(b"unsigned", author, b"\x00" * 32).encode())
    tree = MerkleTree(elements)
    tag = BatchTag(0, tree.root, tree.height)
    signers = list(range(S))
    sbt = SignedBatchTag(tag, sign_aggregate(registry, signers, TAG_DOMAIN, tag.encode()))
    backers = reps[:stakers]
    h = chain.post_signed_batch_tag(backers[0], sbt)
    for b in backers:
        chain.place_stake(b, h)
    staker_k = PlayerKnowledge(registry, S)
    staker_k.learn(h, elements)
    data = compress(elements)
    staker_k.compressed[h] = (data, sign_aggregate(registry, signers, DATA_DOMAIN, data))
    k = PlayerKnowledge(registry, S)
    games: list[int] = []
    low = budget
    try:
        da = open_data_availability(chain, client, h)
        games.append(da)
        chain.advance_time(1)
        chain.move(da, backers[0], honest_staker_response(chain.games[da], staker_k, backers[0]))
        k.learn(h, decompress(chain.games[da].data))
        action = honest_accuse(h, sbt, k, chain.costs.CC)
        e, i = action.args
        me = HonestClient(k)
        for b in backers:
            gid = open_validity(chain, client, h, e, i, honest_initial_middle(tree, i, tree.height), b)
            games.append(gid)
            low = min(low, chain.balance(client))
            play_game(chain, gid, lambda who: me if who == client else
                      (lambda g, m: honest_challenger_move(g.inner, staker_k.trees[h])))
        chain.advance_time(chain.clock_ticks + 1)
        chain.run_timeouts()
    except Underfunded as exc:
        chain.emit("aborted", reason=str(exc))
        return BudgetRun(False, exc, chain, h, games, budget - low)
    return BudgetRun(True, None, chain, h, games, budget - low)
