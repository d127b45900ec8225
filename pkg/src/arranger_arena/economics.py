"""Stake, cost and reward model for the fraud-proof games.

All L1 amounts are integers in micro-tokens (``UNIT`` = 10**6 per token) so
ledger conservation is exact.  ``l`` is the number of bisection rounds of the
decompress-and-hash game (log2 of the trace length); ``L`` is the number of
bisection rounds charged for path games.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from typing import Any, Mapping

from .errors import ConfigError

UNIT = 1_000_000

FPS = ("data", "certifiability", "validity", "integrity1", "integrity2", "uniqueness")

MOVES = (
    "post_tag",
    "init_data",
    "post_compressed",
    "bisect_subtrace",
    "select_subtrace",
    "init_validity",
    "init_integrity1",
    "init_integrity2",
    "bisect_subpath",
    "select_subpath",
    "reveal_sibling",
    "select_path",
    "check_size",
    "check_agg",
    "unique_batch",
    "deploy_payment",
    "claim_payment",
    "withdraw_payment",
    "accuse_silent",
)

# figures printed in the concrete-value analysis, kept for side-by-side reporting
PUBLISHED_FIGURES = {
    "CC_data": Decimal("0.6081"),
    "CC_certifiability": Decimal("0.0003"),
    "CC_uniqueness": Decimal("0.0003"),
    "CC_validity": Decimal("0.0039"),
    "CC_integrity1": Decimal("0.0039"),
    "CC_integrity2": Decimal("0.0039"),
    "SC_data": Decimal("0.0084"),
    "SC_validity": Decimal("0.0036"),
    "SC_integrity1": Decimal("0.0039"),
    "SC_integrity2": Decimal("0.0039"),
    "B": Decimal("20.6141"),
    "user_fee": Decimal("0.5"),
}


def to_units(value: Any) -> int:
    d = Decimal(str(value)) * UNIT
    if d != d.to_integral_value():
        raise ConfigError(f"{value!r} is finer than one micro-token")
    return int(d)


def fmt_units(amount: int) -> str:
    d = (Decimal(amount) / UNIT).normalize()
    return format(d, "f")


@dataclass(frozen=True)
class EconomicParams:
    s: int = 10 * UNIT
    s_com_data: int = 9_000
    client_stakes: Mapping[str, int] = field(default_factory=lambda: {x: 10 * UNIT for x in FPS})
    costs: Mapping[str, int] = field(default_factory=lambda: {m: 300 for m in MOVES})
    rewards: Mapping[str, int] | None = None
    reward_bonus: int = UNIT
    SR_translate: int = UNIT
    k1: int = 1 * UNIT
    k2: int = 200 * UNIT
    k3: int = 10 * UNIT
    SZ: int = 4096
    l: int = 27
    L: int | None = None
    n: int = 31
    S: int = 10
    stakers: int = 1
    rho: Fraction = Fraction(1, 2)
    margin: int = 10
    published_roles: bool = False

    def __post_init__(self):
        for name in ("s", "s_com_data", "reward_bonus", "SR_translate", "k1", "k2", "k3"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if any(v < 0 for v in self.costs.values()) or any(v < 0 for v in self.client_stakes.values()):
            raise ConfigError("costs and stakes must be non-negative")
        if not 0 <= self.rho <= 1:
            raise ConfigError("rho must lie in [0, 1]")

    def cost(self, move: str) -> int:
        return self.costs.get(move, 0)

    def stake(self, fp: str) -> int:
        return self.client_stakes.get(fp, 0)

    @property
    def path_rounds(self) -> int:
        if self.L is not None:
            return self.L
        log_sz = max(1, math.ceil(math.log2(max(2, self.SZ))))
        if self.published_roles:
            return log_sz
        return max(1, math.ceil(math.log2(log_sz))) + 1 if log_sz > 1 else 1

    def reward(self, fp: str) -> int:
        if self.rewards is not None and fp in self.rewards:
            return self.rewards[fp]
        return derive_costs(self).CC[fp] + self.reward_bonus

    @classmethod
    def zero(cls) -> "EconomicParams":
        return cls(
            s=0, s_com_data=0, client_stakes={x: 0 for x in FPS}, costs={m: 0 for m in MOVES},
            rewards={x: 0 for x in FPS}, reward_bonus=0, SR_translate=0, k1=0, k2=0, k3=0,
        )

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EconomicParams":
        """Build from a JSON-style mapping whose amounts are decimal token values."""
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known - {"unit_cost"}
        if unknown:
            raise ConfigError(f"unknown economics keys: {sorted(unknown)}")
        kw: dict[str, Any] = {}
        unit_cost = to_units(d.get("unit_cost", "0.0003"))
        costs = {m: unit_cost for m in MOVES}
        for m, v in (d.get("costs") or {}).items():
            if m not in MOVES:
                raise ConfigError(f"unknown move cost {m!r}")
            costs[m] = to_units(v)
        kw["costs"] = costs
        stakes = d.get("client_stakes", "10")
        if isinstance(stakes, Mapping):
            kw["client_stakes"] = {x: to_units(stakes.get(x, 0)) for x in FPS}
        else:
            kw["client_stakes"] = {x: to_units(stakes) for x in FPS}
        if d.get("rewards") is not None:
            kw["rewards"] = {x: to_units(v) for x, v in d["rewards"].items()}
        for name in ("s", "s_com_data", "reward_bonus", "SR_translate", "k1", "k2", "k3"):
            if name in d:
                kw[name] = to_units(d[name])
        for name in ("SZ", "l", "L", "n", "S", "stakers", "margin"):
            if name in d:
                kw[name] = None if d[name] is None else int(d[name])
        if "rho" in d:
            kw["rho"] = Fraction(str(d["rho"]))
        if "published_roles" in d:
            kw["published_roles"] = bool(d["published_roles"])
        return cls(**kw)


def concrete_params(**overrides) -> EconomicParams:
    """The concrete-value setting: C_y = 0.0003, posting 0.6, l = 27, L = 12."""
    costs = {m: 300 for m in MOVES}
    costs["post_compressed"] = 600_000
    p = EconomicParams(costs=costs, l=27, SZ=4096, n=31, S=10, published_roles=True)
    return replace(p, **overrides)


@dataclass(frozen=True)
class GameCosts:
    CC: Mapping[str, int]
    SC: Mapping[str, int]
    CC_translate: int
    SC_translate: int
    L: int
    l: int


def relation_client_costs(p: EconomicParams) -> dict[str, int]:
    """Client worst-case costs with the posting cost on the staker side."""
    L = p.path_rounds
    c = p.cost

    def path(init: str) -> int:
        return c(init) + (L - 1) * c("bisect_subpath") + c("reveal_sibling")

    return {
        "data": c("init_data") + p.l * c("bisect_subtrace"),
        "certifiability": max(c("check_size"), c("check_agg")),
        "uniqueness": c("unique_batch"),
        "validity": path("init_validity"),
        "integrity1": path("init_integrity1"),
        "integrity2": path("init_integrity2"),
    }


def derive_costs(p: EconomicParams) -> GameCosts:
    L = p.path_rounds
    c = p.cost
    cc = relation_client_costs(p)
    sc = {
        "data": c("post_compressed") + max(0, p.l - 1) * c("select_subtrace"),
        "certifiability": 0,
        "uniqueness": 0,
        "validity": L * c("select_subpath"),
        "integrity1": c("select_path") + L * c("select_subpath"),
        "integrity2": c("select_path") + L * c("select_subpath"),
    }
    if p.published_roles:
        # role assignment used by the printed concrete figures for the data game
        cc["data"] = c("post_compressed") + p.l * c("bisect_subtrace")
        sc["data"] = c("init_data") + p.l * c("select_subtrace")
    return GameCosts(
        CC=cc,
        SC=sc,
        CC_translate=c("deploy_payment") + p.SR_translate,
        SC_translate=c("claim_payment"),
        L=L,
        l=p.l,
    )


@dataclass(frozen=True)
class Violation:
    relation: int
    subject: str
    detail: str


def _much_less(small: int, big: int, margin: int) -> bool:
    return small * margin <= big


def check_relations(p: EconomicParams, gc: GameCosts) -> list[Violation]:
    out: list[Violation] = []
    m = p.margin
    total_stake = p.s * p.stakers
    for x in FPS:
        cr = p.reward(x)
        if not _much_less(gc.CC[x], cr, m):
            out.append(Violation(1, x, f"CC={fmt_units(gc.CC[x])} not <<{m}x CR={fmt_units(cr)}"))
    if not p.s_com_data * p.stakers > gc.SC["data"]:
        out.append(Violation(2, "data", f"communal {fmt_units(p.s_com_data * p.stakers)} <= SC={fmt_units(gc.SC['data'])}"))
    for x in FPS:
        if x != "data" and not p.stake(x) > gc.SC[x]:
            out.append(Violation(2, x, f"s_x={fmt_units(p.stake(x))} <= SC={fmt_units(gc.SC[x])}"))
    for x in ("validity", "integrity1", "integrity2"):
        if not p.reward(x) < p.s:
            out.append(Violation(3, x, f"CR={fmt_units(p.reward(x))} >= s={fmt_units(p.s)}"))
    for x in ("certifiability", "data", "uniqueness"):
        if not p.reward(x) < total_stake:
            out.append(Violation(3, x, f"CR={fmt_units(p.reward(x))} >= sum s={fmt_units(total_stake)}"))
    if not gc.CC_translate > p.SR_translate:
        out.append(Violation(3, "translate", "CC_translate <= SR_translate"))
    if not _much_less(gc.SC_translate, p.SR_translate, m):
        out.append(Violation(4, "translate", f"SC_translate not <<{m}x SR_translate"))
    if not _much_less(gc.CC_translate, gc.CC["data"] + p.stake("data"), m):
        out.append(Violation(5, "translate", f"CC_translate not <<{m}x CC_data + s_data"))
    return out


def min_budget(p: EconomicParams, gc: GameCosts) -> int:
    legality = max(p.stake(x) + gc.CC[x] for x in ("validity", "integrity1", "integrity2"))
    return max(
        p.stake("certifiability") + gc.CC["certifiability"],
        p.stake("data") + gc.CC["data"] + legality,
    )


def safety_budget(p: EconomicParams, gc: GameCosts) -> int:
    return max(min_budget(p, gc), p.stake("uniqueness") + gc.CC["uniqueness"])


def user_fee(p: EconomicParams) -> Fraction:
    """Flat per-request fee in tokens."""
    if p.SZ <= 0:
        raise ConfigError("SZ must be positive")
    return Fraction(p.k1 * p.n + p.k2 * p.S + p.k3, p.SZ * UNIT)


@dataclass(frozen=True)
class RewardDistribution:
    deltas: Mapping[Any, int]
    total: int
    minted: int


def distribute_rewards(replicas, signers, poster, p: EconomicParams, fees_collected: int = 0) -> RewardDistribution:
    """Per-tag rewards in L2 micro-tokens: k1 to every replica, k2 per signer, k3 to the poster."""
    deltas: dict[Any, int] = {}
    for r in replicas:
        deltas[r] = deltas.get(r, 0) + p.k1
    for r in signers:
        deltas[r] = deltas.get(r, 0) + p.k2
    deltas[poster] = deltas.get(poster, 0) + p.k3
    total = sum(deltas.values())
    return RewardDistribution(deltas, total, max(0, total - fees_collected))
