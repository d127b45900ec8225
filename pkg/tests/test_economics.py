from __future__ import annotations

import math
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from arranger_arena.core import replica
from arranger_arena.economics import (
    FPS, MOVES, PUBLISHED_FIGURES, UNIT, EconomicParams, check_relations, derive_costs, distribute_rewards, fmt_units,
    min_budget, safety_budget, concrete_params, to_units, user_fee,
)
from arranger_arena.errors import ConfigError


def U(x: str) -> int:
    return to_units(x)


def test_units_exact():
    assert to_units("0.0003") == 300 and fmt_units(20_612_000) == "20.612"
    with pytest.raises(ConfigError):
        to_units("0.0000001")


def test_path_games_cost_0039():
    gc = derive_costs(concrete_params())
    assert gc.L == 12
    for x in ("validity", "integrity1", "integrity2"):
        assert gc.CC[x] == U("0.0039") == to_units(PUBLISHED_FIGURES["CC_" + x])
    assert gc.CC["certifiability"] == gc.CC["uniqueness"] == U("0.0003")


def test_data_game_both_role_assignments():
    compat = derive_costs(concrete_params())
    assert compat.CC["data"] == U("0.6081") and compat.SC["data"] == U("0.0084")
    rel = derive_costs(concrete_params(published_roles=False, L=12))
    assert rel.CC["data"] == U("0.0084") and rel.SC["data"] == U("0.6078")


def test_default_rounds_follow_move_bound():
    p = concrete_params(published_roles=False)
    assert p.path_rounds == math.ceil(math.log2(math.log2(4096))) + 1 == 5


def test_zero_costs():
    gc = derive_costs(EconomicParams.zero())
    assert all(v == 0 for v in gc.CC.values()) and all(v == 0 for v in gc.SC.values())
    assert gc.CC_translate == gc.SC_translate == 0


# independent formulas, relation-side roles
def _oracle(p: EconomicParams) -> tuple[dict, dict]:
    c, L, l = p.cost, p.path_rounds, p.l
    path = lambda x: c("init_" + x) + (L - 1) * c("bisect_subpath") + c("reveal_sibling")  # noqa: E731
    cc = {"data": c("init_data") + l * c("bisect_subtrace"),
          "certifiability": max(c("check_size"), c("check_agg")), "uniqueness": c("unique_batch"),
          "validity": path("validity"), "integrity1": path("integrity1"), "integrity2": path("integrity2")}
    sc = {"data": c("post_compressed") + (l - 1) * c("select_subtrace"), "certifiability": 0, "uniqueness": 0,
          "validity": L * c("select_subpath"),
          "integrity1": c("select_path") + L * c("select_subpath"),
          "integrity2": c("select_path") + L * c("select_subpath")}
    return cc, sc


costs_st = st.fixed_dictionaries({m: st.integers(0, 10 ** 7) for m in MOVES})


@settings(max_examples=80)
@given(costs_st, st.integers(1, 40), st.integers(1, 20))
def test_costs_match_oracle(costs, l, L):
    p = EconomicParams(costs=costs, l=l, L=L)
    cc, sc = _oracle(p)
    gc = derive_costs(p)
    assert dict(gc.CC) == cc and dict(gc.SC) == sc


def test_relations_hold_at_concrete_values():
    p = concrete_params()
    assert check_relations(p, derive_costs(p)) == []


def test_reward_equal_to_tag_stake_breaks_relation_3():
    p = concrete_params(rewards={x: 1 for x in FPS} | {"validity": 10 * UNIT})
    v = check_relations(p, derive_costs(p))
    assert any(x.relation == 3 and x.subject == "validity" for x in v)


def test_translate_reward_equal_to_cost_breaks_relation_4():
    p = concrete_params()
    p = replace(p, SR_translate=derive_costs(p).SC_translate)
    v = check_relations(p, derive_costs(p))
    assert any(x.relation == 4 for x in v)


def test_min_budget_value():
    p = concrete_params()
    gc = derive_costs(p)
    assert min_budget(p, gc) == U("20.612")
    assert to_units(PUBLISHED_FIGURES["B"]) - min_budget(p, gc) == U("0.0021")


def test_min_budget_zero():
    p = EconomicParams.zero()
    assert min_budget(p, derive_costs(p)) == 0 == safety_budget(p, derive_costs(p))


def test_min_budget_sensitivity_to_data_cost():
    p = concrete_params()
    gc = derive_costs(p)
    bumped = replace(gc, CC={**gc.CC, "data": gc.CC["data"] + UNIT})
    assert min_budget(p, bumped) == min_budget(p, gc) + UNIT


def test_safety_budget():
    p = concrete_params()
    assert safety_budget(p, derive_costs(p)) == U("20.612")
    p2 = replace(p, client_stakes={**p.client_stakes, "uniqueness": 100 * UNIT})
    assert safety_budget(p2, derive_costs(p2)) == U("100.0003")


@settings(max_examples=80)
@given(costs_st, st.fixed_dictionaries({x: st.integers(0, 10 ** 8) for x in FPS}),
       st.sampled_from(MOVES + FPS), st.integers(1, 10 ** 6), st.booleans())
def test_min_budget_monotone(costs, stakes, which, bump, compat):
    p = EconomicParams(costs=costs, client_stakes=stakes, published_roles=compat)
    if which in MOVES:
        q = replace(p, costs={**costs, which: costs[which] + bump})
    else:
        q = replace(p, client_stakes={**stakes, which: stakes[which] + bump})
    assert min_budget(q, derive_costs(q)) >= min_budget(p, derive_costs(p))


def test_distribute_rewards():
    p = concrete_params()
    reps = [replica(i) for i in range(31)]
    d = distribute_rewards(reps, reps[:10], reps[0], p)
    assert d.total == 2041 * UNIT and d.minted == d.total
    assert d.deltas[reps[0]] == (1 + 200 + 10) * UNIT and d.deltas[reps[30]] == UNIT
    assert distribute_rewards(reps, reps[:10], reps[0], p, fees_collected=41 * UNIT).minted == 2000 * UNIT
    z = distribute_rewards(reps, reps[:10], reps[0], EconomicParams.zero())
    assert z.total == 0 and z.minted == 0


def test_user_fee():
    f = user_fee(concrete_params())
    assert f == Fraction(2041, 4096)
    assert abs(float(f) - 0.5) <= 0.01 and round(float(f), 3) == 0.498
    assert user_fee(EconomicParams.zero()) == 0
    assert user_fee(EconomicParams(n=4, S=2, k1=UNIT, k2=UNIT, k3=UNIT, SZ=8)) == Fraction(7, 8)


def test_from_dict_rejects_unknown_and_negative():
    with pytest.raises(ConfigError):
        EconomicParams.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        EconomicParams.from_dict({"s": "-1"})
    with pytest.raises(ConfigError):
        user_fee(EconomicParams(SZ=0))
