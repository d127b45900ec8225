from __future__ import annotations

import json
from importlib.resources import files

from arranger_arena.arranger import ScenarioConfig

SCENARIOS = ("bft", "bft_rogue_post", "dac_fork", "arranger_withhold", "arranger_illegal")


def fixture_path(name: str) -> str:
    return str(files("arranger_arena").joinpath(f"data/{name}.json"))


def fixture_dict(name: str) -> dict:
    with open(fixture_path(name)) as fh:
        return json.load(fh)


def load(name: str, **overrides) -> ScenarioConfig:
    return ScenarioConfig.from_dict({**fixture_dict(name), **overrides})
