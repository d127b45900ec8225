"""Command-line front end: ``scenario run``, ``economics report`` and ``game replay``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from decimal import Decimal
from importlib import resources
from typing import Any, Sequence

from .arranger import ScenarioConfig, World, run_scenario
from .economics import (FPS, PUBLISHED_FIGURES, UNIT, EconomicParams, check_relations, derive_costs, min_budget,
                        safety_budget, user_fee)
from .errors import ArenaError, ConfigError
from .games.replay import ReplayError, UnknownGame, parse_transcript, replay_game

log = logging.getLogger("arranger_arena")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
U64 = (1 << 64) - 1


def bundled_path(name: str) -> str | None:
    """Path of a fixture shipped with the package, or None."""
    p = resources.files("arranger_arena") / "data" / name
    return str(p) if p.is_file() else None


def _resolve(path: str) -> str:
    if os.path.exists(path):
        return path
    base = os.path.basename(path)
    return bundled_path(base) or bundled_path(base + ".json") or path


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v <= U64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _tokens(amount: int) -> Decimal:
    return Decimal(amount) / UNIT


# -- scenario run ---------------------------------------------------------------------

def cmd_scenario_run(args: argparse.Namespace) -> int:
    try:
        cfg = ScenarioConfig.load(_resolve(args.config))
        t = run_scenario(cfg, seed=args.seed, rounds=args.rounds)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        t.write(args.out)
        log.info("transcript written to %s", args.out)
    else:
        sys.stdout.write(t.text())
    counts: dict[str, int] = {}
    for c in t.classification.values():
        counts[c] = counts.get(c, 0) + 1
    print(f"tags: {json.dumps(counts, sort_keys=True)}  checks: {json.dumps(t.checks, sort_keys=True)}"
          + (f"  aborted: {t.aborted}" if t.aborted else ""), file=sys.stderr)
    return EXIT_OK if t.ok else EXIT_VIOLATION


# -- economics report -------------------------------------------------------------------

def load_economics(path: str) -> EconomicParams:
    """Accepts a bare economics mapping or a scenario config with an ``economics`` section."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if "implementation" in d or "threat" in d:
        return ScenarioConfig.from_dict(d).economics
    return EconomicParams.from_dict(d)


def economics_rows(p: EconomicParams) -> list[dict[str, Any]]:
    """One row per reported quantity; ``printed`` holds the published figure where there is one."""
    gc = derive_costs(p)
    rows: list[dict[str, Any]] = []

    def add(name: str, value, printed_key: str | None = None, unit: str = "token") -> None:
        printed = PUBLISHED_FIGURES.get(printed_key or name, "") if p.published_roles else ""
        rows.append({"quantity": name, "value": str(value), "printed": str(printed), "unit": unit})

    for x in FPS:
        add(f"CC_{x}", _tokens(gc.CC[x]))
    for x in FPS:
        add(f"SC_{x}", _tokens(gc.SC[x]))
    add("CC_translate", _tokens(gc.CC_translate))
    add("SC_translate", _tokens(gc.SC_translate))
    add("L", gc.L, unit="rounds")
    add("l", gc.l, unit="rounds")
    add("B", _tokens(min_budget(p, gc)))
    if p.published_roles:
        # the same figures with the data-game roles the relations prescribe
        rel = replace(p, published_roles=False, L=gc.L)
        rgc = derive_costs(rel)
        add("CC_data_relation", _tokens(rgc.CC["data"]), printed_key="-")
        add("SC_data_relation", _tokens(rgc.SC["data"]), printed_key="-")
        add("B_relation", _tokens(min_budget(rel, rgc)), printed_key="-")
    add("safety_budget", _tokens(safety_budget(p, gc)))
    fee = user_fee(p)
    add("user_fee", Decimal(fee.numerator) / Decimal(fee.denominator))
    violations = check_relations(p, gc)
    for v in violations:
        rows.append({"quantity": f"relation_{v.relation}", "value": f"violated: {v.subject}: {v.detail}",
                     "printed": "", "unit": ""})
    if not violations:
        rows.append({"quantity": "relations", "value": "all hold", "printed": "", "unit": ""})
    return rows


def render_rows(rows: list[dict[str, Any]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["quantity", "value", "printed", "unit"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_economics_report(args: argparse.Namespace) -> int:
    try:
        p = load_economics(_resolve(args.config))
        sys.stdout.write(render_rows(economics_rows(p), args.format))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


# -- game replay ---------------------------------------------------------------------------

def cmd_game_replay(args: argparse.Namespace) -> int:
    try:
        with open(args.transcript) as fh:
            events = parse_transcript(fh.read())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    registry, S = None, 1
    header = next((e for e in events if e.get("kind") == "header"), None)
    if header is not None:
        try:
            cfg = ScenarioConfig.from_dict(dict(header["config"], seed=header["seed"]))
        except (ConfigError, KeyError) as exc:
            print(f"error: bad transcript header: {exc}", file=sys.stderr)
            return EXIT_USAGE
        registry, S = World(cfg, header["seed"]).registry, cfg.S
    try:
        report = replay_game(events, args.game_id, registry, S)
    except UnknownGame as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReplayError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    sys.stdout.write(report.text())
    return EXIT_OK


# -- entry point ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="arranger-arena", description="Arranger fraud-proof simulator")
    sub = ap.add_subparsers(dest="group", required=True)

    sc = sub.add_parser("scenario").add_subparsers(dest="cmd", required=True)
    run = sc.add_parser("run", help="run a scenario config and write its transcript")
    run.add_argument("config", help="scenario JSON (a bundled fixture name also works)")
    run.add_argument("--seed", type=_seed, default=None)
    run.add_argument("--rounds", type=int, default=None)
    run.add_argument("--out", default=None, help="transcript path (default: stdout)")
    run.set_defaults(func=cmd_scenario_run)

    ec = sub.add_parser("economics").add_subparsers(dest="cmd", required=True)
    rep = ec.add_parser("report", help="derived costs, relation checks and budgets")
    rep.add_argument("config")
    rep.add_argument("--format", choices=("csv", "json"), default="csv")
    rep.set_defaults(func=cmd_economics_report)

    gm = sub.add_parser("game").add_subparsers(dest="cmd", required=True)
    rp = gm.add_parser("replay", help="re-validate and list the moves of one game")
    rp.add_argument("transcript")
    rp.add_argument("game_id", type=int)
    rp.set_defaults(func=cmd_game_replay)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("ARRANGER_ARENA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ArenaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
