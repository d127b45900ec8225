from __future__ import annotations

import csv
import io
import json

import pytest

from arranger_arena.cli import main

from fixtures import SCENARIOS, fixture_dict, fixture_path


def _run(tmp_path, name, *extra):
    out = tmp_path / f"{name}.jsonl"
    code = main(["scenario", "run", fixture_path(name), "--out", str(out), *extra])
    return code, out


@pytest.mark.parametrize("name", SCENARIOS)
def test_bundled_scenarios_exit_zero(tmp_path, name):
    code, out = _run(tmp_path, name)
    assert code == 0
    summary = json.loads(out.read_text().splitlines()[-1])
    assert summary["kind"] == "summary" and summary["ok"]


def test_bft_transcript_all_consolidated(tmp_path):
    _, out = _run(tmp_path, "bft")
    classes = [json.loads(l)["class"] for l in out.read_text().splitlines() if '"tagOutcome"' in l]
    assert classes and set(classes) == {"consolidated-legal"}


def test_withhold_transcript_has_evidence(tmp_path):
    _, out = _run(tmp_path, "arranger_withhold")
    assert '"fraudEvidence"' in out.read_text()


def test_bundled_name_without_path(tmp_path):
    assert main(["scenario", "run", "bft", "--out", str(tmp_path / "t.jsonl")]) == 0


def test_bad_inputs_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["scenario", "run", str(bad)]) == 2
    bad.write_text(json.dumps({"n": 4, "S": 9}))
    assert main(["scenario", "run", str(bad)]) == 2
    assert main(["scenario", "run", str(tmp_path / "missing.json")]) == 2
    assert main(["no-such-command"]) == 2
    assert main(["scenario", "run", "bft", "--seed", "-1"]) == 2
    assert "error" in capsys.readouterr().err


def test_invariant_breach_exits_one(tmp_path):
    # one accuser unit short of what the first dispute needs: the run aborts underfunded
    cfg = {**fixture_dict("arranger_withhold"), "accuser_funds": "0.0003"}
    p = tmp_path / "poor.json"
    p.write_text(json.dumps(cfg))
    assert main(["scenario", "run", str(p), "--out", str(tmp_path / "o.jsonl")]) == 1


def test_same_seed_byte_identical(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    main(["scenario", "run", "dac_fork", "--seed", "9", "--out", str(a)])
    main(["scenario", "run", "dac_fork", "--seed", "9", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def _report(capsys, name, fmt):
    assert main(["economics", "report", fixture_path(name), "--format", fmt]) == 0
    return capsys.readouterr().out


def test_report_csv_values(capsys):
    rows = {r["quantity"]: r for r in csv.DictReader(io.StringIO(_report(capsys, "economics_concrete", "csv")))}
    assert rows["CC_validity"]["value"] == rows["CC_integrity1"]["value"] == "0.0039"
    assert rows["B"]["value"] == "20.612" and rows["B"]["printed"] == "20.6141"
    assert abs(float(rows["user_fee"]["value"]) - 0.498) < 0.001
    assert rows["L"]["value"] == "12"


def test_report_json_matches_csv(capsys):
    data = json.loads(_report(capsys, "economics_concrete", "json"))
    rows = list(csv.DictReader(io.StringIO(_report(capsys, "economics_concrete", "csv"))))
    assert [d["quantity"] for d in data] == [r["quantity"] for r in rows]


def test_zero_report(capsys):
    rows = {r["quantity"]: r for r in csv.DictReader(io.StringIO(_report(capsys, "economics_zero", "csv")))}
    for q, r in rows.items():
        if q.startswith(("CC_", "SC_", "B", "safety", "user_fee")):
            assert float(r["value"]) == 0, q


def test_replay_every_game(tmp_path, capsys):
    _, out = _run(tmp_path, "arranger_illegal")
    gids = sorted({json.loads(l)["payload"]["gid"] for l in out.read_text().splitlines() if '"gameOpened"' in l})
    assert len(gids) == 6
    for gid in gids:
        assert main(["game", "replay", str(out), str(gid)]) == 0
    text = capsys.readouterr().out
    assert "settled at tick" in text and "clock left" in text


def test_replay_unknown_game(tmp_path):
    _, out = _run(tmp_path, "arranger_illegal")
    assert main(["game", "replay", str(out), "999"]) == 2


def test_replay_tampered_move(tmp_path, capsys):
    _, out = _run(tmp_path, "arranger_illegal")
    lines = out.read_text().splitlines()
    k = next(i for i, l in enumerate(lines) if '"gameMove"' in l and '"gid":0' in l and '"bottom":true' in l)
    lines[k] = lines[k].replace('"bottom":true', '"bottom":false')
    bad = tmp_path / "tampered.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["game", "replay", str(bad), "0"]) == 1
    assert "divergence" in capsys.readouterr().err
