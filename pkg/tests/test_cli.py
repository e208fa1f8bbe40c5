import json
import subprocess
import sys

import pytest

from dcash.cli import main

SMALL = {"banks": 2, "users": 4, "tau": 2, "bucket": 3, "transfers": 10}


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return p


def _run(tmp_path, cfg, name, *extra):
    out = tmp_path / name
    assert main(["run", "--config", str(cfg), "--seed", "5", "--out", str(out), *extra]) == 0
    return out


def test_run_writes_outputs(tmp_path, cfg, capsys):
    out = _run(tmp_path, cfg, "a")
    for f in ("board.log", "vkcb.json", "report.jsonl", "timing.json", "balance.png", "timing.png"):
        assert (out / f).is_file(), f
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["record"] == "summary" and summary["accepted"] == 10 and summary["balance_ok"]
    recs = [json.loads(x) for x in (out / "report.jsonl").read_text().splitlines()]
    assert recs[0]["record"] == "config" and recs[0]["seed"] == 5
    assert sum(r["record"] == "transfer" for r in recs) == 10


def test_run_is_reproducible(tmp_path, cfg):
    a, b = _run(tmp_path, cfg, "a"), _run(tmp_path, cfg, "b")
    assert (a / "board.log").read_bytes() == (b / "board.log").read_bytes()
    assert (a / "report.jsonl").read_bytes() == (b / "report.jsonl").read_bytes()
    c = tmp_path / "c"
    main(["run", "--config", str(cfg), "--seed", "6", "--out", str(c)])
    assert (a / "board.log").read_bytes() != (c / "board.log").read_bytes()


def test_verify_log_round_trip_and_corruption(tmp_path, cfg, capsys):
    out = _run(tmp_path, cfg, "a")
    log = out / "board.log"
    assert main(["verify-log", "--log", str(log)]) == 0
    data = log.read_bytes()
    bad = tmp_path / "bad.log"
    for pos in (10, len(data) // 2, len(data) - 5):
        flip = bytearray(data)
        flip[pos] ^= 0x01
        bad.write_bytes(bytes(flip))
        assert main(["verify-log", "--log", str(bad), "--vkcb", str(out / "vkcb.json")]) == 1


def test_verify_log_truncated(tmp_path, cfg, capsys):
    out = _run(tmp_path, cfg, "a")
    data = (out / "board.log").read_bytes()
    cut = tmp_path / "cut.log"
    cut.write_bytes(data[: data.rindex(b"\n", 0, len(data) - 1) + 1])
    capsys.readouterr()
    assert main(["verify-log", "--log", str(cut), "--vkcb", str(out / "vkcb.json")]) == 1
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["ok"] is False and verdict["reason"] == "unexpected end"


def test_verify_log_wrong_vkcb(tmp_path, cfg):
    a = _run(tmp_path, cfg, "a")
    b = tmp_path / "b"
    main(["run", "--config", str(cfg), "--seed", "7", "--out", str(b)])
    assert main(["verify-log", "--log", str(a / "board.log"), "--vkcb", str(b / "vkcb.json")]) == 1


def test_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text(json.dumps({"banks": 2, "colour": "red"}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text(json.dumps({"banks": 1, "tau": 2, "bucket": 5}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["game", "--game", "nope"]) == 2
    assert main(["verify-log", "--log", str(tmp_path / "missing.log")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--seed", "-1"])
    assert exc.value.code == 2


def test_hybrids_without_oracle(no_test_oracle, tmp_path, cfg):
    assert main(["game", "--game", "hybrids", "--config", str(cfg)]) == 2


def test_games_small(tmp_path, cfg, capsys):
    assert main(["game", "--game", "hybrids", "--config", str(cfg), "--test-oracle"]) == 0
    assert main(["game", "--game", "independence", "--config", str(cfg)]) == 0
    g = tmp_path / "g.json"
    g.write_text(json.dumps({**SMALL, "trials": 5}))
    assert main(["game", "--game", "forgery", "--config", str(g), "--out", str(tmp_path / "go")]) == 0
    lines = [json.loads(x) for x in (tmp_path / "go" / "game-forgery.jsonl").read_text().splitlines()]
    assert [r["wins"] for r in lines[:-1]] == [0] * 5 and lines[-1]["wins"] == 5


def test_balance_game_on_logs(tmp_path, cfg, capsys):
    out = _run(tmp_path, cfg, "a")
    log = out / "board.log"
    assert main(["game", "--game", "balance", "--log", str(log)]) == 0
    data = bytearray(log.read_bytes())
    data[40] ^= 0x02
    bad = tmp_path / "a" / "tampered.log"
    bad.write_bytes(bytes(data))
    assert main(["game", "--game", "balance", "--log", str(bad)]) == 1
    assert main(["game", "--game", "balance", "--config", str(cfg)]) == 0


def test_minter_run(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({**SMALL, "variant": "minter",
                             "minters": [{"id": "T0", "quota": 5, "honest": False}]}))
    out = tmp_path / "m"
    assert main(["run", "--config", str(p), "--seed", "1", "--out", str(out)]) == 0
    recs = [json.loads(x) for x in (out / "report.jsonl").read_text().splitlines()]
    m = [r for r in recs if r["record"] == "minter"]
    # the sixth mint breaks quota; later holders find their tokens forged
    assert len(m) == 1 and m[0]["flagged"] and m[0]["count"] == 6 and len(m[0]["forged"]) == 6
    resc = [r for r in recs if r["record"] == "rescue"]
    assert len(resc) == 6 and all(r["accepted"] for r in resc)
    assert recs[-1]["live"] == 4 and recs[-1]["balance_ok"]
    reg = [json.loads(x) for x in (out / "registry.jsonl").read_text().splitlines()]
    assert [r["quota"] for r in reg] == [5] and reg[0]["vk"] == m[0]["minter"] and len(reg[0]["chains"]) == 4
    assert main(["verify-log", "--log", str(out / "board.log")]) == 0


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "dcash", "verify-log", "--log", str(tmp_path / "x")],
                       capture_output=True, text=True)
    assert p.returncode == 2 and "cannot read log" in p.stderr
