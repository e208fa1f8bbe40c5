"""dcash command line: run a scenario, verify a board log, play a game.

Exit codes: 0 pass, 1 verification or game failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .boardlog import export_log, read_vkcb, verify_log, verify_log_bytes, write_vkcb
from .games import (
    HYBRID_MODES,
    STRATEGIES,
    ConfigError,
    ForgeryWorld,
    GameConfig,
    balance_report,
    execute,
    hybrid_trace,
    independence_scan,
    random_schedule,
    report_line,
    run_forgery_control,
    run_forgery_game,
)
from .minter import registry_records
from .oracle import OracleUnavailable, enable_test_oracle, test_oracle_enabled
from .report import write_outputs
from .scenario import VARIANTS, ScenarioConfig, run_scenario

GAMES = ("forgery", "balance", "hybrids", "independence")
OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _load_scenario(args) -> ScenarioConfig:
    over = {"seed": getattr(args, "seed", None), "variant": getattr(args, "variant", None)}
    if args.config:
        return ScenarioConfig.load(args.config, **over)
    return ScenarioConfig.from_dict({k: v for k, v in over.items() if v is not None})


def _load_game_config(args) -> GameConfig:
    d = {}
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        allowed = {f.name for f in fields(ScenarioConfig)} | {f.name for f in fields(GameConfig)}
        extra = set(d) - allowed
        if extra:
            raise ConfigError("unknown config keys: " + ", ".join(sorted(extra)))
    if args.seed is not None:
        d["seed"] = args.seed
    return GameConfig(**{k: v for k, v in d.items() if k in {f.name for f in fields(GameConfig)}})


def cmd_run(args) -> int:
    cfg = _load_scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_scenario(cfg)
    text = export_log(result.system.board, out / "board.log", result.audit.vs, cfg.variant)
    write_vkcb(out / "vkcb.json", result.system.vk_cb, result.system.info.vk_crs)
    head = json.loads(text.rstrip("\n").rsplit("\n", 1)[-1])["summary"]["head"]
    files = write_outputs(result, out, head)
    if cfg.variant == "minter":
        recs = registry_records(result.audit.vs)
        (out / "registry.jsonl").write_text("".join(json.dumps(r, separators=(",", ":")) + "\n" for r in recs),
                                            encoding="utf-8")
    print(Path(files["report"]).read_text(encoding="utf-8").rstrip("\n").rsplit("\n", 1)[-1])
    return OK if result.audit.ok else FAIL


def cmd_verify_log(args) -> int:
    if not args.log:
        raise UsageError("--log is required")
    log = Path(args.log)
    vkcb = Path(args.vkcb) if args.vkcb else log.with_name("vkcb.json")
    if not log.is_file():
        raise UsageError(f"cannot read log {log}")
    try:
        verdict = verify_log(log, vkcb)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"bad vkcb file {vkcb}: {exc}") from None
    print(verdict.line())
    return OK if verdict.ok else FAIL


def _game_forgery(cfg, args):
    world = ForgeryWorld(cfg)
    lines, ok = [], True
    for s in STRATEGIES:
        r = run_forgery_game(cfg, s, world)
        ok &= r.wins == 0
        lines.append(r.line())
    if test_oracle_enabled():
        c = run_forgery_control(cfg, world)
        ok &= c.wins > 0
        lines.append(c.line())
    else:
        lines.append(report_line("forgery", "oracle-control", 0, "skipped", cfg.seed))
    return ok, lines


def _game_balance(cfg, args):
    if args.log:
        vkcb = Path(args.vkcb) if args.vkcb else Path(args.log).with_name("vkcb.json")
        try:
            vk_cb, vk_crs = read_vkcb(vkcb)
            data = Path(args.log).read_bytes()
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read log or vkcb: {exc}") from None
        v = verify_log_bytes(data, vk_cb, vk_crs)
        return v.ok, [report_line("balance", "log", v.entries, v.ok, None)]
    sysm = cfg.system()
    execute(sysm, random_schedule(cfg.seed, cfg))
    a = balance_report(sysm.board, sysm.vk_cb, cfg.genesis, sysm.info.vk_crs)
    return a.ok, [report_line("balance", "random-schedule", len(a.rows), a.ok, cfg.seed)]


def _game_hybrids(cfg, args):
    if not test_oracle_enabled():
        raise OracleUnavailable("oracle unavailable")
    sched = random_schedule(cfg.seed, cfg)
    results = [hybrid_trace(sched, m, cfg) for m in HYBRID_MODES]
    return all(r.ok for r in results), [r.line() for r in results]


def _game_independence(cfg, args):
    sched = random_schedule(cfg.seed, cfg)
    on = independence_scan(sched, True, cfg)
    off = independence_scan(sched, False, cfg)
    return on.ok and not off.ok, [on.line("purge"), off.line("purge-disabled")]


def cmd_game(args) -> int:
    if args.game not in GAMES:
        raise UsageError(f"unknown game {args.game!r}; choose from {', '.join(GAMES)}")
    cfg = _load_game_config(args)
    ok, lines = {"forgery": _game_forgery, "balance": _game_balance, "hybrids": _game_hybrids,
                 "independence": _game_independence}[args.game](cfg, args)
    for line in lines:
        print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"game-{args.game}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return OK if ok else FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcash", description="Burn-and-reissue token simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario and write the board log and report")
    run.add_argument("--config", metavar="PATH")
    run.add_argument("--seed", type=_u64, metavar="U64")
    run.add_argument("--variant", choices=VARIANTS)
    run.add_argument("--out", metavar="DIR", default="out")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify-log", help="replay a board log against a VK_CB file")
    ver.add_argument("--log", metavar="PATH")
    ver.add_argument("--vkcb", metavar="PATH", help="defaults to vkcb.json next to the log")
    ver.set_defaults(func=cmd_verify_log)

    game = sub.add_parser("game", help="run a security game")
    game.add_argument("--game", metavar="NAME", required=True, help=", ".join(GAMES))
    game.add_argument("--config", metavar="PATH")
    game.add_argument("--seed", type=_u64, metavar="U64")
    game.add_argument("--out", metavar="DIR")
    game.add_argument("--log", metavar="PATH", help="balance: audit this log instead of a fresh run")
    game.add_argument("--vkcb", metavar="PATH")
    game.add_argument("--test-oracle", action="store_true",
                      help="enable the programmable oracle (hybrids, forgery control)")
    game.set_defaults(func=cmd_game)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    prior = test_oracle_enabled()
    if getattr(args, "test_oracle", False):
        enable_test_oracle(True)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"dcash: error: {exc}", file=sys.stderr)
        return USAGE
    except OracleUnavailable as exc:
        print(f"dcash: error: {exc}", file=sys.stderr)
        return USAGE
    finally:
        enable_test_oracle(prior)


if __name__ == "__main__":
    sys.exit(main())
