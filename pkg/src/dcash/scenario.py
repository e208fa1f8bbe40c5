"""Scenario configs and a tolerant end-to-end runner used by the CLI."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

from .games import ConfigError, GameConfig, Schedule, audit_entries, random_schedule
from .ledger import Entry
from .minter import MinterSystem, MinterValidSet, accountability_audit, rescue_proof
from .protocol import POLICIES, ProtocolError, System

VARIANTS = ("pi-dc", "minter")


@dataclass
class MinterEntry:
    id: str
    quota: int
    banks: list | None = None
    honest: bool = True

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "id" not in d or "quota" not in d:
            raise ConfigError("minter entries need id and quota")
        extra = set(d) - {f.name for f in fields(cls)}
        if extra:
            raise ConfigError("unknown minter keys: " + ", ".join(sorted(extra)))
        if not isinstance(d["quota"], int) or isinstance(d["quota"], bool) or d["quota"] < 0:
            raise ConfigError("minter quota must be a non-negative integer")
        return cls(**d)


@dataclass
class ScenarioConfig:
    banks: int = 2
    users: int = 8
    tau: int = 4
    bucket: int = 8
    transfers: int = 50
    seed: int = 0
    schedule: list | None = None
    variant: str = "pi-dc"
    policy: str = "accept-all"
    minters: list = field(default_factory=list)
    rescue: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if not isinstance(self.rescue, bool):
            raise ConfigError("rescue must be a boolean")
        self.game  # runs the shared integer checks
        self.minters = [m if isinstance(m, MinterEntry) else MinterEntry.from_dict(m) for m in self.minters]
        if self.schedule is not None:
            if not isinstance(self.schedule, list):
                raise ConfigError("schedule must be a list of actions")
            for a in self.schedule:
                ok = (isinstance(a, list) and a and a[0] in ("burn", "spend")
                      and len(a) == (2 if a[0] == "burn" else 3) and all(isinstance(x, str) for x in a))
                if not ok:
                    raise ConfigError(f"malformed action {a!r}")

    @property
    def game(self) -> GameConfig:
        return GameConfig(banks=self.banks, users=self.users, tau=self.tau, bucket=self.bucket,
                          seed=self.seed, transfers=self.transfers, policy=self.policy)

    @classmethod
    def from_dict(cls, d) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(d) - {f.name for f in fields(cls)}
        if extra:
            raise ConfigError("unknown config keys: " + ", ".join(sorted(extra)))
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path, **overrides) -> "ScenarioConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if isinstance(d, dict):
            d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)

    def plan(self) -> Schedule:
        if self.schedule is not None:
            return Schedule(tuple(tuple(a) for a in self.schedule), self.bucket)
        return random_schedule(self.seed, self.game)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["minters"] = [m.__dict__ for m in self.minters]
        return d


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    system: System
    transfers: list  # dicts in attempt order
    audit: object
    minter_audit: object = None
    rescues: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def attempted(self) -> int:
        return len(self.transfers)

    @property
    def accepted(self) -> int:
        return sum(1 for t in self.transfers if t["accepted"])


def build_system(cfg: ScenarioConfig) -> System:
    kw = dict(banks=cfg.banks, users=cfg.users, tau=cfg.tau, seed=cfg.seed, policy=cfg.policy)
    if cfg.variant == "minter":
        entries = cfg.minters or [MinterEntry("T0", 10**6)]
        return MinterSystem(minters={m.id: (m.quota, m.banks, m.honest) for m in entries}, **kw)
    return System(**kw)


def _open_burn(party):
    spent = party.vs.sender_keys
    live = [bs for bs in party.state.pending.values() if bs.keypair.vk.to_bytes() not in spent]
    return min(live, key=lambda bs: bs.burn_index) if live else None


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    t0 = time.perf_counter()
    sysm = build_system(cfg)
    t1 = time.perf_counter()
    rows = []
    burn_errors = {}  # party -> why its last scheduled burn failed
    for act in cfg.plan().actions:
        try:
            if act[0] == "burn":
                burn_errors.pop(act[1], None)
                try:
                    sysm.burn(act[1])
                except ProtocolError as exc:
                    burn_errors[act[1]] = str(exc)
                continue
            sender, receiver = act[1], act[2]
            bs = _open_burn(sysm.parties[sender])
            if bs is None:
                raise ProtocolError(burn_errors.get(sender, f"{sender} has no pending burn"))
            if cfg.variant == "minter":
                entry, verdict = sysm.spend_minted(sender, receiver, burn_index=bs.burn_index)
            else:
                res = sysm.spend(sender, receiver, cfg.bucket, bs.burn_index)
                entry, verdict = res.entry, res.verdict
            rows.append({"sender": sender, "receiver": receiver,
                         "entry": entry.index if isinstance(entry, Entry) else None,
                         "accepted": verdict.accepted, "reason": verdict.reason})
        except ProtocolError as exc:
            if act[0] == "spend":
                rows.append({"sender": act[1], "receiver": act[2], "entry": None,
                             "accepted": False, "reason": str(exc)})
    t2 = time.perf_counter()
    rescues = []
    if cfg.variant == "minter" and cfg.rescue:
        rescues = rescue_all(sysm, cfg.bucket)
    t3 = time.perf_counter()
    vs = sysm.fresh_validator()
    audit = audit_entries(sysm.board.read(), sysm.validset(frozenset(sysm.vk_cb), vs.crs), cfg.banks * cfg.tau)
    maudit = None
    if cfg.variant == "minter":
        maudit = accountability_audit(sysm.board, sysm.vk_cb, sysm.info.vk_crs)
    t4 = time.perf_counter()
    timing = {"setup_s": t1 - t0, "transfers_s": t2 - t1, "rescue_s": t3 - t2, "audit_s": t4 - t3}
    return ScenarioResult(cfg, sysm, rows, audit, maudit, rescues, timing)


def rescue_all(sysm: MinterSystem, n: int) -> list:
    """Every sender that still holds a burning factor opening rescues the
    forged token it minted into."""
    out = []
    for pid, party in sorted(sysm.parties.items()):
        vs: MinterValidSet = party.vs
        for bs in sorted(party.state.pending.values(), key=lambda b: b.burn_index):
            key = bs.keypair.vk.to_bytes()
            idx = next((i for i, t in vs.valid.items() if t.vk_s.to_bytes() == key), None)
            if idx is None or not vs.is_forged(idx):
                continue
            rescuable = sum(1 for b in vs.burns.values() if not vs.is_forged(b.ref))
            try:
                payload = rescue_proof(party, idx, max(1, min(n, rescuable)), secret=bs)
            except ProtocolError as exc:
                out.append({"party": pid, "token": idx, "accepted": False, "reason": str(exc)})
                continue
            v = sysm.post_rescue(pid, payload)
            out.append({"party": pid, "token": idx, "accepted": v.accepted, "reason": v.reason})
    return out
