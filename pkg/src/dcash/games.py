"""Security games as executable harnesses.

Forgery: adversary strategies try to get a token outside the honest query
set accepted by an honest validator. Balance: every redeemed token must be
bindable to a distinct certified burn. Hybrids: the same schedule replayed
with simulated proofs and/or zero commitments must stay fully valid.
Independence: after a spend and purge no witness scalar survives in any
party's serialized state.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, field, fields

import networkx as nx

from .crypto import commit, keygen, sign
from .ledger import (
    BurnRecord,
    Entry,
    GenesisToken,
    LiveToken,
    MintedToken,
    ValidSet,
    burn_message,
    find_crs,
)
from .oracle import ProgrammableOracle
from .orproof import OrProof, OrStatement, OrWitness, prove, simulate
from .protocol import POLICIES, System

STRATEGIES = ("fresh-forge", "replay-proof", "double-spend", "unowned-burn", "transplant-statement")
HYBRID_MODES = ("honest", "sim-proofs", "zero-commitments", "both")


class ConfigError(ValueError):
    pass


@dataclass
class GameConfig:
    banks: int = 2
    users: int = 8
    tau: int = 4
    bucket: int = 8
    trials: int = 100
    seed: int = 0
    transfers: int = 50
    policy: str = "accept-all"

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type in ("int", int) and (not isinstance(v, int) or isinstance(v, bool)):
                raise ConfigError(f"{f.name} must be an integer")
        if self.banks < 1 or self.tau < 1 or self.users < 0:
            raise ConfigError("need at least one bank and one genesis token per bank")
        if self.bucket < 1:
            raise ConfigError("bucket must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.transfers < 0 or self.seed < 0:
            raise ConfigError("transfers and seed must be non-negative")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")

    @property
    def genesis(self) -> int:
        return self.banks * self.tau

    @classmethod
    def from_dict(cls, d: dict) -> "GameConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError("unknown config keys: " + ", ".join(sorted(extra)))
        return cls(**d)

    def system(self, oracle=None, cls=System, **kw):
        return cls(banks=self.banks, users=self.users, tau=self.tau, seed=self.seed,
                   policy=self.policy, oracle=oracle, **kw)


# -- schedules -----------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Static list of actions: ``("burn", party)`` or ``("spend", sender, receiver)``."""

    actions: tuple
    bucket: int

    @property
    def spends(self) -> int:
        return sum(1 for a in self.actions if a[0] == "spend")

    def to_json(self) -> str:
        return json.dumps({"bucket": self.bucket, "actions": [list(a) for a in self.actions]},
                          separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        d = json.loads(text)
        return cls(tuple(tuple(a) for a in d["actions"]), int(d["bucket"]))


def party_ids(cfg: GameConfig) -> tuple[list, list]:
    return [f"B{i}" for i in range(cfg.banks)], [f"U{i}" for i in range(cfg.users)]


def random_schedule(seed: int, cfg: GameConfig) -> Schedule:
    """Warm-up burns until a bucket is fillable, then ``cfg.transfers`` transfers."""
    if cfg.bucket > cfg.genesis:
        raise ConfigError(f"bucket {cfg.bucket} exceeds the {cfg.genesis} tokens that can be burnt before a spend")
    rng = random.Random(seed)
    banks, users = party_ids(cfg)
    everyone = banks + users
    if len(everyone) < 2 and cfg.transfers:
        raise ConfigError("need at least two parties to transfer")
    live = Counter({b: cfg.tau for b in banks})
    pending = Counter()
    actions = []

    def burn(p):
        live[p] -= 1
        pending[p] += 1
        actions.append(("burn", p))

    for k in range(cfg.bucket):
        burn(sorted(p for p in everyone if live[p])[k % len([p for p in everyone if live[p]])])
    for _ in range(cfg.transfers):
        s = rng.choice([p for p in everyone if live[p] or pending[p]])
        r = rng.choice([p for p in everyone if p != s])
        if not pending[s]:
            burn(s)
        pending[s] -= 1
        live[r] += 1
        actions.append(("spend", s, r))
    return Schedule(tuple(actions), cfg.bucket)


@dataclass
class RunResult:
    system: System
    results: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)  # per spend: (sender, scalars)
    simulated: int = 0

    @property
    def accepted(self) -> int:
        return sum(1 for r in self.results if r.verdict.accepted)


def execute(system: System, schedule: Schedule, purge: bool = True, zero=lambda k: False,
            after_spend=None) -> RunResult:
    """Run a schedule; ``zero(k)`` decides whether the k-th burn commits to zero."""
    out = RunResult(system)
    burn_no = 0
    for act in schedule.actions:
        if act[0] == "burn":
            p = system.parties[act[1]]
            z = bool(zero(burn_no))
            p.zero_commit = lambda _, z=z: z
            system.burn(act[1])
            burn_no += 1
        elif act[0] == "spend":
            s = system.parties[act[1]]
            bs = min((bs for bs in s.state.pending.values()
                      if bs.keypair.vk.to_bytes() not in s.vs.sender_keys), key=lambda bs: bs.burn_index)
            out.simulated += bool(bs.zeroed or s.simulate_proofs)
            res = system.spend(act[1], act[2], schedule.bucket, bs.burn_index, purge=purge)
            out.results.append(res)
            out.witnesses.append((act[1], (bs.r, bs.keypair.sk, bs.receiver_sk)))
            if after_spend is not None:
                after_spend(out)
        else:
            raise ConfigError(f"unknown action {act[0]!r}")
    return out


# -- balance -------------------------------------------------------------------


@dataclass
class BalanceAudit:
    ok: bool
    expected: int
    rows: list  # per prefix: (entries, live, in_flight, balance, bound)
    failure: int | None = None
    reason: str = ""
    vs: ValidSet | None = None


def supply(vs: ValidSet) -> int:
    """Tokens that should be in circulation or in flight right now.

    Genesis posted so far, minus forged tokens still counted as unspent
    (minter variant; a forged token that was burnt already left the live set).
    """
    forged = getattr(vs, "forged", set()) - getattr(vs, "rescued", set())
    return vs.genesis_count - sum(1 for i in forged if i not in vs.burnt_refs)


def audit_entries(entries, vs: ValidSet, expected: int) -> BalanceAudit:
    """Replay ``entries`` into ``vs`` checking every prefix.

    Each prefix must have every proof-backed token bound to a distinct burn
    in its bucket, no more redemptions than burns and live plus in-flight
    equal to the current supply; the final genesis supply must be ``expected``.
    """
    graph = nx.Graph()
    tokens = set()
    bound = 0
    rows = []

    def fail(e, reason):
        return BalanceAudit(False, expected, rows, e.index, reason, vs)

    for e in entries:
        vs.ingest(e)
        tok = vs.valid.get(e.index)
        if isinstance(tok, LiveToken):
            tokens.add(("t", e.index))
            graph.add_edges_from((("t", e.index), ("b", b)) for b in tok.bucket)
            bound = len(nx.bipartite.hopcroft_karp_matching(graph, top_nodes=tokens)) // 2
        rows.append((e.index + 1, vs.live_count, vs.in_flight, vs.balance, bound))
        if bound < len(tokens):
            return fail(e, "token not bound to a distinct burn")
        if vs.in_flight < 0:
            return fail(e, "more tokens redeemed than burnt")
        if vs.balance != supply(vs):
            return fail(e, "balance changed")
    if vs.genesis_count != expected:
        return BalanceAudit(False, expected, rows, None, f"genesis supply {vs.genesis_count}", vs)
    return BalanceAudit(True, expected, rows, vs=vs)


def run_balance_audit(board, vk_cb, expected: int, vk_crs=None, oracle=None, validset=ValidSet) -> bool:
    return balance_report(board, vk_cb, expected, vk_crs, oracle, validset).ok


def balance_report(board, vk_cb, expected, vk_crs=None, oracle=None, validset=ValidSet) -> BalanceAudit:
    entries = board.read() if hasattr(board, "read") else list(board)
    if not entries:
        return BalanceAudit(expected == 0, expected, [])
    crs = find_crs(entries, vk_crs) if vk_crs is not None else None
    return audit_entries(entries, validset(frozenset(vk_cb), crs, oracle), expected)


# -- forgery -------------------------------------------------------------------


@dataclass
class ForgeryResult:
    strategy: str
    trials: int
    wins: int
    seed: int
    reasons: dict

    def line(self) -> str:
        return report_line("forgery", self.strategy, self.trials, self.wins, self.seed)


class ForgeryWorld:
    """Honest history plus one corrupted party's secrets.

    The corrupted user ``adv`` received a token, burned it and spent it
    honestly (that spend is in Q) but kept its witness instead of purging.
    """

    def __init__(self, cfg: GameConfig):
        self.cfg = cfg
        sysm = cfg.system()
        banks, users = party_ids(cfg)
        self.adv = users[0] if users else banks[-1]
        sched = random_schedule(cfg.seed, GameConfig(**{**asdict(cfg), "transfers": 6}))
        execute(sysm, sched)
        src = next(p for p in sysm.parties if sysm.holdings(p) and p != self.adv)
        res = sysm.transfer(src, self.adv, cfg.bucket)
        assert res.verdict.accepted
        a = sysm.parties[self.adv]
        a.burn(res.entry.index)
        bidx = min(a.state.pending)
        self.spent = a.state.pending[bidx]
        other = next(p for p in sysm.parties if p != self.adv)
        sysm.spend(self.adv, other, cfg.bucket, bidx, purge=False)
        self.system = sysm
        self.vs = sysm.fresh_validator()
        self.crs = a.state.crs
        self.bank = a.bank
        self.honest_tokens = [t for i, t in sorted(self.vs.valid.items()) if isinstance(t, LiveToken)]

    def trial_view(self) -> ValidSet:
        return self.vs.copy()


def _forge_bucket(vs, rng, n, extra=()):
    pool = sorted(set(vs.burns) - set(extra))
    b = rng.sample(pool, min(n - len(extra), len(pool))) + list(extra)
    rng.shuffle(b)
    return tuple(b)


def _substituted_proof(crs, vs, bucket, vk, rng, oracle=None):
    """Honest proof for a statement where one bucket member is replaced by
    the adversary's own commitment, presented against the real bucket."""
    r = crs.group.random_scalar(rng)
    mine = commit(crs.params, vk.to_bytes(), r)
    pos = rng.randrange(len(bucket))
    betas = [vs.burns[i].beta for i in bucket]
    betas[pos] = mine
    return prove(crs, OrStatement(betas, vk), OrWitness(r, pos + 1), rng, oracle)


def _random_proof(crs, n, rng):
    g, h = crs.group, crs.params.h
    return OrProof(tuple((h ** g.random_scalar(rng), g.random_scalar(rng), g.random_scalar(rng)) for _ in range(n)))


def _attack(world: ForgeryWorld, vs: ValidSet, strategy: str, rng) -> list:
    """Adversary payloads for one trial, using only board data and its own secrets."""
    crs, n = world.crs, world.cfg.bucket
    kp, recv = keygen(rng), keygen(rng)
    payloads = []
    if strategy == "fresh-forge":
        bucket = _forge_bucket(vs, rng, n)
        if rng.random() < 0.5:
            proof = _substituted_proof(crs, vs, bucket, kp.vk, rng)
        else:
            proof = _random_proof(crs, len(bucket), rng)
        payloads.append(LiveToken(kp.vk, recv.vk, sign(kp.sk, recv.vk.to_bytes(), rng), bucket, proof))
    elif strategy == "replay-proof":
        t = rng.choice(world.honest_tokens)
        v = rng.randrange(3)
        if v == 0:
            payloads.append(t)
        elif v == 1:
            payloads.append(LiveToken(kp.vk, recv.vk, sign(kp.sk, recv.vk.to_bytes(), rng), t.bucket, t.proof))
        else:
            payloads.append(LiveToken(t.vk_s, recv.vk, t.sig_s, t.bucket, t.proof))
    elif strategy == "double-spend":
        bs = world.spent
        v = rng.randrange(3)
        if v == 0:
            # same sender key, new receiver, a genuinely valid proof
            bucket = _forge_bucket(vs, rng, n, extra=(bs.burn_index,))
            stmt = OrStatement([vs.burns[i].beta for i in bucket], bs.keypair.vk)
            proof = prove(crs, stmt, OrWitness(bs.r, bucket.index(bs.burn_index) + 1), rng)
            payloads.append(LiveToken(bs.keypair.vk, recv.vk, sign(bs.keypair.sk, recv.vk.to_bytes(), rng),
                                      bucket, proof))
        elif v == 1:
            # new sender key against the already-redeemed burn
            bucket = _forge_bucket(vs, rng, n, extra=(bs.burn_index,))
            proof = _substituted_proof(crs, vs, bucket, kp.vk, rng)
            payloads.append(LiveToken(kp.vk, recv.vk, sign(kp.sk, recv.vk.to_bytes(), rng), bucket, proof))
        else:
            # burn the same token a second time, then spend from the new burn
            tok = vs.valid[bs.token_index]
            r = crs.group.random_scalar(rng)
            beta = commit(crs.params, kp.vk.to_bytes(), r)
            payloads.append(BurnRecord(bs.token_index, beta, sign(bs.receiver_sk, burn_message(tok.vk_s, beta), rng)))
            payloads.append(("respend", kp, recv, r, beta))
    elif strategy == "unowned-burn":
        victims = [i for i in vs.live_indices() if i not in world.system.parties[world.adv].state.owned]
        ref = rng.choice(victims)
        tok = vs.valid[ref]
        r = crs.group.random_scalar(rng)
        beta = commit(crs.params, kp.vk.to_bytes(), r)
        forger = keygen(rng)
        payloads.append(BurnRecord(ref, beta, sign(forger.sk, burn_message(tok.vk_s, beta), rng)))
        payloads.append(("respend", kp, recv, r, beta))
    elif strategy == "transplant-statement":
        t = rng.choice(world.honest_tokens)
        v = rng.randrange(3)
        bucket = list(t.bucket)
        if v == 0 and len(bucket) > 1:
            while tuple(bucket) == t.bucket:
                rng.shuffle(bucket)
        elif v == 1 and len(vs.burns) > len(bucket):
            bucket[rng.randrange(len(bucket))] = rng.choice(sorted(set(vs.burns) - set(bucket)))
        elif len(bucket) > 1:
            bucket = bucket[:-1]
        else:
            bucket = bucket + [rng.choice(sorted(set(vs.burns) - set(bucket)))]
        payloads.append(LiveToken(kp.vk, recv.vk, sign(kp.sk, recv.vk.to_bytes(), rng), tuple(bucket), t.proof))
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return payloads


def _play(world: ForgeryWorld, vs: ValidSet, payloads, rng) -> tuple[bool, str]:
    won, reason = False, ""
    for p in payloads:
        if isinstance(p, tuple) and p[0] == "respend":
            # spend out of the burn record just submitted, accepted or not
            _, kp, recv, r, beta = p
            last = vs.next_index - 1
            bucket = _forge_bucket(vs, rng, world.cfg.bucket, extra=(last,))
            betas = [beta if i == last else vs.burns[i].beta for i in bucket]
            proof = prove(world.crs, OrStatement(betas, kp.vk), OrWitness(r, bucket.index(last) + 1), rng)
            p = LiveToken(kp.vk, recv.vk, sign(kp.sk, recv.vk.to_bytes(), rng), bucket, proof)
        idx = vs.next_index
        vs.ingest(Entry(idx, p, world.bank))
        st, why = vs.status[idx]
        reason = why or st
        if isinstance(p, (GenesisToken, LiveToken, MintedToken)) and idx in vs.valid:
            won = True
    return won, reason


def run_forgery_game(cfg: GameConfig, strategy: str, world: ForgeryWorld | None = None) -> ForgeryResult:
    world = world or ForgeryWorld(cfg)
    rng = random.Random(f"forgery/{strategy}/{cfg.seed}")
    wins, reasons = 0, Counter()
    for _ in range(cfg.trials):
        vs = world.trial_view()
        payloads = _attack(world, vs, strategy, rng)
        won, reason = _play(world, vs, payloads, rng)
        wins += won
        reasons[reason] += 1
    return ForgeryResult(strategy, cfg.trials, wins, cfg.seed, dict(sorted(reasons.items())))


def run_forgery_control(cfg: GameConfig, world: ForgeryWorld | None = None) -> ForgeryResult:
    """Negative control: the adversary shares a programmable oracle with the
    validator and simulates proofs. Must win, or the harness is vacuous."""
    world = world or ForgeryWorld(cfg)
    rng = random.Random(f"forgery/control/{cfg.seed}")
    wins = 0
    for _ in range(cfg.trials):
        oracle = ProgrammableOracle(world.crs.group)
        vs = world.trial_view()
        vs.oracle = oracle
        kp, recv = keygen(rng), keygen(rng)
        bucket = _forge_bucket(vs, rng, cfg.bucket)
        stmt = OrStatement([vs.burns[i].beta for i in bucket], kp.vk)
        proof = simulate(world.crs, stmt, oracle, rng)
        tok = LiveToken(kp.vk, recv.vk, sign(kp.sk, recv.vk.to_bytes(), rng), bucket, proof)
        won, _ = _play(world, vs, [tok], rng)
        wins += won
    return ForgeryResult("oracle-control", cfg.trials, wins, cfg.seed, {})


# -- hybrids -------------------------------------------------------------------


@dataclass
class HybridResult:
    mode: str
    ok: bool
    spends: int
    accepted: int
    validator_accepted: int
    zeroed: int
    simulated: int

    def line(self) -> str:
        return report_line("hybrids", self.mode, self.spends, self.ok, None)


def run_hybrid_trace_check(schedule: Schedule, mode: str, cfg: GameConfig | None = None) -> bool:
    return hybrid_trace(schedule, mode, cfg).ok


def hybrid_trace(schedule: Schedule, mode: str, cfg: GameConfig | None = None) -> HybridResult:
    """Replay ``schedule`` with the hybrid rewriting for ``mode`` applied.

    zero-commitments rewrites the first half of the burns to ``Commit(0; r)``
    (honestly re-signed); spends out of rewritten burns must then simulate.
    """
    if mode not in HYBRID_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    cfg = cfg or GameConfig()
    oracle = None if mode == "honest" else ProgrammableOracle()
    sysm = cfg.system(oracle)
    burns = sum(1 for a in schedule.actions if a[0] == "burn")
    zero = {"honest": lambda k: False, "sim-proofs": lambda k: False,
            "zero-commitments": lambda k: k < burns // 2, "both": lambda k: True}[mode]
    for p in sysm.parties.values():
        p.simulate_proofs = mode in ("sim-proofs", "both")
    zeroed = sum(1 for k in range(burns) if zero(k))
    run = execute(sysm, schedule, zero=zero)
    validator = sysm.fresh_validator()
    posted = [r.entry.index for r in run.results if isinstance(r.entry, Entry)]
    vacc = sum(1 for i in posted if i in validator.valid)
    burns_ok = all(validator.status[e.index][0] == "burn" for e in sysm.board.read()
                   if isinstance(e.payload, BurnRecord))
    ok = run.accepted == schedule.spends and vacc == len(posted) == schedule.spends and burns_ok
    return HybridResult(mode, ok, schedule.spends, run.accepted, vacc, zeroed, run.simulated)


# -- independence --------------------------------------------------------------


@dataclass
class IndependenceResult:
    ok: bool
    spends: int
    checks: int
    leaks: list  # (spend number, party holding a witness scalar)

    def line(self, mode="purge") -> str:
        return report_line("independence", mode, self.spends, self.ok, None)


def scalar_bytes(x: int, group) -> bytes:
    return group.encode_scalar(x)


def run_independence_check(schedule: Schedule, purge: bool = True, cfg: GameConfig | None = None) -> bool:
    return independence_scan(schedule, purge, cfg).ok


def independence_scan(schedule: Schedule, purge: bool = True, cfg: GameConfig | None = None) -> IndependenceResult:
    """After every spend, scan all serialized party state for the witness
    scalars of every spend completed so far."""
    cfg = cfg or GameConfig()
    sysm = cfg.system()
    leaks, checks = [], [0]
    group = None

    def scan(run):
        nonlocal group
        group = group or next(iter(sysm.parties.values())).state.crs.group
        blob = b"".join(p.state.to_bytes() for p in sysm.parties.values())
        for k, (pid, scalars) in enumerate(run.witnesses):
            checks[0] += 1
            if any(scalar_bytes(x, group) in blob for x in scalars):
                leaks.append((len(run.witnesses), k, pid))

    run = execute(sysm, schedule, purge=purge, after_spend=scan)
    ok = not leaks and run.accepted == schedule.spends
    return IndependenceResult(ok, schedule.spends, checks[0], leaks)


# -- reporting -----------------------------------------------------------------


def report_line(game: str, key: str, trials: int, outcome, seed) -> str:
    rec = {"game": game, "case": key, "trials": trials}
    rec["wins" if game == "forgery" else "pass"] = outcome
    rec["seed"] = seed
    return json.dumps(rec, separators=(",", ":"))
