"""Acceptance criteria, each run at its stated size.

Every test records one ``criterion N: PASS|FAIL ...`` line, printed at the
end of the session, then asserts.
"""

import json
import random
import subprocess
import sys
import time

import pytest

import conftest
import oracles
from dcash.boardlog import read_vkcb, verify_log_bytes
from dcash.cli import main
from dcash.crypto import commit, hash_to_scalar, keygen
from dcash.games import (
    HYBRID_MODES,
    STRATEGIES,
    ForgeryWorld,
    GameConfig,
    hybrid_trace,
    independence_scan,
    random_schedule,
    run_forgery_control,
    run_forgery_game,
)
from dcash.groups import ED25519, TOY
from dcash.minter import MinterSystem, accountability_audit, rescue_proof
from dcash.oracle import HashOracle
from dcash.orproof import OrProof, OrStatement, OrWitness, crs_gen, extract, prove, verify
from dcash.scenario import ScenarioConfig, run_scenario

pytestmark = pytest.mark.slow

CFG = GameConfig(banks=2, users=8, tau=4, bucket=4, trials=100, transfers=50, seed=2024)


def record(n, ok, **detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} " + json.dumps(detail, separators=(",", ":"))
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_1_end_to_end():
    t0 = time.perf_counter()
    res = run_scenario(ScenarioConfig(banks=2, users=8, tau=4, bucket=4, transfers=50, seed=CFG.seed))
    elapsed = time.perf_counter() - t0
    setup = 1 + 8  # crs plus genesis
    after = [row for row in res.audit.rows if row[0] >= setup]
    # each row: (entries, live, in_flight, live + in_flight, tokens bound to distinct burns)
    balance_ok = res.audit.ok and all(bal == 8 for _, _, _, bal, _ in after)
    redeemed = res.audit.vs.redeemed
    literal = [live for _, live, _, _, _ in after]
    ok = record(1, res.accepted == 50 and balance_ok and elapsed < 30 and res.audit.rows[-1][4] == redeemed,
                accepted=res.accepted, attempted=res.attempted, balance_every_prefix=balance_ok,
                bound=res.audit.rows[-1][4], redeemed=redeemed, seconds=round(elapsed, 2),
                literal_live_min=min(literal), literal_live_max=max(literal), final_live=res.audit.vs.live_count)
    assert ok


def test_2_forgery_suite():
    world = ForgeryWorld(CFG)
    wins = {s: run_forgery_game(CFG, s, world).wins for s in STRATEGIES}
    control = run_forgery_control(CFG, world).wins
    ok = record(2, all(w == 0 for w in wins.values()) and control >= 1,
                trials=CFG.trials, wins=wins, control_wins=control)
    assert ok


def test_3_or_proof_suite():
    rng = random.Random(3)
    crs = crs_gen(b"acceptance")
    pool = [commit(crs.params, keygen(rng).vk.to_bytes(), ED25519.random_scalar(rng)) for _ in range(64)]

    def instance(n):
        vk = keygen(rng).vk
        r = ED25519.random_scalar(rng)
        k = rng.randint(1, n)
        betas = rng.sample(pool, n - 1)
        betas.insert(k - 1, commit(crs.params, vk.to_bytes(), r))
        return OrStatement(betas, vk), OrWitness(r, k)

    # completeness: 10^3 fresh instances for every n in 1..32
    complete, total, cross = 0, 0, 0
    sweep_proofs = []
    for n in range(1, 33):
        for t in range(1000):
            stmt, wit = instance(n)
            proof = prove(crs, stmt, wit, rng)
            complete += verify(crs, stmt, proof)
            total += 1
            if t == 0:
                sweep_proofs.append((stmt, proof))
                cross += oracles.or_verify(crs.label, crs.params.h.to_bytes(),
                                           [b.to_bytes() for b in stmt.betas], stmt.vk, proof.to_bytes())

    # tamper sweep: every branch, every field, one scalar perturbed
    g = ED25519.generator()
    q = ED25519.order
    tampered, accepts = 0, 0
    for stmt, proof in sweep_proofs:
        for j in range(proof.n):
            a, c, z = proof.branches[j]
            for alt in ((a * g, c, z), (a, (c + 1) % q, z), (a, c, (z + 1) % q)):
                br = list(proof.branches)
                br[j] = alt
                accepts += verify(crs, stmt, OrProof(tuple(br)))
                tampered += 1

    # extraction on a group of order < 2^16
    toy = crs_gen(b"acceptance-toy", TOY)
    assert TOY.order < 2 ** 16
    extracted = 0
    erng = random.Random(33)
    trials = 100
    for t in range(trials):
        n = erng.randint(1, 8)
        vk = keygen(erng, TOY).vk
        r = TOY.random_scalar(erng)
        k = erng.randint(1, n)
        betas = [commit(toy.params, keygen(erng, TOY).vk.to_bytes(), TOY.random_scalar(erng)) for _ in range(n)]
        betas[k - 1] = commit(toy.params, vk.to_bytes(), r)
        stmt = OrStatement(betas, vk)
        seed = erng.getrandbits(64)

        def prover(oracle, seed=seed, stmt=stmt, wit=OrWitness(r, k)):
            return prove(toy, stmt, wit, random.Random(seed), oracle)

        if not verify(toy, stmt, prover(HashOracle(TOY)), HashOracle(TOY)):
            continue
        got = extract(toy, stmt, prover, random.Random(t))
        if got is None:
            continue
        er, ei = got
        x = stmt.betas[ei - 1].c / toy.params.g ** hash_to_scalar(stmt.vk, TOY)
        if commit(toy.params, stmt.vk, er) == stmt.betas[ei - 1] and oracles.toy_dlog(toy.params.h.raw, x.raw) == er:
            extracted += 1

    ok = record(3, complete == total and cross == 32 and accepts == 0 and extracted == trials,
                completeness=f"{complete}/{total}", reference_verifier=f"{cross}/32",
                tamper_accepts=f"{accepts}/{tampered}", extracted=f"{extracted}/{trials}")
    assert ok


def test_4_hybrids():
    sched = random_schedule(CFG.seed, CFG)
    results = {m: hybrid_trace(sched, m, CFG) for m in HYBRID_MODES}
    ok = record(4, all(r.ok for r in results.values()),
                spends=sched.spends,
                modes={m: {"ok": r.ok, "validator_accepted": r.validator_accepted, "zeroed": r.zeroed,
                           "simulated": r.simulated} for m, r in results.items()})
    assert ok


def test_5_independence():
    sched = random_schedule(CFG.seed, CFG)
    on = independence_scan(sched, True, CFG)
    off = independence_scan(sched, False, CFG)
    ok = record(5, on.ok and on.spends == 50 and not off.ok,
                spends=on.spends, scans=on.checks, leaks=len(on.leaks),
                control_leaks=len(off.leaks), control_fails=not off.ok)
    assert ok


def test_6_minter_over_quota():
    s = MinterSystem(banks=2, users=8, tau=4, seed=6, minters={"T0": (5, None, False)})
    pairs = [("B0", "U0"), ("B0", "U1"), ("B0", "U2"), ("B1", "U3"), ("B1", "U4"), ("B1", "U5")]
    minted = []
    for a, b in pairs:
        entry, verdict = s.transfer_minted(a, b)
        assert verdict.accepted, verdict
        minted.append(entry.index)
    audit = accountability_audit(s.board, s.vk_cb, s.info.vk_crs)
    flagged_ok = audit.flagged == [s.minters["T0"].vk.to_bytes().hex()]
    forged_ok = audit.forged == sorted(minted)
    # one sender lost the opening for U5's token; everyone else rescues
    lost = minted[-1]
    b1 = s.parties["B1"].state
    lost_key = s.fresh_validator().valid[lost].vk_s.to_bytes()
    for k, bs in list(b1.pending.items()):
        if bs.keypair.vk.to_bytes() == lost_key:
            del b1.pending[k]
    rescued = 0
    for (sender, _), idx in zip(pairs, minted):
        if idx == lost:
            continue
        v = s.post_rescue(sender, rescue_proof(s.parties[sender], idx, 4))
        rescued += v.accepted
    vs = s.fresh_validator()
    restored = all(vs.is_live(i) for i in minted if i != lost) and not vs.is_live(lost)
    unrescued = len(vs.forged - vs.rescued)
    ok = record(6, flagged_ok and forged_ok and len(audit.forged) == 6 and rescued == 5 and restored
                and vs.live_count == 8 - unrescued,
                flagged=len(audit.flagged), forged=len(audit.forged), rescued=rescued,
                unrescued=unrescued, final_live=vs.live_count, genesis=vs.genesis_count)
    assert ok


def test_7_determinism_and_replay(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"banks": 2, "users": 8, "tau": 4, "bucket": 4, "transfers": 50}))
    a, b = tmp_path / "a", tmp_path / "b"
    rc = [main(["run", "--config", str(cfg), "--seed", "77", "--out", str(d)]) for d in (a, b)]
    la, lb = (a / "board.log").read_bytes(), (b / "board.log").read_bytes()
    identical = la == lb and (a / "report.jsonl").read_bytes() == (b / "report.jsonl").read_bytes()
    clean = [main(["verify-log", "--log", str(d / "board.log")]) for d in (a, b)]

    # every byte position, changed to some other value
    vk_cb, vk_crs = read_vkcb(a / "vkcb.json")
    rng = random.Random(7)
    survived = []
    for pos in range(len(la)):
        bad = bytearray(la)
        bad[pos] ^= rng.randint(1, 255)
        if verify_log_bytes(bytes(bad), vk_cb, vk_crs).ok:
            survived.append(pos)
    # the command itself on a sample of those corruptions
    bad_path = tmp_path / "a" / "bad.log"
    cmd_codes = set()
    for pos in sorted(rng.sample(range(len(la)), 40)) + [0, len(la) - 1]:
        bad = bytearray(la)
        bad[pos] ^= 0x20
        bad_path.write_bytes(bytes(bad))
        cmd_codes.add(main(["verify-log", "--log", str(bad_path), "--vkcb", str(a / "vkcb.json")]))
    proc = subprocess.run([sys.executable, "-m", "dcash", "verify-log", "--log", str(bad_path),
                           "--vkcb", str(a / "vkcb.json")], capture_output=True)
    ok = record(7, rc == [0, 0] and identical and clean == [0, 0] and not survived
                and cmd_codes == {1} and proc.returncode == 1,
                identical=identical, clean_exit=clean, bytes_swept=len(la), undetected=len(survived),
                cmd_exit_codes=sorted(cmd_codes))
    assert ok
