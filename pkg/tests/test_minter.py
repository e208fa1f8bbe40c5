import random

import pytest

from dcash.crypto import keygen, sign
from dcash.ledger import BulletinBoard, MintedToken, MinterAgreement, RescueOpening, RescueProof
from dcash.minter import (
    MinterSystem,
    accountability_audit,
    agreement_message,
    minter_is_valid,
    registry_records,
    rescue_opening,
    rescue_proof,
)
from dcash.protocol import ProtocolError

RECEIVERS = ["U0", "U1", "U2", "U3", "U4", "U5"]


def honest(quota=5, tau=6, seed=1, **kw):
    return MinterSystem(banks=1, users=6, tau=tau, seed=seed, minters={"T0": (quota, None, True)}, **kw)


def attacked(quota=2, mints=3, seed=2):
    s = MinterSystem(banks=1, users=6, tau=6, seed=seed, minters={"T0": (quota, None, False)})
    got = [s.transfer_minted("B0", RECEIVERS[k]) for k in range(mints)]
    return s, got


def test_honest_quota_five():
    s = honest()
    for k in range(5):
        entry, v = s.transfer_minted("B0", RECEIVERS[k])
        assert v.accepted, v
    s.burn("B0")
    with pytest.raises(ProtocolError, match="quota exhausted"):
        s.spend_minted("B0", "U5")
    vs = s.fresh_validator()
    assert vs.flagged() == [] and vs.forged == set()
    assert vs.balance == 6
    a = accountability_audit(s.board, s.vk_cb, s.info.vk_crs)
    assert a.flagged == [] and a.forged == []
    assert a.minters[0][1:4] == (5, 5, False)


def test_minter_transcript_hides_sender_keys():
    s = honest(quota=6)
    keys = []
    for k in range(6):
        entry, v = s.transfer_minted("B0", RECEIVERS[k])
        keys.append(s.board.read()[entry.index].payload.vk_s.to_bytes())
    blob = s.minters["T0"].transcript_bytes()
    assert blob and not any(k in blob for k in keys)


def test_minted_tokens_chain_through_users():
    s = honest(quota=10)
    for a, b in [("B0", "U0"), ("U0", "U1"), ("U1", "U2")]:
        assert s.transfer_minted(a, b)[1].accepted
    assert s.holdings("U2") == 1 and s.holdings("U0") == 0


def test_burn_not_mintable_twice():
    s = honest()
    k = s.burn("B0")
    assert s.spend_minted("B0", "U0", burn_index=k)[1].accepted
    with pytest.raises(ProtocolError, match="burn not mintable"):
        s.minters["T0"].admit(k)


def two_minters(policy_honest=True):
    return MinterSystem(banks=2, users=4, tau=2, seed=3,
                        minters={"T0": (10, ["B0"], True), "T1": (10, ["B1"], policy_honest)})


def test_other_minter_refuses_foreign_chain():
    s = two_minters()
    k = s.burn("B0")
    assert s.minter_for("B0", k) == "T0"
    with pytest.raises(ProtocolError, match="another minter's chain"):
        s.spend_minted("B0", "U0", minter="T1", burn_index=k)


def test_foreign_mint_needs_agreement():
    s = two_minters(policy_honest=False)
    k = s.burn("B0")
    _, v = s.spend_minted("B0", "U0", minter="T1", burn_index=k)
    assert not v.accepted
    idx = len(s.board) - 1
    assert s.fresh_validator().status[idx] == ("ignored", "no chain for minter")

    t0, t1 = s.minters["T0"], s.minters["T1"]
    s.board.post(MinterAgreement(t0.vk, t1.vk, sign(t0.keypair.sk, agreement_message(t0.vk, t1.vk), s.rng)), "CB")
    k2 = s.burn("B0")
    _, v = s.spend_minted("B0", "U1", minter="T1", burn_index=k2)
    assert v.accepted


def test_forged_agreement_ignored():
    s = two_minters(policy_honest=False)
    t0, t1 = s.minters["T0"], s.minters["T1"]
    bogus = MinterAgreement(t0.vk, t1.vk, sign(t1.keypair.sk, agreement_message(t0.vk, t1.vk), s.rng))
    s.board.post(bogus, "B1")
    assert s.fresh_validator().status[len(s.board) - 1] == ("ignored", "bad agreement signature")


def test_unknown_minter_rejected():
    s = honest()
    k = s.burn("B0")
    bs = s.parties["B0"].state.pending[k]
    rogue = keygen(random.Random(9))
    vk_r = s.parties["U0"].receiver_keygen()
    tok = MintedToken(bs.keypair.vk, vk_r, sign(bs.keypair.sk, vk_r.to_bytes(), s.rng),
                      rogue.vk, sign(rogue.sk, bs.keypair.vk.to_bytes(), s.rng))
    assert s.fresh_validator().check(tok) == "unknown minter"
    assert not minter_is_valid(s.vk_cb, s.fresh_validator(), tok)


def test_over_quota_flags_and_forges():
    s, got = attacked()
    assert [v.accepted for _, v in got] == [True, True, True]
    vs = s.fresh_validator()
    minted = [e.index for e, _ in got]
    assert vs.flagged() == [s.minters["T0"].vk.to_bytes()]
    assert vs.forged == set(minted)
    assert not any(vs.is_live(i) for i in minted)
    assert vs.live_count == 3 and vs.balance == 3
    with pytest.raises(ProtocolError, match="minter flagged"):
        s.transfer_minted("B0", "U3")


def test_audit_empty_and_registry():
    a = accountability_audit(BulletinBoard(["B0"]), (), keygen(random.Random(0)).vk)
    assert a.flagged == [] and a.forged == [] and a.lines() == []
    s, got = attacked()
    vs = s.fresh_validator()
    reg = registry_records(vs)
    a = accountability_audit(s.board, s.vk_cb, s.info.vk_crs, registry=reg)
    assert a.forged == sorted(e.index for e, _ in got)
    assert len(a.lines()) == 1
    with pytest.raises(ValueError):
        accountability_audit(s.board, s.vk_cb, s.info.vk_crs, registry=[{**reg[0], "quota": 99}])


def test_rescue_proof_restores():
    s, got = attacked()
    idx = got[0][0].index
    payload = rescue_proof(s.parties["B0"], idx, 2)
    v = s.post_rescue("B0", payload)
    assert v.accepted, v
    vs = s.fresh_validator()
    assert vs.is_live(idx) and idx in vs.rescued
    assert vs.balance == 4
    again = s.post_rescue("B0", payload)
    assert again.reason == "already rescued"


def test_rescue_opening_restores():
    s, got = attacked()
    idx = got[1][0].index
    v = s.post_rescue("B0", rescue_opening(s.parties["B0"], idx))
    assert v.accepted, v
    bad = RescueOpening(got[2][0].index, rescue_opening(s.parties["B0"], idx).burn, 12345)
    assert s.post_rescue("B0", bad).reason == "bad opening"


def test_rescue_of_valid_token_refused():
    s = honest()
    entry, _ = s.transfer_minted("B0", "U0")
    with pytest.raises(ProtocolError):
        rescue_proof(s.parties["U0"], entry.index, 1)
    v = s.post_rescue("B0", rescue_opening(s.parties["B0"], entry.index))
    assert v.reason == "token not forged"


def test_rescue_bucket_with_forged_burn_rejected():
    s = MinterSystem(banks=1, users=6, tau=6, seed=4, minters={"T0": (2, None, False)})
    e0, _ = s.transfer_minted("B0", "U0")
    s.burn("U0")  # burnt before the minter is flagged
    e1, _ = s.transfer_minted("B0", "U1")
    e2, _ = s.transfer_minted("B0", "U2")
    vs = s.fresh_validator()
    assert e0.index in vs.forged
    forged_burn = vs.burnt_refs[e0.index]
    good = rescue_proof(s.parties["B0"], e1.index, 1)
    assert s.fresh_validator().check_rescue(good) is None
    bucket = tuple(sorted(good.bucket + (forged_burn,)))
    bad = RescueProof(e1.index, bucket, good.proof)
    assert s.post_rescue("B0", bad).reason == "bucket contains forged burn"
    assert s.post_rescue("B0", RescueProof(e2.index, good.bucket, good.proof)).reason == "proof rejected"


def test_replacement_key_takes_over_chain():
    s = honest(quota=1)
    assert s.transfer_minted("B0", "U0")[1].accepted
    old = s.minters["T0"]
    s.replace_minter_key("T0", 3)
    k = s.burn("B0")
    with pytest.raises(ProtocolError):
        old.admit(k)
    assert s.spend_minted("B0", "U1", burn_index=k)[1].accepted
    vs = s.fresh_validator()
    assert vs.minters[old.vk.to_bytes()].retired
    assert vs.flagged() == []
