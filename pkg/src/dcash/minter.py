"""Minter-aided variant: blind-signature minting with quota accountability.

Instead of an OR proof per transfer, the sender asks a minter for a blind
signature on its fresh sender key. Minters have a quota; a minter whose
valid minted tokens exceed it is flagged and everything it minted is marked
forged. Honest users can restore a forged token with a rescue proof (the
token's sender key is committed in some non-forged burn) or by opening the
burning factor directly.

``Blind(vk; r)`` is the same Pedersen commitment used for burning factors,
so rescue proofs reuse the OR-proof module unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .crypto import BlindRequest, BlindSigner, KeyPair, keygen, sign, verify_opening, verify_sig
from .ledger import (
    CENTRAL_BANK,
    BurnRecord,
    Entry,
    IGNORED,
    INFO,
    MintedToken,
    MinterAgreement,
    MinterKey,
    OrderingError,
    RescueOpening,
    RescueProof,
    ValidSet,
    find_crs,
)
from .orproof import OrStatement, OrWitness, prove
from .orproof import verify as verify_proof
from .protocol import CentralBank, ProtocolError, System, Verdict, bank_post, user_init


@dataclass
class MinterInfo:
    vk: bytes
    quota: int
    chains: tuple
    root: bytes
    count: int = 0
    flagged: bool = False
    retired: bool = False
    minted: list = field(default_factory=list)


def agreement_message(grantor, grantee) -> bytes:
    return b"agree" + grantor.to_bytes() + grantee.to_bytes()


class MinterValidSet(ValidSet):
    """Validity view that also understands minter registry, mints and rescues."""

    def __post_init__(self):
        super().__post_init__()
        self.minters: dict[bytes, MinterInfo] = {}
        self.chain_minter: dict[int, bytes] = {}   # genesis index -> minter root
        self.token_minter: dict[int, bytes] = {}   # token index -> minter root
        self.pool: dict[bytes, int] = {}           # minter root -> unredeemed burns
        self.agreements: set = set()               # (grantor root, grantee vk)
        self.forged: set = set()
        self.rescued: set = set()

    def copy(self):
        dup = super().copy()
        dup.minters = {k: MinterInfo(**{**v.__dict__, "minted": list(v.minted)}) for k, v in self.minters.items()}
        for name in ("chain_minter", "token_minter", "pool", "agreements", "forged", "rescued"):
            setattr(dup, name, getattr(self, name).copy())
        return dup

    # views ----------------------------------------------------------------

    def is_forged(self, index: int) -> bool:
        return index in self.forged and index not in self.rescued

    def is_live(self, index: int) -> bool:
        return super().is_live(index) and not self.is_forged(index)

    def flagged(self) -> list[bytes]:
        return [k for k, m in self.minters.items() if m.flagged]

    # checks ---------------------------------------------------------------

    def check_burn(self, rec: BurnRecord):
        if self.is_forged(rec.ref):
            return "burnt token forged"
        return super().check_burn(rec)

    def _pool_for(self, vk: bytes):
        """Pool this minter key may draw from, or ``None``."""
        root = self.minters[vk].root
        if self.pool.get(root, 0) > 0:
            return root
        for grantor, grantee in sorted(self.agreements):
            if grantee == vk and self.pool.get(grantor, 0) > 0:
                return grantor
        return None

    def check_minted(self, tok: MintedToken):
        if tok.vk_s.to_bytes() in self.sender_keys:
            return "sender key reused"
        if not verify_sig(tok.vk_s, tok.vk_r.to_bytes(), tok.sig_s):
            return "bad sender signature"
        info = self.minters.get(tok.vk_t.to_bytes())
        if info is None:
            return "unknown minter"
        if info.flagged:
            return "minter flagged"
        if info.retired:
            return "minter retired"
        if not verify_sig(tok.vk_t, tok.vk_s.to_bytes(), tok.sig_t):
            return "bad minter signature"
        if self._pool_for(info.vk) is None:
            return "no chain for minter"
        return None

    def check(self, token, vk_cb=None):
        if isinstance(token, MintedToken):
            return self.check_minted(token)
        return super().check(token, vk_cb)

    def _rescue_bucket(self, bucket):
        reason = self.check_bucket(bucket)
        if reason:
            return reason
        if any(self.is_forged(self.burns[i].ref) for i in bucket):
            return "bucket contains forged burn"
        return None

    def check_rescue(self, p):
        if p.ref not in self.forged:
            return "token not forged"
        if p.ref in self.rescued:
            return "already rescued"
        tok = self.valid[p.ref]
        if isinstance(p, RescueProof):
            reason = self._rescue_bucket(p.bucket)
            if reason:
                return reason
            stmt = OrStatement([self.burns[i].beta for i in p.bucket], tok.vk_s)
            if self.crs is None or not verify_proof(self.crs, stmt, p.proof, self.oracle):
                return "proof rejected"
            return None
        reason = self._rescue_bucket((p.burn,))
        if reason:
            return reason
        if not verify_opening(self.crs.params, self.burns[p.burn].beta, tok.vk_s.to_bytes(), p.r):
            return "bad opening"
        return None

    # ingestion ------------------------------------------------------------

    def ingest(self, entry: Entry):
        p = entry.payload
        if isinstance(p, MinterKey):
            self._ingest_key(entry)
        elif isinstance(p, MinterAgreement):
            self._ingest_agreement(entry)
        elif isinstance(p, MintedToken):
            self._ingest_minted(entry)
        elif isinstance(p, (RescueProof, RescueOpening)):
            self._step(entry)
            reason = self.check_rescue(p)
            if reason is None:
                self.rescued.add(p.ref)
                self.status[entry.index] = ("rescue", "")
            else:
                self.status[entry.index] = (IGNORED, reason)
        else:
            super().ingest(entry)
            if isinstance(p, BurnRecord) and self.burnt_refs.get(p.ref) == entry.index:
                root = self.token_minter.get(p.ref)
                if root is not None:
                    self.pool[root] = self.pool.get(root, 0) + 1
        return self

    def _step(self, entry):
        if entry.index != self.next_index:
            raise OrderingError("ordering violated")
        self.next_index += 1

    def _ingest_key(self, entry):
        self._step(entry)
        p = entry.payload
        vk = p.vk_t.to_bytes()
        if entry.poster != CENTRAL_BANK:
            self.status[entry.index] = (IGNORED, "minter key not from central bank")
            return
        if vk in self.minters:
            self.status[entry.index] = (IGNORED, "minter key reused")
            return
        root = vk
        if p.replaces:
            old = self.minters.get(p.replaces)
            if old is None:
                self.status[entry.index] = (IGNORED, "unknown replaced key")
                return
            old.retired = True
            root = old.root
        self.minters[vk] = MinterInfo(vk, p.quota, tuple(p.chains), root)
        for j in p.chains:
            self.chain_minter[j] = root
            if j in self.valid:
                self.token_minter[j] = root
        self.status[entry.index] = (INFO, "minter key")

    def _ingest_agreement(self, entry):
        self._step(entry)
        p = entry.payload
        g = self.minters.get(p.grantor.to_bytes())
        if g is None or p.grantee.to_bytes() not in self.minters:
            self.status[entry.index] = (IGNORED, "unknown minter")
        elif not verify_sig(p.grantor, agreement_message(p.grantor, p.grantee), p.sig):
            self.status[entry.index] = (IGNORED, "bad agreement signature")
        else:
            self.agreements.add((g.root, p.grantee.to_bytes()))
            self.status[entry.index] = (INFO, "agreement")

    def _ingest_minted(self, entry):
        self._step(entry)
        tok = entry.payload
        reason = self.check_minted(tok)
        if reason is not None:
            self.status[entry.index] = (IGNORED, reason)
            return
        info = self.minters[tok.vk_t.to_bytes()]
        self.pool[self._pool_for(info.vk)] -= 1
        self._accept(entry.index, tok)
        self.token_minter[entry.index] = info.root
        info.count += 1
        info.minted.append(entry.index)
        if info.count > info.quota:
            info.flagged = True
            self.forged.update(info.minted)

    def _accept(self, index, token):
        super()._accept(index, token)
        if index in self.chain_minter:
            self.token_minter[index] = self.chain_minter[index]

    def to_bytes(self) -> bytes:
        extra = json.dumps({
            "flagged": sorted(k.hex() for k in self.flagged()),
            "forged": sorted(self.forged),
            "rescued": sorted(self.rescued),
        }, separators=(",", ":")).encode()
        return super().to_bytes() + extra


# -- minter party --------------------------------------------------------------


class Minter:
    """Blind-signing responder. ``honest=False`` ignores quota and burn checks."""

    def __init__(self, mid: str, keypair: KeyPair, quota: int, honest: bool = True):
        self.id = mid
        self.keypair = keypair
        self.quota = quota
        self.honest = honest
        self.signer = BlindSigner(keypair)
        self.mint_count = 0
        self.minted_burns: set = set()
        self.session_log: list[bytes] = []
        self.vs: MinterValidSet | None = None

    @property
    def vk(self):
        return self.keypair.vk

    @property
    def flagged(self) -> bool:
        info = self.vs.minters.get(self.vk.to_bytes()) if self.vs else None
        return bool(info and info.flagged)

    def admit(self, burn_index: int) -> None:
        if self.flagged:
            raise ProtocolError("minter flagged")
        if not self.honest:
            return
        if self.mint_count >= self.quota:
            raise ProtocolError("quota exhausted")
        if burn_index in self.minted_burns or burn_index not in self.vs.burns:
            raise ProtocolError("burn not mintable")
        root = self.vs.minters[self.vk.to_bytes()].root
        ref = self.vs.burns[burn_index].ref
        if self.vs.token_minter.get(ref) != root:
            raise ProtocolError("burn belongs to another minter's chain")

    def open(self, burn_index: int, rng):
        self.admit(burn_index)
        R = self.signer.open_session(rng)
        self.session_log.append(burn_index.to_bytes(8, "big") + R.to_bytes())
        return R

    def answer(self, burn_index: int, c: int) -> int:
        s = self.signer.answer(c)
        t = self.signer.transcripts[-1]
        self.session_log.append(t.to_bytes())
        self.mint_count += 1
        self.minted_burns.add(burn_index)
        return s

    def transcript_bytes(self) -> bytes:
        return b"".join(self.session_log)


def minter_burn(party, token_index: int) -> int:
    """Burn with ``beta = Blind(vk^S1; r)``; same record shape as a plain burn."""
    return party.burn(token_index)


def mint(sender, minter: Minter, burn_index: int):
    """Blindly obtain the minter's signature on the sender's next key."""
    bs = sender.state.pending.get(burn_index)
    if bs is None:
        raise ProtocolError("not burner")
    req = BlindRequest(minter.vk, bs.keypair.vk.to_bytes(), sender.rng)
    R = minter.open(burn_index, sender.rng)
    s = minter.answer(burn_index, req.challenge(R))
    return req.finish(s)


def minter_is_valid(vk_cb, vs: MinterValidSet, token) -> bool:
    keys = frozenset(k.to_bytes() if hasattr(k, "to_bytes") else bytes(k) for k in vk_cb)
    return vs.check(token, keys) is None


def rescue_proof(party, token_index: int, n: int, rng=None, secret=None) -> RescueProof:
    """OR proof that the forged token's sender key sits in a non-forged burn."""
    rng = rng or party.rng
    vs = party.vs
    tok = vs.valid[token_index]
    bs = secret or _secret_for(party, tok)
    if bs is None or vs.is_forged(vs.burns[bs.burn_index].ref):
        raise ProtocolError("no rescuable burn")
    pool = [i for i in sorted(vs.burns) if i != bs.burn_index and not vs.is_forged(vs.burns[i].ref)]
    if len(pool) < n - 1:
        raise ProtocolError("bucket too large")
    bucket = rng.sample(pool, n - 1) + [bs.burn_index]
    rng.shuffle(bucket)
    stmt = OrStatement([vs.burns[i].beta for i in bucket], tok.vk_s)
    proof = prove(party.state.crs, stmt, OrWitness(bs.r, bucket.index(bs.burn_index) + 1), rng, party.oracle)
    return RescueProof(token_index, tuple(bucket), proof)


def rescue_opening(party, token_index: int) -> RescueOpening:
    tok = party.vs.valid[token_index]
    bs = _secret_for(party, tok)
    if bs is None:
        raise ProtocolError("no rescuable burn")
    return RescueOpening(token_index, bs.burn_index, bs.r)


def _secret_for(party, tok):
    key = tok.vk_s.to_bytes()
    for bs in party.state.pending.values():
        if bs.keypair.vk.to_bytes() == key:
            return bs
    return None


@dataclass
class AuditResult:
    flagged: list
    forged: list
    minters: list  # (vk hex, count, quota, flagged, forged indices)

    def lines(self) -> list[str]:
        return [json.dumps({"minter": vk, "count": c, "quota": q, "flagged": f, "forged": idx},
                           separators=(",", ":")) for vk, c, q, f, idx in self.minters]


def accountability_audit(board, vk_cb, vk_crs, registry=None, oracle=None) -> AuditResult:
    """Replay the board and report minters over quota with their forged tokens."""
    entries = board.read() if hasattr(board, "read") else list(board)
    crs = find_crs(entries, vk_crs)
    if crs is None:
        return AuditResult([], [], [])
    vs = MinterValidSet(frozenset(vk_cb), crs, oracle).extend(entries)
    if registry is not None:
        onboard = {m.vk.hex(): m.quota for m in vs.minters.values()}
        if {r["vk"]: r["quota"] for r in registry} != onboard:
            raise ValueError("registry does not match board")
    rows = []
    for vk, m in sorted(vs.minters.items()):
        forged = sorted(m.minted) if m.flagged else []
        rows.append((vk.hex(), m.count, m.quota, m.flagged, forged))
    return AuditResult(sorted(vk.hex() for vk in vs.flagged()), sorted(vs.forged), rows)


def registry_records(vs: MinterValidSet) -> list[dict]:
    return [{"vk": m.vk.hex(), "quota": m.quota, "chains": list(m.chains)}
            for _, m in sorted(vs.minters.items())]


# -- simulator -----------------------------------------------------------------


class MinterSystem(System):
    """``System`` with minters registered at setup and minted spends.

    ``minters`` maps a minter id to ``(quota, banks served, honest)``.
    Senders keep their burn secrets after spending so they can rescue.
    """

    validset = MinterValidSet

    def __init__(self, *args, minters=None, **kw):
        self._minter_cfg = minters or {"T0": (10**6, None, True)}
        super().__init__(*args, **kw)

    def _setup(self, crs_seed):
        bank_keys = {b: [self.parties[b].receiver_keygen() for _ in range(self.tau)] for b in self.bank_ids}
        self.info = CentralBank(self.rng).setup(bank_keys, self.tau, self.board, crs_seed)
        self.minters: dict[str, Minter] = {}
        for mid, (quota, banks, honest) in sorted(self._minter_cfg.items()):
            m = Minter(mid, keygen(self.rng), quota, honest)
            banks = self.bank_ids if banks is None else banks
            chains = tuple(idx for (b, _), idx in sorted(self.info.genesis.items()) if b in banks)
            self.board.post(MinterKey(m.vk, quota, chains), CENTRAL_BANK)
            self.minters[mid] = m
        for p in self.parties.values():
            p.init(self.info.vk_cb, self.info.vk_crs, self.validset)
        for b in self.bank_ids:
            self.parties[b].claim_genesis()
        for m in self.minters.values():
            _, m.vs = _init_view(self)
            self.board.subscribe(m.vs.ingest)

    def replace_minter_key(self, mid: str, quota: int) -> None:
        old = self.minters[mid]
        new = Minter(mid, keygen(self.rng), quota, old.honest)
        new.vs = old.vs
        self.board.post(MinterKey(new.vk, quota, (), old.vk.to_bytes()), CENTRAL_BANK)
        self.minters[mid] = new

    def minter_for(self, pid: str, burn_index: int) -> str:
        """The minter whose chain the burnt token belongs to."""
        vs = self.parties[pid].vs
        root = vs.token_minter.get(vs.burns[burn_index].ref)
        for mid, m in sorted(self.minters.items()):
            info = vs.minters.get(m.vk.to_bytes())
            if info is not None and info.root == root and not info.retired:
                return mid
        raise ProtocolError("no minter for chain")

    def spend_minted(self, sender: str, receiver: str, minter: str | None = None, burn_index=None):
        s, r = self.parties[sender], self.parties[receiver]
        if burn_index is None:
            open_burns = [k for k, bs in s.state.pending.items()
                          if bs.keypair.vk.to_bytes() not in s.vs.sender_keys]
            if not open_burns:
                raise ProtocolError(f"{sender} has no pending burn")
            burn_index = min(open_burns)
        minter = minter or self.minter_for(sender, burn_index)
        bs = s.state.pending[burn_index]
        vk_r1 = r.receiver_keygen()
        sig_t = mint(s, self.minters[minter], burn_index)
        sig_s = sign(bs.keypair.sk, vk_r1.to_bytes(), s.rng)
        cand = MintedToken(bs.keypair.vk, vk_r1, sig_s, self.minters[minter].vk, sig_t)
        entry = bank_post(s.bank, self.board, cand, self.policies[s.bank])
        verdict = r.validate_payment(entry, vk_r1)
        if isinstance(entry, Entry):
            self.queries.add(entry.index)
        return entry, verdict

    def transfer_minted(self, sender: str, receiver: str, minter: str | None = None):
        s = self.parties[sender]
        if not any(bs.keypair.vk.to_bytes() not in s.vs.sender_keys for bs in s.state.pending.values()):
            self.burn(sender)
        return self.spend_minted(sender, receiver, minter)

    def post_rescue(self, pid: str, payload):
        p = self.parties[pid]
        idx = self.board.post(payload, p.bank)
        return Verdict(idx in p.vs.rescued or p.vs.status[idx][0] == "rescue", p.vs.status[idx][1])


def _init_view(system):
    return user_init(system.vk_cb, system.info.vk_crs, system.board, system.oracle, MinterValidSet)
