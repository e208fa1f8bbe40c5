"""Central bank setup, party state machines and a sequential simulator.

A transfer from ``S`` to ``R`` runs Burn (S certifies a burning factor for
a token it owns), Token Gen (R sends a fresh receiver key), Proof Gen (S
signs the key and proves its fresh sender key is committed in a bucket of
burning factors), Token Post (S's bank applies its policy) and Validation
(R accepts iff the posted token is valid and carries its key).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from .crypto import KeyPair, commit, default_rng, keygen, sign
from .ledger import (
    CENTRAL_BANK,
    BulletinBoard,
    BurnRecord,
    CrsPost,
    Entry,
    GenesisToken,
    LiveToken,
    ValidSet,
    burn_message,
    find_crs,
)
from .orproof import Crs, OrStatement, OrWitness, crs_gen, prove, simulate
from .wire import Writer

ZERO_MESSAGE = bytes(32)
DEFAULT_BUCKET = 8


class ProtocolError(RuntimeError):
    pass


# -- central bank ------------------------------------------------------------


@dataclass(frozen=True)
class SetupInfo:
    """Public output of setup, delivered to users out of band."""

    vk_cb: tuple
    vk_crs: object
    crs_index: int
    genesis: dict  # (bank, i) -> board index


class CentralBank:
    def __init__(self, rng=None):
        self.rng = rng or default_rng()
        self._secrets: dict | None = {}
        self.erased = False

    def _require_live(self):
        if self.erased:
            raise ProtocolError("central bank state erased")

    def setup(self, bank_keys: dict, tau: int, board: BulletinBoard, crs_seed: bytes) -> SetupInfo:
        self._require_live()
        absent = sorted(b for b, keys in bank_keys.items() if len(keys) < tau)
        if absent:
            raise ProtocolError("missing bank keys: " + ", ".join(absent))
        banks = sorted(bank_keys)
        for b in banks:
            for i in range(tau):
                self._secrets[(b, i)] = keygen(self.rng)
        crs_pair = keygen(self.rng)
        crs = crs_gen(crs_seed)
        crs_index = board.post(CrsPost(crs, sign(crs_pair.sk, crs.to_bytes(), self.rng)), CENTRAL_BANK)
        genesis = {}
        for b in banks:
            for i in range(tau):
                kp = self._secrets[(b, i)]
                vk_b = bank_keys[b][i]
                tok = GenesisToken(kp.vk, vk_b, sign(kp.sk, vk_b.to_bytes(), self.rng))
                genesis[(b, i)] = board.post(tok, CENTRAL_BANK)
        vk_cb = tuple(self._secrets[(b, i)].vk for b in banks for i in range(tau))
        self.erase()
        return SetupInfo(vk_cb, crs_pair.vk, crs_index, genesis)

    def sign_genesis(self, bank: str, i: int, msg: bytes):
        self._require_live()
        return sign(self._secrets[(bank, i)].sk, msg, self.rng)

    def erase(self) -> None:
        self._secrets = None
        self.erased = True


def cb_setup(bank_keys: dict, tau: int, seed, board: BulletinBoard, crs_seed: bytes = b"dcash") -> SetupInfo:
    return CentralBank(random.Random(seed)).setup(bank_keys, tau, board, crs_seed)


# -- parties -----------------------------------------------------------------


@dataclass
class BurnSecret:
    keypair: KeyPair
    r: int
    burn_index: int
    token_index: int
    receiver_sk: int
    zeroed: bool = False


@dataclass
class PartyState:
    id: str
    bank: str
    vk_cb: tuple
    vk_crs: object
    crs: Crs
    vs: ValidSet
    owned: dict = field(default_factory=dict)          # token index -> sk^R
    receiver_keys: dict = field(default_factory=dict)  # vk^R bytes -> sk^R
    pending: dict = field(default_factory=dict)        # burn index -> BurnSecret

    def to_bytes(self) -> bytes:
        g = self.crs.group
        w = Writer().blob(self.id.encode()).blob(self.bank.encode())
        w.u32(len(self.owned))
        for i, sk in sorted(self.owned.items()):
            w.u64(i).scalar(g, sk)
        w.u32(len(self.receiver_keys))
        for vk, sk in sorted(self.receiver_keys.items()):
            w.raw(vk).scalar(g, sk)
        w.u32(len(self.pending))
        for k, bs in sorted(self.pending.items()):
            w.u64(k).u64(bs.token_index).element(bs.keypair.vk)
            w.scalar(g, bs.keypair.sk).scalar(g, bs.r).scalar(g, bs.receiver_sk)
        return w.raw(bytes.fromhex(self.vs.digest())).getvalue()


def user_init(vk_cb, vk_crs, board: BulletinBoard, oracle=None, validset=ValidSet) -> tuple:
    """Fetch the CRS and fold ingest over the current board snapshot."""
    entries = board.read()
    crs = find_crs(entries, vk_crs)
    if crs is None:
        raise ProtocolError("crs not found")
    vs = validset(frozenset(vk_cb), crs, oracle)
    vs.extend(entries)
    return crs, vs


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str = ""


@dataclass(frozen=True)
class Denied:
    candidate: object
    bank: str


class Party:
    def __init__(self, pid: str, bank: str, board: BulletinBoard, rng=None, oracle=None):
        self.id = pid
        self.bank = bank
        self.board = board
        self.rng = rng or default_rng()
        self.oracle = oracle
        self.state: PartyState | None = None
        self._pre_keys: dict = {}
        # hybrid rewriting hooks
        self.zero_commit: Callable[[int], bool] = lambda burn_no: False
        self.simulate_proofs = False
        self.burn_count = 0

    def init(self, vk_cb, vk_crs, validset=ValidSet) -> PartyState:
        crs, vs = user_init(vk_cb, vk_crs, self.board, self.oracle, validset)
        self.state = PartyState(self.id, self.bank, tuple(vk_cb), vk_crs, crs, vs,
                                receiver_keys=self._pre_keys)
        self.board.subscribe(self._on_stored)
        return self.state

    def _on_stored(self, entry: Entry) -> None:
        self.state.vs.ingest(entry)

    @property
    def vs(self) -> ValidSet:
        return self.state.vs

    def receiver_keygen(self):
        kp = keygen(self.rng)
        keys = self._pre_keys if self.state is None else self.state.receiver_keys
        keys[kp.vk.to_bytes()] = kp.sk
        return kp.vk

    def claim_genesis(self) -> list[int]:
        """Take ownership of valid genesis tokens addressed to our keys."""
        got = []
        for i, tok in sorted(self.vs.valid.items()):
            if isinstance(tok, GenesisToken) and tok.vk_r.to_bytes() in self.state.receiver_keys:
                self.state.owned[i] = self.state.receiver_keys.pop(tok.vk_r.to_bytes())
                got.append(i)
        return got

    def live_tokens(self) -> list[int]:
        return [i for i in sorted(self.state.owned) if self.vs.is_live(i)]

    # Burning ----------------------------------------------------------------

    def make_burn(self, token_index: int):
        st = self.state
        if token_index in st.vs.burnt_refs:
            raise ProtocolError("already burnt")
        if token_index not in st.owned:
            raise ProtocolError("no receiver key")
        if not st.vs.is_live(token_index):
            raise ProtocolError("token not live")
        tok = st.vs.valid[token_index]
        nxt = keygen(self.rng)
        r = st.crs.group.random_scalar(self.rng)
        zeroed = self.zero_commit(self.burn_count)
        msg = ZERO_MESSAGE if zeroed else nxt.vk.to_bytes()
        beta = commit(st.crs.params, msg, r)
        sig_r = sign(st.owned[token_index], burn_message(tok.vk_s, beta), self.rng)
        return BurnRecord(token_index, beta, sig_r), nxt, r, zeroed

    def burn(self, token_index: int) -> int:
        rec, nxt, r, zeroed = self.make_burn(token_index)
        k = self.board.post(rec, self.bank)
        if k not in self.vs.burns:
            raise ProtocolError("burn record rejected")
        self.burn_count += 1
        sk_r = self.state.owned.pop(token_index)
        self.state.pending[k] = BurnSecret(nxt, r, k, token_index, sk_r, zeroed)
        return k

    # Spending ---------------------------------------------------------------

    def sample_bucket(self, burn_index: int, n: int) -> tuple:
        burns = sorted(self.vs.burns)
        if n > len(burns):
            raise ProtocolError("bucket too large")
        others = [b for b in burns if b != burn_index]
        bucket = self.rng.sample(others, n - 1) + [burn_index]
        self.rng.shuffle(bucket)
        return tuple(bucket)

    def proof_gen(self, burn_index: int, vk_r1, n: int = DEFAULT_BUCKET) -> LiveToken:
        st = self.state
        bs = st.pending.get(burn_index)
        if bs is None:
            raise ProtocolError("not burner")
        bucket = self.sample_bucket(burn_index, n)
        sig_s = sign(bs.keypair.sk, vk_r1.to_bytes(), self.rng)
        stmt = OrStatement([st.vs.burns[i].beta for i in bucket], bs.keypair.vk)
        if self.simulate_proofs or bs.zeroed:
            proof = simulate(st.crs, stmt, self.oracle, self.rng)
        else:
            proof = prove(st.crs, stmt, OrWitness(bs.r, bucket.index(burn_index) + 1), self.rng, self.oracle)
        return LiveToken(bs.keypair.vk, vk_r1, sig_s, bucket, proof)

    def validate_payment(self, entry: Entry, expected_vk) -> Verdict:
        st = self.state
        if isinstance(entry, Denied):
            return Verdict(False, "denied")
        if st.vs.next_index <= entry.index:
            raise ProtocolError("entry not yet ingested")
        if entry.index not in st.vs.valid:
            return Verdict(False, "invalid token")
        tok = st.vs.valid[entry.index]
        key = expected_vk.to_bytes()
        if tok.vk_r.to_bytes() != key:
            return Verdict(False, "wrong receiver key")
        if key not in st.receiver_keys:
            return Verdict(False, "no receiver key")
        st.owned[entry.index] = st.receiver_keys.pop(key)
        return Verdict(True)

    def purge_spent(self, burn_index: int) -> PartyState:
        st = self.state
        bs = st.pending.get(burn_index)
        if bs is None:
            raise ProtocolError("not burner")
        if bs.keypair.vk.to_bytes() not in st.vs.sender_keys:
            raise ProtocolError("still pending")
        del st.pending[burn_index]
        return st


# -- banks -------------------------------------------------------------------


def accept_all(candidate, board) -> bool:
    return True


def deny_all(candidate, board) -> bool:
    return False


class MaxPosts:
    """Denies a bank's token posts beyond ``limit`` per run."""

    def __init__(self, limit: int):
        self.limit = limit
        self.count = 0

    def __call__(self, candidate, board) -> bool:
        if self.count >= self.limit:
            return False
        self.count += 1
        return True


POLICIES = {"accept-all": lambda: accept_all, "deny-all": lambda: deny_all, "max-3": lambda: MaxPosts(3)}


def bank_post(bank: str, board: BulletinBoard, candidate, policy=accept_all):
    """CheckRegulation then post; returns the posted ``Entry`` or ``Denied``."""
    if not policy(candidate, board):
        return Denied(candidate, bank)
    idx = board.post(candidate, bank)
    return board.read()[idx]


# -- simulator ---------------------------------------------------------------


@dataclass
class TransferResult:
    sender: str
    receiver: str
    burn_index: int
    entry: object
    verdict: Verdict
    bucket: tuple = ()


class System:
    """Parties, banks and a board, driven sequentially from one seeded RNG."""

    validset = ValidSet

    def __init__(self, banks=2, users=8, tau=4, seed=0, policy="accept-all", oracle=None,
                 crs_seed=b"dcash"):
        self.rng = random.Random(seed)
        self.oracle = oracle
        self.bank_ids = [f"B{i}" for i in range(banks)]
        self.user_ids = [f"U{i}" for i in range(users)]
        self.board = BulletinBoard(self.bank_ids)
        self.policies = {b: POLICIES[policy]() for b in self.bank_ids}
        self.parties: dict[str, Party] = {}
        for i, pid in enumerate(self.bank_ids + self.user_ids):
            bank = pid if pid in self.bank_ids else self.bank_ids[i % banks]
            self.parties[pid] = Party(pid, bank, self.board, self.rng, oracle)
        self.tau = tau
        self._setup(crs_seed)
        self.queries: set[int] = set()

    def _setup(self, crs_seed):
        bank_keys = {b: [self.parties[b].receiver_keygen() for _ in range(self.tau)] for b in self.bank_ids}
        self.info = CentralBank(self.rng).setup(bank_keys, self.tau, self.board, crs_seed)
        for p in self.parties.values():
            p.init(self.info.vk_cb, self.info.vk_crs, self.validset)
        for b in self.bank_ids:
            self.parties[b].claim_genesis()

    @property
    def vk_cb(self):
        return self.info.vk_cb

    def party(self, pid: str) -> Party:
        return self.parties[pid]

    def burn(self, pid: str, token_index: int | None = None) -> int:
        p = self.parties[pid]
        if token_index is None:
            live = p.live_tokens()
            if not live:
                raise ProtocolError(f"{pid} holds no live token")
            token_index = live[0]
        return p.burn(token_index)

    def spend(self, sender: str, receiver: str, n: int = DEFAULT_BUCKET, burn_index: int | None = None,
              purge: bool = True) -> TransferResult:
        s, r = self.parties[sender], self.parties[receiver]
        if burn_index is None:
            if not s.state.pending:
                raise ProtocolError(f"{sender} has no pending burn")
            burn_index = min(s.state.pending)
        vk_r1 = r.receiver_keygen()
        cand = s.proof_gen(burn_index, vk_r1, n)
        entry = bank_post(s.bank, self.board, cand, self.policies[s.bank])
        verdict = r.validate_payment(entry, vk_r1)
        if isinstance(entry, Entry):
            self.queries.add(entry.index)
            if purge and verdict.accepted:
                s.purge_spent(burn_index)
        return TransferResult(sender, receiver, burn_index, entry, verdict, cand.bucket)

    def transfer(self, sender: str, receiver: str, n: int = DEFAULT_BUCKET) -> TransferResult:
        if not self.parties[sender].state.pending:
            self.burn(sender)
        return self.spend(sender, receiver, n)

    def holdings(self, pid: str) -> int:
        p = self.parties[pid]
        spent = p.vs.sender_keys
        open_burns = [bs for bs in p.state.pending.values() if bs.keypair.vk.to_bytes() not in spent]
        return len(p.live_tokens()) + len(open_burns)

    def fresh_validator(self) -> ValidSet:
        """Independent validator replaying the board from scratch."""
        _, vs = user_init(self.vk_cb, self.info.vk_crs, self.board, self.oracle, self.validset)
        return vs
