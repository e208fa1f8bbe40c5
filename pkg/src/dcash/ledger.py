"""Bulletin board, token payloads and validity tracking.

Burn records are separate board entries that point back at the token they
burn; a burnt token is the join of the two. Bucket indices in a live token
refer to burn-record entries.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .crypto import BurningFactor, Signature, verify_sig
from .groups import DEFAULT_GROUP, DecodeError, Element
from .oracle import HashOracle
from .orproof import Crs, OrProof, OrStatement
from .orproof import verify as verify_proof
from .wire import Reader, Writer

CENTRAL_BANK = "CB"


class UnauthorizedPoster(PermissionError):
    pass


class OrderingError(RuntimeError):
    pass


# -- payloads ----------------------------------------------------------------

G = DEFAULT_GROUP


def burn_message(vk_s: Element, beta: BurningFactor) -> bytes:
    """Message certified by the receiver when burning: ``(vk^S, beta)``."""
    return Writer().raw(b"burn").element(vk_s).element(beta.c).getvalue()


def _put_indices(w: Writer, idx: Iterable[int]) -> Writer:
    idx = list(idx)
    w.u32(len(idx))
    for i in idx:
        w.u64(i)
    return w


def _get_indices(r: Reader) -> tuple:
    n = r.u32()
    if n > 4096:
        raise DecodeError("index list too long")
    return tuple(r.u64() for _ in range(n))


@dataclass(frozen=True)
class CrsPost:
    crs: Crs
    sig: Signature
    kind = "crs"
    tag = 1

    def body(self, w: Writer):
        w.blob(self.crs.to_bytes()).raw(self.sig.to_bytes())

    @classmethod
    def parse(cls, r: Reader):
        return cls(Crs.from_bytes(r.blob(), G), Signature.read(r))


@dataclass(frozen=True)
class GenesisToken:
    vk_s: Element
    vk_r: Element
    sig_s: Signature
    kind = "genesis"
    tag = 2

    def body(self, w: Writer):
        w.element(self.vk_s).element(self.vk_r).raw(self.sig_s.to_bytes())

    @classmethod
    def parse(cls, r: Reader):
        return cls(r.element(G), r.element(G), Signature.read(r))


@dataclass(frozen=True)
class LiveToken:
    vk_s: Element
    vk_r: Element
    sig_s: Signature
    bucket: tuple
    proof: OrProof
    kind = "live"
    tag = 3

    def body(self, w: Writer):
        w.element(self.vk_s).element(self.vk_r).raw(self.sig_s.to_bytes())
        _put_indices(w, self.bucket)
        w.raw(self.proof.to_bytes())

    @classmethod
    def parse(cls, r: Reader):
        return cls(r.element(G), r.element(G), Signature.read(r), _get_indices(r), OrProof.read(r, G))


@dataclass(frozen=True)
class BurnRecord:
    ref: int
    beta: BurningFactor
    sig_r: Signature
    kind = "burn"
    tag = 4

    def body(self, w: Writer):
        w.u64(self.ref).element(self.beta.c).raw(self.sig_r.to_bytes())

    @classmethod
    def parse(cls, r: Reader):
        return cls(r.u64(), BurningFactor(r.element(G)), Signature.read(r))


@dataclass(frozen=True)
class MinterKey:
    """Registry entry posted by the central bank.

    ``chains`` lists the genesis-token indices whose payment chains this key
    mints for; ``replaces`` retires an earlier key and hands over its chains.
    """

    vk_t: Element
    quota: int
    chains: tuple = ()
    replaces: bytes = b""
    kind = "minter-key"
    tag = 5

    def body(self, w: Writer):
        w.element(self.vk_t).u32(self.quota)
        _put_indices(w, self.chains)
        w.blob(self.replaces)

    @classmethod
    def parse(cls, r: Reader):
        return cls(r.element(G), r.u32(), _get_indices(r), r.blob(64))


@dataclass(frozen=True)
class MinterAgreement:
    """``grantor`` lets ``grantee`` mint tokens for the grantor's chains."""

    grantor: Element
    grantee: Element
    sig: Signature
    kind = "agreement"
    tag = 6

    def body(self, w: Writer):
        w.element(self.grantor).element(self.grantee).raw(self.sig.to_bytes())

    @classmethod
    def parse(cls, r: Reader):
        return cls(r.element(G), r.element(G), Signature.read(r))


@dataclass(frozen=True)
class MintedToken:
    vk_s: Element
    vk_r: Element
    sig_s: Signature
    vk_t: Element
    sig_t: Signature
    kind = "minted"
    tag = 7

    def body(self, w: Writer):
        w.element(self.vk_s).element(self.vk_r).raw(self.sig_s.to_bytes())
        w.element(self.vk_t).raw(self.sig_t.to_bytes())

    @classmethod
    def parse(cls, r: Reader):
        return cls(r.element(G), r.element(G), Signature.read(r), r.element(G), Signature.read(r))


@dataclass(frozen=True)
class RescueProof:
    ref: int
    bucket: tuple
    proof: OrProof
    kind = "rescue"
    tag = 8

    def body(self, w: Writer):
        w.u64(self.ref)
        _put_indices(w, self.bucket)
        w.raw(self.proof.to_bytes())

    @classmethod
    def parse(cls, r: Reader):
        return cls(r.u64(), _get_indices(r), OrProof.read(r, G))


@dataclass(frozen=True)
class RescueOpening:
    """Privacy-forfeiting rescue: reveal the opening of one burning factor."""

    ref: int
    burn: int
    r: int
    kind = "opening"
    tag = 9

    def body(self, w: Writer):
        w.u64(self.ref).u64(self.burn).scalar(G, self.r)

    @classmethod
    def parse(cls, r: Reader):
        return cls(r.u64(), r.u64(), r.scalar(G))


@dataclass(frozen=True)
class RawPayload:
    """Bytes that do not decode as any known payload."""

    data: bytes
    kind = "raw"
    tag = 0

    def to_bytes(self) -> bytes:
        return self.data


PAYLOAD_TYPES = {cls.tag: cls for cls in (CrsPost, GenesisToken, LiveToken, BurnRecord, MinterKey,
                                           MinterAgreement, MintedToken, RescueProof, RescueOpening)}
KIND_TAGS = {cls.kind: tag for tag, cls in PAYLOAD_TYPES.items()}
TOKEN_TYPES = (GenesisToken, LiveToken, MintedToken)


def encode_payload(p) -> bytes:
    if isinstance(p, RawPayload):
        return p.data
    w = Writer().u8(p.tag)
    p.body(w)
    return w.getvalue()


def decode_payload(data: bytes, strict: bool = True):
    """Decode canonical payload bytes; non-strict mode wraps garbage in RawPayload."""
    try:
        r = Reader(data)
        cls = PAYLOAD_TYPES.get(r.u8())
        if cls is None:
            raise DecodeError("unknown payload tag")
        p = cls.parse(r)
        r.done()
        return p
    except DecodeError:
        if strict:
            raise
        return RawPayload(bytes(data))


# -- board -------------------------------------------------------------------


@dataclass(frozen=True)
class Entry:
    index: int
    payload: object
    poster: str


class BulletinBoard:
    """Append-only, totally ordered log; posts are fanned out in index order."""

    def __init__(self, banks: Iterable[str], central_bank: str = CENTRAL_BANK):
        self.authorized = frozenset(banks) | {central_bank}
        self._entries: list[Entry] = []
        self._subscribers: list[Callable[[Entry], None]] = []
        self._lock = threading.RLock()

    def subscribe(self, sink: Callable[[Entry], None], replay: bool = False) -> None:
        with self._lock:
            self._subscribers.append(sink)
            if replay:
                for e in self._entries:
                    sink(e)

    def post(self, payload, poster: str) -> int:
        if poster not in self.authorized:
            raise UnauthorizedPoster("unauthorized poster")
        with self._lock:
            entry = Entry(len(self._entries), payload, poster)
            self._entries.append(entry)
            for sink in self._subscribers:
                sink(entry)
            return entry.index

    def read(self) -> tuple:
        with self._lock:
            return tuple(self._entries)

    def __len__(self):
        return len(self._entries)


# -- validity ----------------------------------------------------------------

VALID, BURN, INFO, IGNORED = "valid", "burn", "info", "ignored"


@dataclass
class ValidSet:
    """One party's deterministic view of the valid tokens on the board."""

    vk_cb: frozenset
    crs: Crs | None = None
    oracle: object = None
    valid: dict = field(default_factory=dict)          # index -> token payload
    sender_keys: set = field(default_factory=set)      # vk^S bytes of valid tokens
    burns: dict = field(default_factory=dict)          # burn index -> BurnRecord
    burnt_refs: dict = field(default_factory=dict)     # token index -> burn index
    status: dict = field(default_factory=dict)         # index -> (status, reason)
    next_index: int = 0
    genesis_count: int = 0
    redeemed: int = 0

    def __post_init__(self):
        self.vk_cb = frozenset(k.to_bytes() if isinstance(k, Element) else bytes(k) for k in self.vk_cb)
        if self.oracle is None and self.crs is not None:
            self.oracle = HashOracle(self.crs.group)

    # checks ---------------------------------------------------------------

    def check(self, token, vk_cb=None) -> str | None:
        """Return ``None`` if ``token`` is valid against this view, else a reason."""
        vk_cb = self.vk_cb if vk_cb is None else vk_cb
        if isinstance(token, GenesisToken):
            if token.vk_s.to_bytes() not in vk_cb:
                return "unknown central bank key"
            if token.vk_s.to_bytes() in self.sender_keys:
                return "sender key reused"
            if not verify_sig(token.vk_s, token.vk_r.to_bytes(), token.sig_s):
                return "bad sender signature"
            return None
        if isinstance(token, LiveToken):
            if token.vk_s.to_bytes() in self.sender_keys:
                return "sender key reused"
            if not verify_sig(token.vk_s, token.vk_r.to_bytes(), token.sig_s):
                return "bad sender signature"
            reason = self.check_bucket(token.bucket)
            if reason:
                return reason
            if self.crs is None:
                return "no crs"
            stmt = OrStatement([self.burns[i].beta for i in token.bucket], token.vk_s)
            if not verify_proof(self.crs, stmt, token.proof, self.oracle):
                return "proof rejected"
            return None
        return "not a token"

    def check_bucket(self, bucket) -> str | None:
        if not bucket:
            return "empty bucket"
        if len(set(bucket)) != len(bucket):
            return "duplicate bucket index"
        if any(i not in self.burns for i in bucket):
            return "bucket index not burnt"
        return None

    def check_burn(self, rec: BurnRecord) -> str | None:
        tok = self.valid.get(rec.ref)
        if tok is None:
            return "no referent"
        if rec.ref in self.burnt_refs:
            return "already burnt"
        if not verify_sig(tok.vk_r, burn_message(tok.vk_s, rec.beta), rec.sig_r):
            return "bad receiver signature"
        return None

    # ingestion ------------------------------------------------------------

    def ingest(self, entry: Entry) -> "ValidSet":
        if entry.index != self.next_index:
            raise OrderingError("ordering violated")
        self.next_index += 1
        p = entry.payload
        if isinstance(p, BurnRecord):
            reason = self.check_burn(p)
            if reason is None:
                self.burns[entry.index] = p
                self.burnt_refs[p.ref] = entry.index
                self.status[entry.index] = (BURN, "")
            else:
                self.status[entry.index] = (IGNORED, reason)
        elif isinstance(p, (GenesisToken, LiveToken)):
            reason = self.check(p)
            if reason is None:
                self._accept(entry.index, p)
            else:
                self.status[entry.index] = (IGNORED, reason)
        elif isinstance(p, CrsPost):
            self.status[entry.index] = (INFO, "crs")
        else:
            self.status[entry.index] = (IGNORED, "unsupported payload")
        return self

    def _accept(self, index: int, token) -> None:
        self.valid[index] = token
        self.sender_keys.add(token.vk_s.to_bytes())
        self.status[index] = (VALID, "")
        if isinstance(token, GenesisToken):
            self.genesis_count += 1
        else:
            self.redeemed += 1

    def extend(self, entries: Iterable[Entry]) -> "ValidSet":
        for e in entries:
            self.ingest(e)
        return self

    # views ----------------------------------------------------------------

    def is_live(self, index: int) -> bool:
        return index in self.valid and index not in self.burnt_refs

    def live_indices(self) -> list[int]:
        return [i for i in sorted(self.valid) if self.is_live(i)]

    def burnt_indices(self) -> list[int]:
        return sorted(self.burnt_refs)

    @property
    def live_count(self) -> int:
        return len(self.live_indices())

    @property
    def in_flight(self) -> int:
        """Certified burns not yet matched by a redeeming token."""
        return len(self.burns) - self.redeemed

    @property
    def balance(self) -> int:
        return self.live_count + self.in_flight

    def copy(self) -> "ValidSet":
        dup = object.__new__(type(self))
        dup.__dict__.update({k: (v.copy() if isinstance(v, (dict, set)) else v)
                             for k, v in self.__dict__.items()})
        return dup

    def to_bytes(self) -> bytes:
        w = Writer().u64(self.next_index)
        for i in range(self.next_index):
            st, reason = self.status[i]
            w.blob(st.encode()).blob(reason.encode())
        for ref, b in sorted(self.burnt_refs.items()):
            w.u64(ref).u64(b)
        return w.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def is_valid(vk_cb, vs: ValidSet, token) -> bool:
    keys = frozenset(k.to_bytes() if isinstance(k, Element) else bytes(k) for k in vk_cb)
    return vs.check(token, keys) is None


def ingest(vs: ValidSet, entry: Entry, vk_cb=None) -> ValidSet:
    if vk_cb is not None:
        keys = frozenset(k.to_bytes() if isinstance(k, Element) else bytes(k) for k in vk_cb)
        if keys != vs.vk_cb:
            raise ValueError("valid set was built for a different VK_CB")
    return vs.ingest(entry)


def get_burnt(vs: ValidSet) -> list:
    """Certified burns as ``(token index, BurnRecord)``, in burn-record order."""
    return [(rec.ref, rec) for _, rec in sorted(vs.burns.items())]


def live_view(vs: ValidSet) -> list:
    return [vs.valid[i] for i in vs.live_indices()]


def burnt_view(vs: ValidSet) -> list:
    return [vs.valid[i] for i in vs.burnt_indices()]


def find_crs(entries: Iterable[Entry], vk_crs) -> Crs | None:
    """First CRS post whose signature verifies under ``vk_crs``."""
    for e in entries:
        p = e.payload
        if isinstance(p, CrsPost) and verify_sig(vk_crs, p.crs.to_bytes(), p.sig):
            return p.crs
    return None
