"""Signatures, commitments and blind signatures over a prime-order group.

* Schnorr signatures in challenge-response form ``(c, s)``:
  ``c = H(g^s * vk^-c || vk || msg)``.
* Pedersen commitments to byte strings: ``Com(m; r) = g^H(m) * h^r``.
* Blind Schnorr signing, one session in flight per signer key.

Every hash use has its own ASCII tag.
"""

from __future__ import annotations

import hashlib
import random
import secrets
from dataclasses import dataclass, field

from .groups import DEFAULT_GROUP, DecodeError, Element
from .wire import Reader, Writer

TAG_SCALAR = b"dcash/v1/scalar\x00"
TAG_H = b"dcash/v1/h\x00"
TAG_SIG = b"dcash/v1/sig\x00"


class SessionError(RuntimeError):
    pass


def default_rng():
    return secrets.SystemRandom()


def _hash_scalar(tag: bytes, data: bytes, group) -> int:
    return int.from_bytes(hashlib.sha512(tag + data).digest(), "big") % group.order


def hash_to_scalar(data: bytes, group=DEFAULT_GROUP) -> int:
    """Map a byte string into Z_q (commitment message space)."""
    return _hash_scalar(TAG_SCALAR, bytes(data), group)


@dataclass(frozen=True)
class PublicParams:
    g: Element
    h: Element
    domain_tag: bytes

    @property
    def group(self):
        return self.g.group


def derive_params(domain_tag: bytes, group=DEFAULT_GROUP) -> PublicParams:
    """Deterministic commitment parameters; ``h`` comes from hash-to-group."""
    if not domain_tag:
        raise ValueError("domain tag must be non-empty")
    h = group.hash_to_element(TAG_H + domain_tag + b"h")
    return PublicParams(group.generator(), h, bytes(domain_tag))


# -- signatures --------------------------------------------------------------


@dataclass(frozen=True)
class KeyPair:
    vk: Element
    sk: int


def keygen(rng=None, group=DEFAULT_GROUP) -> KeyPair:
    rng = rng or default_rng()
    sk = group.random_scalar(rng, nonzero=True)
    return KeyPair(group.generator() ** sk, sk)


@dataclass(frozen=True)
class Signature:
    c: int
    s: int
    group: object = field(default=DEFAULT_GROUP, compare=False, repr=False)

    def to_bytes(self) -> bytes:
        return self.group.encode_scalar(self.c) + self.group.encode_scalar(self.s)

    @classmethod
    def from_bytes(cls, data: bytes, group=DEFAULT_GROUP) -> "Signature":
        n = group.scalar_size
        if len(data) != 2 * n:
            raise DecodeError("bad signature length")
        return cls(group.decode_scalar(data[:n]), group.decode_scalar(data[n:]), group)

    @classmethod
    def read(cls, r: Reader, group=DEFAULT_GROUP) -> "Signature":
        return cls.from_bytes(r.take(2 * group.scalar_size), group)


def _sig_challenge(R: Element, vk: Element, msg: bytes) -> int:
    data = Writer().element(R).element(vk).blob(msg).getvalue()
    return _hash_scalar(TAG_SIG, data, R.group)


def sign(sk: int, msg: bytes, rng=None, group=DEFAULT_GROUP) -> Signature:
    rng = rng or default_rng()
    g = group.generator()
    vk = g ** sk
    k = group.random_scalar(rng, nonzero=True)
    c = _sig_challenge(g ** k, vk, msg)
    return Signature(c, (k + c * sk) % group.order, group)


def verify_sig(vk, msg: bytes, sig, group=DEFAULT_GROUP) -> bool:
    """Accepts decoded objects or raw encodings; bad encodings verify false."""
    try:
        if not isinstance(vk, Element):
            vk = group.decode(vk)
        group = vk.group
        if not isinstance(sig, Signature):
            sig = Signature.from_bytes(sig, group)
    except DecodeError:
        return False
    if vk.is_identity():
        return False
    R = group.generator() ** sig.s / vk ** sig.c
    return _sig_challenge(R, vk, bytes(msg)) == sig.c


# -- commitments -------------------------------------------------------------


@dataclass(frozen=True)
class BurningFactor:
    c: Element

    def to_bytes(self) -> bytes:
        return self.c.to_bytes()


def commit(params: PublicParams, msg: bytes, r: int) -> BurningFactor:
    m = hash_to_scalar(msg, params.group)
    return BurningFactor(params.g ** m * params.h ** r)


def verify_opening(params: PublicParams, c: BurningFactor, msg: bytes, r: int) -> bool:
    return commit(params, msg, r).c == c.c


# -- blind signatures --------------------------------------------------------


@dataclass(frozen=True)
class SignerTranscript:
    """Everything the signer sees and sends in one session."""

    R: Element
    c: int
    s: int

    def to_bytes(self) -> bytes:
        g = self.R.group
        return Writer().element(self.R).scalar(g, self.c).scalar(g, self.s).getvalue()


class BlindSigner:
    """Signer side of blind Schnorr. Sessions are strictly sequential."""

    def __init__(self, keypair: KeyPair):
        self.keypair = keypair
        self.transcripts: list[SignerTranscript] = []
        self._nonce: int | None = None
        self._R: Element | None = None

    @property
    def vk(self) -> Element:
        return self.keypair.vk

    def open_session(self, rng) -> Element:
        if self._nonce is not None:
            raise SessionError("session not fresh")
        group = self.vk.group
        self._nonce = group.random_scalar(rng, nonzero=True)
        self._R = group.generator() ** self._nonce
        return self._R

    def answer(self, c: int) -> int:
        if self._nonce is None:
            raise SessionError("session not fresh")
        q = self.vk.group.order
        s = (self._nonce + c * self.keypair.sk) % q
        self.transcripts.append(SignerTranscript(self._R, c % q, s))
        self._nonce = self._R = None
        return s


class BlindRequest:
    """User side: blinds the signer's commitment and unblinds the response."""

    def __init__(self, vk: Element, msg: bytes, rng):
        self.vk = vk
        self.msg = bytes(msg)
        self.phase = "started"
        group = vk.group
        self._alpha = group.random_scalar(rng)
        self._beta = group.random_scalar(rng)
        self._R = None
        self._c = None
        self._c_prime = None

    def challenge(self, R: Element) -> int:
        if self.phase != "started":
            raise SessionError("challenge already issued")
        g = self.vk.group.generator()
        R_prime = R * g ** self._alpha * self.vk ** self._beta
        self._c_prime = _sig_challenge(R_prime, self.vk, self.msg)
        self._R = R
        self._c = (self._c_prime + self._beta) % self.vk.group.order
        self.phase = "challenged"
        return self._c

    def finish(self, s: int) -> Signature:
        if self.phase != "challenged":
            raise SessionError("no outstanding challenge")
        group = self.vk.group
        if group.generator() ** s != self._R * self.vk ** self._c:
            raise SessionError("signer response does not verify")
        self.phase = "finished"
        return Signature(self._c_prime, (s + self._alpha) % group.order, group)


def blind_session(signer: BlindSigner, msg: bytes, rng=None):
    """Run Blind -> BlindSign -> Unblind; returns ``(signature, transcript)``."""
    rng = rng or default_rng()
    req = BlindRequest(signer.vk, msg, rng)
    R = signer.open_session(rng)
    c = req.challenge(R)
    s = signer.answer(c)
    return req.finish(s), signer.transcripts[-1]


def seeded_rng(seed) -> random.Random:
    return random.Random(seed)
