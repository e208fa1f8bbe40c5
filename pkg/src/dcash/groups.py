"""Prime-order groups used by the protocol.

Two implementations share one interface:

``Ed25519Group``
    the prime-order subgroup of edwards25519, backed by libsodium. This is
    the production group: 32-byte compressed encodings, ~128-bit security.

``SchnorrGroup``
    an order-q subgroup of Z_p^*. Only used with tiny parameters so tests can
    brute-force discrete logarithms.

Group elements are written multiplicatively (``a * b``, ``a ** k``) to match
the usual notation for commitments and Sigma protocols. Scalars are plain
Python ints reduced modulo ``group.order``.
"""

from __future__ import annotations

import hashlib

from nacl import bindings as _na


class DecodeError(ValueError):
    """Raised when bytes are not the canonical encoding of a value."""


class Element:
    __slots__ = ("group", "raw")

    def __init__(self, group, raw):
        self.group = group
        self.raw = raw

    def __mul__(self, other: "Element") -> "Element":
        if other.group is not self.group:
            raise TypeError("elements from different groups")
        return Element(self.group, self.group._op(self.raw, other.raw))

    def __truediv__(self, other: "Element") -> "Element":
        return self * other.inverse()

    def __pow__(self, k: int) -> "Element":
        return Element(self.group, self.group._exp(self.raw, k % self.group.order))

    def inverse(self) -> "Element":
        return Element(self.group, self.group._inv(self.raw))

    def is_identity(self) -> bool:
        return self.raw == self.group._identity

    def to_bytes(self) -> bytes:
        return self.group._encode(self.raw)

    def __eq__(self, other):
        return isinstance(other, Element) and other.group is self.group and other.raw == self.raw

    def __hash__(self):
        return hash((self.group.name, self.raw))

    def __repr__(self):
        return f"Element({self.group.name}, {self.to_bytes().hex()[:16]}...)"


class _Group:
    name: str
    order: int
    element_size: int
    scalar_size: int

    def generator(self) -> Element:
        return Element(self, self._gen)

    def identity(self) -> Element:
        return Element(self, self._identity)

    def decode(self, data: bytes) -> Element:
        return Element(self, self._decode(bytes(data)))

    def encode_scalar(self, k: int) -> bytes:
        return (k % self.order).to_bytes(self.scalar_size, "little")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.scalar_size:
            raise DecodeError("bad scalar length")
        k = int.from_bytes(data, "little")
        if k >= self.order:
            raise DecodeError("scalar not reduced")
        return k

    def random_scalar(self, rng, nonzero: bool = False) -> int:
        if nonzero:
            return rng.randrange(1, self.order)
        return rng.randrange(self.order)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class Ed25519Group(_Group):
    name = "ed25519"
    order = 2**252 + 27742317777372353535851937790883648493
    element_size = 32
    scalar_size = 32

    _identity = (1).to_bytes(32, "little")
    _gen = bytes.fromhex("58" + "66" * 31)

    def _op(self, a: bytes, b: bytes) -> bytes:
        return _na.crypto_core_ed25519_add(a, b)

    def _inv(self, a: bytes) -> bytes:
        return _na.crypto_core_ed25519_sub(self._identity, a)

    def _exp(self, a: bytes, k: int) -> bytes:
        # libsodium refuses identity inputs and outputs; in a prime-order
        # group those only occur for k == 0 or a == 1.
        if k == 0 or a == self._identity:
            return self._identity
        kb = k.to_bytes(32, "little")
        if a == self._gen:
            return _na.crypto_scalarmult_ed25519_base_noclamp(kb)
        return _na.crypto_scalarmult_ed25519_noclamp(kb, a)

    def _encode(self, a: bytes) -> bytes:
        return a

    def _decode(self, data: bytes) -> bytes:
        if len(data) != 32:
            raise DecodeError("bad element length")
        if data == self._identity:
            return data
        # checks canonical encoding, curve membership and prime-order subgroup
        if not _na.crypto_core_ed25519_is_valid_point(data):
            raise DecodeError("not a canonical prime-order point")
        return data

    def hash_to_element(self, data: bytes) -> Element:
        ctr = 0
        while True:
            digest = hashlib.sha512(b"dcash/h2g/ed25519" + ctr.to_bytes(4, "big") + data).digest()
            pt = _na.crypto_core_ed25519_from_uniform(digest[:32])
            if pt != self._identity:
                return Element(self, pt)
            ctr += 1


class SchnorrGroup(_Group):
    """Order-``q`` subgroup of Z_p^* with ``p = k*q + 1``."""

    def __init__(self, p: int, q: int, name: str | None = None):
        if (p - 1) % q:
            raise ValueError("q must divide p - 1")
        self.p = p
        self.order = q
        self.cofactor = (p - 1) // q
        self.name = name or f"schnorr-{p}-{q}"
        self.element_size = (p.bit_length() + 7) // 8
        self.scalar_size = (q.bit_length() + 7) // 8
        self._identity = 1
        a = 2
        while pow(a, self.cofactor, p) == 1:
            a += 1
        self._gen = pow(a, self.cofactor, p)

    def _op(self, a: int, b: int) -> int:
        return a * b % self.p

    def _inv(self, a: int) -> int:
        return pow(a, -1, self.p)

    def _exp(self, a: int, k: int) -> int:
        return pow(a, k, self.p)

    def _encode(self, a: int) -> bytes:
        return a.to_bytes(self.element_size, "big")

    def _decode(self, data: bytes) -> int:
        if len(data) != self.element_size:
            raise DecodeError("bad element length")
        x = int.from_bytes(data, "big")
        if not 1 <= x < self.p or pow(x, self.order, self.p) != 1:
            raise DecodeError("not in the prime-order subgroup")
        return x

    def hash_to_element(self, data: bytes) -> Element:
        ctr = 0
        while True:
            digest = hashlib.sha512(b"dcash/h2g/" + self.name.encode() + ctr.to_bytes(4, "big") + data).digest()
            x = pow(int.from_bytes(digest, "big") % self.p, self.cofactor, self.p)
            if x not in (0, 1):
                return Element(self, x)
            ctr += 1

    def dlog(self, base: Element, target: Element) -> int:
        """Brute-force discrete log; only feasible for toy orders."""
        if self.order > 1 << 24:
            raise ValueError("group too large for brute force")
        acc, b = 1, base.raw
        for k in range(self.order):
            if acc == target.raw:
                return k
            acc = acc * b % self.p
        raise ValueError("no discrete log")


ED25519 = Ed25519Group()

# order 65521 (< 2^16), p = 10*q + 1
TOY = SchnorrGroup(655211, 65521, name="toy-65521")

DEFAULT_GROUP = ED25519
