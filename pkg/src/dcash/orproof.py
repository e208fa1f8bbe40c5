"""1-out-of-n proof that a public key opens one commitment in a bucket.

Statement: burning factors ``beta_1..beta_n`` and a verification key ``vk``.
Witness: ``(r, i)`` with ``Com(vk; r) == beta_i``, ``i`` counted from 1.

Since ``vk`` is public, each branch is a Schnorr proof of knowledge of the
``h``-discrete log of ``X_j = beta_j / g^H(vk)``. Branches are composed by
challenge sharing (``sum c_j == c``) and made non-interactive with
Fiat-Shamir over the CRS label, the full statement and all first messages.
Proof size is linear in ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .crypto import BurningFactor, PublicParams, default_rng, derive_params, hash_to_scalar, verify_opening
from .groups import DEFAULT_GROUP, DecodeError, Element
from .oracle import HashOracle, OracleError, ProgrammableOracle
from .wire import Reader, Writer

TAG_CRS = b"dcash/v1/crs/"


class InvalidWitness(ValueError):
    pass


@dataclass(frozen=True)
class Crs:
    params: PublicParams
    label: bytes

    @property
    def group(self):
        return self.params.group

    def to_bytes(self) -> bytes:
        return Writer().blob(self.group.name.encode()).blob(self.label).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes, group=DEFAULT_GROUP) -> "Crs":
        r = Reader(data)
        name = r.blob(64)
        label = r.blob()
        r.done()
        if name != group.name.encode():
            raise DecodeError("crs for a different group")
        return crs_gen(label, group)


def crs_gen(seed: bytes, group=DEFAULT_GROUP) -> Crs:
    return Crs(derive_params(TAG_CRS + bytes(seed), group), bytes(seed))


@dataclass(frozen=True)
class OrStatement:
    betas: tuple
    vk: bytes

    def __init__(self, betas: Sequence[BurningFactor], vk):
        if isinstance(vk, Element):
            vk = vk.to_bytes()
        object.__setattr__(self, "betas", tuple(betas))
        object.__setattr__(self, "vk", bytes(vk))

    def to_bytes(self) -> bytes:
        w = Writer().u32(len(self.betas))
        for b in self.betas:
            w.element(b.c)
        return w.blob(self.vk).getvalue()


@dataclass(frozen=True)
class OrWitness:
    r: int
    i: int  # 1-based position of the opened commitment


@dataclass(frozen=True)
class OrProof:
    branches: tuple  # ((a_j, c_j, z_j), ...)

    @property
    def n(self) -> int:
        return len(self.branches)

    def challenges(self) -> list[int]:
        return [c for _, c, _ in self.branches]

    def to_bytes(self) -> bytes:
        w = Writer().u32(self.n)
        for a, c, z in self.branches:
            g = a.group
            w.element(a).scalar(g, c).scalar(g, z)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader, group=DEFAULT_GROUP) -> "OrProof":
        n = r.u32()
        if n == 0 or n > 4096:
            raise DecodeError("bad branch count")
        return cls(tuple((r.element(group), r.scalar(group), r.scalar(group)) for _ in range(n)))

    @classmethod
    def from_bytes(cls, data: bytes, group=DEFAULT_GROUP) -> "OrProof":
        r = Reader(data)
        proof = cls.read(r, group)
        r.done()
        return proof


def _bases(crs: Crs, stmt: OrStatement) -> list[Element]:
    p = crs.params
    gm = p.g ** hash_to_scalar(stmt.vk, p.group)
    return [b.c / gm for b in stmt.betas]


def fs_input(crs: Crs, stmt: OrStatement, firsts: Sequence[Element]) -> bytes:
    w = Writer().blob(crs.label).element(crs.params.h).raw(stmt.to_bytes())
    for a in firsts:
        w.element(a)
    return w.getvalue()


def _oracle(crs: Crs, oracle):
    return oracle if oracle is not None else HashOracle(crs.group)


def prove(crs: Crs, stmt: OrStatement, wit: OrWitness, rng=None, oracle=None) -> OrProof:
    n = len(stmt.betas)
    k = wit.i - 1
    if not 0 <= k < n or not verify_opening(crs.params, stmt.betas[k], stmt.vk, wit.r):
        raise InvalidWitness("invalid witness")
    rng = rng or default_rng()
    group, h = crs.group, crs.params.h
    q = group.order
    X = _bases(crs, stmt)

    firsts: list[Element] = [None] * n
    cs = [0] * n
    zs = [0] * n
    for j in range(n):
        if j == k:
            continue
        cs[j] = group.random_scalar(rng)
        zs[j] = group.random_scalar(rng)
        firsts[j] = h ** zs[j] / X[j] ** cs[j]
    w = group.random_scalar(rng)
    firsts[k] = h ** w

    c = _oracle(crs, oracle)(fs_input(crs, stmt, firsts))
    cs[k] = (c - sum(cs)) % q
    zs[k] = (w + cs[k] * wit.r) % q
    return OrProof(tuple(zip(firsts, cs, zs)))


def verify(crs: Crs, stmt: OrStatement, proof: OrProof, oracle=None) -> bool:
    n = len(stmt.betas)
    if n == 0 or proof.n != n:
        return False
    group, h = crs.group, crs.params.h
    if any(a.group is not group for a, _, _ in proof.branches):
        return False
    X = _bases(crs, stmt)
    for (a, c, z), x in zip(proof.branches, X):
        if h ** z != a * x ** c:
            return False
    firsts = [a for a, _, _ in proof.branches]
    c = _oracle(crs, oracle)(fs_input(crs, stmt, firsts))
    return sum(proof.challenges()) % group.order == c


def simulate(crs: Crs, stmt: OrStatement, oracle, rng=None) -> OrProof:
    """Witness-free proof; programs the oracle at the Fiat-Shamir point."""
    if oracle is None or not getattr(oracle, "programmable", False):
        raise OracleError("unprogrammable oracle")
    rng = rng or default_rng()
    group, h = crs.group, crs.params.h
    X = _bases(crs, stmt)
    branches = []
    for x in X:
        c, z = group.random_scalar(rng), group.random_scalar(rng)
        branches.append((h ** z / x ** c, c, z))
    total = sum(c for _, c, _ in branches) % group.order
    oracle.program(fs_input(crs, stmt, [a for a, _, _ in branches]), total)
    return OrProof(tuple(branches))


def extract(crs: Crs, stmt: OrStatement, prover: Callable[[object], OrProof], rng=None):
    """Special-soundness extractor by rewinding.

    ``prover(oracle)`` must be replayable: same internal coins on every call.
    The prover is run twice with oracles that disagree only at the
    Fiat-Shamir point of the first run. Returns ``(r, i)`` or ``None``.
    """
    rng = rng or default_rng()
    group = crs.group
    o1 = ProgrammableOracle(group)
    p1 = prover(o1)
    if not verify(crs, stmt, p1, o1):
        return None
    point = fs_input(crs, stmt, [a for a, _, _ in p1.branches])
    first = o1(point)
    other = (first + group.random_scalar(rng, nonzero=True)) % group.order
    o2 = ProgrammableOracle(group)
    o2.program(point, other)
    p2 = prover(o2)
    if not verify(crs, stmt, p2, o2):
        return None
    for j, ((a1, c1, z1), (a2, c2, z2)) in enumerate(zip(p1.branches, p2.branches)):
        if a1 != a2:
            return None
        if c1 != c2:
            r = (z1 - z2) * pow(c1 - c2, -1, group.order) % group.order
            return r, j + 1
    return None
