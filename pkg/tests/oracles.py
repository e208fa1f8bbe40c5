"""Independent reference computations for the tests.

Pure-Python edwards25519 arithmetic (no libsodium) plus hashlib-only
recomputations of every hash the package uses. Nothing here imports the
package's group or crypto code, so agreement is evidence rather than an echo.
"""

import hashlib

P = 2**255 - 19
L = 2**252 + 27742317777372353535851937790883648493
D = -121665 * pow(121666, -1, P) % P
SQRT_M1 = pow(2, (P - 1) // 4, P)

# extended coordinates (X, Y, Z, T)
IDENT = (0, 1, 1, 0)


def _add(p1, p2):
    X1, Y1, Z1, T1 = p1
    X2, Y2, Z2, T2 = p2
    A = (Y1 - X1) * (Y2 - X2) % P
    B = (Y1 + X1) * (Y2 + X2) % P
    C = 2 * T1 * T2 * D % P
    Dd = 2 * Z1 * Z2 % P
    E, F, G, H = B - A, Dd - C, Dd + C, B + A
    return (E * F % P, G * H % P, F * G % P, E * H % P)


def mul(k, pt):
    acc = IDENT
    while k:
        if k & 1:
            acc = _add(acc, pt)
        pt = _add(pt, pt)
        k >>= 1
    return acc


def neg(pt):
    X, Y, Z, T = pt
    return (-X % P, Y, Z, -T % P)


def eq(p1, p2):
    X1, Y1, Z1, _ = p1
    X2, Y2, Z2, _ = p2
    return (X1 * Z2 - X2 * Z1) % P == 0 and (Y1 * Z2 - Y2 * Z1) % P == 0


def encode(pt) -> bytes:
    X, Y, Z, _ = pt
    zi = pow(Z, -1, P)
    x, y = X * zi % P, Y * zi % P
    return (y | ((x & 1) << 255)).to_bytes(32, "little")


def decode(b: bytes):
    n = int.from_bytes(b, "little")
    y, sign = n & ((1 << 255) - 1), n >> 255
    if y >= P:
        raise ValueError("non-canonical y")
    x2 = (y * y - 1) * pow(D * y * y + 1, -1, P) % P
    x = pow(x2, (P + 3) // 8, P)
    if (x * x - x2) % P:
        x = x * SQRT_M1 % P
    if (x * x - x2) % P:
        raise ValueError("not on curve")
    if x == 0 and sign:
        raise ValueError("non-canonical zero x")
    if x & 1 != sign:
        x = P - x
    return (x, y, 1, x * y % P)


def in_prime_subgroup(b: bytes) -> bool:
    try:
        pt = decode(b)
    except ValueError:
        return False
    return eq(mul(L, pt), IDENT)


BASE = decode(bytes.fromhex("58" + "66" * 31))


def base_mul(k) -> bytes:
    return encode(mul(k % L, BASE))


# -- hashes, recomputed from their byte layouts --------------------------------

def h_scalar(tag: bytes, data: bytes) -> int:
    return int.from_bytes(hashlib.sha512(tag + data).digest(), "big") % L


def hash_to_scalar(data: bytes) -> int:
    return h_scalar(b"dcash/v1/scalar\x00", data)


def sig_verify(vk: bytes, msg: bytes, sig: bytes) -> bool:
    c = int.from_bytes(sig[:32], "little")
    s = int.from_bytes(sig[32:], "little")
    if c >= L or s >= L:
        return False
    V = decode(vk)
    R = _add(mul(s, BASE), neg(mul(c, V)))
    data = encode(R) + vk + len(msg).to_bytes(4, "big") + msg
    return h_scalar(b"dcash/v1/sig\x00", data) == c


def commit(h: bytes, msg: bytes, r: int) -> bytes:
    return encode(_add(mul(hash_to_scalar(msg), BASE), mul(r % L, decode(h))))


def fs_challenge(label: bytes, h: bytes, betas, vk: bytes, firsts) -> int:
    data = len(label).to_bytes(4, "big") + label + h
    data += len(betas).to_bytes(4, "big") + b"".join(betas) + len(vk).to_bytes(4, "big") + vk
    data += b"".join(firsts)
    return h_scalar(b"dcash/v1/fiat-shamir\x00", data)


def or_verify(label: bytes, h: bytes, betas, vk: bytes, proof: bytes) -> bool:
    """Verify an OR proof from raw bytes: u32 n || (a || c || z) * n."""
    n = int.from_bytes(proof[:4], "big")
    if n != len(betas) or len(proof) != 4 + 96 * n:
        return False
    H = decode(h)
    gm = mul(hash_to_scalar(vk), BASE)
    firsts, total = [], 0
    for j in range(n):
        chunk = proof[4 + 96 * j: 4 + 96 * (j + 1)]
        a, c, z = chunk[:32], int.from_bytes(chunk[32:64], "little"), int.from_bytes(chunk[64:], "little")
        X = _add(decode(betas[j]), neg(gm))
        if not eq(mul(z, H), _add(decode(a), mul(c, X))):
            return False
        firsts.append(a)
        total += c
    return total % L == fs_challenge(label, h, betas, vk, firsts)


# -- toy group reference --------------------------------------------------------

TOY_P, TOY_Q = 655211, 65521


def toy_dlog(base: int, target: int) -> int:
    acc = 1
    for k in range(TOY_Q):
        if acc == target:
            return k
        acc = acc * base % TOY_P
    raise ValueError("no log")
