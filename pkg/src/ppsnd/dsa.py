"""Finite-field DSA (FIPS 186) on gmpy2 with RFC 6979 deterministic nonces.

Used for the baseline protocol's long-term signatures, where the key size is the
modulus length L. Domain parameters are derived deterministically from (L, N) and
cached per process, so every world agrees on them without any I/O.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from functools import lru_cache

import gmpy2
from ecdsa.rfc6979 import generate_k

# (L, N) pairs paired with 80/112/128-bit security
SIZES = {1024: 160, 2048: 224, 3072: 256}


@dataclass(frozen=True)
class DomainParameters:
    p: int
    q: int
    g: int

    @property
    def L(self) -> int:
        return self.p.bit_length()

    @property
    def N(self) -> int:
        return self.q.bit_length()


def _random_prime(rng: random.Random, bits: int) -> int:
    while True:
        c = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if gmpy2.is_prime(c, 40):
            return c


@lru_cache(maxsize=None)
def domain_parameters(L: int, N: int | None = None) -> DomainParameters:
    """Deterministic (p, q, g) with |p| = L, |q| = N, q | p - 1 and g of order q."""
    N = SIZES.get(L) if N is None else N
    if N is None or not 0 < N < L:
        raise ValueError(f"unsupported DSA size L={L}, N={N}")
    rng = random.Random(f"ppsnd/dsa-domain/{L}/{N}")
    q = _random_prime(rng, N)
    two_q = 2 * q
    lo, hi = 1 << (L - 1), 1 << L
    while True:
        m = rng.randrange(lo // two_q + 1, hi // two_q)
        p = m * two_q + 1
        if lo <= p < hi and gmpy2.is_prime(p, 40):
            break
    e = (p - 1) // q
    h = 2
    while (g := int(gmpy2.powmod(h, e, p))) == 1:
        h += 1
    return DomainParameters(p, q, g)


def _digest_int(digest: bytes, q: int) -> int:
    # leftmost min(N, outlen) bits of the hash
    h = int.from_bytes(digest, "big")
    excess = len(digest) * 8 - q.bit_length()
    return h >> excess if excess > 0 else h


@dataclass(frozen=True)
class DSAKey:
    params: DomainParameters
    x: int = field(repr=False)

    @classmethod
    def generate(cls, rng, L: int) -> "DSAKey":
        params = domain_parameters(L)
        return cls(params, rng.randrange(1, params.q))

    @property
    def y(self) -> int:
        return int(gmpy2.powmod(self.params.g, self.x, self.params.p))

    def public_bytes(self) -> bytes:
        return self.y.to_bytes((self.params.L + 7) // 8, "big")

    def sign(self, message: bytes) -> bytes:
        p, q, g = self.params.p, self.params.q, self.params.g
        digest = hashlib.sha256(message).digest()
        h = _digest_int(digest, q)
        retry = 0
        while True:
            k = generate_k(q, self.x, hashlib.sha256, digest, retry_gen=retry)
            r = int(gmpy2.powmod(g, k, p)) % q
            s = int(gmpy2.invert(k, q) * (h + self.x * r)) % q
            if r and s:
                break
            retry += 1
        width = (q.bit_length() + 7) // 8
        return r.to_bytes(width, "big") + s.to_bytes(width, "big")


def verify(params: DomainParameters, public: bytes, message: bytes, signature: bytes) -> bool:
    p, q, g = params.p, params.q, params.g
    width = (q.bit_length() + 7) // 8
    if len(public) != (params.L + 7) // 8 or len(signature) != 2 * width:
        return False
    y = int.from_bytes(public, "big")
    if not 1 < y < p - 1:
        return False
    r = int.from_bytes(signature[:width], "big")
    s = int.from_bytes(signature[width:], "big")
    if not (0 < r < q and 0 < s < q):
        return False
    h = _digest_int(hashlib.sha256(message).digest(), q)
    w = gmpy2.invert(s, q)
    u1, u2 = h * w % q, r * w % q
    v = gmpy2.powmod(g, u1, p) * gmpy2.powmod(y, u2, p) % p % q
    return int(v) == r
