"""Paillier cryptosystem with the additive-homomorphic operations used for
private distance computation.

The generator is fixed to ``g = n + 1`` so that ``g^m mod n^2`` collapses to
``1 + m*n``. Decryption uses the CRT split over ``p^2`` and ``q^2``; the
textbook ``lambda``/``mu`` values are kept on the private key as well.

All randomness comes from a caller-supplied :class:`random.Random`-like
object so runs are reproducible for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import gmpy2

from .encoding import Reader, int_to_bytes, pack_int
from .errors import ConfigurationError, DecryptionError, DomainError, KeyMismatchError

MIN_KEY_BITS = 64
PRIMALITY_ROUNDS = 64


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int
    g: int = field(init=False, repr=False)
    n_squared: int = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("modulus must be > 1")
        object.__setattr__(self, "g", self.n + 1)
        object.__setattr__(self, "n_squared", self.n * self.n)

    @property
    def bits(self) -> int:
        return self.n.bit_length()

    def to_bytes(self) -> bytes:
        return pack_int(self.n)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PaillierPublicKey":
        reader = Reader(data)
        key = cls(reader.int())
        reader.done()
        return key

    def encrypt(self, m: int, rng) -> "PaillierCiphertext":
        return encrypt(self, m, rng)

    def ciphertext(self, value: int) -> "PaillierCiphertext":
        """Bind a raw ciphertext value (e.g. decoded from the wire) to this key."""
        return PaillierCiphertext(value, self)


@dataclass(frozen=True)
class PaillierPrivateKey:
    public_key: PaillierPublicKey
    p: int = field(repr=False)
    q: int = field(repr=False)
    lam: int = field(init=False, repr=False)
    mu: int = field(init=False, repr=False)
    # CRT precomputation
    _hp: int = field(init=False, repr=False)
    _hq: int = field(init=False, repr=False)
    _q_inv_p: int = field(init=False, repr=False)

    def __post_init__(self):
        p, q, n = self.p, self.q, self.public_key.n
        if p * q != n or p == q:
            raise ConfigurationError("p and q must be distinct factors of n")
        lam = math.lcm(p - 1, q - 1)
        # L(g^lam mod n^2) = lam mod n when g = n + 1
        mu = pow(lam % n, -1, n)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "_hp", _h_function(p, n))
        object.__setattr__(self, "_hq", _h_function(q, n))
        object.__setattr__(self, "_q_inv_p", pow(q, -1, p))

    def decrypt(self, c: "PaillierCiphertext") -> int:
        return decrypt(self, c)


class PaillierKeyPair(NamedTuple):
    public_key: PaillierPublicKey
    private_key: PaillierPrivateKey

    @classmethod
    def from_primes(cls, p: int, q: int) -> "PaillierKeyPair":
        """Build a key pair from explicit primes (toy sizes allowed)."""
        if not (gmpy2.is_prime(p, PRIMALITY_ROUNDS) and gmpy2.is_prime(q, PRIMALITY_ROUNDS)):
            raise ConfigurationError("p and q must be prime")
        if math.gcd(p * q, (p - 1) * (q - 1)) != 1:
            raise ConfigurationError("gcd(pq, (p-1)(q-1)) must be 1")
        public = PaillierPublicKey(p * q)
        return cls(public, PaillierPrivateKey(public, p, q))


@dataclass(frozen=True)
class PaillierCiphertext:
    value: int
    public_key: PaillierPublicKey = field(repr=False)

    def __post_init__(self):
        n2 = self.public_key.n_squared
        if not 0 < self.value < n2 or math.gcd(self.value, n2) != 1:
            raise DomainError("ciphertext is not an element of Z*_{n^2}")

    def to_bytes(self) -> bytes:
        return pack_int(self.value)

    def raw(self) -> bytes:
        return int_to_bytes(self.value)

    def __add__(self, other):
        return he_add(self.public_key, self, other)

    def __sub__(self, other):
        return he_sub(self.public_key, self, other)

    def __mul__(self, k):
        return he_scalar_mul(self.public_key, self, k)


def _h_function(prime: int, n: int) -> int:
    # h = L_p(g^(p-1) mod p^2)^-1 mod p
    p2 = prime * prime
    lp = (pow(n + 1, prime - 1, p2) - 1) // prime
    return pow(lp, -1, prime)


def _random_prime(bits: int, rng) -> int:
    while True:
        # top two bits set so the product of two such primes has 2*bits bits
        candidate = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        if gmpy2.is_prime(candidate, PRIMALITY_ROUNDS):
            return int(candidate)


def keygen(bits: int, rng) -> PaillierKeyPair:
    """Generate a key pair whose modulus has exactly ``bits`` bits."""
    if bits < MIN_KEY_BITS or bits % 2:
        raise ConfigurationError(f"key size must be even and >= {MIN_KEY_BITS}, got {bits}")
    half = bits // 2
    while True:
        p = _random_prime(half, rng)
        q = _random_prime(half, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() == bits and math.gcd(n, (p - 1) * (q - 1)) == 1:
            public = PaillierPublicKey(n)
            return PaillierKeyPair(public, PaillierPrivateKey(public, p, q))


def _random_unit(n: int, rng) -> int:
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            return r


def encrypt(ppk: PaillierPublicKey, m: int, rng) -> PaillierCiphertext:
    if not 0 <= m < ppk.n:
        raise DomainError(f"plaintext must lie in [0, n), got {m}")
    n, n2 = ppk.n, ppk.n_squared
    r = _random_unit(n, rng)
    value = (1 + m * n) * gmpy2.powmod(r, n, n2) % n2
    return PaillierCiphertext(int(value), ppk)


def decrypt(psk: PaillierPrivateKey, c: PaillierCiphertext) -> int:
    ppk = psk.public_key
    if not isinstance(c, PaillierCiphertext):
        raise DecryptionError("not a Paillier ciphertext")
    if c.public_key.n != ppk.n:
        raise DecryptionError("ciphertext was produced under a different public key")
    p, q = psk.p, psk.q
    mp = (gmpy2.powmod(c.value, p - 1, p * p) - 1) // p * psk._hp % p
    mq = (gmpy2.powmod(c.value, q - 1, q * q) - 1) // q * psk._hq % q
    # Garner recombination
    m = mq + ((mp - mq) * psk._q_inv_p % p) * q
    return int(m % ppk.n)


def decrypt_textbook(psk: PaillierPrivateKey, c: PaillierCiphertext) -> int:
    """Decrypt with ``L(c^lambda mod n^2) * mu mod n`` (no CRT)."""
    ppk = psk.public_key
    if c.public_key.n != ppk.n:
        raise DecryptionError("ciphertext was produced under a different public key")
    n = ppk.n
    u = gmpy2.powmod(c.value, psk.lam, ppk.n_squared)
    return int((u - 1) // n * psk.mu % n)


def _check(ppk: PaillierPublicKey, *cs: PaillierCiphertext) -> None:
    for c in cs:
        if c.public_key.n != ppk.n:
            raise KeyMismatchError("ciphertext was produced under a different public key")


def he_add(ppk: PaillierPublicKey, c1: PaillierCiphertext, c2: PaillierCiphertext) -> PaillierCiphertext:
    _check(ppk, c1, c2)
    return PaillierCiphertext(c1.value * c2.value % ppk.n_squared, ppk)


def he_sub(ppk: PaillierPublicKey, c1: PaillierCiphertext, c2: PaillierCiphertext) -> PaillierCiphertext:
    _check(ppk, c1, c2)
    try:
        inverse = pow(c2.value, -1, ppk.n_squared)
    except ValueError as exc:
        raise ArithmeticError("subtrahend is not invertible mod n^2") from exc
    return PaillierCiphertext(c1.value * inverse % ppk.n_squared, ppk)


def he_scalar_mul(ppk: PaillierPublicKey, c: PaillierCiphertext, k: int) -> PaillierCiphertext:
    _check(ppk, c)
    if not 0 <= k < ppk.n:
        raise DomainError("scalar must lie in [0, n)")
    return PaillierCiphertext(int(gmpy2.powmod(c.value, k, ppk.n_squared)), ppk)


def decode_signed(m: int, n: int) -> int:
    """Map a residue in [0, n) to a signed integer using the n/2 split."""
    if not 0 <= m < n:
        raise DomainError("residue must lie in [0, n)")
    return m if m <= n // 2 else m - n


def encode_signed(value: int, n: int) -> int:
    return value % n
