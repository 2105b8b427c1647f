"""Pseudonymous credentials: mock long-term and pseudonym certificate
authorities, pseudonym batches (wallets) and message signatures.

A signature scheme is named by a string. Brainpool curve names select ECDSA
(SHA-256, RFC 6979 nonces, raw ``r || s``); pseudonym keys always use
brainpoolP256r1. ``dsa1024``/``dsa2048``/``dsa3072`` select finite-field DSA
with that modulus size, which the baseline uses for long-term credentials so
that its cost follows the configured key size.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import ecdsa
from ecdsa.util import sigdecode_string, sigencode_string

from . import dsa
from .encoding import Reader, pack_u64, pack_var
from .errors import AuthenticationError, DecodeError, IssuanceError, WalletExhaustedError
from .phe import PaillierKeyPair, PaillierPrivateKey, PaillierPublicKey, keygen

PSEUDONYM_CURVE = "brainpoolP256r1"

CURVES = {
    "brainpoolP160r1": ecdsa.BRAINPOOLP160r1,
    "brainpoolP224r1": ecdsa.BRAINPOOLP224r1,
    "brainpoolP256r1": ecdsa.BRAINPOOLP256r1,
}
DSA_SCHEMES = {f"dsa{L}": L for L in dsa.SIZES}
SCHEMES = tuple(CURVES) + tuple(DSA_SCHEMES)

# NIST security level -> (Paillier/DSA modulus bits, baseline signature scheme)
SECURITY_LEVELS = {
    80: (1024, "dsa1024"),
    112: (2048, "dsa2048"),
    128: (3072, "dsa3072"),
}
KEY_BITS_TO_LEVEL = {bits: level for level, (bits, _) in SECURITY_LEVELS.items()}

DEFAULT_K = 16
DEFAULT_TAU_PS = 600 * 10**12


# --- signatures ---------------------------------------------------------------

def _check_scheme(scheme: str) -> None:
    if scheme not in CURVES and scheme not in DSA_SCHEMES:
        raise ValueError(f"unknown signature scheme {scheme!r}; expected one of {SCHEMES}")


@dataclass(frozen=True)
class SigningKey:
    scheme: str
    secret: int = field(repr=False)

    @classmethod
    def generate(cls, rng, scheme: str = PSEUDONYM_CURVE) -> "SigningKey":
        _check_scheme(scheme)
        if scheme in DSA_SCHEMES:
            return cls(scheme, dsa.DSAKey.generate(rng, DSA_SCHEMES[scheme]).x)
        return cls(scheme, rng.randrange(1, CURVES[scheme].order))

    @cached_property
    def _key(self):
        if self.scheme in DSA_SCHEMES:
            return dsa.DSAKey(dsa.domain_parameters(DSA_SCHEMES[self.scheme]), self.secret)
        return ecdsa.SigningKey.from_secret_exponent(self.secret, CURVES[self.scheme], hashfunc=hashlib.sha256)

    def public_key(self) -> bytes:
        if self.scheme in DSA_SCHEMES:
            return self._key.public_bytes()
        return self._key.get_verifying_key().to_string()


def sign(sig_sk: SigningKey, message: bytes) -> bytes:
    if sig_sk.scheme in DSA_SCHEMES:
        return sig_sk._key.sign(bytes(message))
    return sig_sk._key.sign_deterministic(message, hashfunc=hashlib.sha256, sigencode=sigencode_string)


def verify(sig_pk: bytes, message: bytes, signature: bytes, scheme: str = PSEUDONYM_CURVE) -> bool:
    """Return True iff ``signature`` is valid; malformed inputs yield False."""
    if scheme in DSA_SCHEMES:
        params = dsa.domain_parameters(DSA_SCHEMES[scheme])
        return dsa.verify(params, bytes(sig_pk), bytes(message), bytes(signature))
    try:
        key = ecdsa.VerifyingKey.from_string(bytes(sig_pk), curve=CURVES[scheme], hashfunc=hashlib.sha256)
        return key.verify(bytes(signature), bytes(message), hashfunc=hashlib.sha256, sigdecode=sigdecode_string)
    except (ecdsa.BadSignatureError, ecdsa.MalformedPointError, ValueError, KeyError, AssertionError):
        return False


@dataclass(frozen=True)
class TrustAnchor:
    """Public verification material of an authority."""
    name: str
    scheme: str
    public_key: bytes

    def verify(self, message: bytes, signature: bytes) -> bool:
        return verify(self.public_key, message, signature, self.scheme)


# --- long-term credentials ------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    """Decoded public part of a long-term credential."""
    identity: str
    issuer: str
    scheme: str
    public_key: bytes
    issuer_sig: bytes

    def tbs_bytes(self) -> bytes:
        return (pack_var(b"LTC") + pack_var(self.identity.encode()) + pack_var(self.issuer.encode())
                + pack_var(self.scheme.encode()) + pack_var(self.public_key))

    def to_bytes(self) -> bytes:
        return self.tbs_bytes() + pack_var(self.issuer_sig)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Certificate":
        r = Reader(data)
        if r.var() != b"LTC":
            raise DecodeError("not a long-term certificate")
        try:
            identity, issuer, scheme = (r.var().decode() for _ in range(3))
        except UnicodeDecodeError as exc:
            raise DecodeError("bad certificate text field") from exc
        cert = cls(identity, issuer, scheme, r.var(), r.var())
        r.done()
        return cert


@dataclass(frozen=True)
class LongTermCredential:
    """A registered identity: its certificate plus the long-term private key."""
    certificate: Certificate
    signing_key: SigningKey = field(repr=False)

    @property
    def identity(self) -> str:
        return self.certificate.identity

    @property
    def public_key(self) -> bytes:
        return self.certificate.public_key

    @property
    def scheme(self) -> str:
        return self.certificate.scheme

    def to_bytes(self) -> bytes:
        """Certificate part only; the private key is never serialized."""
        return self.certificate.to_bytes()


def verify_certificate(cert: Certificate | LongTermCredential, anchor: TrustAnchor) -> bool:
    if isinstance(cert, LongTermCredential):
        cert = cert.certificate
    if cert.issuer != anchor.name:
        return False
    return anchor.verify(cert.tbs_bytes(), cert.issuer_sig)


@dataclass(frozen=True)
class AnonymousToken:
    token_id: bytes
    ltca_sig: bytes

    def tbs_bytes(self) -> bytes:
        return pack_var(b"TOKEN") + pack_var(self.token_id)

    def to_bytes(self) -> bytes:
        return self.tbs_bytes() + pack_var(self.ltca_sig)


class LTCA:
    """Long-term certificate authority: registers identities, hands out tokens."""

    def __init__(self, name: str, rng, scheme: str = PSEUDONYM_CURVE):
        self.name = name
        self._rng = rng
        self._key = SigningKey.generate(rng, scheme)
        self.anchor = TrustAnchor(name, scheme, self._key.public_key())
        self._registered: set[str] = set()
        self.tokens_issued: dict[str, int] = {}

    def issue_ltc(self, identity: str, scheme: str | None = None) -> LongTermCredential:
        if identity in self._registered:
            raise IssuanceError(f"identity already registered: {identity!r}")
        device_key = SigningKey.generate(self._rng, scheme or self.anchor.scheme)
        unsigned = Certificate(identity, self.name, device_key.scheme, device_key.public_key(), b"")
        cert = Certificate(identity, self.name, device_key.scheme, unsigned.public_key,
                           sign(self._key, unsigned.tbs_bytes()))
        self._registered.add(identity)
        return LongTermCredential(cert, device_key)

    def request_token(self, ltc: LongTermCredential, proof: bytes, challenge: bytes) -> AnonymousToken:
        if ltc.identity not in self._registered or not verify_certificate(ltc, self.anchor):
            raise AuthenticationError("unknown or invalid long-term credential")
        if not verify(ltc.public_key, challenge, proof, ltc.scheme):
            raise AuthenticationError("proof of possession failed")
        token_id = self._rng.randbytes(32)
        unsigned = AnonymousToken(token_id, b"")
        self.tokens_issued[ltc.identity] = self.tokens_issued.get(ltc.identity, 0) + 1
        return AnonymousToken(token_id, sign(self._key, unsigned.tbs_bytes()))


def issue_ltc(ltca: LTCA, identity: str, scheme: str | None = None) -> LongTermCredential:
    return ltca.issue_ltc(identity, scheme)


def request_token(ltca: LTCA, ltc: LongTermCredential, rng) -> AnonymousToken:
    """Obtain a single-use token, proving possession of the long-term key."""
    challenge = b"token-request:" + rng.randbytes(16)
    return ltca.request_token(ltc, sign(ltc.signing_key, challenge), challenge)


# --- pseudonyms -----------------------------------------------------------------

@dataclass(frozen=True)
class Pseudonym:
    provider_id: str
    valid_from: int
    valid_to: int
    ppk: PaillierPublicKey
    sig_pk: bytes
    provider_sig: bytes = b""

    def tbs_bytes(self) -> bytes:
        return (pack_var(self.provider_id.encode()) + pack_u64(self.valid_from) + pack_u64(self.valid_to)
                + self.ppk.to_bytes() + pack_var(self.sig_pk))

    def to_bytes(self) -> bytes:
        return self.tbs_bytes() + pack_var(self.provider_sig)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Pseudonym":
        r = Reader(data)
        try:
            provider_id = r.var().decode()
        except UnicodeDecodeError as exc:
            raise DecodeError("bad provider id") from exc
        valid_from, valid_to = r.u64(), r.u64()
        n = r.int()
        if n < 2:
            raise DecodeError("bad Paillier modulus")
        pnym = cls(provider_id, valid_from, valid_to, PaillierPublicKey(n), r.var(), r.var())
        r.done()
        return pnym

    @property
    def pid(self) -> bytes:
        """Session identifier: SHA-256 of the serialized pseudonym."""
        return hashlib.sha256(self.to_bytes()).digest()

    def valid_at(self, now: int) -> bool:
        return self.valid_from <= now < self.valid_to


def verify_pnym(pnym: Pseudonym, pca_anchor: TrustAnchor, now: int) -> bool:
    if pnym.provider_id != pca_anchor.name or not pnym.valid_at(now):
        return False
    return pca_anchor.verify(pnym.tbs_bytes(), pnym.provider_sig)


class PCA:
    """Pseudonym certificate authority.

    Keeps only the ids of spent tokens; nothing that maps a pseudonym back to
    the holder of the token.
    """

    def __init__(self, provider_id: str, ltca_anchor: TrustAnchor, rng):
        self.provider_id = provider_id
        self.ltca_anchor = ltca_anchor
        self._key = SigningKey.generate(rng, PSEUDONYM_CURVE)
        self.anchor = TrustAnchor(provider_id, PSEUDONYM_CURVE, self._key.public_key())
        self.spent_tokens: set[bytes] = set()
        self.issued = 0

    def issue_batch(self, token: AnonymousToken, public_halves: list[tuple[bytes, PaillierPublicKey]],
                    tau: int, start_time: int) -> list[Pseudonym]:
        if not self.ltca_anchor.verify(token.tbs_bytes(), token.ltca_sig):
            raise IssuanceError("token not signed by the trusted LTCA")
        if token.token_id in self.spent_tokens:
            raise IssuanceError("token already spent")
        if not public_halves or tau <= 0:
            raise IssuanceError("need K >= 1 and tau > 0")
        self.spent_tokens.add(token.token_id)
        batch = []
        for i, (sig_pk, ppk) in enumerate(public_halves):
            unsigned = Pseudonym(self.provider_id, start_time + i * tau, start_time + (i + 1) * tau, ppk, sig_pk)
            batch.append(Pseudonym(unsigned.provider_id, unsigned.valid_from, unsigned.valid_to, ppk, sig_pk,
                                   sign(self._key, unsigned.tbs_bytes())))
        self.issued += len(batch)
        return batch


@dataclass(frozen=True)
class PseudonymCredentials:
    """A pseudonym together with its private halves."""
    pnym: Pseudonym
    sig_sk: SigningKey = field(repr=False)
    psk: PaillierPrivateKey = field(repr=False)

    @property
    def ppk(self) -> PaillierPublicKey:
        return self.pnym.ppk

    @property
    def pid(self) -> bytes:
        return self.pnym.pid


@dataclass
class PseudonymWallet:
    entries: list[PseudonymCredentials]

    @property
    def span(self) -> tuple[int, int]:
        return self.entries[0].pnym.valid_from, self.entries[-1].pnym.valid_to

    def current(self, now: int) -> PseudonymCredentials:
        for entry in self.entries:
            if entry.pnym.valid_at(now):
                return entry
        raise WalletExhaustedError(f"no pseudonym valid at t={now}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def current_pnym(wallet: PseudonymWallet, now: int) -> PseudonymCredentials:
    return wallet.current(now)


def make_key_material(k: int, paillier_bits: int, rng) -> list[tuple[SigningKey, PaillierKeyPair]]:
    return [(SigningKey.generate(rng), keygen(paillier_bits, rng)) for _ in range(k)]


def issue_pnym_batch(pca: PCA, token: AnonymousToken, k: int, tau: int, start_time: int,
                     key_material: list[tuple[SigningKey, PaillierKeyPair]]) -> PseudonymWallet:
    """Request ``k`` pseudonyms; only the public halves of ``key_material`` reach the PCA."""
    if k < 1 or len(key_material) != k:
        raise IssuanceError(f"expected {k} key pairs, got {len(key_material)}")
    publics = [(sk.public_key(), kp.public_key) for sk, kp in key_material]
    pnyms = pca.issue_batch(token, publics, tau, start_time)
    return PseudonymWallet([PseudonymCredentials(p, sk, kp.private_key)
                            for p, (sk, kp) in zip(pnyms, key_material)])


def provision_wallet(ltca: LTCA, pca: PCA, ltc: LongTermCredential, rng, *, k: int = DEFAULT_K,
                     tau: int = DEFAULT_TAU_PS, start_time: int = 0, paillier_bits: int = 1024) -> PseudonymWallet:
    """Token request plus batch issuance in one call."""
    token = request_token(ltca, ltc, rng)
    return issue_pnym_batch(pca, token, k, tau, start_time, make_key_material(k, paillier_bits, rng))
