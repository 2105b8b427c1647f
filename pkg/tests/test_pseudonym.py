import itertools
import random

import pytest

from ppsnd.encoding import pack_var
from ppsnd.errors import AuthenticationError, IssuanceError, WalletExhaustedError
from ppsnd.pseudonym import (LTCA, PCA, SECURITY_LEVELS, Certificate, Pseudonym, SigningKey, issue_ltc,
                             issue_pnym_batch, make_key_material, provision_wallet, request_token, sign,
                             verify, verify_certificate, verify_pnym)


@pytest.fixture(scope="module")
def authorities():
    r = random.Random("authorities")
    ltca = LTCA("LTCA-1", r)
    return ltca, PCA("PCA-1", ltca.anchor, r)


@pytest.fixture(scope="module")
def wallet3(authorities):
    ltca, pca = authorities
    r = random.Random("wallet3")
    ltc = ltca.issue_ltc("node-W3")
    return provision_wallet(ltca, pca, ltc, r, k=3, tau=100, start_time=0, paillier_bits=256)


def test_sign_verify():
    r = random.Random(1)
    sk, other = SigningKey.generate(r), SigningKey.generate(r)
    sig = sign(sk, b"message")
    assert verify(sk.public_key(), b"message", sig)
    assert not verify(sk.public_key(), b"messagf", sig)
    assert not verify(other.public_key(), b"message", sig)
    assert not verify(sk.public_key(), b"message", b"\x00" * 3)
    assert not verify(b"junk", b"message", sig)


def test_signatures_deterministic():
    sk = SigningKey.generate(random.Random(2))
    assert sign(sk, b"x") == sign(sk, b"x")


@pytest.mark.parametrize("level", sorted(SECURITY_LEVELS))
def test_baseline_curves(level):
    scheme = SECURITY_LEVELS[level][1]
    sk = SigningKey.generate(random.Random(level), scheme)
    assert verify(sk.public_key(), b"m", sign(sk, b"m"), scheme)


def test_issue_ltc(authorities):
    ltca, _ = authorities
    ltc = issue_ltc(ltca, "node-A")
    assert verify_certificate(ltc, ltca.anchor)
    assert Certificate.from_bytes(ltc.to_bytes()) == ltc.certificate
    with pytest.raises(IssuanceError):
        issue_ltc(ltca, "node-A")
    foreign = LTCA("LTCA-2", random.Random("foreign"))
    assert not verify_certificate(ltc, foreign.anchor)
    impostor = LTCA("LTCA-1", random.Random("impostor"))  # same name, different key
    assert not verify_certificate(ltc, impostor.anchor)


def test_token_properties(authorities):
    ltca, pca = authorities
    ltc = ltca.issue_ltc("node-T")
    token = request_token(ltca, ltc, random.Random(3))
    assert ltca.anchor.verify(token.tbs_bytes(), token.ltca_sig)
    blob = token.to_bytes()
    assert b"node-T" not in blob
    for i in range(len(ltc.public_key) - 7):
        assert ltc.public_key[i:i + 8] not in blob
    halves = [(SigningKey.generate(random.Random(4)).public_key(),
               make_key_material(1, 128, random.Random(5))[0][1].public_key)]
    pca.issue_batch(token, halves, 10, 0)
    with pytest.raises(IssuanceError):
        pca.issue_batch(token, halves, 10, 0)


def test_token_requires_possession(authorities):
    ltca, _ = authorities
    ltc = ltca.issue_ltc("node-P")
    wrong = SigningKey.generate(random.Random(6))
    with pytest.raises(AuthenticationError):
        ltca.request_token(ltc, sign(wrong, b"c"), b"c")


def test_pca_rejects_forged_token(authorities):
    ltca, pca = authorities
    rogue = LTCA("LTCA-1", random.Random("rogue"))
    token = request_token(rogue, rogue.issue_ltc("x"), random.Random(7))
    with pytest.raises(IssuanceError):
        issue_pnym_batch(pca, token, 1, 10, 0, make_key_material(1, 128, random.Random(8)))


def test_batch_lifetimes_and_freshness(wallet3, authorities):
    _, pca = authorities
    lifetimes = [(c.pnym.valid_from, c.pnym.valid_to) for c in wallet3]
    assert lifetimes == [(0, 100), (100, 200), (200, 300)]
    for creds in wallet3:
        assert verify_pnym(creds.pnym, pca.anchor, creds.pnym.valid_from)
    for a, b in itertools.combinations(list(wallet3), 2):
        assert a.pnym.sig_pk != b.pnym.sig_pk
        assert a.pnym.ppk.n != b.pnym.ppk.n


def test_wallet_lookup(wallet3):
    entries = list(wallet3)
    assert wallet3.current(150) is entries[1]
    assert wallet3.current(0) is entries[0]
    assert wallet3.current(299) is entries[2]
    with pytest.raises(WalletExhaustedError):
        wallet3.current(300)
    assert wallet3.span == (0, 300)


def test_verify_pnym(wallet3, authorities):
    _, pca = authorities
    pnym = list(wallet3)[0].pnym
    assert verify_pnym(pnym, pca.anchor, 50)
    assert not verify_pnym(pnym, pca.anchor, 100)
    n = pnym.ppk.n
    from ppsnd.phe import PaillierPublicKey
    tampered = Pseudonym(pnym.provider_id, pnym.valid_from, pnym.valid_to, PaillierPublicKey(n + 2),
                         pnym.sig_pk, pnym.provider_sig)
    assert not verify_pnym(tampered, pca.anchor, 50)
    stretched = Pseudonym(pnym.provider_id, pnym.valid_from, 10**9, pnym.ppk, pnym.sig_pk, pnym.provider_sig)
    assert not verify_pnym(stretched, pca.anchor, 150)


def test_pseudonym_serialization(wallet3):
    pnym = list(wallet3)[1].pnym
    assert Pseudonym.from_bytes(pnym.to_bytes()) == pnym
    assert len(pnym.pid) == 32


def test_pseudonym_carries_no_identity(authorities):
    ltca, pca = authorities
    ltc = ltca.issue_ltc("node-secret-identity")
    wallet = provision_wallet(ltca, pca, ltc, random.Random(9), k=2, tau=10, paillier_bits=128)
    for creds in wallet:
        blob = creds.pnym.to_bytes()
        assert b"node-secret-identity" not in blob
        assert ltc.public_key[:16] not in blob
        assert pack_var(ltc.public_key) not in blob
