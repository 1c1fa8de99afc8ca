"""Additively homomorphic public-key cryptosystem (Paillier, g = n + 1 variant).

Supports the two laws the protocol relies on:

    E(m1) * E(m2)  decrypts to  m1 + m2  (mod n)
    E(m) ** k      decrypts to  k * m    (mod n)

Plaintexts with n/2 <= m < n are interpreted as negative (m - n) by
``to_signed``; all protocol values are far below n/2 so the reading is
unambiguous.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
from gmpy2 import mpz

from .errors import (
    KeyMismatch,
    MalformedCiphertext,
    MessageOutOfRange,
    UnsupportedKeySize,
)

SUPPORTED_KEY_SIZES = (512, 768, 1024, 1536, 2048)

KEY_FORMAT_VERSION = 1


@dataclass(frozen=True)
class HomPublicKey:
    n: int
    g: int
    key_bits: int

    @property
    def nsquare(self) -> int:
        return self.n * self.n

    @property
    def fingerprint(self) -> str:
        digest = hashlib.sha256(f"{self.n:x}:{self.g:x}".encode()).hexdigest()
        return digest[:16]

    def to_json(self) -> str:
        return json.dumps(
            {"version": KEY_FORMAT_VERSION, "k": self.key_bits,
             "n": f"{self.n:x}", "g": f"{self.g:x}"}
        )

    @classmethod
    def from_json(cls, text: str) -> "HomPublicKey":
        doc = json.loads(text)
        return cls(n=int(doc["n"], 16), g=int(doc["g"], 16), key_bits=doc["k"])


@dataclass(frozen=True)
class HomPrivateKey:
    p: int
    q: int

    @property
    def n(self) -> int:
        return self.p * self.q

    def to_json(self) -> str:
        return json.dumps(
            {"version": KEY_FORMAT_VERSION, "p": f"{self.p:x}", "q": f"{self.q:x}"}
        )

    @classmethod
    def from_json(cls, text: str) -> "HomPrivateKey":
        doc = json.loads(text)
        return cls(p=int(doc["p"], 16), q=int(doc["q"], 16))


@dataclass(frozen=True)
class Ciphertext:
    value: int
    key_id: str


def keygen(key_bits: int, rng: random.Random | None = None) -> tuple[HomPublicKey, HomPrivateKey]:
    """Generate a key pair with an n of exactly ``key_bits`` bits.

    A seeded ``rng`` gives deterministic keys (test fixtures only);
    by default system entropy is used.
    """
    if key_bits not in SUPPORTED_KEY_SIZES:
        raise UnsupportedKeySize(f"key size {key_bits} not in {SUPPORTED_KEY_SIZES}")
    rng = rng or random.SystemRandom()
    half = key_bits // 2
    while True:
        p = _random_prime(half, rng)
        q = _random_prime(half, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() == key_bits:
            break
    pk = HomPublicKey(n=n, g=n + 1, key_bits=key_bits)
    return pk, HomPrivateKey(p=p, q=q)


def _random_prime(bits: int, rng: random.Random) -> int:
    candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
    return int(gmpy2.next_prime(candidate))


def encrypt(pk: HomPublicKey, m: int, rng: random.Random | None = None) -> Ciphertext:
    """Randomized encryption of m in [0, n)."""
    if not 0 <= m < pk.n:
        raise MessageOutOfRange(f"plaintext must lie in [0, n), got bit length {m.bit_length()}")
    rng = rng or random.SystemRandom()
    nsq = pk.nsquare
    r = _random_unit(pk, rng)
    # g = n+1 makes g^m = 1 + m*n (mod n^2); no exponentiation needed there.
    gm = (1 + m * pk.n) % nsq
    value = (gm * gmpy2.powmod(r, pk.n, nsq)) % nsq
    return Ciphertext(value=int(value), key_id=pk.fingerprint)


def _random_unit(pk: HomPublicKey, rng: random.Random) -> int:
    while True:
        r = rng.randrange(1, pk.n)
        if gmpy2.gcd(r, pk.n) == 1:
            return r


def decrypt(sk: HomPrivateKey, pk: HomPublicKey, c: Ciphertext) -> int:
    """Recover the plaintext in [0, n)."""
    if sk.n != pk.n:
        raise KeyMismatch("private key does not match public key")
    _check_key(pk, c)
    nsq = pk.nsquare
    if not 0 < c.value < nsq or gmpy2.gcd(c.value, pk.n) != 1:
        raise MalformedCiphertext("ciphertext outside the valid group")
    # CRT decryption: work mod p^2 and q^2 separately, then recombine.
    p, q = sk.p, sk.q
    h_p, h_q, p_inv_q = _decryption_params(sk)
    m_p = (_l_func(gmpy2.powmod(c.value, p - 1, p * p), p) * h_p) % p
    m_q = (_l_func(gmpy2.powmod(c.value, q - 1, q * q), q) * h_q) % q
    m = m_p + p * (((m_q - m_p) * p_inv_q) % q)
    return int(m)


def _l_func(u, d):
    return (u - 1) // d


@lru_cache(maxsize=64)
def _decryption_params(sk: HomPrivateKey) -> tuple[int, int, int]:
    p, q = sk.p, sk.q
    g = sk.n + 1
    h_p = int(gmpy2.invert(_l_func(gmpy2.powmod(g, p - 1, p * p), p), p))
    h_q = int(gmpy2.invert(_l_func(gmpy2.powmod(g, q - 1, q * q), q), q))
    p_inv_q = int(gmpy2.invert(p, q))
    return h_p, h_q, p_inv_q


def to_signed(m: int, n: int) -> int:
    """Interpret a plaintext in [0, n) as a signed value."""
    return m - n if m > n // 2 else m


def encrypt_signed(pk: HomPublicKey, m: int, rng: random.Random | None = None) -> Ciphertext:
    return encrypt(pk, m % pk.n, rng)


def decrypt_signed(sk: HomPrivateKey, pk: HomPublicKey, c: Ciphertext) -> int:
    return to_signed(decrypt(sk, pk, c), pk.n)


def add(pk: HomPublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Ciphertext of m1 + m2 (mod n)."""
    _check_key(pk, c1)
    _check_key(pk, c2)
    if c1.key_id != c2.key_id:
        raise KeyMismatch("ciphertexts under different keys")
    return Ciphertext(value=(c1.value * c2.value) % pk.nsquare, key_id=c1.key_id)


def add_plain(pk: HomPublicKey, c: Ciphertext, k: int) -> Ciphertext:
    """Ciphertext of m + k (mod n); cheap since g = n + 1."""
    _check_key(pk, c)
    gk = (1 + (k % pk.n) * pk.n) % pk.nsquare
    return Ciphertext(value=(c.value * gk) % pk.nsquare, key_id=c.key_id)


def scalar_mul(pk: HomPublicKey, c: Ciphertext, s: int) -> Ciphertext:
    """Ciphertext of s * m (mod n); negative s via the modular inverse exponent."""
    _check_key(pk, c)
    return Ciphertext(value=int(gmpy2.powmod(c.value, s, pk.nsquare)), key_id=c.key_id)


def negate(pk: HomPublicKey, c: Ciphertext) -> Ciphertext:
    """Ciphertext of -m (mod n)."""
    return scalar_mul(pk, c, -1)


def rerandomize(pk: HomPublicKey, c: Ciphertext, rng: random.Random | None = None) -> Ciphertext:
    """Fresh-looking ciphertext of the same plaintext."""
    _check_key(pk, c)
    rng = rng or random.SystemRandom()
    r = _random_unit(pk, rng)
    value = (c.value * gmpy2.powmod(r, pk.n, pk.nsquare)) % pk.nsquare
    return Ciphertext(value=int(value), key_id=c.key_id)


def _check_key(pk: HomPublicKey, c: Ciphertext) -> None:
    if c.key_id != pk.fingerprint:
        raise KeyMismatch("ciphertext was produced under a different key")
