"""Two-party privacy-preserving greater-than comparison.

The server holds E(x) and either a plaintext y or E(y); the client
holds the private key.  After three round trips the server learns only
the Boolean [x > y] and the client learns nothing.

Construction (blinded difference + bitwise comparison on encrypted
bits):

  1. Server sends E(z) with z = 2^l + a - b + r, r blind in [0, 2^(l+kappa)).
  2. Client decrypts z and returns the l encrypted low bits of z plus
     E(z div 2^l).
  3. Server masks per-bit difference terms against the low bits of r
     (with a random predicate flip s and random non-zero multipliers),
     shuffles, and sends them.
  4. Client reports E(zero_seen): whether any masked term decrypted to 0.
  5. Server assembles E(res), res = [a >= b], blinds it with a fresh
     random bit, and the client reveals the blinded bit.

The correctness identity: with c = z mod 2^l and r' = r mod 2^l,

  [a >= b] = (z div 2^l) - (r div 2^l) - [c < r']

and the bitwise phase yields [c < r'] (s = 0) or [c >= r'] (s = 1).

Strict output: [x > y] is obtained by running the core on (y, x) and
negating, so ties resolve to False.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

from . import paillier
from .errors import InvalidState, MalformedCiphertext, ParamsTooLarge, ProtocolAbort
from .fixedpoint import FixedPointParams
from .paillier import Ciphertext, HomPrivateKey, HomPublicKey


@dataclass(frozen=True)
class BlindedDiff:
    """Round 1, server to client: E(z)."""
    z_enc: Ciphertext


@dataclass(frozen=True)
class LowBits:
    """Round 1 reply: encrypted low bits of z (LSB first) and E(z div 2^l)."""
    bit_encs: tuple[Ciphertext, ...]
    z_high_enc: Ciphertext


@dataclass(frozen=True)
class MaskedTerms:
    """Round 2, server to client: shuffled masked difference terms."""
    term_encs: tuple[Ciphertext, ...]


@dataclass(frozen=True)
class ZeroFlag:
    """Round 2 reply: fresh E(1) if some term was zero, else E(0)."""
    flag_enc: Ciphertext


@dataclass(frozen=True)
class BlindedResult:
    """Round 3, server to client: E(res xor b) for a server-private bit b."""
    masked_enc: Ciphertext


class _ServerStage(enum.Enum):
    INIT = "init"
    SENT_Z = "sent_z"
    SENT_MASKED = "sent_masked"
    SENT_RESULT = "sent_result"
    DONE = "done"


class CompareServer:
    """Server side of one comparison of a against b, both in [0, 2^l).

    Either operand may be a plaintext int or a Ciphertext under the
    client's key.  The finished session yields [a >= b].

    ``fixed_r``, ``fixed_s``, ``fixed_b`` and ``shuffle_seed`` are test
    hooks for deterministic transcripts; production use leaves them
    unset so every invocation draws fresh entropy.
    """

    def __init__(self, pk: HomPublicKey, params: FixedPointParams,
                 rng: random.Random | None = None, *,
                 fixed_r: int | None = None, fixed_s: int | None = None,
                 fixed_b: int | None = None, shuffle_seed: int | None = None):
        if params.value_bits + params.stat_sec + 2 >= pk.n.bit_length():
            raise ParamsTooLarge(
                f"need l + kappa + 2 < key bits, got l={params.value_bits} "
                f"kappa={params.stat_sec} for a {pk.n.bit_length()}-bit modulus")
        self.pk = pk
        self.params = params
        self.rng = rng or random.SystemRandom()
        self._fixed_r = fixed_r
        self._fixed_s = fixed_s
        self._fixed_b = fixed_b
        self._shuffle_seed = shuffle_seed
        self._stage = _ServerStage.INIT
        self._r = 0
        self._s = 0
        self._b = 0
        self._z_high_enc: Ciphertext | None = None
        self.result: int | None = None

    def start(self, a: int | Ciphertext, b: int | Ciphertext) -> BlindedDiff:
        """Blind the difference: z = 2^l + a - b + r."""
        if self._stage is not _ServerStage.INIT:
            raise InvalidState("comparison already started")
        l = self.params.value_bits
        r = self._fixed_r if self._fixed_r is not None \
            else self.rng.randrange(1 << (l + self.params.stat_sec))
        self._r = r
        const = (1 << l) + r
        if isinstance(a, Ciphertext):
            acc = a
        else:
            const += a
            acc = None
        if isinstance(b, Ciphertext):
            neg_b = paillier.negate(self.pk, b)
            acc = neg_b if acc is None else paillier.add(self.pk, acc, neg_b)
        else:
            const -= b
        z_enc = paillier.encrypt_signed(self.pk, const, self.rng)
        if acc is not None:
            z_enc = paillier.add(self.pk, z_enc, acc)
        self._stage = _ServerStage.SENT_Z
        return BlindedDiff(z_enc=z_enc)

    def mask_bits(self, msg: LowBits) -> MaskedTerms:
        """Build the masked per-bit difference terms against r's low bits.

        With flip s = 0 the terms compare c < r'; with s = 1 they
        compare c >= r' (realized as c > r' - 1; a zero is planted
        outright when r' = 0, where the predicate is always true).
        A term is zero iff the predicate holds.
        """
        if self._stage is not _ServerStage.SENT_Z:
            raise InvalidState("mask_bits before start")
        l = self.params.value_bits
        kappa = self.params.stat_sec
        if len(msg.bit_encs) != l:
            raise MalformedCiphertext(f"expected {l} bit ciphertexts, got {len(msg.bit_encs)}")
        self._z_high_enc = msg.z_high_enc
        s = self._fixed_s if self._fixed_s is not None else self.rng.randrange(2)
        self._s = s
        r_low = self._r % (1 << l)

        terms: list[Ciphertext] = []
        if s == 1 and r_low == 0:
            # [c >= 0] is vacuously true; plant one zero among dummies.
            terms.append(paillier.encrypt(self.pk, 0, self.rng))
            for _ in range(l - 1):
                rho = self.rng.randrange(1, 1 << kappa)
                terms.append(paillier.encrypt(self.pk, rho, self.rng))
        else:
            ref = r_low if s == 0 else r_low - 1
            sign = 1 if s == 0 else -1
            ref_bits = [(ref >> j) & 1 for j in range(l)]
            # xor_encs[j] = E(c_j XOR ref_j)
            xor_encs = []
            for j in range(l):
                if ref_bits[j] == 0:
                    xor_encs.append(msg.bit_encs[j])
                else:
                    flipped = paillier.negate(self.pk, msg.bit_encs[j])
                    xor_encs.append(paillier.add_plain(self.pk, flipped, 1))
            # Suffix sums of xor terms, scaled by 3 so any higher-bit
            # difference pushes the term away from zero.
            suffix = paillier.encrypt(self.pk, 0, self.rng)
            for j in range(l - 1, -1, -1):
                t = paillier.add(self.pk, msg.bit_encs[j],
                                 paillier.scalar_mul(self.pk, suffix, 3))
                t = paillier.add_plain(self.pk, t, sign - ref_bits[j])
                rho = self.rng.randrange(1, 1 << kappa)
                terms.append(paillier.scalar_mul(self.pk, t, rho))
                suffix = paillier.add(self.pk, suffix, xor_encs[j])

        shuffle_rng = self.rng if self._shuffle_seed is None else random.Random(self._shuffle_seed)
        shuffle_rng.shuffle(terms)
        self._stage = _ServerStage.SENT_MASKED
        return MaskedTerms(term_encs=tuple(terms))

    def finish(self, msg: ZeroFlag) -> BlindedResult:
        """Turn the zero flag into the blinded comparison result."""
        if self._stage is not _ServerStage.SENT_MASKED:
            raise InvalidState("finish before mask_bits")
        assert self._z_high_enc is not None
        pk = self.pk
        if self._s == 0:
            delta_enc = msg.flag_enc  # [c < r']
        else:
            # flag is [c >= r'], so [c < r'] = 1 - flag
            delta_enc = paillier.add_plain(pk, paillier.negate(pk, msg.flag_enc), 1)
        r_high = self._r >> self.params.value_bits
        res_enc = paillier.add(pk, self._z_high_enc, paillier.negate(pk, delta_enc))
        res_enc = paillier.add_plain(pk, res_enc, -r_high)
        b = self._fixed_b if self._fixed_b is not None else self.rng.randrange(2)
        self._b = b
        if b == 1:
            res_enc = paillier.add_plain(pk, paillier.negate(pk, res_enc), 1)
        self._stage = _ServerStage.SENT_RESULT
        return BlindedResult(masked_enc=paillier.rerandomize(pk, res_enc, self.rng))

    def absorb(self, revealed: int) -> int:
        """Unblind the revealed bit; the session result is [a >= b]."""
        if self._stage is not _ServerStage.SENT_RESULT:
            raise InvalidState("absorb before finish")
        if revealed not in (0, 1):
            raise ProtocolAbort(f"revealed value {revealed} not a bit")
        self.result = revealed ^ self._b
        self._stage = _ServerStage.DONE
        return self.result


class CompareClient:
    """Client (key holder) side of one comparison session."""

    def __init__(self, sk: HomPrivateKey, pk: HomPublicKey, params: FixedPointParams,
                 rng: random.Random | None = None):
        self.sk = sk
        self.pk = pk
        self.params = params
        self.rng = rng or random.SystemRandom()

    def split_bits(self, msg: BlindedDiff) -> LowBits:
        z = paillier.decrypt(self.sk, self.pk, msg.z_enc)
        l = self.params.value_bits
        bit_encs = tuple(
            paillier.encrypt(self.pk, (z >> j) & 1, self.rng) for j in range(l))
        z_high_enc = paillier.encrypt(self.pk, z >> l, self.rng)
        return LowBits(bit_encs=bit_encs, z_high_enc=z_high_enc)

    def zero_flag(self, msg: MaskedTerms) -> ZeroFlag:
        zero_seen = any(
            paillier.decrypt_signed(self.sk, self.pk, term) == 0
            for term in msg.term_encs)
        return ZeroFlag(flag_enc=paillier.encrypt(self.pk, int(zero_seen), self.rng))

    def reveal(self, msg: BlindedResult) -> int:
        value = paillier.decrypt_signed(self.sk, self.pk, msg.masked_enc)
        if value not in (0, 1):
            raise ProtocolAbort(f"blinded result decrypted to {value}, not a bit")
        return value


def run_ge(server: CompareServer, client: CompareClient,
           a: int | Ciphertext, b: int | Ciphertext) -> int:
    """Drive one in-process session; server learns [a >= b]."""
    m1 = server.start(a, b)
    m2 = client.split_bits(m1)
    m3 = server.mask_bits(m2)
    m4 = client.zero_flag(m3)
    m5 = server.finish(m4)
    return server.absorb(client.reveal(m5))


def run_gt(server: CompareServer, client: CompareClient,
           x: int | Ciphertext, y: int | Ciphertext) -> int:
    """Strict [x > y] = not [y >= x]; ties come out False."""
    return 1 - run_ge(server, client, y, x)
