"""Benchmark grid for the per-keystroke authentication cost.

One repetition times a full authentication decision cycle: the four
comparison subprotocol invocations plus the homomorphic trust update,
with operands bounded by the configured comparison bit length.  The
messages are JSON round-tripped exactly as the wire format would, so
serialization cost is reported separately from crypto cost.

Published reference timings from a prior interpreted-Python
implementation of the same protocol are printed alongside for
qualitative context; absolute values are hardware-bound and are not
treated as targets.
"""

from __future__ import annotations

import json
import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Any

from . import paillier
from .compare import (
    BlindedDiff,
    BlindedResult,
    CompareClient,
    CompareServer,
    LowBits,
    MaskedTerms,
    ZeroFlag,
)
from .errors import InvalidParams
from .fixedpoint import FixedPointParams

# (key_bits, comparison_bits) -> milliseconds, prior published measurements.
REFERENCE_TIMINGS_MS: dict[tuple[int, int], float] = {
    (512, 4): 80, (512, 7): 125, (512, 10): 195,
    (768, 4): 255, (768, 7): 390, (768, 10): 500,
    (1024, 4): 540, (1024, 7): 750, (1024, 10): 1006,
    (1536, 4): 1850, (1536, 7): 2503, (1536, 10): 3201,
}


@dataclass(frozen=True)
class BenchConfig:
    key_sizes: tuple[int, ...] = (512, 768, 1024, 1536)
    bit_lengths: tuple[int, ...] = (4, 7, 10, 40)
    repetitions: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.repetitions < 5:
            raise InvalidParams("need at least 5 repetitions per cell")


@dataclass
class BenchCell:
    key_bits: int
    comparison_bits: int
    total_ms: list[float] = field(default_factory=list)
    serialization_ms: list[float] = field(default_factory=list)

    @property
    def median_total_ms(self) -> float:
        return statistics.median(self.total_ms)

    @property
    def median_serialization_ms(self) -> float:
        return statistics.median(self.serialization_ms)

    @property
    def median_crypto_ms(self) -> float:
        return self.median_total_ms - self.median_serialization_ms

    @property
    def spread_ms(self) -> float:
        return max(self.total_ms) - min(self.total_ms)

    @property
    def reference_ms(self) -> float | None:
        return REFERENCE_TIMINGS_MS.get((self.key_bits, self.comparison_bits))


class _SerializationMeter:
    """JSON round trip standing in for the wire; accumulates its cost."""

    def __init__(self) -> None:
        self.seconds = 0.0

    def pass_through(self, payload: dict[str, Any]) -> dict[str, Any]:
        t0 = time.perf_counter()
        result = json.loads(json.dumps(payload, separators=(",", ":")))
        self.seconds += time.perf_counter() - t0
        return result


def _timed_gt(pk, sk, fp, rng, meter, x, y) -> int:
    """One subprotocol invocation with wire-equivalent serialization."""
    server = CompareServer(pk, fp, rng)
    client = CompareClient(sk, pk, fp, rng)
    hexify = lambda c: f"{c.value:x}"
    unhex = lambda h: paillier.Ciphertext(value=int(h, 16), key_id=pk.fingerprint)

    m1 = server.start(y, x)  # core computes [y >= x]; strict gt negates
    d1 = meter.pass_through({"z": hexify(m1.z_enc)})
    m2 = client.split_bits(BlindedDiff(z_enc=unhex(d1["z"])))
    d2 = meter.pass_through({"bits": [hexify(c) for c in m2.bit_encs],
                             "z_high": hexify(m2.z_high_enc)})
    m3 = server.mask_bits(LowBits(
        bit_encs=tuple(unhex(h) for h in d2["bits"]),
        z_high_enc=unhex(d2["z_high"])))
    d3 = meter.pass_through({"terms": [hexify(c) for c in m3.term_encs]})
    m4 = client.zero_flag(MaskedTerms(term_encs=tuple(unhex(h) for h in d3["terms"])))
    d4 = meter.pass_through({"flag": hexify(m4.flag_enc)})
    m5 = server.finish(ZeroFlag(flag_enc=unhex(d4["flag"])))
    d5 = meter.pass_through({"masked": hexify(m5.masked_enc)})
    bit = client.reveal(BlindedResult(masked_enc=unhex(d5["masked"])))
    d6 = meter.pass_through({"bit": bit})
    return 1 - server.absorb(int(d6["bit"]))


def _decision_cycle(pk, sk, fp, rng, meter) -> None:
    """Four comparisons plus the homomorphic trust update of one keystroke."""
    bound = 1 << (fp.value_bits - 1)
    t_val = rng.randrange(bound)
    mu_val = rng.randrange(bound)
    c_val = rng.randrange(bound)
    t_enc = paillier.encrypt(pk, t_val, rng)
    mu_enc = paillier.encrypt(pk, mu_val, rng)
    c_enc = paillier.encrypt(pk, c_val, rng)
    offset = bound

    def off(c):
        return paillier.add_plain(pk, c, offset)

    if _timed_gt(pk, sk, fp, rng, meter, off(t_enc), off(mu_enc)):
        d_enc = paillier.add(pk, t_enc, paillier.negate(pk, mu_enc))
    else:
        d_enc = paillier.add(pk, mu_enc, paillier.negate(pk, t_enc))

    threshold = rng.randrange(bound)
    if _timed_gt(pk, sk, fp, rng, meter, off(d_enc), threshold + offset):
        c_enc = paillier.add(pk, c_enc, paillier.negate(pk, d_enc))
        c_enc = paillier.add(pk, c_enc, paillier.encrypt_signed(pk, threshold, rng))
    else:
        candidate = paillier.add(pk, c_enc, paillier.encrypt(pk, 1, rng))
        if _timed_gt(pk, sk, fp, rng, meter, off(candidate), (bound - 1) + offset):
            c_enc = paillier.encrypt(pk, bound - 1, rng)
        else:
            c_enc = candidate

    # Re-draw the trust operand so the last comparison stays inside the
    # small benchmark bit range regardless of the penalty drift above.
    c_enc = paillier.encrypt(pk, rng.randrange(bound), rng)
    _timed_gt(pk, sk, fp, rng, meter, off(c_enc), rng.randrange(bound) + offset)


def run_bench(config: BenchConfig) -> list[BenchCell]:
    cells = []
    for key_bits in config.key_sizes:
        rng = random.Random(config.seed * 1000003 + key_bits)
        pk, sk = paillier.keygen(key_bits, rng)
        for l in config.bit_lengths:
            fp = FixedPointParams(frac_bits=1, value_bits=max(l, 2),
                                  stat_sec=min(40, pk.n.bit_length() - l - 3))
            cell = BenchCell(key_bits=key_bits, comparison_bits=l)
            for _ in range(config.repetitions):
                meter = _SerializationMeter()
                t0 = time.perf_counter()
                _decision_cycle(pk, sk, fp, rng, meter)
                total = time.perf_counter() - t0
                cell.total_ms.append(total * 1000.0)
                cell.serialization_ms.append(meter.seconds * 1000.0)
            cells.append(cell)
    return cells


def format_report(cells: list[BenchCell], repetitions: int) -> str:
    lines = [
        f"Per-keystroke authentication decision cycle, median of {repetitions} reps.",
        "Reference column: prior published single-machine measurements "
        "(different hardware; qualitative comparison only).",
        "",
        f"{'k':>5} {'l':>4} {'total ms':>10} {'crypto ms':>10} "
        f"{'serial ms':>10} {'spread ms':>10} {'reference ms':>13}",
    ]
    for cell in cells:
        ref = f"{cell.reference_ms:.0f}" if cell.reference_ms is not None else "-"
        lines.append(
            f"{cell.key_bits:>5} {cell.comparison_bits:>4} "
            f"{cell.median_total_ms:>10.2f} {cell.median_crypto_ms:>10.2f} "
            f"{cell.median_serialization_ms:>10.2f} {cell.spread_ms:>10.2f} {ref:>13}")
    return "\n".join(lines)


def to_csv(cells: list[BenchCell]) -> str:
    lines = ["key_bits,comparison_bits,median_total_ms,median_crypto_ms,"
             "median_serialization_ms,spread_ms,reference_ms"]
    for c in cells:
        ref = f"{c.reference_ms:.0f}" if c.reference_ms is not None else ""
        lines.append(f"{c.key_bits},{c.comparison_bits},{c.median_total_ms:.3f},"
                     f"{c.median_crypto_ms:.3f},{c.median_serialization_ms:.3f},"
                     f"{c.spread_ms:.3f},{ref}")
    return "\n".join(lines) + "\n"
