"""Fixed-point encoding of real-valued statistics into signed integers.

Encrypted arithmetic and the comparison subprotocol operate on integers,
so every real quantity (1/sigma, mu/sigma, thresholds, trust level) is
scaled by 2**frac_bits and rounded.  Rounding is half-away-from-zero so
the plaintext quantized oracle and the encrypted pipeline agree
bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import RangeOverflow


@dataclass(frozen=True)
class FixedPointParams:
    """Scaling contract binding reals to protocol integers.

    frac_bits: scale is 2**frac_bits.
    value_bits: compared values must fit the signed range (-2**(l-1), 2**(l-1)).
    stat_sec: statistical blinding bits used by the comparison subprotocol.
    """

    frac_bits: int = 16
    value_bits: int = 40
    stat_sec: int = 40

    def __post_init__(self) -> None:
        if self.frac_bits < 1:
            raise ValueError("frac_bits must be >= 1")
        if self.value_bits <= self.frac_bits:
            raise ValueError("value_bits must exceed frac_bits")
        if self.stat_sec < 1:
            raise ValueError("stat_sec must be >= 1")

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def max_magnitude(self) -> int:
        """Exclusive bound on |raw| for encoded values."""
        return 1 << (self.value_bits - 1)


DEFAULT_PARAMS = FixedPointParams()


def encode(x: float | Fraction, params: FixedPointParams = DEFAULT_PARAMS) -> int:
    """Encode a real as round(x * 2**frac_bits), ties away from zero."""
    scaled = Fraction(x) * params.scale
    raw = _round_half_away(scaled)
    if abs(raw) >= params.max_magnitude:
        raise RangeOverflow(f"{x} does not fit {params.value_bits}-bit signed range")
    return raw


def decode(raw: int, params: FixedPointParams = DEFAULT_PARAMS) -> float:
    """Inverse of encode up to quantization: raw / 2**frac_bits."""
    return raw / params.scale


def to_offset_domain(raw: int, params: FixedPointParams = DEFAULT_PARAMS) -> int:
    """Map a signed raw value into [0, 2**value_bits), preserving order.

    The comparison subprotocol only handles non-negative inputs, so both
    sides of every comparison are shifted by 2**(value_bits - 1) first.
    """
    if abs(raw) >= params.max_magnitude:
        raise RangeOverflow(f"raw value {raw} outside signed {params.value_bits}-bit range")
    return raw + params.max_magnitude


def _round_half_away(x: Fraction) -> int:
    if x >= 0:
        return int(x + Fraction(1, 2))
    return -int(-x + Fraction(1, 2))
