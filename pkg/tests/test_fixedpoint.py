from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ppkda.errors import RangeOverflow
from ppkda.fixedpoint import FixedPointParams, decode, encode, to_offset_domain

FP16 = FixedPointParams(frac_bits=16, value_bits=40, stat_sec=40)


def test_encode_zero():
    assert encode(0, FP16) == 0


def test_encode_one():
    assert encode(1.0, FP16) == 65536


def test_encode_one_thirteenth():
    # Independent oracle: exact rational rounding of 65536/13.
    num, den = 65536, 13
    expected = (2 * num + den) // (2 * den)  # round half away, positive operand
    assert expected == 5041
    assert encode(Fraction(1, 13), FP16) == 5041


def test_decode_examples():
    assert decode(65536, FP16) == 1.0
    assert decode(0, FP16) == 0
    assert abs(decode(5041, FP16) - 1 / 13) <= 2 ** -17


def test_round_half_away_from_zero():
    half = Fraction(1, 2) / FP16.scale
    assert encode(half, FP16) == 1
    assert encode(-half, FP16) == -1


def test_offset_domain_examples():
    assert to_offset_domain(0, FP16) == 2 ** 39
    assert to_offset_domain(-(2 ** 39) + 1, FP16) == 1
    assert to_offset_domain(7, FixedPointParams(frac_bits=4, value_bits=8, stat_sec=8)) == 135


def test_encode_overflow():
    with pytest.raises(RangeOverflow):
        encode(2.0 ** 30, FP16)
    with pytest.raises(RangeOverflow):
        to_offset_domain(2 ** 39, FP16)
    with pytest.raises(RangeOverflow):
        to_offset_domain(-(2 ** 39), FP16)


def test_param_validation():
    with pytest.raises(ValueError):
        FixedPointParams(frac_bits=0)
    with pytest.raises(ValueError):
        FixedPointParams(frac_bits=16, value_bits=16)
    with pytest.raises(ValueError):
        FixedPointParams(stat_sec=0)


BOUND = float(2 ** 22)  # comfortably inside the 40-bit signed range at f=16


@given(st.floats(min_value=-BOUND, max_value=BOUND, allow_nan=False))
def test_round_trip_error_bound(x):
    assert abs(decode(encode(x, FP16), FP16) - x) <= 2 ** -17


@given(st.integers(min_value=-(2 ** 39) + 1, max_value=2 ** 39 - 1),
       st.integers(min_value=-(2 ** 39) + 1, max_value=2 ** 39 - 1))
def test_offset_domain_preserves_order(a, b):
    assert (a < b) == (to_offset_domain(a, FP16) < to_offset_domain(b, FP16))
    assert 0 <= to_offset_domain(a, FP16) < 2 ** 40


def test_quantized_linearity_semantics():
    # k * encode(x) equals encoding k*x *after* x was already rounded --
    # the semantics the protocol's scalar multiplication relies on.
    x = Fraction(1, 13)
    k = 80
    assert k * encode(x, FP16) == 80 * 5041
    # ... which is not in general encode(k * x):
    assert k * encode(x, FP16) != encode(k * x, FP16)
