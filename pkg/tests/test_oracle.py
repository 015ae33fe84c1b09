from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bitoracles import RoundOracle, TinyFormat
from fpchar.formats import FP16, FP32, FloatFormat, decode, encode
from fpchar.oracle import (
    ExactNumber,
    RoundingMode,
    exact_value,
    preimage,
    product_remainder,
    round_batch,
    round_precision,
    round_to_format,
)

TINY = FloatFormat(4, 3, True, "tiny")
TINY_REF = TinyFormat(4, 3)


def test_exact_number_is_canonical():
    x = ExactNumber(1, 12, 0)
    assert (x.magnitude, x.scale) == (3, 2)
    assert ExactNumber(-1, 0, 5) == ExactNumber(1, 0, 0)


def test_exact_number_rejects_non_dyadic():
    with pytest.raises(ValueError):
        ExactNumber.from_fraction(Fraction(1, 3))


@given(st.fractions(max_denominator=1 << 20), st.integers(-30, 30))
def test_exact_arithmetic_matches_fractions(q, e):
    # keep only the dyadic part of q
    q = Fraction(q.numerator, 1 << (q.denominator.bit_length()))
    r = Fraction(3, 8) * Fraction(2) ** e
    a, b = ExactNumber.from_fraction(q), ExactNumber.from_fraction(r)
    assert (a + b).to_fraction() == q + r
    assert (a - b).to_fraction() == q - r
    assert (a * b).to_fraction() == q * r
    assert (a < b) == (q < r)


def test_from_datum_rejects_specials():
    with pytest.raises(ValueError):
        ExactNumber.from_datum(decode(0x7F800000, FP32), FP32)


@pytest.mark.parametrize("mode", ["nearest-even", "toward-zero"])
def test_rounding_matches_enumeration_on_tiny_format(mode):
    ref = RoundOracle(TINY_REF)
    step = Fraction(1, 1 << 12)
    q = -Fraction(300)
    while q <= 300:
        expected = ref.round(q, mode)
        got = encode(round_to_format(ExactNumber.from_fraction(q), TINY, mode, zero_sign=-1 if q < 0 else 1), TINY)
        if q == 0:
            expected &= ~(1 << 7)
        assert got == expected, q
        q += step * 997


@pytest.mark.parametrize(
    "q, mode, expected",
    [
        (Fraction(3, 2) - Fraction(1, 1 << 24), "nearest-even", 0x3FC00000),
        (Fraction(3, 2) - Fraction(1, 1 << 24), "toward-zero", 0x3FBFFFFF),
        (Fraction(1) + Fraction(3, 1 << 25), "toward-positive", 0x3F800001),
        (-(Fraction(1) + Fraction(3, 1 << 25)), "toward-negative", 0xBF800001),
        (-(Fraction(1) + Fraction(3, 1 << 25)), "toward-positive", 0xBF800000),
        (Fraction(1, 1 << 149), "nearest-even", 0x00000001),
        (Fraction(1, 1 << 150), "nearest-even", 0x00000000),
    ],
)
def test_round_to_fp32(q, mode, expected):
    assert encode(round_to_format(ExactNumber.from_fraction(q), FP32, mode), FP32) == expected


def test_overflow_policy():
    big = ExactNumber.from_int(1, 200)
    assert round_to_format(big, FP32).is_inf
    assert round_to_format(big, FP32, RoundingMode.TOWARD_ZERO).is_inf
    sat = round_to_format(big, FP32, saturate=True)
    assert encode(sat, FP32) == 0x7F7FFFFF


def test_flush_subnormals():
    tiny = ExactNumber.from_int(3, -140)
    assert round_to_format(tiny, FP32, flush_subnormals=True).is_zero
    assert not round_to_format(tiny, FP32).is_zero


def test_round_precision():
    x = ExactNumber.from_int(0b101101)
    assert round_precision(x, 3, "toward-zero").to_fraction() == 0b101000
    assert round_precision(x, 3, "nearest-even").to_fraction() == 0b110000
    assert round_precision(x, 8, "toward-zero") == x


def test_product_remainder_is_exact_error():
    x = decode(0x3FAAAAAB, FP32)
    y = decode(0x40490FDB, FP32)
    rem = product_remainder(x, y, FP32)
    p = exact_value(x, FP32) * exact_value(y, FP32)
    rounded = round_to_format(p, FP32)
    assert (exact_value(rounded, FP32) + rem) == p
    # x = 1 makes the product exact
    assert product_remainder(decode(0x3F800000, FP32), y, FP32).is_zero


@given(st.integers(1, 0x7F7FFFFF), st.sampled_from(list(RoundingMode)))
def test_preimage_brackets_the_value(bits, mode):
    d = decode(bits, FP32)
    if not d.is_finite or d.is_zero:
        return
    lo, hi, lo_closed, hi_closed = preimage(d, FP32, mode)
    v = exact_value(d, FP32).to_fraction()
    assert lo <= v <= hi
    probes = [lo, hi, (lo + hi) / 2]
    for q in probes:
        inside = (lo < q < hi) or (q == lo and lo_closed) or (q == hi and hi_closed)
        if inside and q != 0:
            assert round_to_format(ExactNumber.from_fraction(q), FP32, mode) == d


def test_round_batch_matches_scalar():
    rng = np.random.default_rng(5)
    sig = rng.integers(1, 1 << 48, size=2000, dtype=np.uint64)
    scale = rng.integers(-60, 20, size=2000)
    neg = rng.integers(0, 2, size=2000).astype(bool)
    for mode in RoundingMode:
        bits, ok = round_batch(sig, scale, neg, FP32, mode)
        for s, e, n, b, good in zip(sig.tolist(), scale.tolist(), neg.tolist(), bits.tolist(), ok.tolist()):
            if good:
                x = ExactNumber(-1 if n else 1, s, e)
                assert b == encode(round_to_format(x, FP32, mode), FP32)


def test_fp16_rounding_matches_numpy():
    rng = np.random.default_rng(11)
    xs = rng.normal(scale=300.0, size=3000)
    for x in xs:
        ours = encode(round_to_format(ExactNumber.from_float(float(x)), FP16), FP16)
        assert ours == int(np.array([x], dtype=np.float16).view(np.uint16)[0])
