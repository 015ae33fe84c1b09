"""Infinitely precise reference arithmetic over dyadic rationals.

Every finite float is a dyadic rational, and so are their exact sums and
products.  :class:`ExactNumber` holds such values without error; rounding
back into a :class:`~fpchar.formats.FloatFormat` is done once, by
:func:`round_to_format`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .formats import FloatClass, FloatDatum, FloatFormat, infinity, max_finite, zero


class RoundingMode(enum.Enum):
    TOWARD_ZERO = "toward-zero"
    NEAREST_EVEN = "nearest-even"
    TOWARD_POSITIVE = "toward-positive"
    TOWARD_NEGATIVE = "toward-negative"

    @classmethod
    def parse(cls, value) -> RoundingMode:
        if isinstance(value, cls):
            return value
        return cls(value)


@dataclass(frozen=True)
class ExactNumber:
    """``sign * magnitude * 2**scale``, kept canonical (odd magnitude, +0)."""

    sign: int
    magnitude: int
    scale: int

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        m, s = self.magnitude, self.scale
        if m == 0:
            object.__setattr__(self, "sign", 1)
            object.__setattr__(self, "scale", 0)
            return
        tz = (m & -m).bit_length() - 1
        if tz:
            object.__setattr__(self, "magnitude", m >> tz)
            object.__setattr__(self, "scale", s + tz)

    @classmethod
    def from_int(cls, n: int, scale: int = 0) -> ExactNumber:
        return cls(-1 if n < 0 else 1, abs(n), scale)

    @classmethod
    def from_fraction(cls, q) -> ExactNumber:
        q = Fraction(q)
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{q} is not a dyadic rational")
        return cls.from_int(q.numerator, -(den.bit_length() - 1))

    @classmethod
    def from_float(cls, x: float) -> ExactNumber:
        return cls.from_fraction(Fraction(x))

    @classmethod
    def from_datum(cls, d: FloatDatum, fmt: FloatFormat) -> ExactNumber:
        if not d.is_finite:
            raise ValueError(f"oracle arithmetic is defined on finite values only, got {d.cls.value}")
        return cls(d.sign, d.significand, d.exponent - fmt.fraction_bits)

    @property
    def is_zero(self) -> bool:
        return self.magnitude == 0

    @property
    def exponent(self) -> int:
        """Position of the leading bit: ``2**exponent <= |x| < 2**(exponent+1)``."""
        if self.magnitude == 0:
            raise ValueError("zero has no exponent")
        return self.scale + self.magnitude.bit_length() - 1

    @property
    def signed_magnitude(self) -> int:
        return self.sign * self.magnitude

    def to_fraction(self) -> Fraction:
        if self.scale >= 0:
            return Fraction(self.signed_magnitude << self.scale)
        return Fraction(self.signed_magnitude, 1 << -self.scale)

    def __neg__(self) -> ExactNumber:
        return ExactNumber(-self.sign, self.magnitude, self.scale)

    def __abs__(self) -> ExactNumber:
        return ExactNumber(1, self.magnitude, self.scale)

    def __add__(self, other: ExactNumber) -> ExactNumber:
        return exact_add(self, other)

    def __sub__(self, other: ExactNumber) -> ExactNumber:
        return exact_add(self, -other)

    def __mul__(self, other: ExactNumber) -> ExactNumber:
        return exact_mul(self, other)

    def _compare(self, other: ExactNumber) -> int:
        d = self - other
        return 0 if d.is_zero else d.sign

    def __lt__(self, other):
        return self._compare(other) < 0

    def __le__(self, other):
        return self._compare(other) <= 0

    def __gt__(self, other):
        return self._compare(other) > 0

    def __ge__(self, other):
        return self._compare(other) >= 0

    def __repr__(self):
        return f"ExactNumber({self.to_fraction()})"


def exact_add(a: ExactNumber, b: ExactNumber) -> ExactNumber:
    s = min(a.scale, b.scale)
    total = (a.signed_magnitude << (a.scale - s)) + (b.signed_magnitude << (b.scale - s))
    return ExactNumber.from_int(total, s)


def exact_mul(a: ExactNumber, b: ExactNumber) -> ExactNumber:
    return ExactNumber(a.sign * b.sign, a.magnitude * b.magnitude, a.scale + b.scale)


def rounds_up(mode: RoundingMode, negative: bool, kept: int, rem: int, half: int) -> bool:
    if rem == 0:
        return False
    if mode is RoundingMode.TOWARD_ZERO:
        return False
    if mode is RoundingMode.NEAREST_EVEN:
        return rem > half or (rem == half and kept & 1 == 1)
    if mode is RoundingMode.TOWARD_POSITIVE:
        return not negative
    return negative


def round_to_format(
    x: ExactNumber,
    fmt: FloatFormat,
    mode: RoundingMode = RoundingMode.NEAREST_EVEN,
    *,
    saturate: bool = False,
    flush_subnormals: bool = False,
    zero_sign: int = 1,
) -> FloatDatum:
    """Correctly round ``x`` into ``fmt``.

    Overflow gives infinity unless ``saturate`` (or the format has no
    infinity), in which case the largest finite value is returned.  An exact
    zero comes back with ``zero_sign``.
    """
    mode = RoundingMode.parse(mode)
    if x.is_zero:
        return zero(fmt, zero_sign)
    f = fmt.fraction_bits
    negative = x.sign < 0
    e = max(x.exponent, fmt.e_min)
    quantum = e - f
    shift = quantum - x.scale
    if shift <= 0:
        sig = x.magnitude << -shift
    else:
        sig = x.magnitude >> shift
        rem = x.magnitude & ((1 << shift) - 1)
        if rounds_up(mode, negative, sig, rem, 1 << (shift - 1)):
            sig += 1
            if sig >> (f + 1):
                sig >>= 1
                e += 1
    if e > fmt.e_max:
        if saturate or not fmt.supports_specials:
            return FloatDatum(FloatClass.NORMAL, x.sign, fmt.e_max, max_finite(fmt).significand)
        return infinity(fmt, x.sign)
    if sig == 0:
        return zero(fmt, x.sign)
    if sig >> f:
        return FloatDatum(FloatClass.NORMAL, x.sign, e, sig)
    if flush_subnormals:
        return zero(fmt, x.sign)
    return FloatDatum(FloatClass.SUBNORMAL, x.sign, fmt.e_min, sig)


def round_precision(x: ExactNumber, p: int, mode: RoundingMode) -> ExactNumber:
    """Round to ``p`` significant bits with an unbounded exponent range."""
    mode = RoundingMode.parse(mode)
    n = x.magnitude.bit_length()
    if n <= p:
        return x
    shift = n - p
    kept = x.magnitude >> shift
    rem = x.magnitude & ((1 << shift) - 1)
    if rounds_up(mode, x.sign < 0, kept, rem, 1 << (shift - 1)):
        kept += 1
    return ExactNumber(x.sign, kept, x.scale + shift)


def exact_value(d: FloatDatum, fmt: FloatFormat) -> ExactNumber:
    return ExactNumber.from_datum(d, fmt)


def product_remainder(x: FloatDatum, y: FloatDatum, fmt: FloatFormat) -> ExactNumber:
    """``x*y - round_nearest_even(x*y)``, the exact error of a rounded product."""
    p = exact_value(x, fmt) * exact_value(y, fmt)
    r = round_to_format(p, fmt, RoundingMode.NEAREST_EVEN)
    if not r.is_finite:
        raise ValueError("product overflows the format")
    return p - exact_value(r, fmt)


def preimage(d: FloatDatum, fmt: FloatFormat, mode: RoundingMode):
    """Real interval that ``round_to_format`` maps onto the nonzero finite ``d``.

    Returns ``(lo, hi, lo_closed, hi_closed)`` with :class:`Fraction` bounds.
    """
    mode = RoundingMode.parse(mode)
    if not d.is_finite or d.is_zero:
        raise ValueError("preimage is defined for nonzero finite values")
    if d.negative:
        mirrored = {
            RoundingMode.TOWARD_POSITIVE: RoundingMode.TOWARD_NEGATIVE,
            RoundingMode.TOWARD_NEGATIVE: RoundingMode.TOWARD_POSITIVE,
        }.get(mode, mode)
        lo, hi, lc, hc = preimage(abs(d), fmt, mirrored)
        return -hi, -lo, hc, lc
    v = exact_value(d, fmt).to_fraction()
    ulp = Fraction(2) ** (d.exponent - fmt.fraction_bits)
    at_binade_floor = d.significand == 1 << fmt.fraction_bits and d.exponent > fmt.e_min
    ulp_below = ulp / 2 if at_binade_floor else ulp
    if mode in (RoundingMode.TOWARD_ZERO, RoundingMode.TOWARD_NEGATIVE):
        return v, v + ulp, True, False
    if mode is RoundingMode.TOWARD_POSITIVE:
        return v - ulp_below, v, False, True
    even = d.significand % 2 == 0
    return v - ulp_below / 2, v + ulp / 2, even, even


def _bit_length(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    n = np.minimum(np.frexp(x.astype(np.float64))[1], 64).astype(np.int64)
    # the float conversion may round up past a power of two
    over = (n > 0) & ((np.uint64(1) << np.clip(n - 1, 0, 63).astype(np.uint64)) > x)
    return n - over


def round_batch(sig, scale, negative, fmt: FloatFormat, mode: RoundingMode):
    """Vectorised :func:`round_to_format` for results landing in the normal range.

    ``sig`` (uint64) times ``2**scale`` is the magnitude.  Returns the encoded
    bits and a mask of the lanes that were handled; zero, subnormal and
    overflowing lanes are left for the scalar path.
    """
    mode = RoundingMode.parse(mode)
    sig = np.asarray(sig, dtype=np.uint64)
    scale = np.asarray(scale, dtype=np.int64)
    negative = np.asarray(negative, dtype=bool)
    f = fmt.fraction_bits
    lead = _bit_length(sig) - 1
    e = scale + lead
    ok = (sig != 0) & (e >= fmt.e_min) & (e <= fmt.e_max)
    shift = lead - f
    down = np.clip(shift, 0, 63).astype(np.uint64)
    up_shift = np.clip(-shift, 0, 63).astype(np.uint64)
    kept = np.where(shift > 0, sig >> down, sig << up_shift)
    rem = np.where(shift > 0, sig & ((np.uint64(1) << down) - np.uint64(1)), np.uint64(0))
    half = np.where(shift > 0, np.uint64(1) << np.clip(shift - 1, 0, 63).astype(np.uint64), np.uint64(0))
    if mode is RoundingMode.TOWARD_ZERO:
        bump = np.zeros(sig.shape, dtype=bool)
    elif mode is RoundingMode.NEAREST_EVEN:
        bump = (rem > half) | ((rem == half) & (rem != 0) & ((kept & np.uint64(1)) == 1))
    elif mode is RoundingMode.TOWARD_POSITIVE:
        bump = (rem != 0) & ~negative
    else:
        bump = (rem != 0) & negative
    kept = kept + bump.astype(np.uint64)
    carry = (kept >> np.uint64(f + 1)) != 0
    kept = np.where(carry, kept >> np.uint64(1), kept)
    e = e + carry
    ok &= e <= fmt.e_max
    biased = np.clip(e + fmt.bias, 0, (1 << fmt.exponent_bits) - 1).astype(np.uint64)
    bits = (
        (negative.astype(np.uint64) << np.uint64(fmt.width - 1))
        | (biased << np.uint64(f))
        | (kept & np.uint64(fmt.fraction_mask))
    )
    return bits, ok
