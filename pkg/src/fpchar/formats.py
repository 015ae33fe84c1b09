"""Binary floating-point formats and bit-level encode/decode.

A value of a format with ``f`` fraction bits is held as a :class:`FloatDatum`
whose integer ``significand`` includes the hidden bit, so a finite datum is
worth ``sign * significand * 2**(exponent - f)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property


class FloatClass(enum.Enum):
    ZERO = "zero"
    SUBNORMAL = "subnormal"
    NORMAL = "normal"
    INFINITY = "infinity"
    QNAN = "quiet-nan"
    SNAN = "signaling-nan"

    @property
    def is_finite(self) -> bool:
        return self in (FloatClass.ZERO, FloatClass.SUBNORMAL, FloatClass.NORMAL)

    @property
    def is_nan(self) -> bool:
        return self in (FloatClass.QNAN, FloatClass.SNAN)


@dataclass(frozen=True)
class FloatFormat:
    exponent_bits: int
    fraction_bits: int
    supports_specials: bool = True
    name: str = ""

    def __post_init__(self):
        if self.exponent_bits < 2 or self.fraction_bits < 1:
            raise ValueError(f"degenerate format ({self.exponent_bits}, {self.fraction_bits})")

    @cached_property
    def width(self) -> int:
        return 1 + self.exponent_bits + self.fraction_bits

    @cached_property
    def precision(self) -> int:
        """Significand bits including the hidden bit."""
        return self.fraction_bits + 1

    @cached_property
    def bias(self) -> int:
        return (1 << (self.exponent_bits - 1)) - 1

    @cached_property
    def e_min(self) -> int:
        return 1 - self.bias

    @cached_property
    def e_max(self) -> int:
        top = (1 << self.exponent_bits) - 1
        if self.supports_specials:
            top -= 1
        return top - self.bias

    @cached_property
    def sign_mask(self) -> int:
        return 1 << (self.width - 1)

    @cached_property
    def fraction_mask(self) -> int:
        return (1 << self.fraction_bits) - 1

    @cached_property
    def quiet_bit(self) -> int:
        return 1 << (self.fraction_bits - 1)

    @cached_property
    def hex_digits(self) -> int:
        return (self.width + 3) // 4

    def hex(self, bits: int) -> str:
        return f"0x{bits:0{self.hex_digits}x}"

    def __str__(self):
        return self.name or f"e{self.exponent_bits}f{self.fraction_bits}"


FP16 = FloatFormat(5, 10, True, "fp16")
# ATI's 24-bit specials are undocumented; treat the top exponent as ordinary.
FP24 = FloatFormat(7, 16, False, "fp24")
FP32 = FloatFormat(8, 23, True, "fp32")
FP64 = FloatFormat(11, 52, True, "fp64")

FORMATS = {f.name: f for f in (FP16, FP24, FP32, FP64)}


def get_format(name: str) -> FloatFormat:
    try:
        return FORMATS[name]
    except KeyError:
        raise ValueError(f"unknown format {name!r}; expected one of {sorted(FORMATS)}") from None


@dataclass(frozen=True)
class FloatDatum:
    """A decoded floating-point value.

    ``exponent`` is unbiased.  Zero and subnormals carry ``e_min``; infinities
    and NaNs carry ``e_max + 1`` and their raw fraction field (NaN payload,
    quiet bit included) as ``significand``.
    """

    cls: FloatClass
    sign: int
    exponent: int
    significand: int

    @property
    def negative(self) -> bool:
        return self.sign < 0

    @property
    def is_finite(self) -> bool:
        return self.cls.is_finite

    @property
    def is_zero(self) -> bool:
        return self.cls is FloatClass.ZERO

    @property
    def is_nan(self) -> bool:
        return self.cls.is_nan

    @property
    def is_inf(self) -> bool:
        return self.cls is FloatClass.INFINITY

    def __neg__(self) -> FloatDatum:
        return FloatDatum(self.cls, -self.sign, self.exponent, self.significand)

    def __abs__(self) -> FloatDatum:
        return FloatDatum(self.cls, 1, self.exponent, self.significand)


def decode(bits: int, fmt: FloatFormat) -> FloatDatum:
    if bits < 0 or bits >> fmt.width:
        raise ValueError(f"{bits:#x} does not fit in {fmt.width} bits")
    sign = -1 if bits & fmt.sign_mask else 1
    biased = (bits >> fmt.fraction_bits) & ((1 << fmt.exponent_bits) - 1)
    frac = bits & fmt.fraction_mask
    top = (1 << fmt.exponent_bits) - 1
    if biased == top and fmt.supports_specials:
        if frac == 0:
            return FloatDatum(FloatClass.INFINITY, sign, fmt.e_max + 1, 0)
        cls = FloatClass.QNAN if frac & fmt.quiet_bit else FloatClass.SNAN
        return FloatDatum(cls, sign, fmt.e_max + 1, frac)
    if biased == 0:
        cls = FloatClass.SUBNORMAL if frac else FloatClass.ZERO
        return FloatDatum(cls, sign, fmt.e_min, frac)
    return FloatDatum(FloatClass.NORMAL, sign, biased - fmt.bias, frac | (1 << fmt.fraction_bits))


def encode(d: FloatDatum, fmt: FloatFormat) -> int:
    f = fmt.fraction_bits
    if d.significand < 0 or d.significand >> (f + 1):
        raise ValueError(f"significand {d.significand:#x} wider than {f + 1} bits")
    if d.sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {d.sign}")
    sign = fmt.sign_mask if d.sign < 0 else 0
    top = (1 << fmt.exponent_bits) - 1
    cls = d.cls
    if cls in (FloatClass.INFINITY, FloatClass.QNAN, FloatClass.SNAN):
        if not fmt.supports_specials:
            raise ValueError(f"{fmt} has no {cls.value} encoding")
        frac = d.significand & fmt.fraction_mask
        if cls is FloatClass.INFINITY:
            frac = 0
        elif cls is FloatClass.QNAN:
            frac |= fmt.quiet_bit
        elif frac & fmt.quiet_bit or frac == 0:
            raise ValueError("signaling NaN needs a nonzero payload with the quiet bit clear")
        return sign | (top << f) | frac
    if cls is FloatClass.ZERO:
        return sign
    if cls is FloatClass.SUBNORMAL:
        if d.exponent != fmt.e_min or d.significand >> f or d.significand == 0:
            raise ValueError("malformed subnormal datum")
        return sign | d.significand
    if not (fmt.e_min <= d.exponent <= fmt.e_max) or not d.significand >> f:
        raise ValueError("malformed normal datum")
    return sign | ((d.exponent + fmt.bias) << f) | (d.significand & fmt.fraction_mask)


def classify(bits: int, fmt: FloatFormat) -> FloatClass:
    return decode(bits, fmt).cls


def max_finite(fmt: FloatFormat) -> FloatDatum:
    return FloatDatum(FloatClass.NORMAL, 1, fmt.e_max, (1 << fmt.precision) - 1)


def min_subnormal(fmt: FloatFormat) -> FloatDatum:
    return FloatDatum(FloatClass.SUBNORMAL, 1, fmt.e_min, 1)


def min_normal(fmt: FloatFormat) -> FloatDatum:
    return FloatDatum(FloatClass.NORMAL, 1, fmt.e_min, 1 << fmt.fraction_bits)


def zero(fmt: FloatFormat, sign: int = 1) -> FloatDatum:
    return FloatDatum(FloatClass.ZERO, sign, fmt.e_min, 0)


def infinity(fmt: FloatFormat, sign: int = 1) -> FloatDatum:
    return FloatDatum(FloatClass.INFINITY, sign, fmt.e_max + 1, 0)


def quiet_nan(fmt: FloatFormat, sign: int = 1, payload: int = 0) -> FloatDatum:
    return FloatDatum(FloatClass.QNAN, sign, fmt.e_max + 1, fmt.quiet_bit | payload)


def signaling_nan(fmt: FloatFormat, sign: int = 1, payload: int = 1) -> FloatDatum:
    if payload == 0 or payload & fmt.quiet_bit:
        raise ValueError("signaling NaN payload must be nonzero below the quiet bit")
    return FloatDatum(FloatClass.SNAN, sign, fmt.e_max + 1, payload)


def power_of_two(e: int, fmt: FloatFormat, sign: int = 1) -> FloatDatum:
    """2**e as a datum; raises when it is not representable."""
    f = fmt.fraction_bits
    if fmt.e_min <= e <= fmt.e_max:
        return FloatDatum(FloatClass.NORMAL, sign, e, 1 << f)
    shift = e - (fmt.e_min - f)
    if 0 <= shift < f:
        return FloatDatum(FloatClass.SUBNORMAL, sign, fmt.e_min, 1 << shift)
    raise ValueError(f"2**{e} is not representable in {fmt}")


def negate_bits(bits: int, fmt: FloatFormat) -> int:
    return bits ^ fmt.sign_mask


def ulp_exponent(d: FloatDatum, fmt: FloatFormat) -> int:
    """log2 of the unit in the last place of a finite datum."""
    return d.exponent - fmt.fraction_bits
