"""Reference models written from first principles for the tests.

Nothing here imports the package's arithmetic: values come straight from
the bit fields, rounding is a search over the enumerated format, products
are summed cell by cell from the partial-product matrix.
"""

from __future__ import annotations

import bisect
from fractions import Fraction


class TinyFormat:
    def __init__(self, exponent_bits: int, fraction_bits: int):
        self.e = exponent_bits
        self.f = fraction_bits
        self.bias = (1 << (exponent_bits - 1)) - 1
        self.width = 1 + exponent_bits + fraction_bits
        self.top = (1 << exponent_bits) - 1

    def fields(self, bits: int):
        return bits >> (self.width - 1), (bits >> self.f) & self.top, bits & ((1 << self.f) - 1)

    def is_finite(self, bits: int) -> bool:
        return self.fields(bits)[1] != self.top

    def significand(self, bits: int) -> tuple[int, int]:
        """(integer significand, weight exponent) with value = sig * 2**weight."""
        _, ef, fr = self.fields(bits)
        if ef == 0:
            return fr, 1 - self.bias - self.f
        return fr | (1 << self.f), ef - self.bias - self.f

    def value(self, bits: int) -> Fraction:
        s, _, _ = self.fields(bits)
        sig, w = self.significand(bits)
        v = Fraction(sig) * Fraction(2) ** w
        return -v if s else v

    def finite_patterns(self) -> list[int]:
        return [b for b in range(1 << self.width) if self.is_finite(b)]

    def max_value(self) -> Fraction:
        return self.value(((self.top - 1) << self.f) | ((1 << self.f) - 1))

    def inf(self, negative: bool) -> int:
        return (int(negative) << (self.width - 1)) | (self.top << self.f)


class RoundOracle:
    """Rounds a rational by searching the sorted list of representable magnitudes."""

    def __init__(self, fmt: TinyFormat):
        self.fmt = fmt
        mags = {}
        for b in range(1 << (fmt.width - 1)):
            if fmt.is_finite(b):
                mags[fmt.value(b)] = b
        # the value just past the largest finite one, used to detect overflow
        self.beyond = Fraction(2) ** (fmt.top - 1 - fmt.bias + 1)
        self.values = sorted(mags)
        self.bits = [mags[v] for v in self.values]

    def _neighbours(self, m: Fraction):
        i = bisect.bisect_right(self.values, m) - 1
        lo = self.values[i]
        hi = self.values[i + 1] if i + 1 < len(self.values) else self.beyond
        return i, lo, hi

    def round(self, q: Fraction, mode: str, zero_negative: bool = False) -> int:
        fmt = self.fmt
        negative = q < 0 or (q == 0 and zero_negative)
        sign = int(negative) << (fmt.width - 1)
        m = abs(q)
        if m >= self.beyond:
            return fmt.inf(negative)
        i, lo, hi = self._neighbours(m)
        if m == lo:
            return sign | self.bits[i]
        if mode == "toward-zero":
            pick_hi = False
        elif mode == "nearest-even":
            if m - lo != hi - m:
                pick_hi = hi - m < m - lo
            else:
                # at a tie the neighbour with an even last bit wins; beyond counts as even
                pick_hi = hi == self.beyond or self.bits[i + 1] % 2 == 0
        else:
            raise ValueError(mode)
        if not pick_hi:
            return sign | self.bits[i]
        if hi == self.beyond:
            return fmt.inf(negative)
        return sign | self.bits[i + 1]


def partial_product_matrix(a_sig: int, b_sig: int, drop_below: int = 0, bias: int = 0) -> int:
    """Sum of the cells ``a_i * b_j * 2**(i+j)`` with ``i + j >= drop_below``, plus ``bias * 2**drop_below``."""
    total = 0
    for i in range(a_sig.bit_length()):
        if not a_sig >> i & 1:
            continue
        for j in range(b_sig.bit_length()):
            if b_sig >> j & 1 and i + j >= drop_below:
                total += 1 << (i + j)
    return total + (bias << drop_below)


def floor_log2(q: Fraction) -> int:
    q = abs(q)
    e = q.numerator.bit_length() - q.denominator.bit_length()
    if Fraction(2) ** e > q:
        e -= 1
    elif Fraction(2) ** (e + 1) <= q:
        e += 1
    return e


def chop_window_add(x: Fraction, y: Fraction, precision: int, guard: int) -> Fraction:
    """Unrounded sum after cutting the smaller operand to the adder window.

    The window holds ``precision + guard`` bits below and including the
    leading bit of the larger operand; bits of the smaller one under it are
    discarded (truncated toward zero).
    """
    if x == 0 or y == 0:
        return x + y
    big, small = (x, y) if abs(x) >= abs(y) else (y, x)
    quantum = Fraction(2) ** (floor_log2(big) - precision - guard + 1)
    kept = abs(small) // quantum * quantum
    return big + (kept if small > 0 else -kept)


def chop_to_precision(q: Fraction, precision: int) -> Fraction:
    if q == 0:
        return q
    quantum = Fraction(2) ** (floor_log2(q) - precision + 1)
    kept = abs(q) // quantum * quantum
    return kept if q > 0 else -kept
