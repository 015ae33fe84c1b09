"""Bit-exact models of non-IEEE adders, multipliers and MAD units.

Operands are :class:`FloatDatum` values of one format.  Internally the units
work on :class:`ExactNumber` values so that an operand wider than the
format (the retained product inside a fused MAD) can flow into the adder.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..formats import (
    FloatClass,
    FloatDatum,
    FloatFormat,
    decode,
    encode,
    infinity,
    max_finite,
    zero,
)
from ..oracle import (
    ExactNumber,
    RoundingMode,
    exact_value,
    round_batch,
    round_precision,
    round_to_format,
)

MAX_GUARD_BITS = 8


def _coerce_mode(obj, attr="rounding"):
    object.__setattr__(obj, attr, RoundingMode.parse(getattr(obj, attr)))


@dataclass(frozen=True)
class AdderConfig:
    guard_bits: int = 0
    sticky_enabled: bool = False
    rounding: RoundingMode = RoundingMode.TOWARD_ZERO

    def __post_init__(self):
        _coerce_mode(self)
        if not 0 <= self.guard_bits <= MAX_GUARD_BITS:
            raise ValueError(f"guard_bits must be in 0..{MAX_GUARD_BITS}, got {self.guard_bits}")


@dataclass(frozen=True)
class MultiplierConfig:
    """Truncated partial-product multiplier.

    Columns ``0 .. truncation_column-1`` of the full ``2(f+1)``-wide partial
    product array are never summed.  ``bias_constant`` is added in units of
    the lowest kept column, i.e. it contributes ``c * 2**k`` to the raw sum.
    """

    truncation_column: int = 0
    bias_constant: int = 0
    rounding: RoundingMode = RoundingMode.TOWARD_ZERO
    sign_magnitude: bool = True

    def __post_init__(self):
        _coerce_mode(self)
        k, c = self.truncation_column, self.bias_constant
        if k < 0:
            raise ValueError("truncation_column must be >= 0")
        if not 0 <= c < (1 << k) and not (k == 0 and c == 0):
            raise ValueError(f"bias_constant must satisfy 0 <= c < 2**k, got c={c}, k={k}")

    def check(self, fmt: FloatFormat):
        if self.truncation_column > fmt.precision:
            raise ValueError(f"truncation column {self.truncation_column} exceeds {fmt.precision} for {fmt}")

    def mode_for(self, negative: bool) -> RoundingMode:
        # A two's-complement datapath chops the signed value, i.e. floors it.
        if not self.sign_magnitude and negative and self.rounding is RoundingMode.TOWARD_ZERO:
            return RoundingMode.TOWARD_NEGATIVE
        return self.rounding


@dataclass(frozen=True)
class MadConfig:
    multiplier: MultiplierConfig = field(default_factory=MultiplierConfig)
    adder: AdderConfig = field(default_factory=AdderConfig)
    # None means the working precision (no fused behaviour).
    product_kept_bits: int | None = None

    def kept_bits(self, fmt: FloatFormat) -> int:
        p = fmt.precision if self.product_kept_bits is None else self.product_kept_bits
        if p < fmt.precision:
            raise ValueError(f"product_kept_bits {p} is below the working precision {fmt.precision}")
        return p


class DenormalPolicy(str, enum.Enum):
    PRESERVE = "preserve"
    FLUSH = "flush-to-zero"


class NanPolicy(str, enum.Enum):
    PRESERVE = "preserve"
    QUIET_SNAN = "quiet-snan"
    UNSUPPORTED = "unsupported"


class InfinityPolicy(str, enum.Enum):
    PRESERVE = "preserve"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class TransferPolicy:
    denormal: DenormalPolicy = DenormalPolicy.PRESERVE
    nan: NanPolicy = NanPolicy.PRESERVE
    infinity: InfinityPolicy = InfinityPolicy.PRESERVE

    def __post_init__(self):
        object.__setattr__(self, "denormal", DenormalPolicy(self.denormal))
        object.__setattr__(self, "nan", NanPolicy(self.nan))
        object.__setattr__(self, "infinity", InfinityPolicy(self.infinity))

    @property
    def flushes(self) -> bool:
        return self.denormal is DenormalPolicy.FLUSH


def sim_transfer(bits: int, policy: TransferPolicy, fmt: FloatFormat) -> int:
    """Upload/download of a raw pattern with no arithmetic on it.

    Unsupported infinities leave as the same-signed largest finite value and
    unsupported NaNs as +0.
    """
    d = decode(bits, fmt)
    if d.cls is FloatClass.SUBNORMAL and policy.denormal is DenormalPolicy.FLUSH:
        return bits & fmt.sign_mask
    if d.is_nan:
        if policy.nan is NanPolicy.UNSUPPORTED:
            return 0
        if policy.nan is NanPolicy.QUIET_SNAN:
            return bits | fmt.quiet_bit
    if d.is_inf and policy.infinity is InfinityPolicy.UNSUPPORTED:
        return encode(FloatDatum(FloatClass.NORMAL, d.sign, fmt.e_max, max_finite(fmt).significand), fmt)
    return bits


def truncated_product(a: int, b: int, k: int) -> int:
    """Sum of the partial-product bits ``a_i & b_j`` in columns ``i + j >= k``."""
    dropped = 0
    for i in range(min(k, a.bit_length())):
        if a >> i & 1:
            dropped += (b & ((1 << (k - i)) - 1)) << i
    return a * b - dropped


def product_sum(a: FloatDatum, b: FloatDatum, cfg: MultiplierConfig, fmt: FloatFormat) -> ExactNumber:
    """Unrounded, signed output of the partial-product array (bias included)."""
    sign = a.sign * b.sign
    if a.is_zero or b.is_zero:
        return ExactNumber(1, 0, 0)
    k = cfg.truncation_column
    s = truncated_product(a.significand, b.significand, k) + (cfg.bias_constant << k)
    return ExactNumber(sign, s, a.exponent + b.exponent - 2 * fmt.fraction_bits)


def sim_mul(
    a: FloatDatum,
    b: FloatDatum,
    cfg: MultiplierConfig,
    fmt: FloatFormat,
    *,
    flush: bool = False,
    saturate: bool = False,
    out_fmt: FloatFormat | None = None,
) -> FloatDatum:
    """Product through the truncated array; ``out_fmt`` rounds into a narrower format."""
    cfg.check(fmt)
    out_fmt = out_fmt or fmt
    sign = a.sign * b.sign
    if a.is_zero or b.is_zero:
        return zero(out_fmt, sign)
    s = product_sum(a, b, cfg, fmt)
    return round_to_format(s, out_fmt, cfg.mode_for(sign < 0), saturate=saturate, flush_subnormals=flush)


def aligned_sum(
    a: ExactNumber,
    b: ExactNumber,
    width_a: int,
    width_b: int,
    cfg: AdderConfig,
    fmt: FloatFormat,
) -> ExactNumber:
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    big, small = (a, b) if a.exponent >= b.exponent else (b, a)
    window = max(fmt.precision + cfg.guard_bits, width_a, width_b)
    bottom = big.exponent - window + 1
    if small.scale < bottom:
        shift = bottom - small.scale
        kept = small.magnitude >> shift
        lost = small.magnitude & ((1 << shift) - 1)
        if lost and cfg.sticky_enabled:
            small = ExactNumber(small.sign, (kept << 1) | 1, bottom - 1)
        else:
            small = ExactNumber(small.sign, kept, bottom)
    return big + small


def _zero_sign(a_sign: int, b_sign: int, a_zero: bool, b_zero: bool, mode: RoundingMode) -> int:
    if a_zero and b_zero and a_sign == b_sign:
        return a_sign
    return -1 if mode is RoundingMode.TOWARD_NEGATIVE else 1


def sim_add(
    a: FloatDatum,
    b: FloatDatum,
    cfg: AdderConfig,
    fmt: FloatFormat,
    *,
    flush: bool = False,
    saturate: bool = False,
    out_fmt: FloatFormat | None = None,
) -> FloatDatum:
    """Align at the larger exponent, keep ``f+1+g`` bits of the smaller operand, add, round."""
    if not (a.is_finite and b.is_finite):
        raise ValueError("sim_add takes finite operands")
    p = fmt.precision
    total = aligned_sum(exact_value(a, fmt), exact_value(b, fmt), p, p, cfg, fmt)
    zs = _zero_sign(a.sign, b.sign, a.is_zero, b.is_zero, cfg.rounding)
    return round_to_format(
        total, out_fmt or fmt, cfg.rounding, saturate=saturate, flush_subnormals=flush, zero_sign=zs
    )


def sim_mad(
    x: FloatDatum,
    y: FloatDatum,
    z: FloatDatum,
    cfg: MadConfig,
    fmt: FloatFormat,
    *,
    flush: bool = False,
    saturate: bool = False,
    out_fmt: FloatFormat | None = None,
) -> FloatDatum:
    """``x*y + z`` with the product held on ``product_kept_bits`` bits before the add."""
    p = cfg.kept_bits(fmt)
    out_fmt = out_fmt or fmt
    if p == fmt.precision:
        t = sim_mul(x, y, cfg.multiplier, fmt, flush=flush, saturate=saturate)
        if not t.is_finite:
            return t if out_fmt == fmt else infinity(out_fmt, t.sign)
        return sim_add(t, z, cfg.adder, fmt, flush=flush, saturate=saturate, out_fmt=out_fmt)
    cfg.multiplier.check(fmt)
    sign = x.sign * y.sign
    raw = product_sum(x, y, cfg.multiplier, fmt)
    t = round_precision(raw, p, cfg.multiplier.mode_for(sign < 0))
    total = aligned_sum(t, exact_value(z, fmt), p, fmt.precision, cfg.adder, fmt)
    product_zero = x.is_zero or y.is_zero
    zs = _zero_sign(sign, z.sign, product_zero, z.is_zero, cfg.adder.rounding)
    return round_to_format(
        total, out_fmt, cfg.adder.rounding, saturate=saturate, flush_subnormals=flush, zero_sign=zs
    )


def sim_mul_batch(a_bits, b_bits, cfg: MultiplierConfig, fmt: FloatFormat):
    """Vectorised :func:`sim_mul` over raw bit patterns.

    Only lanes with two normal operands and a normal result are computed;
    the returned mask marks them, and the caller evaluates the others with
    the scalar model.
    """
    if 2 * fmt.precision + 1 > 63:
        raise ValueError(f"batch multiplier supports at most 31-bit significands, {fmt} has {fmt.precision}")
    cfg.check(fmt)
    a_bits = np.asarray(a_bits, dtype=np.uint64)
    b_bits = np.asarray(b_bits, dtype=np.uint64)
    f = np.uint64(fmt.fraction_bits)
    emask = np.uint64((1 << fmt.exponent_bits) - 1)
    fmask = np.uint64(fmt.fraction_mask)
    top = (1 << fmt.exponent_bits) - 1 if fmt.supports_specials else 1 << fmt.exponent_bits

    ea = ((a_bits >> f) & emask).astype(np.int64)
    eb = ((b_bits >> f) & emask).astype(np.int64)
    normal = (ea > 0) & (ea < top) & (eb > 0) & (eb < top)
    sa = (np.uint64(1) << f) | (a_bits & fmask)
    sb = (np.uint64(1) << f) | (b_bits & fmask)
    s = sa * sb
    k = cfg.truncation_column
    for i in range(k):
        row = (sa >> np.uint64(i)) & np.uint64(1)
        s -= row * ((sb & np.uint64((1 << (k - i)) - 1)) << np.uint64(i))
    s += np.uint64(cfg.bias_constant << k)
    scale = ea + eb - 2 * fmt.bias - 2 * fmt.fraction_bits
    shift = np.uint64(fmt.width - 1)
    negative = (((a_bits >> shift) ^ (b_bits >> shift)) & np.uint64(1)) == 1

    out, ok = round_batch(s, scale, negative, fmt, cfg.mode_for(False))
    if cfg.mode_for(True) is not cfg.mode_for(False):
        out_neg, ok_neg = round_batch(s, scale, negative, fmt, cfg.mode_for(True))
        out = np.where(negative, out_neg, out)
        ok = np.where(negative, ok_neg, ok)
    return out, ok & normal
