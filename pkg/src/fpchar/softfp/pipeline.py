"""Evaluate short programs on a simulated shader pipeline."""

from __future__ import annotations

from dataclasses import dataclass

from ..formats import (
    FP16,
    FloatClass,
    FloatDatum,
    FloatFormat,
    decode,
    encode,
    infinity,
    quiet_nan,
    zero,
)
from ..oracle import RoundingMode, exact_value, round_to_format
from .profile import ShaderProfile
from .units import AdderConfig, MadConfig, sim_add, sim_mad, sim_mul, sim_transfer

PREV = "prev"
OPS = {"add": 2, "sub": 2, "mul": 2, "mad": 3}
MAX_STAGES = 2


@dataclass(frozen=True)
class Step:
    """One arithmetic instruction; an argument is a bit pattern or :data:`PREV`."""

    op: str
    args: tuple

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown op {self.op!r}")
        if len(self.args) != OPS[self.op]:
            raise ValueError(f"{self.op} takes {OPS[self.op]} operands")
        object.__setattr__(self, "args", tuple(self.args))


def step(op: str, *args) -> Step:
    return Step(op, args)


def special_result(op: str, args, fmt: FloatFormat) -> FloatDatum:
    """IEEE-style result when some operand is an infinity or a NaN."""
    for a in args:
        if a.is_nan:
            return quiet_nan(fmt, a.sign, a.significand & (fmt.quiet_bit - 1))
    if op == "mad":
        prod = special_result("mul", args[:2], fmt) if not all(a.is_finite for a in args[:2]) else None
        if prod is None:
            return infinity(fmt, args[2].sign)
        if prod.is_nan:
            return prod
        return special_result("add", (prod, args[2]), fmt)
    if op == "mul":
        a, b = args
        if a.is_zero or b.is_zero:
            return quiet_nan(fmt)
        return infinity(fmt, a.sign * b.sign)
    a, b = args
    if op == "sub":
        b = -b
    if a.is_inf and b.is_inf and a.sign != b.sign:
        return quiet_nan(fmt)
    return infinity(fmt, a.sign if a.is_inf else b.sign)


def _convert_special(d: FloatDatum, src: FloatFormat, dst: FloatFormat) -> FloatDatum:
    if d.is_inf:
        return infinity(dst, d.sign)
    shift = dst.fraction_bits - src.fraction_bits
    payload = d.significand & (src.quiet_bit - 1)
    payload = payload << shift if shift >= 0 else payload >> -shift
    if d.cls is FloatClass.SNAN and payload:
        return FloatDatum(d.cls, d.sign, dst.e_max + 1, payload)
    return quiet_nan(dst, d.sign, payload)


def unit_format(profile: ShaderProfile, fmt: FloatFormat) -> FloatFormat:
    """Format the arithmetic units compute in when ``fmt`` is the storage format."""
    if fmt == profile.storage_format:
        return profile.register_format
    if fmt == FP16:
        return FloatFormat(profile.register_format.exponent_bits, profile.fp16_internal_bits - 1, True, "fp16-internal")
    raise ValueError(f"profile {profile.name!r} does not offer storage format {fmt}")


def stages_for(profile: ShaderProfile, length: int, shader: str = "pixel") -> list[MadConfig]:
    if length < 1 or length > MAX_STAGES:
        raise ValueError(f"program has {length} steps; the modeled pipeline holds 1..{MAX_STAGES}")
    if shader == "vertex":
        return [profile.vertex_mad] * length
    if shader != "pixel":
        raise ValueError(f"unknown shader {shader!r}")
    if length == 1:
        return [profile.lone_stage]
    return [profile.pixel_stage1, profile.pixel_stage2]


def _execute(s: Step, args, cfg: MadConfig, ufmt: FloatFormat, out_fmt: FloatFormat, profile: ShaderProfile):
    if not all(a.is_finite for a in args):
        return _convert_special(special_result(s.op, args, ufmt), ufmt, out_fmt), cfg.adder.rounding
    adder = cfg.adder
    if out_fmt != ufmt:
        # fp16 work: the wide internal significand is the whole window, one rounding at the end
        adder = AdderConfig(0, adder.sticky_enabled, adder.rounding)
    kw = dict(flush=profile.transfer.flushes, saturate=profile.saturate_overflow, out_fmt=out_fmt)
    if s.op == "add":
        return sim_add(args[0], args[1], adder, ufmt, **kw), adder.rounding
    if s.op == "sub":
        return sim_add(args[0], -args[1], adder, ufmt, **kw), adder.rounding
    if s.op == "mul":
        return sim_mul(args[0], args[1], cfg.multiplier, ufmt, **kw), cfg.multiplier.mode_for(args[0].sign != args[1].sign)
    mad = MadConfig(cfg.multiplier, adder, cfg.product_kept_bits)
    return sim_mad(args[0], args[1], args[2], mad, ufmt, **kw), adder.rounding


def _widen(d: FloatDatum, src: FloatFormat, dst: FloatFormat) -> FloatDatum:
    if src == dst:
        return d
    if not d.is_finite:
        return _convert_special(d, src, dst)
    if d.is_zero:
        return zero(dst, d.sign)
    return round_to_format(exact_value(d, src), dst, RoundingMode.NEAREST_EVEN)


def to_unit(bits: int, profile: ShaderProfile, fmt: FloatFormat, ufmt: FloatFormat) -> FloatDatum:
    d = decode(sim_transfer(bits, profile.transfer, fmt), fmt)
    return _widen(d, fmt, ufmt)


def from_unit(d: FloatDatum, profile: ShaderProfile, fmt: FloatFormat, ufmt: FloatFormat, mode) -> FloatDatum:
    if not d.is_finite:
        out = _convert_special(d, ufmt, fmt)
    elif d.is_zero:
        out = zero(fmt, d.sign)
    else:
        out = round_to_format(
            exact_value(d, ufmt), fmt, mode,
            saturate=profile.saturate_overflow, flush_subnormals=profile.transfer.flushes,
        )
    return decode(sim_transfer(encode(out, fmt), profile.transfer, fmt), fmt)


def pipeline_eval(
    profile: ShaderProfile,
    program,
    *,
    fmt: FloatFormat | None = None,
    shader: str = "pixel",
) -> FloatDatum:
    """Run up to two dependent steps and return the stored result.

    A lone step runs on the stage named by ``lone_add_routing``; two steps
    run on stage 1 then stage 2, the intermediate staying in the register
    format.  Operand bit patterns are in the storage format ``fmt``.  With
    ``fmt=FP16`` the units compute on ``fp16_internal_bits`` significands and
    round each result once to fp16.
    """
    program = list(program)
    fmt = fmt or profile.storage_format
    ufmt = unit_format(profile, fmt)
    # results of the fp16 path are rounded straight to fp16
    rfmt = fmt if fmt != profile.storage_format else ufmt
    prev = None
    mode = RoundingMode.TOWARD_ZERO
    for s, cfg in zip(program, stages_for(profile, len(program), shader)):
        args = []
        for a in s.args:
            if isinstance(a, str) and a == PREV:
                if prev is None:
                    raise ValueError("first step cannot reference the previous result")
                args.append(_widen(prev, rfmt, ufmt))
            else:
                args.append(to_unit(int(a), profile, fmt, ufmt))
        prev, mode = _execute(s, args, cfg, ufmt, rfmt, profile)
    return from_unit(prev, profile, fmt, rfmt, mode)
