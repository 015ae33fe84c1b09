"""Probes on what a register or a transfer can hold: specials, exponent range, width."""

from __future__ import annotations

from fractions import Fraction

from ..backends import Backend
from ..formats import (
    FloatClass,
    decode,
    encode,
    get_format,
    infinity,
    max_finite,
    min_subnormal,
    negate_bits,
    power_of_two,
    quiet_nan,
    signaling_nan,
)
from ..softfp import PREV, step
from .adder import MAX_I
from .common import Confidence, ProbeResult, exact_bits, finish, hexbits, representable, unhex


def collect_transfer(be: Backend) -> dict:
    fmt = be.fmt
    inputs = {
        "min_subnormal": encode(min_subnormal(fmt), fmt),
        "pos_inf": encode(infinity(fmt, 1), fmt),
        "neg_inf": encode(infinity(fmt, -1), fmt),
        "snan": encode(signaling_nan(fmt), fmt),
        "qnan": encode(quiet_nan(fmt), fmt),
    }
    return {
        "format": fmt.name,
        "pairs": [
            {"label": label, "input": hexbits(fmt, bits), "output": hexbits(fmt, be.b_roundtrip(bits))}
            for label, bits in inputs.items()
        ],
    }


def interpret_transfer(obs: dict):
    fmt = get_format(obs["format"])
    io = {p["label"]: (unhex(p["input"]), unhex(p["output"])) for p in obs["pairs"]}
    out = {}

    sub_in, sub_out = io["min_subnormal"]
    out["denormal"] = {sub_in: "preserve", 0: "flush-to-zero"}.get(sub_out)

    big = encode(max_finite(fmt), fmt)
    inf_out = (io["pos_inf"][1], io["neg_inf"][1])
    if inf_out == (io["pos_inf"][0], io["neg_inf"][0]):
        out["infinity"] = "preserve"
    elif inf_out == (big, negate_bits(big, fmt)):
        out["infinity"] = "unsupported"
    else:
        out["infinity"] = None

    (s_in, s_out), (q_in, q_out) = io["snan"], io["qnan"]
    if s_out == s_in and q_out == q_in:
        out["nan"] = "preserve"
    elif s_out == s_in | fmt.quiet_bit and q_out == q_in:
        out["nan"] = "quiet-snan"
    elif s_out == 0 and q_out == 0:
        out["nan"] = "unsupported"
    else:
        out["nan"] = None

    if None in out.values():
        return out, Confidence.INCONCLUSIVE, "a round trip produced an unexpected pattern"
    return out, Confidence.EXACT, ""


def probe_transfer(be: Backend) -> ProbeResult:
    obs = collect_transfer(be)
    return finish("transfer", obs, interpret_transfer(obs))


def collect_exponent_range(be: Backend) -> dict:
    fmt = be.fmt
    big = encode(max_finite(fmt), fmt)
    result = be.b_chain2(step("add", big, big), step("sub", PREV, big))
    # MAX loses its last bit in a chop adder without guard bits; a power of two never does
    top = encode(power_of_two(fmt.e_max, fmt), fmt)
    exact = be.b_chain2(step("add", top, top), step("sub", PREV, top))
    return {
        "format": fmt.name,
        "max": hexbits(fmt, big),
        "result": hexbits(fmt, result),
        "top": hexbits(fmt, top),
        "top_result": hexbits(fmt, exact),
    }


def interpret_exponent_range(obs: dict):
    fmt = get_format(obs["format"])
    r = unhex(obs["result"])
    d = decode(r, fmt)
    out = {"result_class": d.cls.value, "extended_exponent": None, "overflow": None}
    if r == unhex(obs["max"]) or unhex(obs["top_result"]) == unhex(obs["top"]):
        out.update(extended_exponent=True, overflow="none")
    elif d.is_inf:
        out.update(extended_exponent=False, overflow="infinity")
    elif d.is_nan:
        out.update(extended_exponent=False, overflow="infinity-minus-finite-nan")
    elif d.cls is FloatClass.ZERO:
        out.update(extended_exponent=False, overflow="saturate")
    else:
        return out, Confidence.INCONCLUSIVE, "result is neither MAX, Inf, NaN nor zero"
    return out, Confidence.EXACT, ""


def probe_exponent_range(be: Backend) -> ProbeResult:
    obs = collect_exponent_range(be)
    return finish("exponent-range", obs, interpret_exponent_range(obs))


def collect_mantissa_width(be: Backend, scale: int = 0) -> dict:
    fmt = be.fmt
    base = Fraction(3, 2) * Fraction(2) ** scale
    b = exact_bits(fmt, base)
    recover, increment = [], []
    for i in range(1, MAX_I + 1):
        q = Fraction(2) ** (scale - i)
        if not representable(fmt, q):
            continue
        y = exact_bits(fmt, q)
        r = be.b_chain2(step("sub", b, y), step("add", PREV, y))
        s = be.b_chain2(step("add", b, y), step("sub", PREV, b))
        recover.append({"i": i, "y": hexbits(fmt, y), "result": hexbits(fmt, r)})
        increment.append({"i": i, "y": hexbits(fmt, y), "result": hexbits(fmt, s)})
    return {"format": fmt.name, "scale": scale, "base": hexbits(fmt, b), "recover": recover, "increment": increment}


def interpret_mantissa_width(obs: dict):
    # (1.5 - y) + y == 1.5 can also hold through cancelling truncations, so the
    # width is read from the first increment (1.5 + y) - 1.5 that loses y.
    first_loss = next((row["i"] for row in obs["increment"] if row["result"] != row["y"]), None)
    first_miss = next((row["i"] for row in obs["recover"] if row["result"] != obs["base"]), None)
    out = {"width": first_loss, "recover_first_failure": first_miss}
    if first_loss is None:
        return out, Confidence.INCONCLUSIVE, f"no loss of precision up to i={MAX_I}"
    return out, Confidence.EXACT, ""


def probe_mantissa_width(be: Backend, scale: int = 0) -> ProbeResult:
    obs = collect_mantissa_width(be, scale)
    return finish("mantissa-width", obs, interpret_mantissa_width(obs))
