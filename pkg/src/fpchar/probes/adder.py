"""Threshold probes on the adder: guard bits, stage routing, fp16 width, exponent gap."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..backends import Backend, CapabilityError
from ..formats import FP16, FloatFormat, get_format, negate_bits
from ..softfp import PREV, step
from .common import (
    Confidence,
    ProbeResult,
    exact_bits,
    finish,
    hexbits,
    not_applicable,
    random_normals,
    representable,
    unhex,
)

MAX_I = 64
MAX_WITNESSES = 8


def _base(fmt: FloatFormat, scale: int) -> Fraction:
    return Fraction(3, 2) * Fraction(2) ** scale


def _sweep_points(fmt: FloatFormat, scale: int):
    """Values ``i`` for which ``2**(scale-i)`` is a normal number of ``fmt``."""
    return [i for i in range(1, MAX_I + 1) if representable(fmt, Fraction(2) ** (scale - i))]


def _rounding_observations(be: Backend, fmt: FloatFormat, scale: int) -> dict:
    base = _base(fmt, scale)
    ulp = Fraction(2) ** (scale - fmt.fraction_bits)
    b = exact_bits(fmt, base)
    nudge = exact_bits(fmt, 3 * ulp / 4)
    return {
        "base": hexbits(fmt, b),
        "base_next": hexbits(fmt, exact_bits(fmt, base + ulp)),
        "up": hexbits(fmt, be.b_add(b, nudge)),
        "neg_up": hexbits(fmt, be.b_sub(negate_bits(b, fmt), nudge)),
    }


def rounding_from(obs: dict, fmt: FloatFormat) -> str | None:
    """Adder rounding mode from ``base + 3/4 ulp`` and its mirror image."""
    base, nxt = unhex(obs["base"]), unhex(obs["base_next"])
    up, neg_up = unhex(obs["up"]), unhex(obs["neg_up"])
    pos_up = up == nxt
    neg_away = neg_up == negate_bits(nxt, fmt)
    if up not in (base, nxt) or neg_up not in (negate_bits(base, fmt), negate_bits(nxt, fmt)):
        return None
    return {
        (False, False): "toward-zero",
        (True, True): "nearest-even",
        (True, False): "toward-positive",
        (False, True): "toward-negative",
    }[(pos_up, neg_away)]


def _threshold(table: list, target: str):
    for row in table:
        if row["result"] == target:
            return row["i"]
    return None


def _guard_from(threshold, rounding, fraction_bits):
    if rounding == "toward-zero" and threshold is not None:
        return threshold - fraction_bits - 1
    return None


def _lone_table(be: Backend, fmt: FloatFormat, scale: int) -> list:
    b = exact_bits(fmt, _base(fmt, scale))
    rows = []
    for i in _sweep_points(fmt, scale):
        y = exact_bits(fmt, Fraction(2) ** (scale - i))
        rows.append({"i": i, "result": hexbits(fmt, be.b_sub(b, y))})
    return rows


def collect_guard_single(be: Backend, scale: int = 0) -> dict:
    fmt = be.fmt
    return {
        "format": fmt.name,
        "scale": scale,
        "rounding": _rounding_observations(be, fmt, scale),
        "table": _lone_table(be, fmt, scale),
    }


def interpret_guard_single(obs: dict):
    fmt = get_format(obs["format"])
    rounding = rounding_from(obs["rounding"], fmt)
    threshold = _threshold(obs["table"], obs["rounding"]["base"])
    guard = _guard_from(threshold, rounding, fmt.fraction_bits)
    out = {"rounding": rounding, "threshold": threshold, "guard_bits": guard, "sticky": None}
    if rounding is None:
        return out, Confidence.INCONCLUSIVE, "rounding pattern matches no directed or nearest mode"
    if guard is not None:
        out["sticky"] = False
        return out, Confidence.EXACT, ""
    if rounding == "toward-zero":
        out["sticky"] = True
        return out, Confidence.INFERRED, "truncating adder never drops the small operand; sticky bit assumed"
    return out, Confidence.INFERRED, "not a truncating adder; raw threshold only"


def probe_guard_bits_single(be: Backend, scale: int = 0) -> ProbeResult:
    obs = collect_guard_single(be, scale)
    return finish("guard-bits-single", obs, interpret_guard_single(obs))


def collect_guard_chained(be: Backend, scale: int = 0) -> dict:
    fmt = be.fmt
    b = exact_bits(fmt, _base(fmt, scale))
    stage1, stage2 = [], []
    for i in _sweep_points(fmt, scale):
        y = exact_bits(fmt, Fraction(2) ** (scale - i))
        r1 = be.b_chain2(step("sub", b, y), step("sub", PREV, b))
        r2 = be.b_chain2(step("add", b, 0), step("sub", PREV, y))
        stage1.append({"i": i, "result": hexbits(fmt, r1)})
        stage2.append({"i": i, "result": hexbits(fmt, r2)})
    obs = collect_guard_single(be, scale)
    obs.update(stage1=stage1, stage2=stage2)
    return obs


def interpret_guard_chained(obs: dict):
    fmt = get_format(obs["format"])
    lone, confidence, note = interpret_guard_single(obs)
    rounding = lone["rounding"]
    t1 = _threshold(obs["stage1"], hexbits(fmt, 0))
    t2 = _threshold(obs["stage2"], obs["rounding"]["base"])
    t0 = lone["threshold"]
    if t1 == t2:
        routing = "indistinguishable"
    elif t0 == t2:
        routing = "stage2"
    elif t0 == t1:
        routing = "stage1"
    else:
        routing = None
    out = {
        "rounding": rounding,
        "lone_threshold": t0,
        "stage1_threshold": t1,
        "stage2_threshold": t2,
        "stage1_guard_bits": _guard_from(t1, rounding, fmt.fraction_bits),
        "stage2_guard_bits": _guard_from(t2, rounding, fmt.fraction_bits),
        "lone_routing": routing,
        # the lone-op routing is read off matching thresholds, never seen directly
        "routing_confidence": "inferred",
    }
    if routing is None:
        return out, Confidence.INCONCLUSIVE, "lone threshold matches neither stage"
    return out, confidence, note


def probe_guard_bits_chained(be: Backend, scale: int = 0) -> ProbeResult:
    try:
        be.require("has_two_stage_pipeline")
    except CapabilityError as exc:
        return not_applicable("guard-bits-chained", str(exc))
    obs = collect_guard_chained(be, scale)
    return finish("guard-bits-chained", obs, interpret_guard_chained(obs))


def collect_fp16_internal(be: Backend) -> dict:
    half = be.format(FP16)
    return collect_guard_single(half, FP16.e_max)


def interpret_fp16_internal(obs: dict):
    single, confidence, note = interpret_guard_single(obs)
    rounding, threshold = single["rounding"], single["threshold"]
    out = {"rounding": rounding, "threshold": threshold, "internal_width": None}
    if threshold is None or rounding is None:
        return out, Confidence.INCONCLUSIVE, "no threshold inside the normal fp16 range"
    out["internal_width"] = threshold
    if rounding != "toward-zero":
        return out, Confidence.INFERRED, "a rounding adder hides the internal width; lower bound only"
    return out, Confidence.EXACT, ""


def probe_fp16_internal(be: Backend) -> ProbeResult:
    try:
        be.require("has_fp16")
        be.format(FP16)
    except CapabilityError as exc:
        return not_applicable("fp16-internal", str(exc))
    obs = collect_fp16_internal(be)
    return finish("fp16-internal", obs, interpret_fp16_internal(obs))


def _gap_candidates(fmt: FloatFormat, rng: np.random.Generator, trials: int):
    gap = fmt.fraction_bits + 2
    structured = [
        (Fraction(3, 2), -(Fraction(2) ** -gap)),
        (Fraction(1), -Fraction(3, 2) * Fraction(2) ** -gap),
        (Fraction(1), -Fraction(7, 4) * Fraction(2) ** -gap),
        (Fraction(3, 2), -Fraction(7, 4) * Fraction(2) ** -gap),
    ]
    pairs = []
    for x, y in structured:
        pairs.append((exact_bits(fmt, x), exact_bits(fmt, y)))
        pairs.append((exact_bits(fmt, -x), exact_bits(fmt, -y)))
    n = max(0, trials - len(pairs))
    lo = fmt.e_min + gap
    hi = min(fmt.e_max, 20)
    xs = random_normals(rng, fmt, n, max(lo, -20), hi)
    f = np.uint64(fmt.fraction_bits)
    ys_frac = rng.integers(0, 1 << fmt.fraction_bits, size=n, dtype=np.uint64)
    ys = (((xs >> f) - np.uint64(gap)) << f) | ys_frac
    sign = rng.integers(0, 2, size=n, dtype=np.uint64) << np.uint64(fmt.width - 1)
    other = np.uint64(fmt.sign_mask) ^ sign
    pairs.extend(zip((xs | sign).tolist(), (ys | other).tolist()))
    return pairs


def collect_exponent_gap(be: Backend, trials: int = 10_000, seed: int = 0) -> dict:
    fmt = be.fmt
    rng = np.random.default_rng(seed)
    pairs = _gap_candidates(fmt, rng, trials)
    violations = 0
    witnesses = []
    for x, y in pairs:
        r = be.b_add(x, y)
        if r != x:
            violations += 1
            if len(witnesses) < MAX_WITNESSES:
                witnesses.append({"x": hexbits(fmt, x), "y": hexbits(fmt, y), "result": hexbits(fmt, r)})
    return {
        "format": fmt.name,
        "seed": seed,
        "gap": fmt.fraction_bits + 2,
        "trials": len(pairs),
        "violations": violations,
        "witnesses": witnesses,
    }


def interpret_exponent_gap(obs: dict):
    holds = obs["violations"] == 0
    out = {
        "property_holds": holds,
        "violation_rate": f"{obs['violations']}/{obs['trials']}",
        "witness": obs["witnesses"][0] if obs["witnesses"] else None,
    }
    if holds:
        out["reading"] = "small operand dropped entirely at this gap"
    else:
        # under truncation only a window of at least two guard bits reaches y
        out["reading"] = "guard_bits >= 2 under truncation, or a rounding adder"
    return out, Confidence.EXACT, ""


def probe_exponent_gap_property(be: Backend, trials: int = 10_000, seed: int = 0) -> ProbeResult:
    obs = collect_exponent_gap(be, trials, seed)
    return finish("exponent-gap", obs, interpret_exponent_gap(obs))
