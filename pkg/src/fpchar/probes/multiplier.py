"""Multiplier probes: truncation column, bias constant, sign handling, MAD width.

The multiplier model is a partial-product array with columns below ``k``
dropped and ``c * 2**k`` added, then chopped.  Two operand families matter:

* ``(2**f + 1) * B`` has one low row, so dropping columns below ``k`` and
  adding a multiple of ``2**k`` is indistinguishable from adding the bias
  to the exact product.  It measures ``Bv = c * 2**k`` whatever ``k`` is.
* ``(2**f + 3) * B`` has two overlapping low rows whose dropped bits lose
  their carries, so its outputs depend on ``k`` itself.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..backends import Backend, CapabilityError
from ..formats import FloatClass, FloatFormat, decode, encode, get_format, min_subnormal, negate_bits
from ..oracle import ExactNumber, RoundingMode, exact_value, preimage, product_remainder, round_batch, round_to_format
from ..softfp import MultiplierConfig, sim_mul, truncated_product
from .common import (
    Confidence,
    ProbeResult,
    finish,
    hexbits,
    not_applicable,
    random_normals,
    random_signs,
    unhex,
)

MAX_WITNESSES = 8


def _sig_bits(fmt: FloatFormat, sig: int) -> int:
    """Pattern of ``sig * 2**-f`` for a significand ``2**f <= sig < 2**(f+1)``."""
    return encode(round_to_format(ExactNumber.from_int(sig, -fmt.fraction_bits), fmt), fmt)


def y_vector(n: int = 24) -> list[int]:
    ys = [1]
    while len(ys) < n:
        if len(ys) % 2 == 1:
            ys.append(ys[-1] + 1)
        else:
            ys.append(4 * ys[-2] + 2)
    return ys


# -- bias value from the one-row family -------------------------------------


def _bias_bounds(fmt: FloatFormat, a_sig: int, b_sig: int, result: int):
    """Interval of ``Bv`` for which ``chop(a_sig*b_sig + Bv)`` gives ``result``.

    Returns ``None`` when the result is not a positive normal number.
    """
    d = decode(result, fmt)
    if d.cls is not FloatClass.NORMAL or d.negative:
        return None
    lo, hi, _, _ = preimage(d, fmt, RoundingMode.TOWARD_ZERO)
    # values are in units of 2**-2f relative to the significand product
    unit = Fraction(2) ** (2 * fmt.fraction_bits)
    p = a_sig * b_sig
    return int(lo * unit) - p, int(hi * unit) - p - 1


def _one_row_sig(fmt: FloatFormat) -> int:
    return (1 << fmt.fraction_bits) + 1


def admissible_biases(fmt: FloatFormat, lo: int, hi: int, limit: int = 2) -> list[int]:
    """Values ``c * 2**k`` with ``c < 2**k`` in ``[lo, hi]``, at most ``limit`` of them."""
    found: set[int] = set()
    if lo <= 0 <= hi:
        found.add(0)
    for k in range(1, fmt.precision + 1):
        step = 1 << k
        c = max(1, -(-lo // step))
        while c < step and c * step <= hi:
            found.add(c * step)
            if len(found) > limit:
                return sorted(found)
            c += 1
    return sorted(found)


def pinned_bias(fmt: FloatFormat, bounds):
    """The single admissible ``Bv`` inside ``bounds``, or ``None``.

    ``Bv = c * 2**k`` with ``c < 2**k`` is never odd, so an interval the
    one-row family cannot split any further still pins it.
    """
    if bounds is None or bounds[0] > bounds[1]:
        return None
    hits = admissible_biases(fmt, bounds[0], bounds[1])
    return hits[0] if len(hits) == 1 else None


def _refine_bias(be: Backend, fmt: FloatFormat, lo: int, hi: int, queries: list):
    """Binary search on ``Bv`` with the one-row family; appends to ``queries``."""
    f = fmt.fraction_bits
    a_sig = _one_row_sig(fmt)
    a = _sig_bits(fmt, a_sig)
    for _ in range(4 * (f + 2)):
        if lo >= hi or pinned_bias(fmt, (lo, hi)) is not None:
            break
        # a carry into the kept part happens once b + Bv reaches a multiple of 2**f;
        # b = 2**f - 1 would push the product into the next binade, so test mid+1
        mid = (lo + hi + 1) // 2
        b = (-mid) % (1 << f)
        if b == (1 << f) - 1:
            if mid + 1 > hi:
                break
            b -= 1
        r = be.b_mul(a, _sig_bits(fmt, (1 << f) + b))
        queries.append({"b": b, "result": hexbits(fmt, r)})
        bounds = _bias_bounds(fmt, a_sig, (1 << f) + b, r)
        if bounds is None:
            return None
        new = max(lo, bounds[0]), min(hi, bounds[1])
        if new == (lo, hi):
            break
        lo, hi = new
    return lo, hi


def bias_from_queries(fmt: FloatFormat, queries: list, lo: int = 0, hi: int | None = None):
    f = fmt.fraction_bits
    hi = (1 << 2 * (f + 1)) - 1 if hi is None else hi
    a_sig = _one_row_sig(fmt)
    for q in queries:
        bounds = _bias_bounds(fmt, a_sig, (1 << f) + q["b"], unhex(q["result"]))
        if bounds is None:
            return None
        lo, hi = max(lo, bounds[0]), min(hi, bounds[1])
    return lo, hi


# -- truncation column -------------------------------------------------------


COLUMN_MULTIPLIERS = (3, 5)


def _split_queries(fmt: FloatFormat, bias: int, j: int, m: int, keep: int = 2) -> list[int]:
    """``b`` values such that ``(2**f + m) * (2**f + b)`` keeps its carry iff ``k <= j``.

    Operands near ``2**(f+1)`` push the product into the next binade, where
    only every other carry boundary counts; those are kept as a fallback.
    """
    f = fmt.fraction_bits
    w = j + 1
    inv = pow(m, -1, 1 << f)
    top = (1 << j) | (1 << (j - 1))
    inside, edge = [], []
    for t in reversed(range(min(1 << (j - 1), 16))):
        low = top | t
        lost = [m * low - truncated_product(m, low, k) for k in (j, j + 1)]
        e = lost[0] + ((bias + m * low - lost[0]) % (1 << w))
        if e >= lost[1]:
            continue
        b = (inv * (e - bias)) % (1 << f)
        (inside if b + m < (1 << f) - m else edge).append(b)
    return (inside + edge)[:keep]


def _column_queries(fmt: FloatFormat, bias: int) -> list[tuple[int, int, int]]:
    """``(j, m, b)`` products that split ``k <= j`` from ``k > j``.

    The low ``j+1`` bits of ``b`` are a fixed pattern ``L``, so the mass
    dropped at columns ``k <= j+1`` is a known ``D_k``.  ``b`` is chosen so
    the low part of the biased product ``m*b + Bv`` passes a carry boundary
    by ``e`` with ``D_j <= e < D_{j+1}``: the carry survives exactly when
    ``k <= j``.
    """
    out = []
    for m in COLUMN_MULTIPLIERS:
        for j in range(1, fmt.fraction_bits):
            out.extend((j, m, b) for b in _split_queries(fmt, bias, j, m))
    return out


def collect_truncation_column(be: Backend) -> dict:
    fmt = be.fmt
    f = fmt.fraction_bits
    x_sig = (1 << f) + 3
    x = _sig_bits(fmt, x_sig)
    table = []
    for y in y_vector():
        if y.bit_length() > fmt.precision:
            continue
        yb = encode(round_to_format(ExactNumber.from_int(y), fmt), fmt)
        table.append({"y": y, "result": hexbits(fmt, be.b_mul(x, yb))})

    bias_queries: list = []
    a = _sig_bits(fmt, _one_row_sig(fmt))
    first = be.b_mul(a, _sig_bits(fmt, 1 << f))
    bias_queries.append({"b": 0, "result": hexbits(fmt, first)})
    bounds = bias_from_queries(fmt, bias_queries)
    if bounds is not None:
        bounds = _refine_bias(be, fmt, *bounds, bias_queries)

    column_queries = []
    bias = pinned_bias(fmt, bounds)
    if bias is not None:
        for j, m, b in _column_queries(fmt, bias):
            r = be.b_mul(_sig_bits(fmt, (1 << f) + m), _sig_bits(fmt, (1 << f) + b))
            column_queries.append({"j": j, "m": m, "b": b, "result": hexbits(fmt, r)})
    # odd significand times the smallest subnormal: exact unless column 0 is dropped
    odd = encode(round_to_format(ExactNumber.from_int(x_sig - 2, 0), fmt), fmt)
    tiny = encode(min_subnormal(fmt), fmt)
    return {
        "format": fmt.name,
        "x": hexbits(fmt, x),
        "y_table": table,
        "bias_queries": bias_queries,
        "column_queries": column_queries,
        "subnormal_query": {"a": hexbits(fmt, odd), "b": hexbits(fmt, tiny), "result": hexbits(fmt, be.b_mul(odd, tiny))},
    }


def _observed_products(fmt: FloatFormat, obs: dict):
    """Every ``(a_bits, b_bits, result_bits)`` triple the column probe recorded."""
    f = fmt.fraction_bits
    x = unhex(obs["x"])
    a1 = _sig_bits(fmt, _one_row_sig(fmt))
    out = []
    for row in obs["y_table"]:
        out.append((x, encode(round_to_format(ExactNumber.from_int(row["y"]), fmt), fmt), unhex(row["result"])))
    for q in obs["bias_queries"]:
        out.append((a1, _sig_bits(fmt, (1 << f) + q["b"]), unhex(q["result"])))
    for q in obs["column_queries"]:
        out.append((_sig_bits(fmt, (1 << f) + q["m"]), _sig_bits(fmt, (1 << f) + q["b"]), unhex(q["result"])))
    q = obs.get("subnormal_query")
    # a zero result means subnormal operands are flushed and column 0 stays hidden
    if q and unhex(q["result"]) & ~fmt.sign_mask:
        out.append((unhex(q["a"]), unhex(q["b"]), unhex(q["result"])))
    return out


def _explains(fmt: FloatFormat, cfg: MultiplierConfig, products) -> bool:
    for a, b, r in products:
        if encode(sim_mul(decode(a, fmt), decode(b, fmt), cfg, fmt), fmt) != r:
            return False
    return True


def _is_correctly_rounded(fmt: FloatFormat, products) -> bool:
    for a, b, r in products:
        exact = exact_value(decode(a, fmt), fmt) * exact_value(decode(b, fmt), fmt)
        if encode(round_to_format(exact, fmt), fmt) != r:
            return False
    return True


def candidate_configs(fmt: FloatFormat, bias: int):
    """Every ``(k, c)`` with ``c * 2**k == bias`` and ``c < 2**k``."""
    for k in range(fmt.precision + 1):
        c, rest = divmod(bias, 1 << k)
        if rest == 0 and (c < (1 << k) if k else c == 0):
            yield k, c


def interpret_truncation_column(obs: dict):
    fmt = get_format(obs["format"])
    products = _observed_products(fmt, obs)
    full = MultiplierConfig(0, 0, RoundingMode.TOWARD_ZERO)
    q = obs.get("subnormal_query")
    out = {
        "subnormal_operand": None if q is None else ("kept" if unhex(q["result"]) & ~fmt.sign_mask else "flushed"),
        "truncation_column": None,
        "bias_value": None,
        "bias_constant": None,
        "rounding": None,
        "consistent_columns": [],
        "y_full_array": [
            encode(sim_mul(decode(unhex(obs["x"]), fmt), decode(p[1], fmt), full, fmt), fmt) == p[2]
            for p in products[: len(obs["y_table"])]
        ],
    }
    if _is_correctly_rounded(fmt, products):
        out.update(truncation_column=0, bias_value=0, bias_constant=0, rounding="nearest-even", consistent_columns=[0])
        return out, Confidence.EXACT, "correctly rounded multiplier"

    bounds = bias_from_queries(fmt, obs["bias_queries"])
    if bounds is None or bounds[0] > bounds[1]:
        return out, Confidence.INCONCLUSIVE, "one-row products fit no chopped biased array"
    bias = pinned_bias(fmt, bounds)
    if bias is None:
        return out, Confidence.INCONCLUSIVE, f"bias value only bounded to [{bounds[0]}, {bounds[1]}]"
    out["bias_value"] = bias
    out["rounding"] = "toward-zero"
    consistent = [
        k for k, c in candidate_configs(fmt, bias) if _explains(fmt, MultiplierConfig(k, c), products)
    ]
    out["consistent_columns"] = consistent
    # with normal operands dropping column 0 alone never changes a chopped
    # result: the bit a0*b0 only makes an odd sum even, never crossing a carry boundary
    if bias == 0 and consistent == [0, 1]:
        consistent = [0]
    if len(consistent) != 1:
        return out, Confidence.INCONCLUSIVE, "no single truncation column explains every product"
    k = consistent[0]
    out.update(truncation_column=k, bias_constant=bias >> k)
    return out, Confidence.EXACT, ""


def probe_mul_truncation_column(be: Backend) -> ProbeResult:
    obs = collect_truncation_column(be)
    return finish("mul-truncation-column", obs, interpret_truncation_column(obs))


# -- bias constant -----------------------------------------------------------


def _sweep(be: Backend, fmt: FloatFormat, sweep_size: int):
    f = fmt.fraction_bits
    if sweep_size > 1 << f:
        raise ValueError(f"sweep size is limited to 2**{f} in {fmt}")
    odd = 2 * np.arange(1, sweep_size, dtype=np.int64) + 1
    e = np.floor(np.log2(odd)).astype(np.int64)
    # log2 rounding can miss by one near powers of two
    e = np.where((np.int64(1) << e) > odd, e - 1, e)
    e = np.where((np.int64(1) << (e + 1)) <= odd, e + 1, e)
    sig = odd << (f - e)
    # b = sig * 2**-f sits in [1, 2) so the product stays in range for narrow formats
    b_bits = np.uint64(fmt.bias << f) | (sig.astype(np.uint64) & np.uint64(fmt.fraction_mask))
    a_sig = _one_row_sig(fmt)
    # the multiplicand is the integer 2**f + 1, so its exponent is f
    a_bits = np.full(b_bits.shape, encode(round_to_format(ExactNumber.from_int(a_sig), fmt), fmt), dtype=np.uint64)
    r = np.asarray(be.b_mul_many(a_bits, b_bits), dtype=np.uint64)

    p = np.int64(a_sig) * sig
    field = ((r >> np.uint64(f)) & np.uint64((1 << fmt.exponent_bits) - 1)).astype(np.int64)
    normal = (field > 0) & (field < (1 << fmt.exponent_bits) - 1) & ((r >> np.uint64(fmt.width - 1)) == 0)
    if not normal.all():
        return {"consistent": False, "bounds": None, "correctly_rounded": False, "mean_error_ulps": None}
    r_sig = (r & np.uint64(fmt.fraction_mask)).astype(np.int64) | (np.int64(1) << f)
    # results and exact products in units of 2**-f
    shift = field - fmt.bias
    v = r_sig << shift
    u = np.int64(1) << shift
    lo = int((v - p).max())
    hi = int((v + u - p - 1).min())
    rn, ok = round_batch(p.astype(np.uint64), np.full(p.shape, -f), np.zeros(p.shape, dtype=bool), fmt, RoundingMode.NEAREST_EVEN)
    correct = bool(ok.all() and (rn == r).all())
    mean = float(((v - p) / u).mean()) if len(p) else 0.0
    return {"consistent": lo <= hi, "bounds": [lo, hi], "correctly_rounded": correct, "mean_error_ulps": mean.hex()}


def collect_mul_bias(be: Backend, sweep_size: int = 1 << 16, truncation_column: int | None = None) -> dict:
    fmt = be.fmt
    source = "argument"
    if truncation_column is None:
        col = probe_mul_truncation_column(be)
        truncation_column = col.interpretation.get("truncation_column")
        source = "mul-truncation-column"
    summary = _sweep(be, fmt, sweep_size)
    refinement: list = []
    if summary["consistent"] and not summary["correctly_rounded"]:
        lo, hi = summary["bounds"]
        if lo < hi:
            _refine_bias(be, fmt, lo, hi, refinement)
    return {
        "format": fmt.name,
        "sweep_size": sweep_size,
        "multiplicand": hexbits(fmt, encode(round_to_format(ExactNumber.from_int(_one_row_sig(fmt)), fmt), fmt)),
        "sweep": summary,
        "refinement": refinement,
        "truncation_column": truncation_column,
        "truncation_column_source": source,
    }


def interpret_mul_bias(obs: dict):
    fmt = get_format(obs["format"])
    sweep = obs["sweep"]
    k = obs["truncation_column"]
    out = {
        "bias_value": None,
        "bias_constant": None,
        "truncation_column": k,
        "rounding": None,
        "mean_error_ulps": sweep["mean_error_ulps"],
        "refinement_queries": len(obs["refinement"]),
        "consistent_with_column": None,
    }
    if sweep["correctly_rounded"]:
        out.update(bias_value=0, bias_constant=0, rounding="nearest-even", consistent_with_column=k == 0)
        return out, Confidence.EXACT, "correctly rounded multiplier"
    if not sweep["consistent"]:
        return out, Confidence.INCONCLUSIVE, "sweep fits no chopped biased array"
    bias = pinned_bias(fmt, bias_from_queries(fmt, obs["refinement"], *sweep["bounds"]))
    if bias is None:
        return out, Confidence.INCONCLUSIVE, "bias value not pinned by the sweep"
    out.update(bias_value=bias, rounding="toward-zero")
    if k is None:
        return out, Confidence.INFERRED, "no truncation column to express the bias in"
    c, rest = divmod(bias, 1 << k)
    fits = rest == 0 and (c < (1 << k) if k else c == 0)
    out["consistent_with_column"] = fits
    if not fits:
        return out, Confidence.INCONCLUSIVE, f"bias value {bias} is not c*2**{k} with c < 2**{k}"
    out["bias_constant"] = c
    return out, Confidence.EXACT, ""


def probe_mul_bias(
    be: Backend, sweep_size: int = 1 << 16, truncation_column: int | None = None
) -> ProbeResult:
    obs = collect_mul_bias(be, sweep_size, truncation_column)
    return finish("mul-bias", obs, interpret_mul_bias(obs))


# -- sign handling -----------------------------------------------------------


def collect_mul_sign(be: Backend, trials: int = 1_000_000, seed: int = 0) -> dict:
    fmt = be.fmt
    rng = np.random.default_rng(seed)
    span = min(fmt.e_max // 2 - 1, 60)
    a = random_signs(rng, fmt, random_normals(rng, fmt, trials, -span, span))
    b = random_signs(rng, fmt, random_normals(rng, fmt, trials, -span, span))
    if trials:
        a[0] = 0
    sign = np.uint64(fmt.sign_mask)
    p1 = np.asarray(be.b_mul_many(a, b), dtype=np.uint64)
    p2 = np.asarray(be.b_mul_many(a ^ sign, b ^ sign), dtype=np.uint64)
    p3 = np.asarray(be.b_mul_many(a, b ^ sign), dtype=np.uint64)
    p4 = np.asarray(be.b_mul_many(a ^ sign, b), dtype=np.uint64)
    checks = {
        "a*b == (-a)*(-b)": p1 != p2,
        "a*b == -(a*(-b))": p1 != (p3 ^ sign),
        "(-a)*b == a*(-b)": p4 != p3,
        "(-a)*b == -(a*b)": p4 != (p1 ^ sign),
    }
    witnesses = []
    for i in np.flatnonzero(np.logical_or.reduce(list(checks.values())))[:MAX_WITNESSES]:
        witnesses.append({
            "a": hexbits(fmt, a[i]),
            "b": hexbits(fmt, b[i]),
            "products": [hexbits(fmt, p[i]) for p in (p1, p2, p3, p4)],
        })
    return {
        "format": fmt.name,
        "seed": seed,
        "trials": trials,
        "failures": {name: int(bad.sum()) for name, bad in checks.items()},
        "witnesses": witnesses,
    }


def interpret_mul_sign(obs: dict):
    holds = not any(obs["failures"].values())
    out = {"sign_magnitude": holds, "failed_identities": sorted(k for k, v in obs["failures"].items() if v)}
    return out, Confidence.EXACT, ""


def probe_mul_sign(be: Backend, trials: int = 1_000_000, seed: int = 0) -> ProbeResult:
    obs = collect_mul_sign(be, trials, seed)
    return finish("mul-sign", obs, interpret_mul_sign(obs))


# -- MAD ---------------------------------------------------------------------


def collect_mad(be: Backend, trials: int = 10_000, seed: int = 0) -> dict:
    fmt = be.fmt
    rng = np.random.default_rng(seed)
    span = min(10, fmt.e_max // 2 - 1)
    xs = random_signs(rng, fmt, random_normals(rng, fmt, trials, -span, span))
    ys = random_signs(rng, fmt, random_normals(rng, fmt, trials, -span, span))
    if trials:
        xs[0] = encode(round_to_format(ExactNumber.from_int(1), fmt), fmt)
    reproduced = 0
    retained = 0
    witnesses = []
    for x, y in zip(xs.tolist(), ys.tolist()):
        dx, dy = decode(x, fmt), decode(y, fmt)
        exact = exact_value(dx, fmt) * exact_value(dy, fmt)
        z = negate_bits(encode(round_to_format(exact, fmt), fmt), fmt)
        r = be.b_mad(x, y, z)
        rem = product_remainder(dx, dy, fmt)
        expected = encode(round_to_format(rem, fmt), fmt)
        if r == expected:
            reproduced += 1
        elif len(witnesses) < MAX_WITNESSES:
            witnesses.append({
                "x": hexbits(fmt, x), "y": hexbits(fmt, y), "z": hexbits(fmt, z),
                "result": hexbits(fmt, r), "remainder": hexbits(fmt, expected),
            })
        d = decode(r, fmt)
        if d.is_finite and not d.is_zero:
            # bits from the product's leading bit down to the result's lowest set bit
            retained = max(retained, exact.exponent - exact_value(d, fmt).scale + 1)
    return {
        "format": fmt.name,
        "seed": seed,
        "trials": trials,
        "reproduced": reproduced,
        "max_retained_bits": retained,
        "witnesses": witnesses,
    }


def interpret_mad(obs: dict):
    fmt = get_format(obs["format"])
    p = fmt.precision
    wide = obs["max_retained_bits"] > p
    out = {
        "extended_product": wide,
        "remainders_reproduced": obs["reproduced"] == obs["trials"],
        "product_kept_bits": 2 * p if wide else p,
        "max_retained_bits": obs["max_retained_bits"],
    }
    return out, Confidence.EXACT, ""


def probe_mad_extended(be: Backend, trials: int = 10_000, seed: int = 0) -> ProbeResult:
    try:
        be.require("has_mad")
    except CapabilityError as exc:
        return not_applicable("mad-extended", str(exc))
    obs = collect_mad(be, trials, seed)
    return finish("mad-extended", obs, interpret_mad(obs))
