"""Acceptance checks with their time budgets.

Each test records one verdict line that the terminal summary prints under
"acceptance criteria".
"""

import io
import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from bitoracles import RoundOracle, TinyFormat, chop_to_precision, chop_window_add, partial_product_matrix
from fpchar import report
from fpchar.backends import SimulatedBackend
from fpchar.cli import main
from fpchar.formats import FP16, FP32, FloatFormat, decode, encode
from fpchar.probes import RunOptions, probe_exponent_gap_property, probe_mul_sign, run_all
from fpchar.probes.common import unhex, value_of
from fpchar.softfp import (
    AdderConfig,
    MadConfig,
    MultiplierConfig,
    ShaderProfile,
    TransferPolicy,
    canonical_profile,
    preset,
    random_profile,
    save_profile,
    sim_add,
    sim_mul,
)

pytestmark = pytest.mark.slow


def _run_cli(tmp_path, *argv):
    path = tmp_path / "report.json"
    start = time.perf_counter()
    code = main(["run", *argv, "-o", str(path)], io.StringIO(), io.StringIO())
    seconds = time.perf_counter() - start
    return code, report.load(path).parameters() if code in (0, 2) else {}, seconds


def _mismatches(params, expected):
    return {k: (params.get(k), v) for k, v in expected.items() if params.get(k) != v}


def test_criterion_1_nvidia_like_findings(tmp_path, acceptance):
    code, params, seconds = _run_cli(tmp_path, "--backend", "nvidia7800-like")
    expected = {
        "guard-bits-single.rounding": "toward-zero",
        "mul-truncation-column.rounding": "toward-zero",
        "guard-bits-chained.stage1_threshold": 26,
        "guard-bits-chained.stage2_threshold": 26,
        "guard-bits-chained.stage1_guard_bits": 2,
        "guard-bits-chained.stage2_guard_bits": 2,
        "mul-truncation-column.truncation_column": 6,
        "mul-sign.sign_magnitude": True,
        "transfer.denormal": "flush-to-zero",
        "transfer.nan": "preserve",
        "transfer.infinity": "preserve",
        "mad-extended.extended_product": False,
        "fp16-internal.internal_width": 26,
    }
    bad = _mismatches(params, expected)
    bias = params.get("mul-bias.bias_value")
    ok = code == 0 and not bad and bool(bias) and seconds < 10
    acceptance(1, ok, seconds, f"k=6 bias={bias}")
    assert code == 0
    assert not bad
    assert bias, "bias must be nonzero"
    assert seconds < 10


def test_criterion_2_ati_like_findings(tmp_path, acceptance):
    code, params, seconds = _run_cli(tmp_path, "--backend", "ati-rx1800-like")
    expected = {
        "mul-truncation-column.truncation_column": 9,
        "guard-bits-single.threshold": 26,
        "guard-bits-chained.stage1_threshold": 25,
        "guard-bits-chained.stage1_guard_bits": 1,
        "transfer.nan": "quiet-snan",
    }
    bad = _mismatches(params, expected)
    ok = code == 0 and not bad and seconds < 10
    acceptance(2, ok, seconds, "k=9 thresholds 26/25")
    assert code == 0
    assert not bad
    assert seconds < 10


def test_criterion_3_reference(tmp_path, acceptance):
    code, params, seconds = _run_cli(tmp_path, "--backend", "ieee", "--format", "fp32")
    expected = {
        "mantissa-width.width": 24,
        "mul-truncation-column.truncation_column": 0,
        "mul-bias.bias_value": 0,
        "exponent-range.extended_exponent": False,
    }
    bad = _mismatches(params, expected)
    # the reference has no pipeline, so that one probe is not applicable; nothing is inconclusive
    ok = code == 0 and not bad and seconds < 10
    acceptance(3, ok, seconds, "width 24, k=0, bias 0")
    assert code == 0
    assert not bad
    assert seconds < 10


def test_criterion_4_random_profiles_are_recovered(acceptance):
    start = time.perf_counter()
    failures = []
    for seed in range(100):
        truth = random_profile(np.random.default_rng(seed))
        char = run_all(SimulatedBackend(truth), RunOptions(seed=seed, trials=2000))
        if char.inconclusive or not char.replay["ok"] or canonical_profile(char.profile) != canonical_profile(truth):
            failures.append(seed)
    seconds = time.perf_counter() - start
    ok = not failures and seconds < 300
    acceptance(4, ok, seconds, f"{100 - len(failures)}/100 recovered")
    assert not failures
    assert seconds < 300


TINY = FloatFormat(4, 3, True, "tiny")
TINY_REF = TinyFormat(4, 3)


def test_criterion_5_tiny_format_exhaustive(acceptance):
    start = time.perf_counter()
    rounder = RoundOracle(TINY_REF)
    finite = TINY_REF.finite_patterns()
    adder = AdderConfig(TINY.fraction_bits + 2, True, "nearest-even")
    mismatches = 0
    for a, b in itertools.product(finite, repeat=2):
        da, db = decode(a, TINY), decode(b, TINY)
        both_neg_zero = a == b == 0x80
        total = TINY_REF.value(a) + TINY_REF.value(b)
        if encode(sim_add(da, db, adder, TINY), TINY) != rounder.round(total, "nearest-even", both_neg_zero):
            mismatches += 1
        sa, wa = TINY_REF.significand(a)
        sb, wb = TINY_REF.significand(b)
        negative = bool((a ^ b) & 0x80)
        for mode in ("nearest-even", "toward-zero"):
            if sa == 0 or sb == 0:
                expected = int(negative) << 7
            else:
                q = partial_product_matrix(sa, sb) * Fraction(2) ** (wa + wb)
                expected = rounder.round(-q if negative else q, mode)
            if encode(sim_mul(da, db, MultiplierConfig(0, 0, mode), TINY), TINY) != expected:
                mismatches += 1
    seconds = time.perf_counter() - start
    pairs = len(finite) ** 2
    acceptance(5, mismatches == 0 and seconds < 60, seconds, f"{pairs} pairs, {mismatches} mismatches")
    assert mismatches == 0
    assert seconds < 60


def test_criterion_6_fp16_roundtrip(acceptance):
    start = time.perf_counter()
    bad = [bits for bits in range(1 << 16) if encode(decode(bits, FP16), FP16) != bits]
    seconds = time.perf_counter() - start
    acceptance(6, not bad and seconds < 5, seconds, "65536 patterns")
    assert not bad
    assert seconds < 5


def test_criterion_7_full_bias_sweep(tmp_path, acceptance):
    custom = MadConfig(MultiplierConfig(10, 301), AdderConfig(2))
    profile = ShaderProfile(
        name="custom-bias", pixel_stage1=custom, pixel_stage2=custom, vertex_mad=custom,
        transfer=TransferPolicy("flush-to-zero"),
    )
    save_profile(profile, tmp_path / "custom.json")
    probes = "mul-truncation-column,mul-bias"
    start = time.perf_counter()
    found, codes, sweeps = {}, {}, {}
    for name, backend in (("nvidia7800-like", "nvidia7800-like"), ("custom", f"file:{tmp_path / 'custom.json'}")):
        codes[name], params, _ = _run_cli(tmp_path, "--backend", backend, "--probes", probes, "--full-sweep")
        found[name] = params.get("mul-bias.bias_constant")
        doc = report.load(tmp_path / "report.json")
        sweeps[name] = next(r for r in doc.probes if r.name == "mul-bias").observations["sweep_size"]
    seconds = time.perf_counter() - start
    ok = (
        found == {"nvidia7800-like": 32, "custom": 301}
        and set(codes.values()) == {0}
        and set(sweeps.values()) == {1 << 23}
        and seconds < 60
    )
    acceptance(7, ok, seconds, f"2**23 products, recovered c={found}")
    assert set(codes.values()) == {0}
    assert set(sweeps.values()) == {1 << 23}
    assert found == {"nvidia7800-like": 32, "custom": 301}
    assert seconds < 60


def test_criterion_8_sign_identities(acceptance):
    start = time.perf_counter()
    failures = {}
    for name in ("nvidia7800-like", "ati-rx1800-like", "ieee-rne-fp32"):
        r = probe_mul_sign(SimulatedBackend(preset(name)), trials=10**6, seed=1)
        failures[name] = sum(r.observations["failures"].values()) if r.observations["trials"] == 10**6 else None
    seconds = time.perf_counter() - start
    ok = set(failures.values()) == {0} and seconds < 30
    acceptance(8, ok, seconds, "10**6 pairs per preset, 0 failures" if ok else str(failures))
    assert set(failures.values()) == {0}
    assert seconds < 30


def _gap_witness_problems(name: str) -> list[str]:
    profile = preset(name)
    be = SimulatedBackend(profile)
    first = probe_exponent_gap_property(be, seed=3)
    if probe_exponent_gap_property(be, seed=3).observations != first.observations:
        return [f"{name}: not deterministic"]
    w = first.interpretation.get("witness")
    if not w:
        return [f"{name}: no witness"]
    x, y, got = unhex(w["x"]), unhex(w["y"]), unhex(w["result"])
    guard = profile.lone_stage.adder.guard_bits
    model = chop_to_precision(chop_window_add(value_of(FP32, x), value_of(FP32, y), 24, guard), 24)
    problems = []
    if got == x:
        problems.append(f"{name}: witness does not violate x + y == x")
    if value_of(FP32, got) != model:
        problems.append(f"{name}: witness result disagrees with the chop window oracle")
    return problems


def test_criterion_9_gap_witness(acceptance):
    start = time.perf_counter()
    problems = []
    for name in ("nvidia7800-like", "ati-rx1800-like"):
        problems += _gap_witness_problems(name)
    seconds = time.perf_counter() - start
    acceptance(9, not problems, seconds, "; ".join(problems) or "witness on both presets matches the oracle")
    assert not problems
