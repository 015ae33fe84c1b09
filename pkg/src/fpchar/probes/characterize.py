"""Run the probe suite, fit a shader profile to it and check the fit by replay."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

from ..backends import Backend, CapabilityError, SimulatedBackend
from ..formats import FloatFormat
from ..oracle import RoundingMode
from ..softfp import (
    AdderConfig,
    MadConfig,
    MultiplierConfig,
    Routing,
    ShaderProfile,
    TransferPolicy,
    profile_to_dict,
)
from . import adder, multiplier, storage
from .common import Confidence, ProbeResult, Status, finish


@dataclass(frozen=True)
class RunOptions:
    seed: int = 0
    # overrides the default trial count of every random probe
    trials: int | None = None
    full_sweep: bool = False
    sweep_size: int = 1 << 16

    def trials_or(self, default: int) -> int:
        return default if self.trials is None else self.trials


def _run_mul_bias(be: Backend, opts: RunOptions, done: dict) -> ProbeResult:
    col = done.get("mul-truncation-column")
    k = col.interpretation.get("truncation_column") if col is not None else None
    size = 1 << be.fmt.fraction_bits if opts.full_sweep else min(opts.sweep_size, 1 << be.fmt.fraction_bits)
    return multiplier.probe_mul_bias(be, size, k)


@dataclass(frozen=True)
class ProbeSpec:
    name: str
    run: Callable[[Backend, RunOptions, dict], ProbeResult]
    interpret: Callable[[dict], tuple]
    summary: str


# Order matters: mul-bias reuses the truncation column found before it.
PROBES: dict[str, ProbeSpec] = {
    spec.name: spec
    for spec in (
        ProbeSpec("transfer", lambda be, o, d: storage.probe_transfer(be), storage.interpret_transfer,
                  "denormal, infinity and NaN handling on upload and download"),
        ProbeSpec("exponent-range", lambda be, o, d: storage.probe_exponent_range(be),
                  storage.interpret_exponent_range, "(MAX + MAX) - MAX inside the registers"),
        ProbeSpec("mantissa-width", lambda be, o, d: storage.probe_mantissa_width(be),
                  storage.interpret_mantissa_width, "significand width of the temporary registers"),
        ProbeSpec("mad-extended", lambda be, o, d: multiplier.probe_mad_extended(be, o.trials_or(10_000), o.seed),
                  multiplier.interpret_mad, "whether MAD keeps the product beyond working precision"),
        ProbeSpec("mul-truncation-column", lambda be, o, d: multiplier.probe_mul_truncation_column(be),
                  multiplier.interpret_truncation_column, "first partial-product column the multiplier sums"),
        ProbeSpec("mul-bias", _run_mul_bias, multiplier.interpret_mul_bias,
                  "constant added to compensate the dropped columns"),
        ProbeSpec("mul-sign", lambda be, o, d: multiplier.probe_mul_sign(be, o.trials_or(1_000_000), o.seed),
                  multiplier.interpret_mul_sign, "sign-magnitude identities of the multiplier"),
        ProbeSpec("guard-bits-single", lambda be, o, d: adder.probe_guard_bits_single(be),
                  adder.interpret_guard_single, "threshold of 1.5 - 2**-i on a lone subtraction"),
        ProbeSpec("guard-bits-chained", lambda be, o, d: adder.probe_guard_bits_chained(be),
                  adder.interpret_guard_chained, "thresholds of each stage of a two-stage pipeline"),
        ProbeSpec("exponent-gap", lambda be, o, d: adder.probe_exponent_gap_property(be, o.trials_or(10_000), o.seed),
                  adder.interpret_exponent_gap, "whether x + y == x once the exponents are far apart"),
        ProbeSpec("fp16-internal", lambda be, o, d: adder.probe_fp16_internal(be),
                  adder.interpret_fp16_internal, "internal significand width of fp16 arithmetic"),
    )
}


def resolve_probes(selection) -> list[str]:
    """Probe names in run order from ``"all"``, a CSV string or an iterable."""
    if selection is None or selection == "all":
        return list(PROBES)
    names = [n.strip() for n in selection.split(",")] if isinstance(selection, str) else list(selection)
    unknown = [n for n in names if n not in PROBES]
    if unknown or not names:
        raise ValueError(f"unknown probes {unknown}; expected names from {list(PROBES)}")
    return [n for n in PROBES if n in names]


def reinterpret(result: ProbeResult) -> ProbeResult:
    """Recompute a result's interpretation from its observations alone."""
    if result.status in (Status.NOT_APPLICABLE, Status.ERROR):
        return result
    return finish(result.name, result.observations, PROBES[result.name].interpret(result.observations))


def _run_one(spec: ProbeSpec, be: Backend, opts: RunOptions, done: dict) -> ProbeResult:
    try:
        return spec.run(be, opts, done)
    except CapabilityError as exc:
        return ProbeResult(spec.name, Status.NOT_APPLICABLE, {}, {}, Confidence.INCONCLUSIVE, str(exc))
    except Exception as exc:  # one broken probe must not sink the suite
        return ProbeResult(spec.name, Status.ERROR, {}, {}, Confidence.INCONCLUSIVE, f"{type(exc).__name__}: {exc}")


# -- profile fit -------------------------------------------------------------


def _usable(results: dict, name: str) -> dict | None:
    r = results.get(name)
    if r is None or r.status is not Status.OK:
        return None
    return r.interpretation


def _adder_for(threshold, rounding: str | None, width: int) -> AdderConfig:
    if rounding in (None, "toward-zero") and threshold is not None:
        return AdderConfig(min(max(threshold - width, 0), 8), False, RoundingMode.TOWARD_ZERO)
    # with a sticky bit and three guard bits every directed or nearest mode is exact
    return AdderConfig(3, True, RoundingMode.parse(rounding or "toward-zero"))


def fit_profile(results: dict, fmt: FloatFormat, name: str = "derived") -> ShaderProfile:
    """Profile that best explains ``results`` (probe name -> result).

    Parameters a probe did not pin keep the IEEE-like default.
    """
    transfer = TransferPolicy()
    t = _usable(results, "transfer")
    if t:
        transfer = TransferPolicy(
            denormal=t["denormal"] or "preserve", nan=t["nan"] or "preserve", infinity=t["infinity"] or "preserve"
        )
    elif (_usable(results, "mul-truncation-column") or {}).get("subnormal_operand") == "flushed":
        # without the transfer probe, a zeroed subnormal product is the only hint
        transfer = TransferPolicy("flush-to-zero")

    width = fmt.precision
    m = _usable(results, "mantissa-width")
    if m and m["width"]:
        width = max(m["width"], fmt.precision)
    exp_bits = fmt.exponent_bits
    saturate = False
    x = _usable(results, "exponent-range")
    if x:
        if x["extended_exponent"]:
            exp_bits += 1
        saturate = x["overflow"] == "saturate"
    register = fmt
    if (exp_bits, width - 1) != (fmt.exponent_bits, fmt.fraction_bits):
        register = FloatFormat(exp_bits, width - 1, fmt.supports_specials, "register")

    lone = _usable(results, "guard-bits-single") or {}
    rounding = lone.get("rounding")
    lone_adder = _adder_for(lone.get("threshold"), rounding, width)
    s1 = s2 = lone_adder
    routing = Routing.STAGE1
    ch = _usable(results, "guard-bits-chained")
    if ch:
        s1 = _adder_for(ch["stage1_threshold"], rounding, width)
        s2 = _adder_for(ch["stage2_threshold"], rounding, width)
        if ch["lone_routing"] == "stage2":
            routing = Routing.STAGE2

    mul = MultiplierConfig(0, 0, RoundingMode.NEAREST_EVEN)
    col = _usable(results, "mul-truncation-column")
    bias = _usable(results, "mul-bias")
    sign = _usable(results, "mul-sign")
    if col and col["rounding"] == "toward-zero":
        k, c = col["truncation_column"], col["bias_constant"]
        if bias and bias["bias_constant"] is not None:
            c = bias["bias_constant"]
        mul = MultiplierConfig(k, c, RoundingMode.TOWARD_ZERO)
    if sign:
        mul = replace(mul, sign_magnitude=sign["sign_magnitude"])

    kept = None
    mad = _usable(results, "mad-extended")
    if mad and mad["extended_product"]:
        kept = mad["product_kept_bits"]
        # a fused product exposes column 0, which a chopped one hides
        if col and col["consistent_columns"] == [0, 1] and mad["max_retained_bits"] < kept:
            mul = replace(mul, truncation_column=1)

    fp16_bits = 11
    h = _usable(results, "fp16-internal")
    if h and h["internal_width"]:
        fp16_bits = h["internal_width"] if h["rounding"] == "toward-zero" else h["internal_width"] + 3
        fp16_bits = max(fp16_bits, 11)

    stage1 = MadConfig(mul, s1, kept)
    stage2 = MadConfig(mul, s2, kept)
    profile = ShaderProfile(
        name=name,
        storage_format=fmt,
        register_format=register,
        pixel_stage1=stage1,
        pixel_stage2=stage2,
        vertex_mad=stage1,
        transfer=transfer,
        lone_add_routing=routing,
        fp16_internal_bits=fp16_bits,
        saturate_overflow=saturate,
    )
    return replace(profile, vertex_mad=profile.lone_stage)


# -- suite -------------------------------------------------------------------


@dataclass
class Characterization:
    backend: dict
    results: list[ProbeResult]
    profile: ShaderProfile | None = None
    replay: dict = field(default_factory=dict)

    def by_name(self) -> dict[str, ProbeResult]:
        return {r.name: r for r in self.results}

    @property
    def inconclusive(self) -> list[str]:
        return [r.name for r in self.results if r.status in (Status.INCONCLUSIVE, Status.ERROR)]

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "probes": [r.to_dict() for r in sorted(self.results, key=lambda r: r.name)],
            "derived_profile": profile_to_dict(self.profile) if self.profile else None,
            "replay": self.replay,
        }


def replay(profile: ShaderProfile, results: list[ProbeResult], opts: RunOptions) -> dict:
    """Re-collect every conclusive probe on the simulated ``profile``.

    Returns the names whose observations came back identical and those
    that did not.
    """
    be = SimulatedBackend(profile)
    done = {r.name: r for r in results}
    matched, mismatched = [], []
    for r in results:
        if r.status is not Status.OK:
            continue
        again = _run_one(PROBES[r.name], be, opts, done)
        (matched if again.observations == r.observations else mismatched).append(r.name)
    return {"reproduced": sorted(matched), "mismatched": sorted(mismatched), "ok": not mismatched}


def run_all(backend: Backend, options: RunOptions | None = None, probes="all", verify: bool = True) -> Characterization:
    """Run the selected probes, fit a profile and replay the observations on it."""
    opts = options or RunOptions()
    done: dict[str, ProbeResult] = {}
    for name in resolve_probes(probes):
        done[name] = _run_one(PROBES[name], backend, opts, done)
    results = list(done.values())
    fmt = backend.fmt
    profile = fit_profile(done, fmt, name=f"derived-{backend.descriptor.name}")
    char = Characterization(backend.descriptor.to_dict(), results, profile)
    char.backend["format"] = fmt.name
    if verify:
        char.replay = replay(profile, results, opts)
    return char

