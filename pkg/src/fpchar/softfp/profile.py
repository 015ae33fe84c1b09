"""Shader profiles: a complete simulated arithmetic pipeline, plus JSON I/O."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from ..formats import FP32, FORMATS, FloatFormat
from .units import AdderConfig, MadConfig, MultiplierConfig, TransferPolicy


class Routing(str, enum.Enum):
    STAGE1 = "stage1"
    STAGE2 = "stage2"


@dataclass(frozen=True)
class ShaderProfile:
    name: str = "custom"
    storage_format: FloatFormat = FP32
    register_format: FloatFormat = FP32
    pixel_stage1: MadConfig = field(default_factory=MadConfig)
    pixel_stage2: MadConfig = field(default_factory=MadConfig)
    vertex_mad: MadConfig = field(default_factory=MadConfig)
    transfer: TransferPolicy = field(default_factory=TransferPolicy)
    lone_add_routing: Routing = Routing.STAGE1
    fp16_internal_bits: int = 11
    saturate_overflow: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lone_add_routing", Routing(self.lone_add_routing))
        s, r = self.storage_format, self.register_format
        if r.exponent_bits < s.exponent_bits or r.fraction_bits < s.fraction_bits:
            raise ValueError("register_format must be at least as wide as storage_format")
        if self.fp16_internal_bits < 11:
            raise ValueError("fp16_internal_bits must be at least 11")

    @property
    def lone_stage(self) -> MadConfig:
        return self.pixel_stage1 if self.lone_add_routing is Routing.STAGE1 else self.pixel_stage2

    def renamed(self, name: str) -> ShaderProfile:
        return replace(self, name=name)


def _format_to_json(fmt: FloatFormat):
    if FORMATS.get(fmt.name) == fmt:
        return fmt.name
    return {
        "exponent_bits": fmt.exponent_bits,
        "fraction_bits": fmt.fraction_bits,
        "supports_specials": fmt.supports_specials,
        "name": fmt.name,
    }


def _format_from_json(obj) -> FloatFormat:
    if isinstance(obj, str):
        if obj not in FORMATS:
            raise ValueError(f"unknown format {obj!r}")
        return FORMATS[obj]
    _check_keys(obj, {"exponent_bits", "fraction_bits", "supports_specials", "name"}, "format")
    return FloatFormat(
        int(obj["exponent_bits"]),
        int(obj["fraction_bits"]),
        bool(obj.get("supports_specials", True)),
        str(obj.get("name", "")),
    )


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ValueError(f"{where}: expected an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise ValueError(f"{where}: unknown keys {sorted(extra)}")


def _mad_to_json(m: MadConfig) -> dict:
    return {
        "multiplier": {
            "truncation_column": m.multiplier.truncation_column,
            "bias_constant": m.multiplier.bias_constant,
            "rounding": m.multiplier.rounding.value,
            "sign_magnitude": m.multiplier.sign_magnitude,
        },
        "adder": {
            "guard_bits": m.adder.guard_bits,
            "sticky_enabled": m.adder.sticky_enabled,
            "rounding": m.adder.rounding.value,
        },
        "product_kept_bits": m.product_kept_bits,
    }


def _mad_from_json(obj, where) -> MadConfig:
    _check_keys(obj, {"multiplier", "adder", "product_kept_bits"}, where)
    mul = obj.get("multiplier", {})
    add = obj.get("adder", {})
    _check_keys(mul, {"truncation_column", "bias_constant", "rounding", "sign_magnitude"}, where + ".multiplier")
    _check_keys(add, {"guard_bits", "sticky_enabled", "rounding"}, where + ".adder")
    p = obj.get("product_kept_bits")
    return MadConfig(
        multiplier=MultiplierConfig(
            int(mul.get("truncation_column", 0)),
            int(mul.get("bias_constant", 0)),
            mul.get("rounding", "toward-zero"),
            bool(mul.get("sign_magnitude", True)),
        ),
        adder=AdderConfig(
            int(add.get("guard_bits", 0)),
            bool(add.get("sticky_enabled", False)),
            add.get("rounding", "toward-zero"),
        ),
        product_kept_bits=None if p is None else int(p),
    )


PROFILE_KEYS = {
    "name",
    "storage_format",
    "register_format",
    "pixel_stage1",
    "pixel_stage2",
    "vertex_mad",
    "transfer",
    "lone_add_routing",
    "fp16_internal_bits",
    "saturate_overflow",
}


def profile_to_dict(p: ShaderProfile) -> dict:
    return {
        "name": p.name,
        "storage_format": _format_to_json(p.storage_format),
        "register_format": _format_to_json(p.register_format),
        "pixel_stage1": _mad_to_json(p.pixel_stage1),
        "pixel_stage2": _mad_to_json(p.pixel_stage2),
        "vertex_mad": _mad_to_json(p.vertex_mad),
        "transfer": {
            "denormal": p.transfer.denormal.value,
            "nan": p.transfer.nan.value,
            "infinity": p.transfer.infinity.value,
        },
        "lone_add_routing": p.lone_add_routing.value,
        "fp16_internal_bits": p.fp16_internal_bits,
        "saturate_overflow": p.saturate_overflow,
    }


def profile_from_dict(obj) -> ShaderProfile:
    """Build a profile from parsed JSON; raises ``ValueError`` on any malformed field."""
    _check_keys(obj, PROFILE_KEYS, "profile")
    try:
        transfer = obj.get("transfer", {})
        _check_keys(transfer, {"denormal", "nan", "infinity"}, "transfer")
        storage = _format_from_json(obj.get("storage_format", "fp32"))
        return ShaderProfile(
            name=str(obj.get("name", "custom")),
            storage_format=storage,
            register_format=_format_from_json(obj.get("register_format", _format_to_json(storage))),
            pixel_stage1=_mad_from_json(obj.get("pixel_stage1", {}), "pixel_stage1"),
            pixel_stage2=_mad_from_json(obj.get("pixel_stage2", {}), "pixel_stage2"),
            vertex_mad=_mad_from_json(obj.get("vertex_mad", {}), "vertex_mad"),
            transfer=TransferPolicy(**transfer),
            lone_add_routing=obj.get("lone_add_routing", "stage1"),
            fp16_internal_bits=int(obj.get("fp16_internal_bits", 11)),
            saturate_overflow=bool(obj.get("saturate_overflow", False)),
        )
    except (TypeError, KeyError) as exc:
        raise ValueError(f"malformed profile: {exc}") from exc


def dumps_profile(p: ShaderProfile) -> str:
    return json.dumps(profile_to_dict(p), indent=2, sort_keys=True) + "\n"


def load_profile(path) -> ShaderProfile:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return profile_from_dict(obj)


def save_profile(p: ShaderProfile, path):
    Path(path).write_text(dumps_profile(p))


PRESET_NAMES = ("ieee-rne-fp32", "nvidia7800-like", "ati-rx1800-like")


def preset(name: str) -> ShaderProfile:
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; expected one of {list(PRESET_NAMES)}")
    text = resources.files(__package__).joinpath("presets", f"{name}.json").read_text()
    return profile_from_dict(json.loads(text))


def random_profile(rng, fmt: FloatFormat = FP32, name: str = "random") -> ShaderProfile:
    """A chopping profile drawn from the parameter space the probes identify.

    Guard bits are drawn per stage.  The multiplier, the MAD product width
    and the transfer policies are shared by all stages.
    """
    from .units import DenormalPolicy, NanPolicy

    k = int(rng.integers(0, 13))
    c = int(rng.integers(0, 1 << k)) if k else 0
    mul = MultiplierConfig(k, c, "toward-zero", bool(rng.integers(0, 2)))
    kept = None if rng.integers(0, 2) else 2 * fmt.precision
    stages = [MadConfig(mul, AdderConfig(int(rng.integers(0, 5))), kept) for _ in range(2)]
    routing = Routing.STAGE2 if rng.integers(0, 2) else Routing.STAGE1
    profile = ShaderProfile(
        name=name,
        storage_format=fmt,
        register_format=fmt,
        pixel_stage1=stages[0],
        pixel_stage2=stages[1],
        transfer=TransferPolicy(
            denormal=list(DenormalPolicy)[int(rng.integers(0, 2))],
            nan=list(NanPolicy)[int(rng.integers(0, 3))],
        ),
        lone_add_routing=routing,
        fp16_internal_bits=int(rng.integers(11, 28)),
    )
    return replace(profile, vertex_mad=profile.lone_stage)


def canonical_profile(p: ShaderProfile) -> ShaderProfile:
    """Representative of the class of profiles no black-box experiment can tell apart.

    Dropping column 0 alone never changes a chopped product of normal
    numbers, so it is hidden when subnormal operands are flushed and no
    fused MAD keeps the low product bits.  The lone operation routing is
    moot when both stages are identical.
    """

    def mad(m: MadConfig) -> MadConfig:
        mul = m.multiplier
        hidden = p.transfer.flushes and m.product_kept_bits is None
        if mul.truncation_column == 1 and mul.bias_constant == 0 and hidden:
            mul = replace(mul, truncation_column=0)
        return replace(m, multiplier=mul)

    s1, s2 = mad(p.pixel_stage1), mad(p.pixel_stage2)
    routing = Routing.STAGE1 if s1 == s2 else p.lone_add_routing
    return replace(
        p, name="", pixel_stage1=s1, pixel_stage2=s2, vertex_mad=mad(p.vertex_mad), lone_add_routing=routing
    )
