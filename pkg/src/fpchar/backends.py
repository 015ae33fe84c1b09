"""Black-box arithmetic targets that the probes run against.

All entry points take and return raw bit patterns in the selected storage
format, so a probe never sees how a backend computes.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .formats import FP16, FP32, FP64, FloatFormat, decode, encode, get_format
from .oracle import ExactNumber, RoundingMode, exact_value, round_batch, round_to_format
from .softfp import PREV, ShaderProfile, Step, load_profile, pipeline_eval, preset, sim_mul_batch, step
from .softfp.pipeline import special_result
from .softfp.profile import PRESET_NAMES


class BackendError(ValueError):
    pass


class CapabilityError(BackendError):
    pass


@dataclass(frozen=True)
class Capabilities:
    has_two_stage_pipeline: bool = False
    has_mad: bool = True
    has_fp16: bool = False


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    kind: str
    formats: tuple
    capabilities: Capabilities

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "formats": list(self.formats),
            "capabilities": {
                "has_two_stage_pipeline": self.capabilities.has_two_stage_pipeline,
                "has_mad": self.capabilities.has_mad,
                "has_fp16": self.capabilities.has_fp16,
            },
        }


class Backend:
    """Base class; subclasses implement :meth:`_run` and :meth:`b_roundtrip`."""

    descriptor: BackendDescriptor
    fmt: FloatFormat

    def format(self, name) -> Backend:
        fmt = name if isinstance(name, FloatFormat) else get_format(name)
        if fmt.name not in self.descriptor.formats:
            raise CapabilityError(f"backend {self.descriptor.name} does not offer {fmt.name}")
        other = copy.copy(self)
        other.fmt = fmt
        return other

    def require(self, capability: str):
        if not getattr(self.descriptor.capabilities, capability):
            raise CapabilityError(f"backend {self.descriptor.name} lacks {capability}")

    def b_add(self, a: int, b: int) -> int:
        return self._run([step("add", a, b)])

    def b_sub(self, a: int, b: int) -> int:
        return self._run([step("sub", a, b)])

    def b_mul(self, a: int, b: int) -> int:
        return self._run([step("mul", a, b)])

    def b_mad(self, x: int, y: int, z: int) -> int:
        self.require("has_mad")
        return self._run([step("mad", x, y, z)])

    def b_chain2(self, step1: Step, step2: Step) -> int:
        """Two dependent operations; ``step2`` may name :data:`PREV`."""
        return self._run([step1, step2])

    def b_mul_many(self, a, b) -> np.ndarray:
        return np.array([self.b_mul(int(x), int(y)) for x, y in zip(a, b)], dtype=np.uint64)

    def b_roundtrip(self, bits: int) -> int:
        raise NotImplementedError

    def _run(self, program) -> int:
        raise NotImplementedError


class SimulatedBackend(Backend):
    def __init__(self, profile: ShaderProfile, shader: str = "pixel", name: str | None = None):
        self.profile = profile
        self.shader = shader
        self.fmt = profile.storage_format
        formats = [profile.storage_format.name]
        if profile.storage_format != FP16:
            formats.append(FP16.name)
        self.descriptor = BackendDescriptor(
            name or profile.name,
            "simulated",
            tuple(formats),
            Capabilities(has_two_stage_pipeline=shader == "pixel", has_mad=True, has_fp16=FP16.name in formats),
        )

    def _run(self, program) -> int:
        return encode(pipeline_eval(self.profile, program, fmt=self.fmt, shader=self.shader), self.fmt)

    def b_roundtrip(self, bits: int) -> int:
        from .softfp import sim_transfer

        # upload then download
        once = sim_transfer(bits, self.profile.transfer, self.fmt)
        return sim_transfer(once, self.profile.transfer, self.fmt)

    def _fast_mul_ok(self) -> bool:
        p = self.profile
        return (
            self.fmt == p.storage_format
            and p.register_format == p.storage_format
            and 2 * self.fmt.precision + 1 <= 63
            and not p.saturate_overflow
        )

    def b_mul_many(self, a, b) -> np.ndarray:
        if not self._fast_mul_ok():
            return super().b_mul_many(a, b)
        a = np.asarray(a, dtype=np.uint64)
        b = np.asarray(b, dtype=np.uint64)
        cfg = self.profile.vertex_mad if self.shader == "vertex" else self.profile.lone_stage
        out, ok = sim_mul_batch(a, b, cfg.multiplier, self.fmt)
        for i in np.flatnonzero(~ok):
            out[i] = self.b_mul(int(a[i]), int(b[i]))
        return out


class ReferenceBackend(Backend):
    """Correctly rounded IEEE arithmetic (round to nearest even) from the oracle."""

    def __init__(self, fmt: FloatFormat = FP32, name: str = "ieee"):
        self.fmt = fmt
        self.descriptor = BackendDescriptor(
            name, "reference-ieee", (FP16.name, FP32.name, FP64.name),
            Capabilities(has_two_stage_pipeline=False, has_mad=True, has_fp16=True),
        )

    def _op(self, op: str, args) -> int:
        fmt = self.fmt
        ds = [decode(a, fmt) for a in args]
        if op == "sub":
            op, ds = "add", [ds[0], -ds[1]]
        if not all(d.is_finite for d in ds):
            return encode(special_result(op, ds, fmt), fmt)
        vals = [exact_value(d, fmt) for d in ds]
        if op == "add":
            zs = ds[0].sign if ds[0].is_zero and ds[1].is_zero and ds[0].sign == ds[1].sign else 1
            return encode(round_to_format(vals[0] + vals[1], fmt, zero_sign=zs), fmt)
        if op == "mul":
            return encode(round_to_format(vals[0] * vals[1], fmt, zero_sign=ds[0].sign * ds[1].sign), fmt)
        t = self._op("mul", args[:2])
        return self._op("add", [t, args[2]])

    def _run(self, program) -> int:
        prev = None
        for s in program:
            args = [prev if isinstance(a, str) and a == PREV else int(a) for a in s.args]
            prev = self._op(s.op, args)
        return prev

    def b_roundtrip(self, bits: int) -> int:
        return bits

    def b_mul_many(self, a, b) -> np.ndarray:
        fmt = self.fmt
        if 2 * fmt.precision + 1 > 63:
            return super().b_mul_many(a, b)
        a = np.asarray(a, dtype=np.uint64)
        b = np.asarray(b, dtype=np.uint64)
        f = np.uint64(fmt.fraction_bits)
        emask = np.uint64((1 << fmt.exponent_bits) - 1)
        fmask = np.uint64(fmt.fraction_mask)
        ea = ((a >> f) & emask).astype(np.int64)
        eb = ((b >> f) & emask).astype(np.int64)
        top = (1 << fmt.exponent_bits) - 1
        normal = (ea > 0) & (ea < top) & (eb > 0) & (eb < top)
        prod = ((np.uint64(1) << f) | (a & fmask)) * ((np.uint64(1) << f) | (b & fmask))
        scale = ea + eb - 2 * fmt.bias - 2 * fmt.fraction_bits
        sh = np.uint64(fmt.width - 1)
        negative = (((a >> sh) ^ (b >> sh)) & np.uint64(1)) == 1
        out, ok = round_batch(prod, scale, negative, fmt, RoundingMode.NEAREST_EVEN)
        ok &= normal
        for i in np.flatnonzero(~ok):
            out[i] = self.b_mul(int(a[i]), int(b[i]))
        return out


_HOST_TYPES = {"fp16": (np.float16, np.uint16), "fp32": (np.float32, np.uint32), "fp64": (np.float64, np.uint64)}


class HostBackend(Backend):
    """The host's native IEEE arithmetic through numpy scalars."""

    def __init__(self, fmt: FloatFormat = FP32, name: str = "host"):
        self.fmt = fmt
        self.descriptor = BackendDescriptor(
            name, "host-native", tuple(_HOST_TYPES),
            Capabilities(has_two_stage_pipeline=False, has_mad=True, has_fp16=True),
        )

    def _types(self):
        return _HOST_TYPES[self.fmt.name]

    def _val(self, bits: int):
        ft, ut = self._types()
        return np.array([bits], dtype=ut).view(ft)

    def _bits(self, arr) -> int:
        ft, ut = self._types()
        return int(np.asarray(arr, dtype=ft).view(ut)[0])

    def _run(self, program) -> int:
        prev = None
        with np.errstate(all="ignore"):
            for s in program:
                vals = [self._val(prev if isinstance(a, str) and a == PREV else int(a)) for a in s.args]
                if s.op == "add":
                    r = vals[0] + vals[1]
                elif s.op == "sub":
                    r = vals[0] - vals[1]
                elif s.op == "mul":
                    r = vals[0] * vals[1]
                else:
                    r = vals[0] * vals[1]
                    r = r + vals[2]
                prev = self._bits(r)
        return prev

    def b_roundtrip(self, bits: int) -> int:
        return self._bits(self._val(bits))

    def b_mul_many(self, a, b) -> np.ndarray:
        ft, ut = self._types()
        with np.errstate(all="ignore"):
            r = np.asarray(a, dtype=ut).view(ft) * np.asarray(b, dtype=ut).view(ft)
        return r.view(ut).astype(np.uint64)


BACKEND_NAMES = ("ieee", "nvidia7800-like", "ati-rx1800-like", "ieee-rne-fp32", "host")


def get_backend(name: str, shader: str = "pixel") -> Backend:
    """Resolve a CLI backend name, including ``file:<profile.json>``."""
    if name == "ieee":
        return ReferenceBackend()
    if name == "host":
        return HostBackend()
    if name in PRESET_NAMES:
        return SimulatedBackend(preset(name), shader)
    if name.startswith("file:"):
        path = name[len("file:"):]
        try:
            profile = load_profile(path)
        except (OSError, ValueError) as exc:
            raise BackendError(f"cannot load profile {path}: {exc}") from exc
        return SimulatedBackend(profile, shader)
    raise BackendError(f"unknown backend {name!r}; expected one of {list(BACKEND_NAMES)} or file:<path>")


def encode_value(x, fmt: FloatFormat) -> int:
    """Bits of a Python number rounded to nearest even in ``fmt`` (test and probe helper)."""
    if isinstance(x, float):
        return encode(round_to_format(ExactNumber.from_float(x), fmt), fmt)
    q = Fraction(x)
    if q.denominator & (q.denominator - 1) == 0:
        return encode(round_to_format(ExactNumber.from_fraction(q), fmt), fmt)
    # keep a few bits past the format precision plus a sticky bit
    shift = fmt.precision + 3 - (abs(q.numerator).bit_length() - q.denominator.bit_length())
    m, rem = divmod(abs(q.numerator) << max(shift, 0), q.denominator << max(-shift, 0))
    approx = ExactNumber(1 if q > 0 else -1, (m << 1) | bool(rem), -shift - 1)
    return encode(round_to_format(approx, fmt), fmt)
