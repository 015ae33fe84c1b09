"""Result types and small helpers shared by every probe."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..formats import FloatClass, FloatFormat, decode, encode
from ..oracle import ExactNumber, round_to_format


class Status(str, enum.Enum):
    OK = "ok"
    INCONCLUSIVE = "inconclusive"
    NOT_APPLICABLE = "not-applicable"
    ERROR = "error"


class Confidence(str, enum.Enum):
    EXACT = "exact"
    INFERRED = "inferred"
    INCONCLUSIVE = "inconclusive"


@dataclass
class ProbeResult:
    """Raw observations plus the parameters read off them.

    ``interpretation`` is always recomputable from ``observations`` with the
    probe's interpreter; see :func:`fpchar.probes.reinterpret`.
    """

    name: str
    status: Status
    observations: dict = field(default_factory=dict)
    interpretation: dict = field(default_factory=dict)
    confidence: Confidence = Confidence.EXACT
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status.value,
            "confidence": self.confidence.value,
            "note": self.note,
            "observations": self.observations,
            "interpretation": self.interpretation,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> ProbeResult:
        return cls(
            name=obj["name"],
            status=Status(obj["status"]),
            observations=obj.get("observations", {}),
            interpretation=obj.get("interpretation", {}),
            confidence=Confidence(obj.get("confidence", "exact")),
            note=obj.get("note", ""),
        )


def finish(name: str, observations: dict, interpreted) -> ProbeResult:
    interpretation, confidence, note = interpreted
    status = Status.INCONCLUSIVE if confidence is Confidence.INCONCLUSIVE else Status.OK
    return ProbeResult(name, status, observations, interpretation, confidence, note)


def not_applicable(name: str, reason: str) -> ProbeResult:
    return ProbeResult(name, Status.NOT_APPLICABLE, {}, {}, Confidence.INCONCLUSIVE, reason)


def hexbits(fmt: FloatFormat, bits: int) -> str:
    return fmt.hex(int(bits))


def unhex(s: str) -> int:
    return int(s, 16)


def exact_bits(fmt: FloatFormat, q) -> int:
    """Bits of the rational ``q``; it must be exactly representable."""
    x = ExactNumber.from_fraction(Fraction(q))
    d = round_to_format(x, fmt)
    if not d.is_finite or ExactNumber.from_datum(d, fmt) != x:
        raise ValueError(f"{q} is not representable in {fmt}")
    return encode(d, fmt)


def representable(fmt: FloatFormat, q, *, normal: bool = True) -> bool:
    q = Fraction(q)
    if q == 0:
        return True
    try:
        bits = exact_bits(fmt, q)
    except ValueError:
        return False
    return not normal or decode(bits, fmt).cls is FloatClass.NORMAL


def value_of(fmt: FloatFormat, bits: int) -> Fraction:
    return ExactNumber.from_datum(decode(bits, fmt), fmt).to_fraction()


def random_normals(rng: np.random.Generator, fmt: FloatFormat, n: int, lo: int, hi: int) -> np.ndarray:
    """``n`` random positive normal patterns with unbiased exponent in ``[lo, hi]``."""
    frac = rng.integers(0, 1 << fmt.fraction_bits, size=n, dtype=np.uint64)
    exp = rng.integers(lo + fmt.bias, hi + fmt.bias + 1, size=n).astype(np.uint64)
    return (exp << np.uint64(fmt.fraction_bits)) | frac


def random_signs(rng: np.random.Generator, fmt: FloatFormat, bits: np.ndarray) -> np.ndarray:
    flip = rng.integers(0, 2, size=len(bits), dtype=np.uint64)
    return bits | (flip << np.uint64(fmt.width - 1))
