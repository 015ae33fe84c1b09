"""Characterization reports: canonical JSON documents and parameter-level diffs.

Every number that stands for a floating-point value is stored as a hex
string (a bit pattern or ``float.hex`` text), so the document never holds a
JSON float.  Keys are sorted and indentation is fixed, which makes
``load`` followed by ``dumps`` reproduce the input byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .probes import Characterization, ProbeResult, RunOptions

SCHEMA = "fpchar-report/1"
# keys left out of the comparison canon
VOLATILE_KEYS = ("timestamp",)


class ReportError(ValueError):
    pass


@dataclass
class ReportDocument:
    backend: dict
    probes: list[ProbeResult]
    derived_profile: dict | None = None
    replay: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    comparison: dict | None = None
    tool_version: str = __version__
    timestamp: str = ""
    schema: str = SCHEMA

    @classmethod
    def from_characterization(cls, char: Characterization, options: RunOptions, probes, timestamp=None):
        options = {
            "seed": options.seed,
            "trials": options.trials,
            "full_sweep": options.full_sweep,
            "probes": list(probes),
        }
        data = char.to_dict()
        return cls(
            backend=data["backend"],
            probes=sorted(char.results, key=lambda r: r.name),
            derived_profile=data["derived_profile"],
            replay=data["replay"],
            options=options,
            timestamp=timestamp or now(),
        )

    def to_dict(self) -> dict:
        out = {
            "schema": self.schema,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "backend": self.backend,
            "options": self.options,
            "probes": [r.to_dict() for r in sorted(self.probes, key=lambda r: r.name)],
            "derived_profile": self.derived_profile,
            "replay": self.replay,
        }
        if self.comparison is not None:
            out["comparison"] = self.comparison
        return out

    @classmethod
    def from_dict(cls, obj) -> ReportDocument:
        if not isinstance(obj, dict):
            raise ReportError("report must be a JSON object")
        if obj.get("schema") != SCHEMA:
            raise ReportError(f"unsupported report schema {obj.get('schema')!r}; expected {SCHEMA!r}")
        try:
            probes = [ProbeResult.from_dict(p) for p in obj["probes"]]
            return cls(
                backend=obj["backend"],
                probes=probes,
                derived_profile=obj.get("derived_profile"),
                replay=obj.get("replay", {}),
                options=obj.get("options", {}),
                comparison=obj.get("comparison"),
                tool_version=obj["tool_version"],
                timestamp=obj.get("timestamp", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ReportError(f"malformed report: {exc!r}") from exc

    def parameters(self) -> dict[str, object]:
        """Flat ``probe.parameter -> value`` map of everything interpreted."""
        out: dict[str, object] = {}
        for r in self.probes:
            out[f"{r.name}.status"] = r.status.value
            for key, value in r.interpretation.items():
                out[f"{r.name}.{key}"] = value
        if self.derived_profile:
            for key, value in _flatten(self.derived_profile, "profile"):
                if key != "profile.name":
                    out[key] = value
        return out


def _flatten(obj, prefix):
    if isinstance(obj, dict):
        for key, value in obj.items():
            yield from _flatten(value, f"{prefix}.{key}")
    else:
        yield prefix, obj


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _check_no_floats(obj, path="$"):
    if isinstance(obj, float):
        raise ReportError(f"{path}: floating-point values must be stored as hex strings")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_no_floats(v, f"{path}.{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_no_floats(v, f"{path}[{i}]")


def dumps(doc: ReportDocument | dict) -> str:
    obj = doc.to_dict() if isinstance(doc, ReportDocument) else doc
    _check_no_floats(obj)
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=True) + "\n"


def canonical(doc: ReportDocument) -> str:
    """Serialization used to compare runs: the volatile keys are dropped."""
    obj = doc.to_dict()
    for key in VOLATILE_KEYS:
        obj.pop(key, None)
    return dumps(obj)


def loads(text: str) -> ReportDocument:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportError(f"not valid JSON: {exc}") from exc
    return ReportDocument.from_dict(obj)


def load(path) -> ReportDocument:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc.strerror}") from exc
    return loads(text)


def save(doc: ReportDocument, path):
    Path(path).write_text(dumps(doc))


@dataclass(frozen=True)
class Delta:
    parameter: str
    left: object
    right: object

    def render(self) -> str:
        return f"{self.parameter}: {_show(self.left)} != {_show(self.right)}"

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "left": self.left, "right": self.right}


_MISSING = "<absent>"


def _show(value) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True)


def compare(a: ReportDocument, b: ReportDocument) -> list[Delta]:
    pa, pb = a.parameters(), b.parameters()
    deltas = []
    for key in sorted(set(pa) | set(pb)):
        left, right = pa.get(key, _MISSING), pb.get(key, _MISSING)
        if left != right:
            deltas.append(Delta(key, left, right))
    return deltas
