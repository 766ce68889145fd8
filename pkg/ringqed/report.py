"""Acceptance report: recovered quantities checked against targets.

A report is a pure function of (config bytes, seed): no timestamps, fixed
record order, JSON written with sorted keys.
"""

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import yaml

from ringqed.errors import ValidationError
from ringqed.io import read_json

TARGETS_PATH = os.path.join(os.path.dirname(__file__), "data", "published_targets.yaml")
TOLERANCE_KINDS = ("abs", "rel", "sigma", "factor", "range")
DEFAULT_REL_TOLERANCE = 0.05


@dataclass(frozen=True)
class Tolerance:
    kind: str
    value: object

    def __post_init__(self):
        if self.kind not in TOLERANCE_KINDS:
            raise ValidationError(f"unknown tolerance kind '{self.kind}'")
        if self.kind == "range":
            if len(self.value) != 2 or not self.value[0] <= self.value[1]:
                raise ValidationError(f"range tolerance needs [lo, hi], got {self.value}")
            object.__setattr__(self, "value", [float(self.value[0]), float(self.value[1])])
        elif self.kind == "factor":
            if not self.value >= 1:
                raise ValidationError(f"factor tolerance must be >= 1, got {self.value}")
        elif not self.value >= 0:
            raise ValidationError(f"{self.kind} tolerance must be >= 0, got {self.value}")

    def check(self, value: float, target: Optional[float], uncertainty: Optional[float] = None,
              target_uncertainty: Optional[float] = None) -> bool:
        if value is None or not math.isfinite(value):
            return False
        if self.kind == "range":
            lo, hi = self.value
            return lo <= value <= hi
        if target is None:
            raise ValidationError(f"{self.kind} tolerance needs a target")
        diff = abs(value - target)
        if self.kind == "abs":
            return diff <= self.value
        if self.kind == "rel":
            return diff <= self.value * abs(target)
        if self.kind == "sigma":
            combined = math.hypot(uncertainty or 0.0, target_uncertainty or 0.0)
            return diff <= self.value * combined
        # factor
        if target <= 0 or value <= 0:
            return False
        return target / self.value <= value <= target * self.value

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class Target:
    source: str
    tolerance: Tolerance
    target: Optional[float] = None
    uncertainty: Optional[float] = None


@dataclass(frozen=True)
class Record:
    name: str
    value: float
    uncertainty: Optional[float]
    target: Optional[float]
    target_uncertainty: Optional[float]
    source: str
    tolerance: Tolerance
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": _clean(self.value),
            "uncertainty": _clean(self.uncertainty),
            "target": _clean(self.target),
            "target_uncertainty": _clean(self.target_uncertainty),
            "source": self.source,
            "tolerance": self.tolerance.to_dict(),
            "pass": self.passed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Record":
        tol = data["tolerance"]
        return cls(
            name=data["name"],
            value=data["value"],
            uncertainty=data.get("uncertainty"),
            target=data.get("target"),
            target_uncertainty=data.get("target_uncertainty"),
            source=data["source"],
            tolerance=Tolerance(tol["kind"], tol["value"]),
            passed=bool(data["pass"]),
        )


def _clean(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _default_tolerance(uncertainty: Optional[float]) -> Tolerance:
    if uncertainty:
        return Tolerance("abs", 3.0 * uncertainty)
    return Tolerance("rel", DEFAULT_REL_TOLERANCE)


def load_targets(path: str = TARGETS_PATH) -> dict[str, Target]:
    """Read the checked-in targets file."""
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    targets = {}
    for name, entry in data.items():
        source = entry.get("source", "published")
        if source not in ("published", "config"):
            raise ValidationError(f"target '{name}': unknown source '{source}'")
        tol = entry.get("tolerance")
        tolerance = Tolerance(tol["kind"], tol["value"]) if tol else _default_tolerance(entry.get("uncertainty"))
        target = entry.get("target")
        if source == "published" and target is None and tolerance.kind != "range":
            raise ValidationError(f"published target '{name}' has no value")
        targets[name] = Target(
            source=source,
            tolerance=tolerance,
            target=None if target is None else float(target),
            uncertainty=entry.get("uncertainty"),
        )
    return targets


@dataclass
class Report:
    provenance: dict
    targets: dict = field(default_factory=load_targets)
    records: list = field(default_factory=list)

    def add(self, name: str, value: float, uncertainty: Optional[float] = None,
            target: Optional[float] = None) -> Record:
        """Check a recovered quantity and append the verdict.

        ``target`` is the value computed from the config; a "published" entry in
        the targets file replaces it. Names without an entry are compared
        with ``target`` at the default tolerance.
        """
        entry = self.targets.get(name)
        if entry is None:
            if target is None:
                raise ValidationError(f"record '{name}' has neither a listed nor a computed target")
            entry = Target(source="model", tolerance=_default_tolerance(None))
        if entry.source == "published":
            target = entry.target
        elif target is None:
            raise ValidationError(f"record '{name}' needs a target computed from the config")

        value = float(value)
        record = Record(
            name=name,
            value=value,
            uncertainty=None if uncertainty is None else float(uncertainty),
            target=None if target is None else float(target),
            target_uncertainty=entry.uncertainty,
            source=entry.source,
            tolerance=entry.tolerance,
            passed=entry.tolerance.check(value, target, uncertainty, entry.uncertainty),
        )
        self.records.append(record)
        return record

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def failures(self) -> list[Record]:
        return [r for r in self.records if not r.passed]

    def record(self, name: str) -> Record:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "provenance": dict(self.provenance),
            "records": [r.to_dict() for r in self.records],
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path: str) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())


def load_report(path: str) -> dict:
    data = read_json(path)
    if not isinstance(data, dict) or "records" not in data or "provenance" not in data:
        raise ValidationError(f"{path} is not a ringqed report")
    return data


def compare_reports(a: dict, b: dict) -> list[str]:
    """Names of records that differ between two reports, including missing ones."""
    rec_a = {r["name"]: r for r in a["records"]}
    rec_b = {r["name"]: r for r in b["records"]}
    return sorted(name for name in set(rec_a) | set(rec_b) if rec_a.get(name) != rec_b.get(name))


def format_table(data: dict) -> str:
    """One line per record: verdict, name, value +/- uncertainty, target."""
    lines = []
    for r in data["records"]:
        verdict = "PASS" if r["pass"] else "FAIL"
        value = "nan" if r["value"] is None else f"{r['value']:.6g}"
        if r.get("uncertainty") is not None:
            value += f" +/- {r['uncertainty']:.2g}"
        target = "-" if r.get("target") is None else f"{r['target']:.6g}"
        lines.append(f"{verdict}  {r['name']:<30} {value:<24} target {target} ({r['tolerance']['kind']})")
    passed = sum(1 for r in data["records"] if r["pass"])
    lines.append(f"{passed}/{len(data['records'])} records pass")
    return "\n".join(lines)
