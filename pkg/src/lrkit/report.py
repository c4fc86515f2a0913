"""Residual reports shared by every checker."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable

from .expr import ZeroVerdict

PASSING = {"ZeroSymbolic", "ZeroSampled", "Pass", "Yes", "InRelationSpan", "Connected"}


@dataclass
class Residual:
    name: str
    family: str
    verdict: str
    tolerance: float
    point: tuple[float, ...] | None = None
    value: float | None = None

    @property
    def passed(self) -> bool:
        return self.verdict in PASSING

    def to_dict(self) -> dict[str, Any]:
        witness = None
        if self.point is not None or self.value is not None:
            witness = {
                "point": None if self.point is None else [float(v) for v in self.point],
                "value": None if self.value is None else float(self.value),
            }
        return {
            "family": self.family,
            "name": self.name,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "witness": witness,
        }


def zero_residual(name: str, family: str, verdict: ZeroVerdict, tol: float) -> Residual:
    return Residual(name, family, verdict.kind.value, tol, verdict.point, verdict.value)


def numeric_residual(name: str, family: str, value: float, tol: float, point=None) -> Residual:
    verdict = "Pass" if value < tol else "Fail"
    return Residual(name, family, verdict, tol, None if point is None else tuple(point), float(value))


@dataclass
class Report:
    """A list of named residuals; ``ok`` iff every verdict passes."""

    residuals: list[Residual] = field(default_factory=list)
    seed: int = 0
    data: dict[str, Any] = field(default_factory=dict)
    timing: float | None = None

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.residuals)

    def add(self, residual: Residual) -> Residual:
        self.residuals.append(residual)
        return residual

    def extend(self, residuals: Iterable[Residual]) -> None:
        self.residuals.extend(residuals)

    def family(self, name: str) -> list[Residual]:
        return [r for r in self.residuals if r.family == name]

    def family_ok(self, name: str) -> bool:
        return all(r.passed for r in self.family(name))

    def failures(self) -> list[Residual]:
        return [r for r in self.residuals if not r.passed]

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        out = {
            "ok": self.ok,
            "residuals": [r.to_dict() for r in self.residuals],
            "seed": self.seed,
        }
        if self.data:
            out["data"] = self.data
        if timing and self.timing is not None:
            out["timing"] = self.timing
        return out

    def to_json(self, indent: int | None = 2, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=indent)
