"""Structured pass/fail reports produced by structural checks and audits.

A report is a flat list of named checks.  Checks never raise; a failing
property is recorded with its worst margin and the sample where it was
first seen, so a whole scan completes even when the first sample already
violates a property.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class Check:
    """Outcome of one named numerical check.

    margin is check-specific but always oriented so that larger is safer
    (for a positive-definiteness check it is the smallest eigenvalue, for
    an identity check it is the negated residual).
    """

    name: str
    passed: bool
    margin: float | None = None
    detail: str = ""
    sample_index: int | None = None

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "margin": None if self.margin is None else float(self.margin),
            "detail": self.detail,
            "sample_index": self.sample_index,
        }


@dataclass(frozen=True)
class Report:
    """A named bundle of checks with optional free-form data attachments."""

    title: str
    checks: tuple[Check, ...] = ()
    data: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "passed": self.passed,
            "seed": self.seed,
            "checks": [c.as_dict() for c in self.checks],
            "data": _jsonable(self.data),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent, sort_keys=True)

    def render_text(self) -> str:
        lines = [f"[{'PASS' if self.passed else 'FAIL'}] {self.title}"]
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            margin = "" if c.margin is None else f"  margin={c.margin:.3e}"
            where = "" if c.sample_index is None else f"  sample={c.sample_index}"
            detail = f"  {c.detail}" if c.detail else ""
            lines.append(f"  {mark}  {c.name}{margin}{where}{detail}")
        return "\n".join(lines)


def _jsonable(obj):
    """Best-effort conversion of numpy containers for JSON serialization."""
    import numpy as np

    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
