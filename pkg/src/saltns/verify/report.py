"""Verification reports and their text/CSV serialisation."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

STATUSES = ("pass", "fail", "informational")
EVIDENCE_LABEL = "sampled evidence, not proof"


@dataclass
class VerificationReport:
    """Outcome of one check.

    ``value`` is the worst residual for identity checks and the worst
    ratio for inequality studies.  Informational reports never gate.
    """

    check_id: str
    anchor: str
    status: str
    value: float
    samples: int
    resolutions: Tuple[str, ...] = ()
    seeds: Tuple[int, ...] = ()
    tolerance: float = float("nan")
    label: str = ""
    details: Dict = field(default_factory=dict)
    table: List[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}, got {self.status!r}")
        if not self.anchor:
            raise ValueError(f"check {self.check_id!r} has no anchor")
        self.resolutions = tuple(str(r) for r in self.resolutions)
        self.seeds = tuple(int(s) for s in self.seeds)

    @property
    def gating(self) -> bool:
        return self.status != "informational"

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def to_text(self) -> str:
        """Key/value text, one entry per line; nested data as JSON."""
        lines = [
            f"check_id: {self.check_id}",
            f"anchor: {self.anchor}",
            f"status: {self.status}",
            f"value: {self.value!r}",
            f"tolerance: {self.tolerance!r}",
            f"samples: {self.samples}",
            f"resolutions: {', '.join(self.resolutions)}",
            f"seeds: {', '.join(str(s) for s in self.seeds)}",
        ]
        if self.label:
            lines.append(f"label: {self.label}")
        lines.append("details: " + json.dumps(self.details, sort_keys=True, default=_jsonable))
        if self.table:
            lines.append("table: " + json.dumps(self.table, sort_keys=True, default=_jsonable))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "VerificationReport":
        kv = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, val = line.partition(": ")
            kv[key] = val
        split = lambda s: tuple(x.strip() for x in s.split(",") if x.strip())
        return cls(
            check_id=kv["check_id"],
            anchor=kv["anchor"],
            status=kv["status"],
            value=float(kv["value"]),
            tolerance=float(kv["tolerance"]),
            samples=int(kv["samples"]),
            resolutions=split(kv.get("resolutions", "")),
            seeds=tuple(int(s) for s in split(kv.get("seeds", ""))),
            label=kv.get("label", ""),
            details=json.loads(kv.get("details", "{}")),
            table=json.loads(kv.get("table", "[]")),
        )


def _jsonable(obj):
    try:
        return float(obj)
    except (TypeError, ValueError):
        return str(obj)


def sort_reports(reports: Sequence[VerificationReport]) -> List[VerificationReport]:
    return sorted(reports, key=lambda r: r.check_id)


def summary_csv(reports: Sequence[VerificationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check_id", "status", "value", "tolerance", "samples", "resolutions", "seeds", "anchor"])
    for r in sort_reports(reports):
        w.writerow([r.check_id, r.status, repr(float(r.value)), repr(float(r.tolerance)), r.samples,
                    " ".join(r.resolutions), " ".join(str(s) for s in r.seeds), r.anchor])
    return buf.getvalue()


def ratio_csv(rows: Sequence[dict]) -> str:
    """Per-sample ratio table: sample id, lhs, rhs, ratio, resolution."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample", "phase", "lhs", "rhs", "ratio", "resolution"])
    for row in rows:
        w.writerow([row["sample"], row["phase"], repr(float(row["lhs"])), repr(float(row["rhs"])),
                    repr(float(row["ratio"])), row["resolution"]])
    return buf.getvalue()


def gate(reports: Sequence[VerificationReport]) -> bool:
    """True iff no gating report failed."""
    return all(r.passed for r in reports if r.gating)
