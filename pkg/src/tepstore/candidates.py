"""Storage candidate selection from recourse diagnostics.

A bus is flagged on a representative day when it sheds load in any hour
or curtails more than ``EPS_CURT`` of renewable energy over the day. The
candidate set is the intersection of the daily flags (or their union,
for experiments). :func:`augment_candidates` grows a set with buses that
still shed after a plan is in place.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .recourse import EPS_CURT, SHED_TOL, RecourseReport

INTERSECTION = "intersection"
UNION = "union"
RULES = (INTERSECTION, UNION)

SHED = "shed"
CURTAILED = "curtailed"
MANUAL = "manual"


@dataclass(frozen=True)
class CandidateSet:
    """Bus indices eligible for storage, each with the reasons it was picked."""

    provenance: dict = field(default_factory=dict)  # bus -> frozenset of tags
    source: str = ""

    def __post_init__(self):
        prov = {int(b): frozenset(tags) for b, tags in self.provenance.items()}
        for b, tags in prov.items():
            if not tags:
                raise ValueError(f"bus {b} has no provenance")
            if not tags <= {SHED, CURTAILED, MANUAL}:
                raise ValueError(f"bus {b} has unknown provenance {sorted(tags)}")
        object.__setattr__(self, "provenance", dict(sorted(prov.items())))

    @property
    def buses(self) -> frozenset:
        return frozenset(self.provenance)

    def __len__(self) -> int:
        return len(self.provenance)

    def __iter__(self):
        return iter(sorted(self.provenance))

    def __contains__(self, bus) -> bool:
        return bus in self.provenance

    @classmethod
    def manual(cls, buses, source: str = "manual") -> "CandidateSet":
        return cls({int(b): {MANUAL} for b in buses}, source)

    def to_dict(self, case=None) -> dict:
        rows = []
        for b, tags in self.provenance.items():
            row = {"bus": b, "provenance": sorted(tags)}
            if case is not None:
                row["bus_id"] = case.buses[b].id
                row["name"] = case.buses[b].name
            rows.append(row)
        return {"source": self.source, "size": len(self), "candidates": rows}

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateSet":
        return cls({r["bus"]: set(r["provenance"]) for r in d["candidates"]}, d.get("source", ""))

    @classmethod
    def load_json(cls, path) -> "CandidateSet":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def daily_flags(report: RecourseReport, eps_curt: float = EPS_CURT) -> list[dict[int, set[str]]]:
    """Per day: flagged bus -> reasons."""
    shed = report.daily_shed()
    curt = report.daily_curtailed()
    days = []
    for s in range(report.k):
        flags: dict[int, set[str]] = {}
        for b in range(shed.shape[1]):
            tags = set()
            if shed[s, b] > SHED_TOL:
                tags.add(SHED)
            if curt[s, b] > eps_curt:
                tags.add(CURTAILED)
            if tags:
                flags[b] = tags
        days.append(flags)
    return days


def select_candidates(report: RecourseReport, rule: str = INTERSECTION,
                      eps_curt: float = EPS_CURT) -> CandidateSet:
    """Buses flagged on every day (``intersection``) or on any day (``union``)."""
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}, got {rule!r}")
    if report.k == 0:
        raise ValueError("report has no days")
    days = daily_flags(report, eps_curt)
    members = set(days[0])
    for flags in days[1:]:
        members = members & set(flags) if rule == INTERSECTION else members | set(flags)
    prov = {}
    for b in members:
        tags = set()
        for flags in days:
            tags |= flags.get(b, set())
        prov[b] = tags
    return CandidateSet(prov, f"recourse:{rule}")


def augment_candidates(base: CandidateSet, post_report: RecourseReport) -> CandidateSet:
    """Add every bus that sheds on any day of ``post_report``."""
    prov = {b: set(t) for b, t in base.provenance.items()}
    shed = post_report.daily_shed()
    for b in sorted(set((shed > SHED_TOL).any(axis=0).nonzero()[0].tolist())):
        if b not in prov:
            prov[b] = {SHED}
    source = base.source + "+augmented" if base.source else "augmented"
    return CandidateSet(prov, source)
