"""
Data-quality scenarios: candidate DQ_fraction levels and the placement
constraints each level implies.

Checking more of the input leaves devices less room for upstream operators.
How much less is workload specific, so every level states it explicitly as
availability overrides and per-entry caps on ``x[i, u]``.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.model import (
    ROW_SUM_TOLERANCE,
    DeviceTopology,
    OperatorGraph,
    Placement,
    ValidationReport,
    validate_placement,
)


@dataclass(frozen=True)
class FractionCap:
    """Upper bound on the fraction of operator ``op`` placed on ``device``."""

    op: int
    device: int
    max_fraction: float

    def to_dict(self) -> Dict[str, object]:
        return {"op": self.op, "device": self.device, "max_fraction": self.max_fraction}


@dataclass(frozen=True)
class AvailabilityOverride:
    """Replaces ``available[op, device]`` for one level."""

    op: int
    device: int
    available: bool

    def to_dict(self) -> Dict[str, object]:
        return {"op": self.op, "device": self.device, "available": self.available}


@dataclass(frozen=True, eq=False)
class DqLevel:
    """One DQ_fraction level, its constraints and an optional what-if placement."""

    dq_fraction: float
    caps: Tuple[FractionCap, ...] = ()
    overrides: Tuple[AvailabilityOverride, ...] = ()
    placement: Optional[Placement] = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DqLevel):
            return NotImplemented
        return (self.dq_fraction == other.dq_fraction and self.caps == other.caps
                and self.overrides == other.overrides and self.placement == other.placement)

    __hash__ = None  # type: ignore[assignment]

    def restrict(self, topo: DeviceTopology) -> DeviceTopology:
        """The topology with this level's availability overrides applied."""
        if not self.overrides:
            return topo
        availability = np.array(topo.availability)
        for o in self.overrides:
            availability[o.op, o.device] = o.available
        return topo.with_availability(availability)

    def upper_bounds(self, topo: DeviceTopology) -> np.ndarray:
        """Largest allowed ``x[i, u]``: 0 where unavailable, else the tightest cap (1 by default)."""
        bounds = self.restrict(topo).availability.astype(float)
        for c in self.caps:
            bounds[c.op, c.device] = min(bounds[c.op, c.device], c.max_fraction)
        return bounds

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {"dq_fraction": self.dq_fraction}
        if self.caps:
            data["caps"] = [c.to_dict() for c in self.caps]
        if self.overrides:
            data["overrides"] = [o.to_dict() for o in self.overrides]
        if self.placement is not None:
            data["placement"] = self.placement.to_list()
        return data


@dataclass(frozen=True)
class DqScenario:
    """Candidate quality levels, searched one after another by the optimizer."""

    levels: Tuple[DqLevel, ...] = field(default_factory=tuple)

    @classmethod
    def single(cls, dq_fraction: float) -> "DqScenario":
        return cls((DqLevel(dq_fraction),))

    def sorted_levels(self) -> List[Tuple[int, DqLevel]]:
        """Levels with their file positions, lowest DQ_fraction first."""
        return sorted(enumerate(self.levels), key=lambda pair: pair[1].dq_fraction)

    def to_list(self) -> List[Dict[str, object]]:
        return [level.to_dict() for level in self.levels]


def validate_scenario(scenario: DqScenario, graph: OperatorGraph, topo: DeviceTopology) -> ValidationReport:
    """
    Levels need distinct DQ fractions in [0, 1], in-range constraint indices
    and a feasible row for every operator; a level's own placement must
    satisfy that level.
    """
    report = ValidationReport()
    if not scenario.levels:
        report.add("scenario-empty", "scenario has no levels", "scenario")
        return report

    seen: Dict[float, int] = {}
    n_ops, n_devices = topo.operator_count, topo.device_count
    for index, level in enumerate(scenario.levels):
        where = f"scenario[{index}]"
        if not 0 <= level.dq_fraction <= 1:
            report.add("dq-range", f"dq_fraction {level.dq_fraction} is outside [0, 1]",
                       f"{where}.dq_fraction")
        if level.dq_fraction in seen:
            report.add("dq-duplicate",
                       f"dq_fraction {level.dq_fraction} repeats level {seen[level.dq_fraction]}",
                       f"{where}.dq_fraction")
        seen.setdefault(level.dq_fraction, index)

        in_range = True
        for k, c in enumerate(level.caps):
            if not (0 <= c.op < n_ops and 0 <= c.device < n_devices):
                report.add("cap-index", f"cap refers to operator {c.op} on device {c.device}",
                           f"{where}.caps[{k}]")
                in_range = False
            if not 0 <= c.max_fraction <= 1:
                report.add("cap-range", f"max_fraction {c.max_fraction} is outside [0, 1]",
                           f"{where}.caps[{k}].max_fraction")
        for k, o in enumerate(level.overrides):
            if not (0 <= o.op < n_ops and 0 <= o.device < n_devices):
                report.add("override-index", f"override refers to operator {o.op} on device {o.device}",
                           f"{where}.overrides[{k}]")
                in_range = False
        if not in_range:
            continue

        bounds = level.upper_bounds(topo)
        for i in range(n_ops):
            if bounds[i].sum() < 1 - ROW_SUM_TOLERANCE:
                report.add("level-infeasible",
                           f"operator {i} cannot be fully placed: its allowed fractions sum to "
                           f"{bounds[i].sum():.6g}",
                           where)
        if level.placement is not None:
            sub = validate_placement(level.placement, graph, level.restrict(topo), bounds)
            for v in sub.violations:
                report.add(v.code, v.message, f"{where}.{v.location}", v.severity)
    return report
