"""
Quality-aware latency cost model for fractional operator placement.

An analytics job is a DAG of operators. Every operator is split across edge
devices by a fraction matrix ``x`` whose rows sum to one. The latency of an
edge ``i -> j`` is the slowest sending device's transfer time plus a
congestion charge per enabled cross-device link:

    max_u { x[i,u] * s_i * sum_v comCost[u,v] * x[j,v] } + alpha * enabledLinks(i, j)

The job latency is the critical (slowest) source-to-sink path over these edge
latencies (see ``core.graph``) and the scalar objective trades it against the
share of data that is quality checked:

    F = latency / (1 + beta * dq_fraction)

Every inner sum is taken with ``math.fsum`` so results do not depend on the
order of devices.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.exceptions import EdgeNotFoundError, ParameterError, ShapeError

ROW_SUM_TOLERANCE = 1e-9

Edge = Tuple[int, int]


class LinkCountMode(str, Enum):
    """How enabled links of an edge are counted."""

    PAIRS = "pairs"
    DEVICES = "devices"


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Violation:
    """A single failed constraint, located by a field path such as ``placement[1][2]``."""

    code: str
    message: str
    location: str = ""
    severity: Severity = Severity.ERROR

    def to_dict(self) -> Dict[str, str]:
        return {
            "code": self.code,
            "severity": self.severity.value,
            "location": self.location,
            "message": self.message,
        }


@dataclass
class ValidationReport:
    """Collected constraint violations. An empty error list means valid."""

    violations: List[Violation] = field(default_factory=list)

    def add(self, code: str, message: str, location: str = "",
            severity: Severity = Severity.ERROR) -> None:
        self.violations.append(Violation(code, message, location, severity))

    def warn(self, code: str, message: str, location: str = "") -> None:
        self.add(code, message, location, Severity.WARNING)

    def extend(self, other: "ValidationReport") -> "ValidationReport":
        self.violations.extend(other.violations)
        return self

    @property
    def errors(self) -> List[Violation]:
        return [v for v in self.violations if v.severity is Severity.ERROR]

    @property
    def warnings(self) -> List[Violation]:
        return [v for v in self.violations if v.severity is Severity.WARNING]

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> List[str]:
        return [v.code for v in self.violations]

    def summary(self) -> str:
        if not self.violations:
            return "no violations"
        head = self.errors[0] if self.errors else self.violations[0]
        where = f"{head.location}: " if head.location else ""
        return (
            f"{len(self.errors)} error(s), {len(self.warnings)} warning(s); "
            f"first: {where}{head.message}"
        )

    def to_dict(self) -> Dict[str, object]:
        return {
            "valid": self.ok,
            "errors": len(self.errors),
            "warnings": len(self.warnings),
            "violations": [v.to_dict() for v in self.violations],
        }


@dataclass(frozen=True)
class Operator:
    """A node of the analytics DAG."""

    id: int
    selectivity: float = 1.0


@dataclass(frozen=True, eq=False)
class OperatorGraph:
    """
    The analytics job. Operator ids are their positions in ``operators`` and
    index the rows of a placement.

    Construction does not reject cycles or dangling edges so they can be
    reported by ``core.graph.validate_graph``.
    """

    operators: Tuple[Operator, ...]
    edges: Tuple[Edge, ...]

    @classmethod
    def build(cls, selectivities: Sequence[float], edges: Iterable[Sequence[int]]) -> "OperatorGraph":
        operators = tuple(Operator(i, float(s)) for i, s in enumerate(selectivities))
        return cls(operators, tuple((int(e[0]), int(e[1])) for e in edges))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OperatorGraph):
            return NotImplemented
        return self.operators == other.operators and self.edge_set == other.edge_set

    def __hash__(self) -> int:
        return hash((self.operators, self.edge_set))

    @property
    def operator_count(self) -> int:
        return len(self.operators)

    @cached_property
    def edge_set(self) -> FrozenSet[Edge]:
        return frozenset(self.edges)

    @cached_property
    def sorted_edges(self) -> Tuple[Edge, ...]:
        return tuple(sorted(self.edge_set))

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.edge_set

    def selectivity(self, i: int) -> float:
        return self.operators[i].selectivity

    @cached_property
    def successors(self) -> Dict[int, Tuple[int, ...]]:
        succ: Dict[int, List[int]] = {op.id: [] for op in self.operators}
        for i, j in self.sorted_edges:
            if i in succ and j in succ:
                succ[i].append(j)
        return {k: tuple(v) for k, v in succ.items()}

    @cached_property
    def predecessors(self) -> Dict[int, Tuple[int, ...]]:
        pred: Dict[int, List[int]] = {op.id: [] for op in self.operators}
        for i, j in self.sorted_edges:
            if i in pred and j in pred:
                pred[j].append(i)
        return {k: tuple(v) for k, v in pred.items()}

    @cached_property
    def sources(self) -> Tuple[int, ...]:
        return tuple(i for i, pred in self.predecessors.items() if not pred)

    @cached_property
    def sinks(self) -> Tuple[int, ...]:
        return tuple(i for i, succ in self.successors.items() if not succ)

    def to_dict(self) -> Dict[str, object]:
        return {
            "operators": [{"id": op.id, "selectivity": op.selectivity} for op in self.operators],
            "edges": [list(e) for e in self.edges],
        }


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DeviceTopology:
    """
    Edge devices: ``com_cost[u, v]`` is the time to move one unit of data from
    device ``u`` to device ``v`` (asymmetric costs allowed) and
    ``availability[i, u]`` says whether operator ``i`` may run on ``u``.
    """

    com_cost: np.ndarray
    availability: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "com_cost", _frozen_array(self.com_cost, float))
        object.__setattr__(self, "availability", _frozen_array(self.availability, bool))
        if self.com_cost.ndim != 2 or self.com_cost.shape[0] != self.com_cost.shape[1]:
            raise ShapeError(f"com_cost must be a square matrix, got shape {self.com_cost.shape}")
        if self.availability.ndim != 2 or self.availability.shape[1] != self.com_cost.shape[0]:
            raise ShapeError(
                f"availability must have one column per device ({self.com_cost.shape[0]}), "
                f"got shape {self.availability.shape}"
            )

    @property
    def device_count(self) -> int:
        return self.com_cost.shape[0]

    @property
    def operator_count(self) -> int:
        return self.availability.shape[0]

    def devices_for(self, i: int) -> Tuple[int, ...]:
        """ED_i: the devices operator ``i`` may be assigned to."""
        return tuple(int(u) for u in np.flatnonzero(self.availability[i]))

    def with_availability(self, availability: np.ndarray) -> "DeviceTopology":
        return DeviceTopology(self.com_cost, availability)

    def scaled(self, factor: float) -> "DeviceTopology":
        return DeviceTopology(self.com_cost * factor, self.availability)

    def permuted(self, order: Sequence[int]) -> "DeviceTopology":
        """Relabel devices so that new device ``k`` is old device ``order[k]``."""
        order = list(order)
        return DeviceTopology(self.com_cost[np.ix_(order, order)], self.availability[:, order])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DeviceTopology):
            return NotImplemented
        return (np.array_equal(self.com_cost, other.com_cost)
                and np.array_equal(self.availability, other.availability))

    __hash__ = None  # type: ignore[assignment]

    def to_dict(self) -> Dict[str, object]:
        return {
            "com_cost": self.com_cost.tolist(),
            "availability": self.availability.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Placement:
    """Operator x device matrix of fractions ``x[i, u]``."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x, float))
        if self.x.ndim != 2:
            raise ShapeError(f"placement must be a matrix, got shape {self.x.shape}")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Placement":
        return cls(np.array(rows, dtype=float))

    @classmethod
    def colocated(cls, operator_count: int, device_count: int, device: int = 0) -> "Placement":
        x = np.zeros((operator_count, device_count))
        x[:, device] = 1.0
        return cls(x)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.x.shape  # type: ignore[return-value]

    def row(self, i: int) -> np.ndarray:
        return self.x[i]

    def flat(self) -> Tuple[float, ...]:
        """Row-major fractions, the tie-break key of the searchers."""
        return tuple(float(v) for v in self.x.ravel())

    def with_row(self, i: int, row: Sequence[float]) -> "Placement":
        x = np.array(self.x)
        x[i] = row
        return Placement(x)

    def permuted(self, order: Sequence[int]) -> "Placement":
        return Placement(self.x[:, list(order)])

    def to_list(self) -> List[List[float]]:
        return self.x.tolist()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Placement):
            return NotImplemented
        return np.array_equal(self.x, other.x)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ModelParams:
    """Cost model knobs: congestion ``alpha``, quality weight ``beta`` and ``dq_fraction``."""

    alpha: float = 0.0
    beta: float = 0.0
    dq_fraction: float = 0.0
    link_count_mode: LinkCountMode = LinkCountMode.PAIRS
    batch_size: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "link_count_mode", LinkCountMode(self.link_count_mode))
        if not self.alpha >= 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if not self.beta >= 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if not 0 <= self.dq_fraction <= 1:
            raise ParameterError(f"dq_fraction must be in [0, 1], got {self.dq_fraction}")
        if not self.batch_size > 0:
            raise ParameterError(f"batch_size must be > 0, got {self.batch_size}")

    def with_dq(self, dq_fraction: float) -> "ModelParams":
        return replace(self, dq_fraction=dq_fraction)

    def with_beta(self, beta: float) -> "ModelParams":
        return replace(self, beta=beta)

    def to_dict(self) -> Dict[str, object]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "dq_fraction": self.dq_fraction,
            "link_count_mode": self.link_count_mode.value,
            "batch_size": self.batch_size,
        }


@dataclass(frozen=True)
class EdgeLatencyBreakdown:
    """Latency of one DAG edge and the per-sending-device transfer times behind it."""

    edge: Edge
    per_device_cost: Tuple[float, ...]
    enabled_links: int
    latency: float

    @property
    def max_cost(self) -> float:
        return max(self.per_device_cost, default=0.0)

    def to_dict(self) -> Dict[str, object]:
        return {
            "edge": list(self.edge),
            "per_device_cost": list(self.per_device_cost),
            "max_cost": self.max_cost,
            "enabled_links": self.enabled_links,
            "latency": self.latency,
        }


def _check_shapes(graph: Optional[OperatorGraph], topo: DeviceTopology, placement: Placement) -> None:
    if placement.shape[1] != topo.device_count:
        raise ShapeError(
            f"placement has {placement.shape[1]} device columns, topology has {topo.device_count} devices"
        )
    if placement.shape[0] != topo.operator_count:
        raise ShapeError(
            f"placement has {placement.shape[0]} operator rows, availability has {topo.operator_count}"
        )
    if graph is not None and graph.operator_count != placement.shape[0]:
        raise ShapeError(
            f"placement has {placement.shape[0]} operator rows, graph has {graph.operator_count} operators"
        )


def count_enabled_links(x_i: np.ndarray, x_j: np.ndarray, mode: LinkCountMode) -> int:
    """Enabled links between two placement rows (see ``enabled_links``)."""
    senders = np.flatnonzero(x_i)
    receivers = np.flatnonzero(x_j)
    pairs = [(int(u), int(v)) for u in senders for v in receivers if u != v]
    if LinkCountMode(mode) is LinkCountMode.PAIRS:
        return len(pairs)
    return len({d for pair in pairs for d in pair})


def enabled_links(i: int, j: int, placement: Placement,
                  mode: LinkCountMode = LinkCountMode.PAIRS,
                  graph: Optional[OperatorGraph] = None) -> int:
    """
    Count the cross-device links that carry data of edge ``i -> j``.

    A link ``(u, v)`` is enabled when ``x[i,u] != 0``, ``x[j,v] != 0`` and
    ``u != v``. PAIRS counts such ordered pairs, DEVICES counts the distinct
    devices taking part in at least one of them.

    Raises:
        EdgeNotFoundError: If ``graph`` is given and lacks the edge, or an
            endpoint has no placement row.
    """
    rows = placement.shape[0]
    if (graph is not None and not graph.has_edge(i, j)) or not (0 <= i < rows and 0 <= j < rows):
        raise EdgeNotFoundError((i, j))
    return count_enabled_links(placement.row(i), placement.row(j), mode)


def edge_cost_vector(x_i: np.ndarray, x_j: np.ndarray, selectivity: float,
                     com_cost: np.ndarray, available: np.ndarray,
                     batch_size: float = 1.0) -> Tuple[float, ...]:
    """
    ``x[i,u] * s_i * sum_v comCost[u,v] * x[j,v]`` for every sending device
    ``u``; zero for devices operator ``i`` may not use.
    """
    volume = selectivity * batch_size
    # Rows of com_cost scaled elementwise by the receiving fractions
    weighted = com_cost * x_j
    costs = []
    for u in range(com_cost.shape[0]):
        if available[u] and x_i[u] != 0:
            costs.append(float(x_i[u]) * volume * math.fsum(weighted[u]))
        else:
            costs.append(0.0)
    return tuple(costs)


def breakdown_from_rows(edge: Edge, x_i: np.ndarray, x_j: np.ndarray, selectivity: float,
                        topo: DeviceTopology, params: ModelParams) -> EdgeLatencyBreakdown:
    """Edge latency from the two placement rows alone."""
    i = edge[0]
    costs = edge_cost_vector(x_i, x_j, selectivity, topo.com_cost, topo.availability[i],
                             params.batch_size)
    links = count_enabled_links(x_i, x_j, params.link_count_mode)
    latency = max(costs, default=0.0) + params.alpha * links
    return EdgeLatencyBreakdown(edge, costs, links, latency)


def edge_latency(i: int, j: int, graph: OperatorGraph, topo: DeviceTopology,
                 placement: Placement, params: ModelParams) -> EdgeLatencyBreakdown:
    """
    Latency of edge ``i -> j``: the slowest sending device of ``i`` plus
    ``alpha`` per enabled link.

    Raises:
        EdgeNotFoundError: If ``(i, j)`` is not an edge of ``graph``.
        ShapeError: If placement, topology and graph dimensions disagree.
    """
    if not graph.has_edge(i, j):
        raise EdgeNotFoundError((i, j))
    _check_shapes(graph, topo, placement)
    return breakdown_from_rows((i, j), placement.row(i), placement.row(j),
                               graph.selectivity(i), topo, params)


def edge_latencies(graph: OperatorGraph, topo: DeviceTopology, placement: Placement,
                   params: ModelParams) -> Dict[Edge, EdgeLatencyBreakdown]:
    """Breakdowns of every edge, keyed by edge in ascending order."""
    _check_shapes(graph, topo, placement)
    return {
        (i, j): breakdown_from_rows((i, j), placement.row(i), placement.row(j),
                                    graph.selectivity(i), topo, params)
        for i, j in graph.sorted_edges
    }


def objective_f(latency: float, params: ModelParams) -> float:
    """``latency / (1 + beta * dq_fraction)``; beta = 0 or dq = 0 leaves latency unchanged."""
    return latency / (1.0 + params.beta * params.dq_fraction)


def network_volume(graph: OperatorGraph, topo: DeviceTopology, placement: Placement) -> float:
    """
    Total fraction-volume crossing device boundaries:
    sum over edges and ``u != v`` of ``x[i,u] * s_i * x[j,v]``.
    """
    _check_shapes(graph, topo, placement)
    terms = []
    for i, j in graph.sorted_edges:
        s_i = graph.selectivity(i)
        x_i, x_j = placement.row(i), placement.row(j)
        for u in range(topo.device_count):
            if x_i[u] == 0:
                continue
            for v in range(topo.device_count):
                if u != v:
                    terms.append(float(x_i[u]) * s_i * float(x_j[v]))
    return math.fsum(terms)


def transfer_time(graph: OperatorGraph, topo: DeviceTopology, placement: Placement,
                  params: ModelParams) -> float:
    """Sum of every sending device's transfer time over all edges, congestion excluded."""
    return math.fsum(
        cost
        for breakdown in edge_latencies(graph, topo, placement, params).values()
        for cost in breakdown.per_device_cost
    )


def validate_topology(topo: DeviceTopology, graph: Optional[OperatorGraph] = None) -> ValidationReport:
    """Cost matrix and availability checks; a nonzero diagonal is only a warning."""
    report = ValidationReport()
    com_cost = topo.com_cost
    if not np.all(np.isfinite(com_cost)):
        report.add("com-cost-nonfinite", "communication costs must be finite", "com_cost")
    for u, v in zip(*np.nonzero(com_cost < 0)):
        report.add("com-cost-negative", f"cost {com_cost[u, v]} from device {u} to {v} is negative",
                   f"com_cost[{u}][{v}]")
    for u in range(topo.device_count):
        if com_cost[u, u] != 0:
            report.warn("com-cost-diagonal",
                        f"device {u} has nonzero self cost {com_cost[u, u]}; it enters every "
                        "transfer that stays on the device",
                        f"com_cost[{u}][{u}]")
    if graph is not None and topo.operator_count != graph.operator_count:
        report.add("dimension-mismatch",
                   f"availability has {topo.operator_count} rows for {graph.operator_count} operators",
                   "availability")
    for i in range(topo.operator_count):
        if not topo.availability[i].any():
            report.add("no-available-device", f"operator {i} has no available device",
                       f"availability[{i}]")
    return report


def validate_placement(placement: Placement, graph: OperatorGraph, topo: DeviceTopology,
                       caps: Optional[np.ndarray] = None) -> ValidationReport:
    """
    Check the placement constraints: matching dimensions, fractions in
    [0, 1], rows summing to one within 1e-9, no mass on unavailable devices
    and, when ``caps`` is given, no fraction above its cap.
    """
    report = ValidationReport()
    rows, cols = placement.shape
    if rows != graph.operator_count or cols != topo.device_count or rows != topo.operator_count:
        report.add("dimension-mismatch",
                   f"placement is {rows}x{cols}, expected {graph.operator_count}x{topo.device_count}",
                   "placement")
        return report

    x = placement.x
    for i in range(rows):
        row = x[i]
        where = f"placement[{i}]"
        if not np.all(np.isfinite(row)):
            report.add("fraction-nonfinite", f"operator {i} has a non-finite fraction", where)
            continue
        for u in np.flatnonzero(row < 0):
            report.add("fraction-negative", f"operator {i} has negative fraction {row[u]} on device {u}",
                       f"{where}[{u}]")
        for u in np.flatnonzero(row > 1 + ROW_SUM_TOLERANCE):
            report.add("fraction-range", f"operator {i} has fraction {row[u]} > 1 on device {u}",
                       f"{where}[{u}]")
        total = math.fsum(row)
        if abs(total - 1.0) > ROW_SUM_TOLERANCE:
            report.add("row-sum", f"fractions of operator {i} sum to {total:.12g}, not 1", where)
        for u in np.flatnonzero((row != 0) & ~topo.availability[i]):
            report.add("unavailable-device",
                       f"operator {i} has fraction {row[u]} on unavailable device {u}",
                       f"{where}[{u}]")
        if not np.any((row > 0) & topo.availability[i]):
            report.add("no-support", f"operator {i} has no mass on any available device", where)
        if caps is not None:
            for u in np.flatnonzero(row > caps[i] + ROW_SUM_TOLERANCE):
                report.add("fraction-cap",
                           f"operator {i} has fraction {row[u]} on device {u}, above cap {caps[i, u]}",
                           f"{where}[{u}]")
    return report
