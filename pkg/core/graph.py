"""
DAG analysis for operator graphs: structural validation, source-to-sink path
enumeration and the critical (longest) path over per-edge latencies.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import networkx as nx

from core.model import (
    DeviceTopology,
    Edge,
    ModelParams,
    OperatorGraph,
    Placement,
    ValidationReport,
    edge_latencies,
)
from utils.exceptions import GraphError, PathExplosionError
from utils.logger import get_logger

logger = get_logger("graph")

DEFAULT_PATH_CAP = 10 ** 6


@dataclass(frozen=True)
class DagPath:
    """Chained edges from a source operator to a sink operator."""

    edges: Tuple[Edge, ...]

    @property
    def operators(self) -> Tuple[int, ...]:
        return (self.edges[0][0],) + tuple(j for _, j in self.edges)

    @property
    def source(self) -> int:
        return self.edges[0][0]

    @property
    def sink(self) -> int:
        return self.edges[-1][1]

    def latency(self, weights: Mapping[Edge, float]) -> float:
        """Sum of edge weights from the source end, the order the longest-path pass uses."""
        total = 0.0
        for edge in self.edges:
            total = total + weights[edge]
        return total

    def __str__(self) -> str:
        return " -> ".join(str(i) for i in self.operators)

    def to_list(self) -> List[List[int]]:
        return [list(e) for e in self.edges]


def to_networkx(graph: OperatorGraph) -> nx.DiGraph:
    """Directed graph over operator ids; dangling edges are left out."""
    dag = nx.DiGraph()
    dag.add_nodes_from(op.id for op in graph.operators)
    dag.add_edges_from(e for e in graph.sorted_edges if e[0] in dag and e[1] in dag)
    return dag


def validate_graph(graph: OperatorGraph) -> ValidationReport:
    """
    Report structural problems: operator ids out of order, negative
    selectivity, dangling edge endpoints, cycles (with a witness), sources
    whose selectivity is not 1 and a missing source or sink.
    """
    report = ValidationReport()
    if not graph.operators:
        report.add("empty-graph", "graph has no operators", "operators")
        return report

    for position, op in enumerate(graph.operators):
        if op.id != position:
            report.add("operator-id", f"operator at position {position} has id {op.id}",
                       f"operators[{position}].id")
        if not op.selectivity >= 0:
            report.add("selectivity-negative", f"operator {op.id} has selectivity {op.selectivity}",
                       f"operators[{position}].selectivity")

    ids = {op.id for op in graph.operators}
    for index, (i, j) in enumerate(graph.edges):
        for endpoint in (i, j):
            if endpoint not in ids:
                report.add("dangling-edge", f"edge {i}->{j} refers to unknown operator {endpoint}",
                           f"edges[{index}]")
    if len(graph.edge_set) != len(graph.edges):
        report.warn("duplicate-edge", "edge list contains duplicates; each edge counts once", "edges")

    dag = to_networkx(graph)
    try:
        cycle = nx.find_cycle(dag, source=sorted(dag.nodes))
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle:
        witness = [u for u, _ in cycle] + [cycle[0][0]]
        report.add("cycle", f"graph has a cycle {witness}", "edges")

    if not any(not dag.in_degree(n) for n in dag.nodes):
        report.add("no-source", "graph has no source operator", "edges")
    if not any(not dag.out_degree(n) for n in dag.nodes):
        report.add("no-sink", "graph has no sink operator", "edges")

    for n in sorted(dag.nodes):
        op = graph.operators[n] if n < graph.operator_count else None
        if op is not None and dag.in_degree(n) == 0 and op.selectivity != 1:
            report.add("source-selectivity",
                       f"source operator {n} has selectivity {op.selectivity}, sources emit one "
                       "tuple per input tuple",
                       f"operators[{n}].selectivity")
    return report


def topological_order(graph: OperatorGraph) -> Tuple[int, ...]:
    """
    Operators in topological order, smallest id first among ready ones.

    Raises:
        GraphError: If the graph has a cycle.
    """
    try:
        return tuple(nx.lexicographical_topological_sort(to_networkx(graph)))
    except nx.NetworkXUnfeasible as e:
        raise GraphError(f"operator graph is not acyclic: {e}") from e


def _path_sources(graph: OperatorGraph) -> List[int]:
    # Isolated operators carry no edge and start no path
    return [s for s in graph.sources if graph.successors[s]]


def count_paths(graph: OperatorGraph) -> int:
    """Number of source-to-sink paths, counted without enumerating them."""
    order = topological_order(graph)
    reaching_sink: Dict[int, int] = {}
    for node in reversed(order):
        succ = graph.successors[node]
        reaching_sink[node] = sum(reaching_sink[v] for v in succ) if succ else 1
    return sum(reaching_sink[s] for s in _path_sources(graph))


def iter_paths(graph: OperatorGraph) -> Iterator[DagPath]:
    """Source-to-sink paths in lexicographic order of their operator ids."""
    topological_order(graph)
    for source in _path_sources(graph):
        stack: List[Tuple[int, Tuple[Edge, ...]]] = [(source, ())]
        while stack:
            node, edges = stack.pop()
            succ = graph.successors[node]
            if not succ:
                yield DagPath(edges)
                continue
            for nxt in reversed(succ):
                stack.append((nxt, edges + ((node, nxt),)))


def enumerate_paths(graph: OperatorGraph, cap: int = DEFAULT_PATH_CAP) -> List[DagPath]:
    """
    Every distinct source-to-sink path exactly once, lexicographically ordered.

    Raises:
        PathExplosionError: If there are more than ``cap`` paths.
    """
    count = count_paths(graph)
    if count > cap:
        logger.warning(f"Refusing to enumerate {count} paths (cap {cap})")
        raise PathExplosionError(count, cap)
    return list(iter_paths(graph))


def longest_path(graph: OperatorGraph, weights: Mapping[Edge, float]) -> Tuple[float, Optional[DagPath]]:
    """
    Longest source-to-sink path under nonnegative edge ``weights``.

    Forward pass in topological order; each operator keeps its best arrival
    value and, among equal values, the lexicographically smallest prefix.
    Returns ``(0.0, None)`` for a graph without edges.
    """
    order = topological_order(graph)
    best: Dict[int, Tuple[float, Tuple[int, ...]]] = {}
    for node in order:
        preds = graph.predecessors[node]
        if not preds:
            best[node] = (0.0, (node,))
            continue
        candidate: Optional[Tuple[float, Tuple[int, ...]]] = None
        for u in preds:
            value = best[u][0] + weights[(u, node)]
            prefix = best[u][1] + (node,)
            if candidate is None or value > candidate[0] or (value == candidate[0] and prefix < candidate[1]):
                candidate = (value, prefix)
        best[node] = candidate  # type: ignore[assignment]

    winner: Optional[Tuple[float, Tuple[int, ...]]] = None
    for sink in graph.sinks:
        if not graph.predecessors[sink]:
            continue
        value, prefix = best[sink]
        if winner is None or value > winner[0] or (value == winner[0] and prefix < winner[1]):
            winner = (value, prefix)
    if winner is None:
        return 0.0, None
    nodes = winner[1]
    return winner[0], DagPath(tuple(zip(nodes[:-1], nodes[1:])))


def longest_path_value(graph: OperatorGraph, order: Tuple[int, ...], weights: Mapping[Edge, float]) -> float:
    """Value of ``longest_path`` without the witness, for tight search loops."""
    arrival: Dict[int, float] = {}
    result = 0.0
    for node in order:
        preds = graph.predecessors[node]
        if not preds:
            arrival[node] = 0.0
            continue
        arrival[node] = max(arrival[u] + weights[(u, node)] for u in preds)
        if not graph.successors[node] and arrival[node] > result:
            result = arrival[node]
    return result


def critical_path(graph: OperatorGraph, topo: DeviceTopology, placement: Placement,
                  params: ModelParams) -> Tuple[float, Optional[DagPath]]:
    """
    The slowest source-to-sink path and its latency, ties broken by the
    lexicographically smallest path.
    """
    weights = {e: b.latency for e, b in edge_latencies(graph, topo, placement, params).items()}
    return longest_path(graph, weights)


def total_latency(graph: OperatorGraph, topo: DeviceTopology, placement: Placement,
                  params: ModelParams) -> float:
    """Latency of the critical path."""
    return critical_path(graph, topo, placement, params)[0]
