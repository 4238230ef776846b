"""
Seeded random problem instances for experiments and property checks.
"""

from typing import Optional, Union

import numpy as np

from core.bundle import ProblemBundle
from core.model import DeviceTopology, ModelParams, OperatorGraph, Placement
from utils.exceptions import ParameterError

Seed = Union[int, np.random.Generator]


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_graph(seed: Seed, operators: int, edge_probability: float = 0.4,
                 max_edges: Optional[int] = None) -> OperatorGraph:
    """
    Random DAG: edges only run from lower to higher ids. Every operator after
    the first gets at least one upstream edge so the job stays connected.
    Sources have selectivity 1, the rest draw from [0.5, 2].

    Raises:
        ParameterError: If ``max_edges`` is below the ``operators - 1``
            connecting edges, which are always kept.
    """
    if max_edges is not None and max_edges < operators - 1:
        raise ParameterError(
            f"max_edges must be at least {operators - 1} to keep the graph connected, got {max_edges}"
        )
    rng = _rng(seed)
    edges = set()
    for j in range(1, operators):
        edges.add((int(rng.integers(j)), j))
    for i in range(operators):
        for j in range(i + 1, operators):
            if rng.random() < edge_probability:
                edges.add((i, j))
    ordered = sorted(edges)
    if max_edges is not None and len(ordered) > max_edges:
        first_inputs = {}
        for i, j in ordered:
            first_inputs.setdefault(j, (i, j))
        spine = set(first_inputs.values())
        extra = [e for e in ordered if e not in spine]
        keep = rng.permutation(len(extra))[:max(0, max_edges - len(spine))]
        ordered = sorted(spine | {extra[k] for k in keep})
    has_input = {j for _, j in ordered}
    selectivities = [1.0 if i not in has_input else float(rng.uniform(0.5, 2.0)) for i in range(operators)]
    return OperatorGraph.build(selectivities, ordered)


def random_topology(seed: Seed, operators: int, devices: int, availability_probability: float = 0.7,
                    self_cost: bool = False) -> DeviceTopology:
    """
    Asymmetric costs in [0.1, 2]; the diagonal is zero unless ``self_cost``.
    Every operator keeps at least one available device.
    """
    rng = _rng(seed)
    com_cost = rng.uniform(0.1, 2.0, size=(devices, devices))
    if not self_cost:
        np.fill_diagonal(com_cost, 0.0)
    availability = rng.random((operators, devices)) < availability_probability
    for i in range(operators):
        if not availability[i].any():
            availability[i, rng.integers(devices)] = True
    return DeviceTopology(com_cost, availability)


def random_placement(seed: Seed, topo: DeviceTopology) -> Placement:
    """Dirichlet fractions over each operator's available devices."""
    rng = _rng(seed)
    x = np.zeros((topo.operator_count, topo.device_count))
    for i in range(topo.operator_count):
        devices = list(topo.devices_for(i))
        x[i, devices] = rng.dirichlet(np.ones(len(devices)))
    return Placement(x)


def random_instance(seed: Seed, operators: int = 4, devices: int = 3, edge_probability: float = 0.4,
                    max_edges: Optional[int] = None, availability_probability: float = 0.7,
                    self_cost: bool = False, params: Optional[ModelParams] = None,
                    with_placement: bool = True) -> ProblemBundle:
    """A complete bundle, deterministic for a given integer seed."""
    rng = _rng(seed)
    graph = random_graph(rng, operators, edge_probability, max_edges)
    topo = random_topology(rng, operators, devices, availability_probability, self_cost)
    placement = random_placement(rng, topo) if with_placement else None
    return ProblemBundle(graph, topo, params or ModelParams(), placement)
