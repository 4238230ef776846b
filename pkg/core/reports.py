"""
Report builders behind the workbench commands. Each returns plain data that
``core.display`` renders as rich tables, JSON or CSV.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from core.bundle import ProblemBundle
from core.graph import DEFAULT_PATH_CAP, enumerate_paths, longest_path
from core.model import (
    ModelParams,
    Placement,
    edge_latencies,
    network_volume,
    objective_f,
    transfer_time,
)
from core.optimizer import (
    OptimizationResult,
    OptimizerConfig,
    SearchMethod,
    brute_force_optimize,
    local_search_optimize,
)
from core.scenario import DqLevel, DqScenario
from utils.exceptions import UsageProblem
from utils.logger import get_logger

logger = get_logger("reports")

SWEEP_HEADER = ("beta", "dq_fraction", "latency", "objective", "method")
FIXED_METHOD = "fixed"


@dataclass(frozen=True)
class SweepRow:
    """One (beta, DQ_fraction) point; ``objective = latency / (1 + beta * dq_fraction)``."""

    beta: float
    dq_fraction: float
    latency: float
    objective: float
    method: str

    def values(self) -> Tuple[float, float, float, float, str]:
        return (self.beta, self.dq_fraction, self.latency, self.objective, self.method)

    def to_dict(self) -> Dict[str, Any]:
        return dict(zip(SWEEP_HEADER, self.values()))


def evaluation_report(bundle: ProblemBundle, placement: Optional[Placement] = None,
                      params: Optional[ModelParams] = None) -> Dict[str, Any]:
    """
    Per-edge breakdowns, critical path, total latency, F, network volume and
    aggregate transfer time of a placement (the bundle's by default).

    Raises:
        UsageProblem: If there is no placement to evaluate.
    """
    placement = placement if placement is not None else bundle.placement
    if placement is None:
        raise UsageProblem("bundle has no placement to evaluate; add 'placement' or run 'optimize'")
    params = params or bundle.params
    graph, topo = bundle.graph, bundle.topology

    breakdowns = edge_latencies(graph, topo, placement, params)
    latency, path = longest_path(graph, {e: b.latency for e, b in breakdowns.items()})
    return {
        "edges": [b.to_dict() for b in breakdowns.values()],
        "critical_path": path.to_list() if path else [],
        "critical_operators": list(path.operators) if path else [],
        "latency": latency,
        "objective": objective_f(latency, params),
        "network_volume": network_volume(graph, topo, placement),
        "transfer_time": transfer_time(graph, topo, placement, params),
        "params": params.to_dict(),
    }


def path_listing(bundle: ProblemBundle, cap: int = DEFAULT_PATH_CAP) -> Dict[str, Any]:
    """
    Every source-to-sink path; with a placement each path carries its summed
    latency and the critical one is marked.

    Raises:
        PathExplosionError: If there are more than ``cap`` paths.
    """
    paths = enumerate_paths(bundle.graph, cap)
    entries: List[Dict[str, Any]] = [
        {"operators": list(p.operators), "edges": p.to_list(), "latency": None, "critical": False}
        for p in paths
    ]
    listing: Dict[str, Any] = {"paths": entries, "count": len(entries), "latency": None}
    if bundle.placement is None:
        return listing

    breakdowns = edge_latencies(bundle.graph, bundle.topology, bundle.placement, bundle.params)
    weights = {e: b.latency for e, b in breakdowns.items()}
    latency, witness = longest_path(bundle.graph, weights)
    for entry, path in zip(entries, paths):
        entry["latency"] = path.latency(weights)
        entry["critical"] = witness is not None and path == witness
    listing["latency"] = latency
    return listing


def _sweep_levels(bundle: ProblemBundle, dqs: Sequence[float]) -> List[DqLevel]:
    if dqs:
        return [DqLevel(dq) for dq in sorted(set(dqs))]
    if bundle.scenario is not None:
        return [level for _, level in bundle.scenario.sorted_levels()]
    return [DqLevel(bundle.params.dq_fraction)]


def sweep_rows(bundle: ProblemBundle, betas: Sequence[float], dqs: Sequence[float] = (),
               method: Optional[SearchMethod] = None,
               config: Optional[OptimizerConfig] = None) -> List[SweepRow]:
    """
    Objective over a beta x DQ grid.

    DQ levels come from ``dqs`` when given, else from the bundle's scenario,
    else from ``params.dq_fraction``. Without ``method`` every level is
    evaluated at a fixed placement (the level's own, else the bundle's);
    with a method every level is re-optimized once and reused across betas,
    since beta only rescales F within a level.

    Raises:
        UsageProblem: If a list is empty or a fixed sweep lacks a placement.
    """
    if not betas:
        raise UsageProblem("beta list is empty")
    levels = _sweep_levels(bundle, dqs)

    latencies: List[Tuple[float, float, str]] = []
    for level in levels:
        if method is None:
            placement = level.placement if level.placement is not None else bundle.placement
            if placement is None:
                raise UsageProblem(
                    f"no placement for dq_fraction {level.dq_fraction}; add one or pass --method"
                )
            report = evaluation_report(bundle.with_params(bundle.params.with_dq(level.dq_fraction)),
                                       placement)
            latencies.append((level.dq_fraction, report["latency"], FIXED_METHOD))
        else:
            result = _optimize_level(bundle, level, method, config)
            latencies.append((level.dq_fraction, result.latency, method.value))

    rows = []
    for beta in sorted(set(betas)):
        for dq, latency, label in latencies:
            params = bundle.params.with_beta(beta).with_dq(dq)
            rows.append(SweepRow(beta, dq, latency, objective_f(latency, params), label))
    logger.info(f"Sweep produced {len(rows)} rows")
    return rows


def _optimize_level(bundle: ProblemBundle, level: DqLevel, method: SearchMethod,
                    config: Optional[OptimizerConfig]) -> OptimizationResult:
    scenario = DqScenario((DqLevel(level.dq_fraction, level.caps, level.overrides),))
    if method is SearchMethod.BRUTE_FORCE:
        return brute_force_optimize(bundle.graph, bundle.topology, bundle.params, scenario, config)
    return local_search_optimize(bundle.graph, bundle.topology, bundle.params, scenario, config)
