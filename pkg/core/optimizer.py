"""
Placement search minimizing the objective F.

Two searchers share one evaluation path:

* ``brute_force_optimize`` enumerates every placement whose rows are
  compositions of ``granularity`` units over the assignable devices. It is
  exact on that grid and serves as the reference oracle.
* ``local_search_optimize`` moves mass between devices of one operator at a
  time from seeded random starts, with optional simulated annealing.

Both run per data-quality level and keep the candidate that is smallest by
``(objective, dq_fraction, row-major placement)``.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.graph import DagPath, critical_path, longest_path_value, topological_order
from core.model import (
    ROW_SUM_TOLERANCE,
    DeviceTopology,
    Edge,
    ModelParams,
    OperatorGraph,
    Placement,
    breakdown_from_rows,
    edge_latencies,
    network_volume,
    objective_f,
    validate_placement,
)
from core.scenario import DqLevel, DqScenario, validate_scenario
from utils.exceptions import (
    InvalidCandidateError,
    OptimizationError,
    ParameterError,
    SearchSpaceError,
)
from utils.logger import get_logger, log_elapsed

logger = get_logger("optimizer")

DEFAULT_CANDIDATE_CAP = 10 ** 7


class SearchMethod(str, Enum):
    BRUTE_FORCE = "brute"
    LOCAL_SEARCH = "local"


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Search settings.

    ``granularity`` g restricts brute-force fractions to multiples of 1/g;
    local search uses it only in ``lattice`` mode. Annealing is enabled when
    ``initial_temperature`` is positive; the temperature is multiplied by
    ``decay`` after every proposal.
    """

    granularity: int = 10
    max_iterations: int = 2000
    restarts: int = 10
    move_step: float = 0.1
    initial_temperature: float = 0.05
    decay: float = 0.995
    seed: int = 0
    lattice: bool = False
    workers: int = 1
    candidate_cap: int = DEFAULT_CANDIDATE_CAP

    def __post_init__(self):
        if self.granularity < 1:
            raise ParameterError(f"granularity must be >= 1, got {self.granularity}")
        if self.max_iterations < 0:
            raise ParameterError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if self.restarts < 1:
            raise ParameterError(f"restarts must be >= 1, got {self.restarts}")
        if not 0 < self.move_step <= 1:
            raise ParameterError(f"move_step must be in (0, 1], got {self.move_step}")
        if self.initial_temperature < 0:
            raise ParameterError(f"initial_temperature must be >= 0, got {self.initial_temperature}")
        if not 0 < self.decay < 1:
            raise ParameterError(f"decay must be in (0, 1), got {self.decay}")
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")
        if self.candidate_cap < 1:
            raise ParameterError(f"candidate_cap must be >= 1, got {self.candidate_cap}")

    @property
    def annealing(self) -> bool:
        return self.initial_temperature > 0

    @property
    def step_units(self) -> int:
        """Lattice move size in 1/g units."""
        return max(1, int(round(self.move_step * self.granularity)))


class CandidateEvaluation(NamedTuple):
    latency: float
    objective: float
    network_volume: float


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    """Winning placement and DQ level of a search."""

    placement: Placement
    dq_fraction: float
    latency: float
    objective: float
    evaluations: int
    method: SearchMethod
    network_volume: float = 0.0
    critical_path: Optional[DagPath] = None
    initial_objectives: Tuple[float, ...] = field(default_factory=tuple)

    def sort_key(self) -> Tuple[float, float, Tuple[float, ...]]:
        return (self.objective, self.dq_fraction, self.placement.flat())

    def to_dict(self) -> Dict[str, object]:
        return {
            "method": self.method.value,
            "dq_fraction": self.dq_fraction,
            "latency": self.latency,
            "objective": self.objective,
            "network_volume": self.network_volume,
            "evaluations": self.evaluations,
            "critical_path": self.critical_path.to_list() if self.critical_path else [],
            "placement": self.placement.to_list(),
        }


def evaluate_candidate(graph: OperatorGraph, topo: DeviceTopology, placement: Placement,
                       params: ModelParams, validate: bool = True,
                       caps: Optional[np.ndarray] = None) -> CandidateEvaluation:
    """
    Latency, objective F and network volume of one placement.

    Raises:
        InvalidCandidateError: If ``validate`` is set and the placement
            violates a constraint.
    """
    if validate:
        report = validate_placement(placement, graph, topo, caps)
        if not report.ok:
            raise InvalidCandidateError(report)
    latency, _ = critical_path(graph, topo, placement, params)
    return CandidateEvaluation(
        latency,
        objective_f(latency, params),
        network_volume(graph, topo, placement),
    )


def _finalize(graph: OperatorGraph, topo: DeviceTopology, placement: Placement, params: ModelParams,
              bounds: np.ndarray, evaluations: int, method: SearchMethod,
              initial_objectives: Sequence[float] = ()) -> OptimizationResult:
    evaluation = evaluate_candidate(graph, topo, placement, params, caps=bounds)
    _, path = critical_path(graph, topo, placement, params)
    return OptimizationResult(
        placement=placement,
        dq_fraction=params.dq_fraction,
        latency=evaluation.latency,
        objective=evaluation.objective,
        evaluations=evaluations,
        method=method,
        network_volume=evaluation.network_volume,
        critical_path=path,
        initial_objectives=tuple(initial_objectives),
    )


def _levels(params: ModelParams, scenario: Optional[DqScenario]) -> List[Tuple[int, DqLevel]]:
    if scenario is None:
        return [(0, DqLevel(params.dq_fraction))]
    return scenario.sorted_levels()


def _check_scenario(scenario: Optional[DqScenario], graph: OperatorGraph, topo: DeviceTopology) -> None:
    if scenario is None:
        return
    report = validate_scenario(scenario, graph, topo)
    if not report.ok:
        raise OptimizationError(f"invalid scenario: {report.summary()}")


def _unit_bounds(bounds: np.ndarray, granularity: int) -> np.ndarray:
    """Per-entry caps in 1/g units."""
    return np.floor(bounds * granularity + ROW_SUM_TOLERANCE).astype(int)


def count_compositions(unit_bounds: Sequence[int], total: int) -> int:
    """Number of integer vectors ``k`` with ``0 <= k[u] <= unit_bounds[u]`` summing to ``total``."""
    ways = [1] + [0] * total
    for bound in unit_bounds:
        nxt = [0] * (total + 1)
        for t in range(total + 1):
            if ways[t]:
                for k in range(min(bound, total - t) + 1):
                    nxt[t + k] += ways[t]
        ways = nxt
    return ways[total]


def compositions(unit_bounds: Sequence[int], total: int) -> Iterator[Tuple[int, ...]]:
    """Bounded compositions of ``total`` in ascending lexicographic order."""
    n = len(unit_bounds)
    if n == 0:
        return
    # Largest amount the remaining devices can still absorb
    tail = [0] * (n + 1)
    for u in range(n - 1, -1, -1):
        tail[u] = tail[u + 1] + unit_bounds[u]

    def extend(u: int, remaining: int, prefix: Tuple[int, ...]) -> Iterator[Tuple[int, ...]]:
        if u == n - 1:
            if remaining <= unit_bounds[u]:
                yield prefix + (remaining,)
            return
        low = max(0, remaining - tail[u + 1])
        for k in range(low, min(unit_bounds[u], remaining) + 1):
            yield from extend(u + 1, remaining - k, prefix + (k,))

    yield from extend(0, total, ())


def count_candidates(graph: OperatorGraph, topo: DeviceTopology, params: ModelParams,
                     scenario: Optional[DqScenario], granularity: int) -> int:
    """Brute-force candidates summed over all levels."""
    total = 0
    for _, level in _levels(params, scenario):
        bounds = _unit_bounds(level.upper_bounds(topo), granularity)
        per_level = 1
        for i in range(graph.operator_count):
            per_level *= count_compositions(bounds[i].tolist(), granularity)
        total += per_level
    return total


def iter_candidates(topo: DeviceTopology, level: DqLevel, granularity: int) -> Iterator[Placement]:
    """Every grid placement of a level, in ascending row-major order."""
    bounds = _unit_bounds(level.upper_bounds(topo), granularity)
    rows = [
        [np.array(k, dtype=float) / granularity for k in compositions(bounds[i].tolist(), granularity)]
        for i in range(topo.operator_count)
    ]
    for combo in itertools.product(*rows):
        yield Placement(np.vstack(combo)) if combo else Placement(np.zeros((0, topo.device_count)))


def _brute_force_level(graph: OperatorGraph, topo: DeviceTopology, params: ModelParams,
                       level: DqLevel, granularity: int) -> Optional[Tuple[float, Placement, int]]:
    level_topo = level.restrict(topo)
    unit_bounds = _unit_bounds(level.upper_bounds(topo), granularity)
    rows = [
        [np.array(k, dtype=float) / granularity for k in compositions(unit_bounds[i].tolist(), granularity)]
        for i in range(graph.operator_count)
    ]
    if any(not r for r in rows):
        return None

    order = topological_order(graph)
    edges = graph.sorted_edges
    cache: Dict[Edge, Dict[Tuple[int, int], float]] = {e: {} for e in edges}

    def weight(edge: Edge, a: int, b: int) -> float:
        memo = cache[edge]
        key = (a, b)
        if key not in memo:
            i, j = edge
            memo[key] = breakdown_from_rows(edge, rows[i][a], rows[j][b], graph.selectivity(i),
                                            level_topo, params).latency
        return memo[key]

    best_latency = math.inf
    best_index: Tuple[int, ...] = ()
    evaluations = 0
    # Index tuples come out in lexicographic order, so strict improvement keeps the smallest tie
    for index in itertools.product(*[range(len(r)) for r in rows]):
        evaluations += 1
        weights = {e: weight(e, index[e[0]], index[e[1]]) for e in edges}
        latency = longest_path_value(graph, order, weights)
        if latency < best_latency:
            best_latency = latency
            best_index = index
    placement = Placement(np.vstack([rows[i][k] for i, k in enumerate(best_index)]))
    return best_latency, placement, evaluations


def brute_force_optimize(graph: OperatorGraph, topo: DeviceTopology, params: ModelParams,
                         scenario: Optional[DqScenario] = None,
                         config: Optional[OptimizerConfig] = None) -> OptimizationResult:
    """
    Exact minimum of F over all 1/g-grid placements, crossed with the
    scenario levels (or ``params.dq_fraction`` alone).

    Raises:
        SearchSpaceError: If the candidate count exceeds ``config.candidate_cap``.
        OptimizationError: If no level has a grid placement.
    """
    config = config or OptimizerConfig()
    _check_scenario(scenario, graph, topo)
    topological_order(graph)
    g = config.granularity
    count = count_candidates(graph, topo, params, scenario, g)
    if count > config.candidate_cap:
        logger.warning(f"Brute force refused: {count} candidates exceed the cap of {config.candidate_cap}")
        raise SearchSpaceError(count, config.candidate_cap)
    logger.info(f"Brute force over {count} candidates at granularity {g}")

    best: Optional[OptimizationResult] = None
    evaluations = 0
    for position, level in _levels(params, scenario):
        with log_elapsed(logger, f"Brute force level dq={level.dq_fraction}"):
            found = _brute_force_level(graph, topo, params, level, g)
        if found is None:
            logger.warning(f"Level {position} (dq={level.dq_fraction}) has no placement on the 1/{g} grid")
            continue
        latency, placement, n = found
        evaluations += n
        level_params = params.with_dq(level.dq_fraction)
        result = _finalize(graph, level.restrict(topo), placement, level_params,
                           level.upper_bounds(topo), n, SearchMethod.BRUTE_FORCE)
        logger.debug(f"Level dq={level.dq_fraction}: latency {latency}, objective {result.objective}")
        if best is None or result.sort_key() < best.sort_key():
            best = result
    if best is None:
        raise OptimizationError(f"no feasible placement on the 1/{g} grid for any level")
    return _with_evaluations(best, evaluations)


def _with_evaluations(result: OptimizationResult, evaluations: int) -> OptimizationResult:
    return OptimizationResult(
        placement=result.placement,
        dq_fraction=result.dq_fraction,
        latency=result.latency,
        objective=result.objective,
        evaluations=evaluations,
        method=result.method,
        network_volume=result.network_volume,
        critical_path=result.critical_path,
        initial_objectives=result.initial_objectives,
    )


def _random_units(rng: np.random.Generator, unit_bounds: np.ndarray, total: int) -> np.ndarray:
    """Random bounded composition: hand out units one by one to devices with room."""
    counts = np.zeros(len(unit_bounds), dtype=int)
    for _ in range(total):
        room = np.flatnonzero(counts < unit_bounds)
        counts[rng.choice(room)] += 1
    return counts


def _random_row(rng: np.random.Generator, bounds: np.ndarray) -> np.ndarray:
    """Dirichlet draw over assignable devices, excess above caps spread over the remaining headroom."""
    assignable = np.flatnonzero(bounds > 0)
    row = np.zeros(len(bounds))
    row[assignable] = rng.dirichlet(np.ones(len(assignable)))
    over = row > bounds
    if over.any():
        excess = float(np.sum(row[over] - bounds[over]))
        row[over] = bounds[over]
        headroom = np.where(over, 0.0, bounds - row)
        row = row + excess * headroom / headroom.sum()
    return row / row.sum()


@dataclass
class _RestartOutcome:
    placement: Placement
    objective: float
    initial_objective: float
    evaluations: int


class _LocalSearch:
    """One level's local search; restarts are independent and seeded by (seed, level, restart)."""

    def __init__(self, graph: OperatorGraph, topo: DeviceTopology, params: ModelParams,
                 bounds: np.ndarray, config: OptimizerConfig, level_position: int):
        self.graph = graph
        self.topo = topo
        self.params = params
        self.bounds = bounds
        self.config = config
        self.level_position = level_position
        self.unit_bounds = _unit_bounds(bounds, config.granularity)
        self.movable = [i for i in range(graph.operator_count) if np.count_nonzero(bounds[i]) >= 2]
        self.order = topological_order(graph)

    def objective(self, x: np.ndarray) -> float:
        breakdowns = edge_latencies(self.graph, self.topo, Placement(x), self.params)
        latency = longest_path_value(self.graph, self.order, {e: b.latency for e, b in breakdowns.items()})
        return objective_f(latency, self.params)

    def initial(self, rng: np.random.Generator) -> np.ndarray:
        g = self.config.granularity
        if self.config.lattice:
            return np.vstack([_random_units(rng, self.unit_bounds[i], g) for i in range(len(self.bounds))])
        return np.vstack([_random_row(rng, self.bounds[i]) for i in range(len(self.bounds))])

    def to_fractions(self, state: np.ndarray) -> np.ndarray:
        if self.config.lattice:
            return state.astype(float) / self.config.granularity
        return state

    def propose(self, rng: np.random.Generator, state: np.ndarray) -> Optional[np.ndarray]:
        """Shift mass of one operator between two of its devices; None when the move is infeasible."""
        i = self.movable[rng.integers(len(self.movable))]
        row = state[i]
        support = np.flatnonzero(row > 0)
        u = int(support[rng.integers(len(support))])
        targets = [v for v in np.flatnonzero(self.bounds[i] > 0) if v != u]
        v = int(targets[rng.integers(len(targets))])

        new_row = row.copy()
        if self.config.lattice:
            units = min(self.config.step_units, int(row[u]))
            new_row[u] -= units
            new_row[v] += units
            if new_row[v] > self.unit_bounds[i, v]:
                return None
        else:
            new_row[u] -= self.config.move_step
            new_row[v] += self.config.move_step
            new_row = np.clip(new_row, 0.0, None)
            new_row = new_row / new_row.sum()
            if np.any(new_row > self.bounds[i] + ROW_SUM_TOLERANCE):
                return None
        proposal = state.copy()
        proposal[i] = new_row
        return proposal

    def run(self, restart: int) -> _RestartOutcome:
        rng = np.random.default_rng([self.config.seed, self.level_position, restart])
        state = self.initial(rng)
        current = self.objective(self.to_fractions(state))
        initial_objective = current
        best_state, best = state, current
        evaluations = 1
        temperature = self.config.initial_temperature

        if self.movable:
            for _ in range(self.config.max_iterations):
                proposal = self.propose(rng, state)
                temperature *= self.config.decay
                if proposal is None:
                    continue
                value = self.objective(self.to_fractions(proposal))
                evaluations += 1
                if value < current:
                    accept = True
                elif self.config.annealing and temperature > 0:
                    accept = rng.random() < math.exp(-(value - current) / temperature)
                else:
                    accept = False
                if accept:
                    state, current = proposal, value
                    if value < best:
                        best_state, best = proposal, value

        logger.debug(f"Restart {restart}: {initial_objective} -> {best} in {evaluations} evaluations")
        return _RestartOutcome(Placement(self.to_fractions(best_state)), best, initial_objective, evaluations)


def _local_search_level(graph: OperatorGraph, topo: DeviceTopology, params: ModelParams,
                        level: DqLevel, level_position: int,
                        config: OptimizerConfig) -> Optional[OptimizationResult]:
    bounds = level.upper_bounds(topo)
    if np.any(bounds.sum(axis=1) < 1 - ROW_SUM_TOLERANCE):
        return None
    if config.lattice and np.any(_unit_bounds(bounds, config.granularity).sum(axis=1) < config.granularity):
        return None
    level_topo = level.restrict(topo)
    level_params = params.with_dq(level.dq_fraction)
    search = _LocalSearch(graph, level_topo, level_params, bounds, config, level_position)

    restarts = range(config.restarts)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(search.run, restarts))
    else:
        outcomes = [search.run(r) for r in restarts]

    # Deterministic reduction independent of completion order
    winner = min(outcomes, key=lambda o: (o.objective, o.placement.flat()))
    return _finalize(
        graph, level_topo, winner.placement, level_params, bounds,
        sum(o.evaluations for o in outcomes), SearchMethod.LOCAL_SEARCH,
        [o.initial_objective for o in outcomes],
    )


def local_search_optimize(graph: OperatorGraph, topo: DeviceTopology, params: ModelParams,
                          scenario: Optional[DqScenario] = None,
                          config: Optional[OptimizerConfig] = None) -> OptimizationResult:
    """
    Seeded local search with optional simulated annealing; returns the best
    placement seen over all restarts and levels.

    Raises:
        OptimizationError: If no level admits a feasible placement.
    """
    config = config or OptimizerConfig()
    _check_scenario(scenario, graph, topo)
    topological_order(graph)
    logger.info(
        f"Local search: {config.restarts} restarts x {config.max_iterations} iterations"
        f"{' (lattice 1/' + str(config.granularity) + ')' if config.lattice else ''}, seed {config.seed}"
    )

    best: Optional[OptimizationResult] = None
    evaluations = 0
    initial: List[float] = []
    for position, level in _levels(params, scenario):
        with log_elapsed(logger, f"Local search level dq={level.dq_fraction}"):
            result = _local_search_level(graph, topo, params, level, position, config)
        if result is None:
            logger.warning(f"Level {position} (dq={level.dq_fraction}) has no feasible placement")
            continue
        evaluations += result.evaluations
        initial.extend(result.initial_objectives)
        logger.debug(f"Level dq={level.dq_fraction}: objective {result.objective}")
        if best is None or result.sort_key() < best.sort_key():
            best = result
    if best is None:
        raise OptimizationError("no feasible placement for any level")
    return OptimizationResult(
        placement=best.placement,
        dq_fraction=best.dq_fraction,
        latency=best.latency,
        objective=best.objective,
        evaluations=evaluations,
        method=best.method,
        network_volume=best.network_volume,
        critical_path=best.critical_path,
        initial_objectives=tuple(initial),
    )


def optimize_with_dq(graph: OperatorGraph, topo: DeviceTopology, params: ModelParams,
                     scenario: DqScenario, config: Optional[OptimizerConfig] = None,
                     method: SearchMethod = SearchMethod.BRUTE_FORCE) -> OptimizationResult:
    """Search every scenario level with ``method`` and keep the level and placement minimizing F."""
    method = SearchMethod(method)
    logger.info(f"Optimizing over {len(scenario.levels)} DQ level(s) with {method.value} search")
    if method is SearchMethod.BRUTE_FORCE:
        return brute_force_optimize(graph, topo, params, scenario, config)
    return local_search_optimize(graph, topo, params, scenario, config)
