"""
Test suite for fracplace.
"""

import csv
import io
import json
import logging
import os
import tempfile
import unittest
from pathlib import Path

import numpy as np
from click.testing import CliRunner
from hypothesis import given, settings
from hypothesis import strategies as st

# Add project root to path
import sys
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

from cli.main import cli
from core.bundle import (
    ProblemBundle,
    bundle_to_dict,
    load_bundle,
    parse_bundle,
    read_bundle,
    read_placement,
    save_bundle,
    write_placement,
)
from core.config import Config
from core.display import DisplayManager
from core.generator import random_graph, random_instance, random_placement, random_topology
from core.graph import (
    DagPath,
    count_paths,
    critical_path,
    enumerate_paths,
    longest_path,
    topological_order,
    total_latency,
    validate_graph,
)
from core.model import (
    DeviceTopology,
    LinkCountMode,
    ModelParams,
    OperatorGraph,
    Placement,
    count_enabled_links,
    edge_latencies,
    edge_latency,
    enabled_links,
    network_volume,
    objective_f,
    transfer_time,
    validate_placement,
    validate_topology,
)
from core.optimizer import (
    OptimizerConfig,
    SearchMethod,
    brute_force_optimize,
    compositions,
    count_compositions,
    evaluate_candidate,
    iter_candidates,
    local_search_optimize,
    optimize_with_dq,
)
from core.reports import SWEEP_HEADER, evaluation_report, path_listing, sweep_rows
from core.scenario import AvailabilityOverride, DqLevel, DqScenario, FractionCap, validate_scenario
from utils.exceptions import (
    BundleError,
    BundleValidationError,
    ConfigError,
    DisplayError,
    EdgeNotFoundError,
    FracplaceError,
    GraphError,
    GuardError,
    InvalidCandidateError,
    ParameterError,
    PathExplosionError,
    SearchSpaceError,
    ShapeError,
    UsageProblem,
)
from utils.helpers import format_number, format_vector, parse_number_list
from utils.logger import get_logger, log_elapsed, setup_logging

WORKED_EXAMPLE = Path(project_root) / "data" / "worked_example.json"

EXAMPLE_GRAPH = OperatorGraph.build([1.0, 1.5, 1.0], [(0, 1), (1, 2)])
EXAMPLE_TOPOLOGY = DeviceTopology(
    np.array([[0.0, 1.5, 2.0], [1.5, 0.0, 1.0], [2.0, 1.0, 0.0]]),
    np.ones((3, 3), dtype=bool),
)
EXAMPLE_PLACEMENT = Placement.from_rows([[0.8, 0.2, 0.0], [0.7, 0.0, 0.3], [0.3, 0.4, 0.3]])
MODIFIED_PLACEMENT = EXAMPLE_PLACEMENT.with_row(2, [0.0, 0.4, 0.6])
EXAMPLE_PARAMS = ModelParams(alpha=0.0, beta=1.0, dq_fraction=0.5)
EXAMPLE_SCENARIO = DqScenario((
    DqLevel(0.5, placement=EXAMPLE_PLACEMENT),
    DqLevel(1.0, caps=(FractionCap(2, 0, 0.0),), placement=MODIFIED_PLACEMENT),
))

TOL = 1e-9


def diamond_stack(k):
    """k diamonds in series: 2^k source-to-sink paths."""
    edges = []
    for t in range(k):
        join, a, b, nxt = 3 * t, 3 * t + 1, 3 * t + 2, 3 * t + 3
        edges += [(join, a), (join, b), (a, nxt), (b, nxt)]
    return OperatorGraph.build([1.0] * (3 * k + 1), edges)


def chain(n, selectivity=1.0):
    return OperatorGraph.build([1.0] + [selectivity] * (n - 1), [(i, i + 1) for i in range(n - 1)])


class TestCostModel(unittest.TestCase):
    """Per-edge latency, objective F and network volume on the worked example."""

    def test_edge_latency_first_edge(self):
        b = edge_latency(0, 1, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT, EXAMPLE_PARAMS)
        for got, want in zip(b.per_device_cost, (0.48, 0.27, 0.0)):
            self.assertAlmostEqual(got, want, delta=TOL)
        self.assertAlmostEqual(b.latency, 0.48, delta=TOL)

    def test_edge_latency_second_edge(self):
        b = edge_latency(1, 2, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT, EXAMPLE_PARAMS)
        for got, want in zip(b.per_device_cost, (1.26, 0.0, 0.45)):
            self.assertAlmostEqual(got, want, delta=TOL)
        self.assertAlmostEqual(b.max_cost, 1.26, delta=TOL)

    def test_modified_sink_row(self):
        b = edge_latency(1, 2, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, MODIFIED_PLACEMENT, EXAMPLE_PARAMS)
        for got, want in zip(b.per_device_cost, (1.89, 0.0, 0.18)):
            self.assertAlmostEqual(got, want, delta=TOL)

    def test_congestion_term(self):
        params = ModelParams(alpha=0.1)
        b = edge_latency(0, 1, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT, params)
        self.assertEqual(b.enabled_links, 3)
        self.assertAlmostEqual(b.latency, 0.78, delta=TOL)

    def test_colocated_zero_latency(self):
        placement = Placement.colocated(3, 3, device=0)
        b = edge_latency(0, 1, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, placement, EXAMPLE_PARAMS)
        self.assertEqual(b.latency, 0.0)

    def test_edge_not_found(self):
        with self.assertRaises(EdgeNotFoundError):
            edge_latency(0, 2, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT, EXAMPLE_PARAMS)

    def test_shape_mismatch(self):
        placement = Placement.from_rows([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        with self.assertRaises(ShapeError):
            edge_latency(0, 1, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, placement, EXAMPLE_PARAMS)

    def test_batch_size_scales_volume(self):
        params = ModelParams(batch_size=2.0)
        b = edge_latency(0, 1, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT, params)
        self.assertAlmostEqual(b.latency, 0.96, delta=TOL)

    def test_enabled_links_examples(self):
        x_i, x_j = np.array([0.8, 0.2, 0.0]), np.array([0.7, 0.0, 0.3])
        self.assertEqual(count_enabled_links(x_i, x_j, LinkCountMode.PAIRS), 3)
        self.assertEqual(count_enabled_links(x_i, x_j, LinkCountMode.DEVICES), 3)
        one = np.array([1.0, 0.0])
        for mode in LinkCountMode:
            self.assertEqual(count_enabled_links(one, one, mode), 0)

    def test_enabled_links_requires_edge(self):
        self.assertEqual(enabled_links(0, 1, EXAMPLE_PLACEMENT, graph=EXAMPLE_GRAPH), 3)
        with self.assertRaises(EdgeNotFoundError):
            enabled_links(2, 0, EXAMPLE_PLACEMENT, graph=EXAMPLE_GRAPH)

    def test_objective_examples(self):
        self.assertAlmostEqual(objective_f(1.74, ModelParams(beta=1, dq_fraction=0.5)), 1.16, delta=TOL)
        self.assertAlmostEqual(objective_f(2.37, ModelParams(beta=2, dq_fraction=1.0)), 0.79, delta=TOL)
        self.assertAlmostEqual(objective_f(1.74, ModelParams(beta=2, dq_fraction=0.5)), 0.87, delta=TOL)
        self.assertEqual(objective_f(3.5, ModelParams(beta=0, dq_fraction=0.7)), 3.5)

    def test_network_volume(self):
        single_edge = OperatorGraph.build([1.0, 1.5], [(0, 1)])
        topo = DeviceTopology(EXAMPLE_TOPOLOGY.com_cost, np.ones((2, 3), dtype=bool))
        placement = Placement.from_rows([[0.8, 0.2, 0.0], [0.7, 0.0, 0.3]])
        self.assertAlmostEqual(network_volume(single_edge, topo, placement), 0.44, delta=TOL)

        halves = Placement.from_rows([[0.5, 0.5], [0.5, 0.5]])
        two = DeviceTopology(np.array([[0.0, 1.0], [1.0, 0.0]]), np.ones((2, 2), dtype=bool))
        self.assertAlmostEqual(network_volume(OperatorGraph.build([1, 1], [(0, 1)]), two, halves), 0.5)
        self.assertEqual(network_volume(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, Placement.colocated(3, 3)), 0.0)

    def test_transfer_time(self):
        value = transfer_time(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT, EXAMPLE_PARAMS)
        self.assertAlmostEqual(value, 2.46, delta=TOL)

    def test_params_validation(self):
        with self.assertRaises(ParameterError):
            ModelParams(alpha=-1)
        with self.assertRaises(ParameterError):
            ModelParams(dq_fraction=1.5)
        with self.assertRaises(ParameterError):
            ModelParams(batch_size=0)
        self.assertIs(ModelParams(link_count_mode="devices").link_count_mode, LinkCountMode.DEVICES)


class TestValidation(unittest.TestCase):
    """Placement, topology and graph diagnostics."""

    def test_worked_example_placement_is_valid(self):
        self.assertEqual(validate_placement(EXAMPLE_PLACEMENT, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY).violations, [])

    def test_row_sum(self):
        graph = OperatorGraph.build([1.0], [])
        topo = DeviceTopology(np.zeros((2, 2)), np.ones((1, 2), dtype=bool))
        report = validate_placement(Placement.from_rows([[0.5, 0.4]]), graph, topo)
        self.assertEqual(report.codes(), ["row-sum"])
        self.assertIn("operator 0", report.errors[0].message)
        self.assertIn("0.9", report.errors[0].message)

    def test_unavailable_device(self):
        availability = np.ones((3, 3), dtype=bool)
        availability[1, 2] = False
        topo = EXAMPLE_TOPOLOGY.with_availability(availability)
        report = validate_placement(EXAMPLE_PLACEMENT, EXAMPLE_GRAPH, topo)
        self.assertEqual(report.codes(), ["unavailable-device"])
        self.assertEqual(report.errors[0].location, "placement[1][2]")

    def test_negative_and_cap(self):
        placement = EXAMPLE_PLACEMENT.with_row(0, [1.2, -0.2, 0.0])
        codes = validate_placement(placement, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY).codes()
        self.assertIn("fraction-negative", codes)
        self.assertIn("fraction-range", codes)
        caps = np.ones((3, 3))
        caps[2, 0] = 0.0
        report = validate_placement(EXAMPLE_PLACEMENT, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, caps)
        self.assertEqual(report.codes(), ["fraction-cap"])

    def test_topology_diagonal_warning(self):
        topo = DeviceTopology(np.array([[0.5, 1.0], [1.0, 0.0]]), np.ones((1, 2), dtype=bool))
        report = validate_topology(topo)
        self.assertTrue(report.ok)
        self.assertEqual([v.code for v in report.warnings], ["com-cost-diagonal"])

    def test_topology_errors(self):
        topo = DeviceTopology(np.array([[0.0, -1.0], [1.0, 0.0]]), np.array([[False, False]]))
        self.assertEqual(sorted(validate_topology(topo).codes()), ["com-cost-negative", "no-available-device"])

    def test_worked_example_graph_is_valid(self):
        self.assertEqual(validate_graph(EXAMPLE_GRAPH).violations, [])

    def test_cycle_witness(self):
        report = validate_graph(OperatorGraph.build([1, 1], [(0, 1), (1, 0)]))
        cycle = [v for v in report.errors if v.code == "cycle"]
        self.assertEqual(len(cycle), 1)
        self.assertIn("[0, 1, 0]", cycle[0].message)
        with self.assertRaises(GraphError):
            topological_order(OperatorGraph.build([1, 1], [(0, 1), (1, 0)]))

    def test_source_selectivity(self):
        report = validate_graph(OperatorGraph.build([0.5, 1.0], [(0, 1)]))
        self.assertEqual(report.codes(), ["source-selectivity"])

    def test_isolated_operator_is_a_source(self):
        self.assertEqual(validate_graph(OperatorGraph.build([0.5], [])).codes(), ["source-selectivity"])
        report = validate_graph(OperatorGraph.build([1, 1, 0.5], [(0, 1)]))
        self.assertEqual(report.codes(), ["source-selectivity"])
        self.assertEqual(report.errors[0].location, "operators[2].selectivity")
        self.assertTrue(validate_graph(OperatorGraph.build([1.0], [])).ok)

    def test_dangling_edge(self):
        report = validate_graph(OperatorGraph.build([1.0, 1.0], [(0, 1), (1, 5)]))
        self.assertIn("dangling-edge", report.codes())


class TestGraphAnalysis(unittest.TestCase):
    """Paths, critical path and the longest-path pass."""

    def test_paths(self):
        self.assertEqual([p.edges for p in enumerate_paths(EXAMPLE_GRAPH)], [((0, 1), (1, 2))])
        diamond = OperatorGraph.build([1, 1, 1, 1], [(0, 1), (0, 2), (1, 3), (2, 3)])
        self.assertEqual([str(p) for p in enumerate_paths(diamond)], ["0 -> 1 -> 3", "0 -> 2 -> 3"])
        self.assertEqual(len(enumerate_paths(OperatorGraph.build([1, 1], [(0, 1)]))), 1)

    def test_path_counts(self):
        self.assertEqual(count_paths(chain(6)), 1)
        for k in range(1, 11):
            self.assertEqual(count_paths(diamond_stack(k)), 2 ** k)
        self.assertEqual(len(enumerate_paths(diamond_stack(10))), 1024)

    def test_path_cap(self):
        with self.assertRaises(PathExplosionError) as ctx:
            enumerate_paths(diamond_stack(5), cap=10)
        self.assertEqual(ctx.exception.count, 32)

    def test_critical_path_worked_example(self):
        latency, path = critical_path(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT, EXAMPLE_PARAMS)
        self.assertAlmostEqual(latency, 1.74, delta=TOL)
        self.assertEqual(path.edges, ((0, 1), (1, 2)))
        self.assertAlmostEqual(total_latency(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, MODIFIED_PLACEMENT, EXAMPLE_PARAMS),
                               2.37, delta=TOL)

    def test_no_edges(self):
        graph = OperatorGraph.build([1.0], [])
        topo = DeviceTopology(np.zeros((1, 1)), np.ones((1, 1), dtype=bool))
        self.assertEqual(critical_path(graph, topo, Placement.from_rows([[1.0]]), ModelParams()), (0.0, None))

    def test_tie_takes_smallest_path(self):
        diamond = OperatorGraph.build([1, 1, 1, 1], [(0, 1), (0, 2), (1, 3), (2, 3)])
        weights = {e: 1.0 for e in diamond.sorted_edges}
        value, path = longest_path(diamond, weights)
        self.assertEqual(value, 2.0)
        self.assertEqual(path.operators, (0, 1, 3))

    def test_dp_matches_enumeration(self):
        params = ModelParams(alpha=0.05)
        for seed in range(60):
            rng = np.random.default_rng(seed)
            n_ops = int(rng.integers(2, 8))
            graph = random_graph(rng, n_ops, edge_probability=0.5, max_edges=12)
            topo = random_topology(rng, n_ops, int(rng.integers(1, 5)))
            placement = random_placement(rng, topo)
            weights = {e: b.latency for e, b in edge_latencies(graph, topo, placement, params).items()}
            latency, witness = critical_path(graph, topo, placement, params)
            sums = [p.latency(weights) for p in enumerate_paths(graph)]
            self.assertEqual(latency, max(sums), f"seed {seed}")
            self.assertEqual(witness.latency(weights), latency)
            for s in sums:
                self.assertGreaterEqual(latency, s)

    def test_adding_edge_never_decreases_latency(self):
        for seed in range(30):
            bundle = random_instance(seed, operators=5, devices=3, edge_probability=0.3)
            graph = bundle.graph
            missing = [(i, j) for i in range(5) for j in range(i + 1, 5) if not graph.has_edge(i, j)]
            if not missing:
                continue
            extended = OperatorGraph(graph.operators, graph.edges + (missing[0],))
            before = total_latency(graph, bundle.topology, bundle.placement, bundle.params)
            after = total_latency(extended, bundle.topology, bundle.placement, bundle.params)
            self.assertGreaterEqual(after, before)


class TestModelProperties(unittest.TestCase):
    """Invariants of the cost model over seeded random instances."""

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2))
    def test_nonnegative(self, seed, alpha):
        bundle = random_instance(seed, operators=5, devices=3, params=ModelParams(alpha=alpha))
        for b in edge_latencies(bundle.graph, bundle.topology, bundle.placement, bundle.params).values():
            self.assertGreaterEqual(b.latency, 0.0)
        self.assertGreaterEqual(total_latency(bundle.graph, bundle.topology, bundle.placement, bundle.params), 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2))
    def test_colocation_collapse(self, seed, device):
        bundle = random_instance(seed, operators=5, devices=3, availability_probability=1.0)
        placement = Placement.colocated(5, 3, device)
        self.assertEqual(total_latency(bundle.graph, bundle.topology, placement, ModelParams()), 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_cost_scaling(self, seed):
        bundle = random_instance(seed, operators=4, devices=3)
        scaled = bundle.topology.scaled(2.0)
        params = ModelParams()
        before = edge_latencies(bundle.graph, bundle.topology, bundle.placement, params)
        after = edge_latencies(bundle.graph, scaled, bundle.placement, params)
        for edge in before:
            self.assertEqual(after[edge].latency, 2.0 * before[edge].latency)
        self.assertEqual(total_latency(bundle.graph, scaled, bundle.placement, params),
                         2.0 * total_latency(bundle.graph, bundle.topology, bundle.placement, params))

    def test_cost_scaling_keeps_argmin(self):
        for seed in range(5):
            bundle = random_instance(seed, operators=3, devices=3, with_placement=False)
            scaled = bundle.topology.scaled(2.0)

            def argmin(topo):
                values = [
                    (total_latency(bundle.graph, topo, p, bundle.params), p.flat())
                    for p in iter_candidates(topo, DqLevel(0.0), 2)
                ]
                best = min(v for v, _ in values)
                return {flat for v, flat in values if v == best}

            self.assertEqual(argmin(bundle.topology), argmin(scaled))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0, 1), st.floats(0, 1))
    def test_alpha_monotone(self, seed, a, b):
        low, high = sorted((a, b))
        bundle = random_instance(seed, operators=5, devices=3)
        args = (bundle.graph, bundle.topology, bundle.placement)
        self.assertLessEqual(total_latency(*args, ModelParams(alpha=low)),
                             total_latency(*args, ModelParams(alpha=high)))

    def test_alpha_strict_on_chain(self):
        args = (EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT)
        self.assertLess(total_latency(*args, ModelParams(alpha=0.1)), total_latency(*args, ModelParams(alpha=0.2)))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 100), st.floats(0, 10), st.floats(0, 1))
    def test_objective_boundaries(self, latency, beta, dq):
        self.assertEqual(objective_f(latency, ModelParams(beta=0, dq_fraction=dq)), latency)
        self.assertEqual(objective_f(latency, ModelParams(beta=beta, dq_fraction=0)), latency)
        if beta > 0.01 and latency > 0.01 and dq < 1:
            higher = min(1.0, dq + 0.25)
            self.assertLess(objective_f(latency, ModelParams(beta=beta, dq_fraction=higher)),
                            objective_f(latency, ModelParams(beta=beta, dq_fraction=dq)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.permutations(range(4)))
    def test_device_relabeling(self, seed, order):
        bundle = random_instance(seed, operators=5, devices=4, params=ModelParams(alpha=0.1, beta=1, dq_fraction=0.3))
        args = (bundle.graph, bundle.topology, bundle.placement, bundle.params)
        permuted = (bundle.graph, bundle.topology.permuted(order), bundle.placement.permuted(order), bundle.params)
        self.assertEqual(evaluate_candidate(*args), evaluate_candidate(*permuted))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.sampled_from([0.0, 0.25, 0.5]), min_size=4, max_size=4),
           st.lists(st.sampled_from([0.0, 0.25, 0.5]), min_size=4, max_size=4))
    def test_link_modes(self, x_i, x_j):
        x_i, x_j = np.array(x_i), np.array(x_j)
        pairs = count_enabled_links(x_i, x_j, LinkCountMode.PAIRS)
        devices = count_enabled_links(x_i, x_j, LinkCountMode.DEVICES)
        self.assertGreaterEqual(pairs, devices / 2)
        self.assertEqual(pairs == 0, devices == 0)


class TestOptimizer(unittest.TestCase):
    """Brute-force oracle, local search and DQ levels."""

    def test_compositions(self):
        self.assertEqual(list(compositions([2, 2], 2)), [(0, 2), (1, 1), (2, 0)])
        self.assertEqual(list(compositions([1, 0, 2], 2)), [(0, 0, 2), (1, 0, 1)])
        self.assertEqual(count_compositions([10, 10, 10], 10), 66)
        self.assertEqual(count_compositions([1, 1], 3), 0)

    def test_config_validation(self):
        with self.assertRaises(ParameterError):
            OptimizerConfig(granularity=0)
        with self.assertRaises(ParameterError):
            OptimizerConfig(decay=1.0)
        self.assertEqual(OptimizerConfig(granularity=10, move_step=0.2).step_units, 2)

    def test_single_operator(self):
        graph = OperatorGraph.build([1.0], [])
        topo = DeviceTopology(np.zeros((1, 1)), np.ones((1, 1), dtype=bool))
        result = brute_force_optimize(graph, topo, ModelParams(), config=OptimizerConfig(granularity=7))
        self.assertEqual(result.placement.to_list(), [[1.0]])
        self.assertEqual(result.latency, 0.0)

    def test_worked_example_instance_brute_force(self):
        result = brute_force_optimize(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PARAMS,
                                      config=OptimizerConfig(granularity=10))
        self.assertLessEqual(result.latency, 1.74)
        self.assertEqual(result.evaluations, 66 ** 3)
        self.assertTrue(validate_placement(result.placement, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY).ok)

    def test_two_operator_chain(self):
        graph = OperatorGraph.build([1.0, 1.0], [(0, 1)])
        topo = DeviceTopology(np.array([[0.0, 1.0], [1.0, 0.0]]), np.ones((2, 2), dtype=bool))
        result = brute_force_optimize(graph, topo, ModelParams(), config=OptimizerConfig(granularity=2))
        self.assertEqual(result.latency, 0.0)
        self.assertEqual(result.evaluations, 9)
        # Smallest flattened placement among the zero-latency ties
        self.assertEqual(result.placement.to_list(), [[0.0, 1.0], [0.0, 1.0]])

    def test_search_space_guard(self):
        with self.assertRaises(SearchSpaceError) as ctx:
            brute_force_optimize(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PARAMS,
                                 config=OptimizerConfig(granularity=10, candidate_cap=1000))
        self.assertEqual(ctx.exception.count, 66 ** 3)
        self.assertIsInstance(ctx.exception, GuardError)

    def test_evaluate_candidate(self):
        latency, objective, volume = evaluate_candidate(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT, EXAMPLE_PARAMS)
        self.assertAlmostEqual(latency, 1.74, delta=TOL)
        self.assertAlmostEqual(objective, 1.16, delta=TOL)
        self.assertAlmostEqual(volume, 1.49, delta=TOL)
        modified = evaluate_candidate(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, MODIFIED_PLACEMENT,
                                      ModelParams(beta=2, dq_fraction=1.0))
        self.assertAlmostEqual(modified.latency, 2.37, delta=TOL)
        self.assertAlmostEqual(modified.objective, 0.79, delta=TOL)
        self.assertEqual(tuple(evaluate_candidate(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, Placement.colocated(3, 3),
                                                  EXAMPLE_PARAMS)), (0.0, 0.0, 0.0))
        with self.assertRaises(InvalidCandidateError):
            evaluate_candidate(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PLACEMENT.with_row(0, [0.5, 0.4, 0.0]),
                               EXAMPLE_PARAMS)

    def test_local_search_single_device(self):
        graph = chain(4)
        topo = DeviceTopology(np.zeros((1, 1)), np.ones((4, 1), dtype=bool))
        result = local_search_optimize(graph, topo, ModelParams(), config=OptimizerConfig(restarts=2))
        self.assertEqual(result.latency, 0.0)

    def test_local_search_worked_example_instance(self):
        config = OptimizerConfig(restarts=5, max_iterations=400, seed=3)
        result = local_search_optimize(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PARAMS, config=config)
        self.assertLessEqual(result.latency, 1.74)
        for initial in result.initial_objectives:
            self.assertLessEqual(result.objective, initial)
        self.assertEqual(len(result.initial_objectives), 5)
        report = validate_placement(result.placement, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY)
        self.assertTrue(report.ok, report.summary())

    def test_local_search_determinism(self):
        bundle = random_instance(11, operators=5, devices=3, params=ModelParams(alpha=0.1))
        config = OptimizerConfig(restarts=4, max_iterations=200, seed=42)
        first = local_search_optimize(bundle.graph, bundle.topology, bundle.params, config=config)
        second = local_search_optimize(bundle.graph, bundle.topology, bundle.params, config=config)
        threaded = local_search_optimize(bundle.graph, bundle.topology, bundle.params,
                                         config=OptimizerConfig(restarts=4, max_iterations=200, seed=42, workers=3))
        for other in (second, threaded):
            self.assertEqual(first.placement, other.placement)
            self.assertEqual(first.objective, other.objective)
            self.assertEqual(first.initial_objectives, other.initial_objectives)

    def test_local_search_respects_caps(self):
        scenario = DqScenario((DqLevel(0.5, caps=(FractionCap(1, 0, 0.25), FractionCap(2, 0, 0.0))),))
        for lattice in (False, True):
            config = OptimizerConfig(restarts=3, max_iterations=150, lattice=lattice, granularity=4)
            result = local_search_optimize(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PARAMS, scenario, config)
            bounds = scenario.levels[0].upper_bounds(EXAMPLE_TOPOLOGY)
            report = validate_placement(result.placement, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, bounds)
            self.assertTrue(report.ok, report.summary())

    def test_availability_overrides_steer_search(self):
        # Operator 2 may only run on device 0 until the level moves it to device 1
        availability = np.ones((3, 3), dtype=bool)
        availability[2] = [True, False, False]
        topo = EXAMPLE_TOPOLOGY.with_availability(availability)
        level = DqLevel(0.5, overrides=(AvailabilityOverride(2, 0, False), AvailabilityOverride(2, 1, True)))
        scenario = DqScenario((level,))
        level_topo = level.restrict(topo)

        brute = brute_force_optimize(EXAMPLE_GRAPH, topo, EXAMPLE_PARAMS, scenario, OptimizerConfig(granularity=4))
        config = OptimizerConfig(granularity=4, restarts=10, max_iterations=300, lattice=True, seed=3)
        local = local_search_optimize(EXAMPLE_GRAPH, topo, EXAMPLE_PARAMS, scenario, config)
        for result in (brute, local):
            self.assertEqual(result.placement.row(2).tolist(), [0.0, 1.0, 0.0])
            self.assertTrue(validate_placement(result.placement, EXAMPLE_GRAPH, level_topo).ok)
        self.assertEqual(brute.latency, 0.0)
        self.assertEqual(brute.placement.to_list(), [[0.0, 1.0, 0.0]] * 3)
        self.assertGreaterEqual(local.objective, brute.objective)
        self.assertAlmostEqual(local.latency, 0.0, delta=TOL)

    def test_local_search_against_oracle(self):
        params = ModelParams(alpha=0.1, beta=1.0, dq_fraction=0.5)
        config = OptimizerConfig(granularity=4, restarts=20, max_iterations=150, lattice=True, seed=7)
        close = 0
        for seed in range(50):
            bundle = random_instance(seed, operators=3, devices=3, params=params, with_placement=False)
            oracle = brute_force_optimize(bundle.graph, bundle.topology, params, config=config)
            local = local_search_optimize(bundle.graph, bundle.topology, params, config=config)
            self.assertGreaterEqual(local.objective, oracle.objective, f"seed {seed}")
            if local.objective <= oracle.objective * 1.1 + 1e-12:
                close += 1
        self.assertEqual(close, 50)

    def test_dq_levels_worked_example(self):
        config = OptimizerConfig(granularity=5)
        for beta, bound in ((1.0, 1.16), (2.0, 0.79)):
            result = optimize_with_dq(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PARAMS.with_beta(beta), EXAMPLE_SCENARIO,
                                      config, SearchMethod.BRUTE_FORCE)
            self.assertLessEqual(result.objective, bound)
            self.assertIn(result.dq_fraction, (0.5, 1.0))

    def test_dq_tie_takes_lowest_level(self):
        result = optimize_with_dq(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PARAMS.with_beta(0.0), EXAMPLE_SCENARIO,
                                  OptimizerConfig(granularity=2))
        self.assertEqual(result.dq_fraction, 0.5)

    def test_single_level_matches_method(self):
        config = OptimizerConfig(granularity=3)
        level = DqScenario.single(0.5)
        via_levels = optimize_with_dq(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PARAMS, level, config)
        direct = brute_force_optimize(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PARAMS, config=config)
        self.assertEqual(via_levels.placement, direct.placement)
        self.assertEqual(via_levels.objective, direct.objective)

    def test_removing_level_never_helps(self):
        params = ModelParams(alpha=0.2, beta=1.0)
        caps = tuple(FractionCap(i, 0, 0.0) for i in range(3))
        both = DqScenario((DqLevel(0.2), DqLevel(0.9, caps=caps)))
        config = OptimizerConfig(granularity=3)
        full = optimize_with_dq(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, params, both, config)
        for level in both.levels:
            pruned = optimize_with_dq(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, params, DqScenario((level,)), config)
            self.assertGreaterEqual(pruned.objective, full.objective)

    def test_lattice_candidates_on_grid(self):
        config = OptimizerConfig(granularity=4, restarts=3, max_iterations=100, lattice=True)
        result = local_search_optimize(EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY, EXAMPLE_PARAMS, config=config)
        grid = result.placement.x * 4
        self.assertTrue(np.array_equal(grid, np.round(grid)))


class TestScenario(unittest.TestCase):
    """DQ scenario constraints."""

    def test_worked_example_scenario_is_valid(self):
        self.assertTrue(validate_scenario(EXAMPLE_SCENARIO, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY).ok)

    def test_level_placement_violates_cap(self):
        bad = DqScenario((DqLevel(1.0, caps=(FractionCap(2, 0, 0.0),), placement=EXAMPLE_PLACEMENT),))
        report = validate_scenario(bad, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY)
        self.assertEqual(report.codes(), ["fraction-cap"])
        self.assertEqual(report.errors[0].location, "scenario[0].placement[2][0]")

    def test_infeasible_and_duplicate(self):
        caps = tuple(FractionCap(0, u, 0.2) for u in range(3))
        scenario = DqScenario((DqLevel(0.5), DqLevel(0.5, caps=caps)))
        codes = validate_scenario(scenario, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY).codes()
        self.assertIn("dq-duplicate", codes)
        self.assertIn("level-infeasible", codes)
        self.assertEqual(validate_scenario(DqScenario(()), EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY).codes(), ["scenario-empty"])

    def test_override_restricts_availability(self):
        level = DqLevel(1.0, overrides=(AvailabilityOverride(2, 0, False),))
        restricted = level.restrict(EXAMPLE_TOPOLOGY)
        self.assertEqual(restricted.availability[2].tolist(), [False, True, True])
        self.assertTrue(EXAMPLE_TOPOLOGY.availability.all())
        self.assertEqual(level.upper_bounds(EXAMPLE_TOPOLOGY)[2].tolist(), [0.0, 1.0, 1.0])
        self.assertIs(DqLevel(1.0).restrict(EXAMPLE_TOPOLOGY), EXAMPLE_TOPOLOGY)

    def test_override_index(self):
        for override in (AvailabilityOverride(5, 0, False), AvailabilityOverride(0, 3, True)):
            scenario = DqScenario((DqLevel(0.5, overrides=(override,)),))
            report = validate_scenario(scenario, EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY)
            self.assertEqual(report.codes(), ["override-index"])
            self.assertEqual(report.errors[0].location, "scenario[0].overrides[0]")

    def test_override_placement_on_switched_off_device(self):
        level = DqLevel(1.0, overrides=(AvailabilityOverride(2, 0, False),), placement=EXAMPLE_PLACEMENT)
        report = validate_scenario(DqScenario((level,)), EXAMPLE_GRAPH, EXAMPLE_TOPOLOGY)
        self.assertFalse(report.ok)
        self.assertTrue(all(v.location.startswith("scenario[0].placement") for v in report.errors))


class TestBundle(unittest.TestCase):
    """Problem file parsing, diagnostics and serialization."""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.dir = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def write(self, name, data):
        path = self.dir / name
        path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
        return path

    def example_data(self):
        return json.loads(WORKED_EXAMPLE.read_text(encoding="utf-8"))

    def test_load_worked_example(self):
        bundle = load_bundle(WORKED_EXAMPLE)
        self.assertEqual(bundle.graph, EXAMPLE_GRAPH)
        self.assertEqual(bundle.topology, EXAMPLE_TOPOLOGY)
        self.assertEqual(bundle.placement, EXAMPLE_PLACEMENT)
        self.assertEqual(bundle.scenario, EXAMPLE_SCENARIO)
        report = evaluation_report(bundle)
        self.assertAlmostEqual(report["latency"], 1.74, delta=TOL)
        self.assertAlmostEqual(report["objective"], 1.16, delta=TOL)

    def test_round_trip(self):
        bundle = load_bundle(WORKED_EXAMPLE)
        path = self.dir / "copy.json"
        save_bundle(bundle, path)
        self.assertEqual(load_bundle(path), bundle)
        reparsed, _ = parse_bundle(bundle_to_dict(bundle))
        self.assertEqual(reparsed, bundle)

    def test_overrides_round_trip(self):
        data = self.example_data()
        data["scenario"].append({
            "dq_fraction": 0.8,
            "overrides": [{"op": 2, "device": 0, "available": False}, {"op": 1, "device": 2, "available": True}],
        })
        bundle = load_bundle(self.write("overrides.json", data))
        level = bundle.scenario.levels[2]
        self.assertEqual(level.overrides, (AvailabilityOverride(2, 0, False), AvailabilityOverride(1, 2, True)))
        self.assertEqual(level.caps, ())
        self.assertIsNone(level.placement)
        saved = bundle_to_dict(bundle)
        self.assertEqual(saved["scenario"][2]["overrides"], data["scenario"][2]["overrides"])
        reparsed, report = parse_bundle(saved)
        self.assertTrue(report.ok)
        self.assertEqual(reparsed, bundle)

    def test_override_field_errors(self):
        data = self.example_data()
        data["scenario"][0]["overrides"] = [{"op": 2, "device": 0, "available": "no"}]
        with self.assertRaises(BundleError) as ctx:
            read_bundle(self.write("typed_override.json", data))
        self.assertEqual(ctx.exception.location, "scenario[0].overrides[0].available")
        data["scenario"][0]["overrides"] = [{"op": 2, "device": 9, "available": False}]
        _, report = read_bundle(self.write("range_override.json", data))
        self.assertIn("override-index", report.codes())

    def test_row_sum_diagnostic(self):
        data = self.example_data()
        data["placement"][1] = [0.6, 0.0, 0.3]
        _, report = read_bundle(self.write("bad.json", data))
        self.assertEqual(report.codes(), ["row-sum"])
        self.assertIn("operator 1", report.errors[0].message)
        with self.assertRaises(BundleValidationError):
            load_bundle(self.dir / "bad.json")

    def test_dangling_edge_diagnostic(self):
        data = self.example_data()
        data["edges"].append([2, 7])
        _, report = read_bundle(self.write("dangling.json", data))
        self.assertIn("dangling-edge", report.codes())

    def test_dimension_mismatch(self):
        data = self.example_data()
        data["placement"][0] = [1.0, 0.0]
        with self.assertRaises(BundleValidationError) as ctx:
            read_bundle(self.write("narrow.json", data))
        self.assertEqual(ctx.exception.report.errors[0].location, "placement[0]")

    def test_parse_errors_have_location(self):
        with self.assertRaises(BundleError) as ctx:
            read_bundle(self.write("broken.json", '{"operators": [\n  {"id": 0,, }\n]}'))
        self.assertIn("line 2", str(ctx.exception))
        data = self.example_data()
        data["edges"][1] = [1, "two"]
        with self.assertRaises(BundleError) as ctx:
            read_bundle(self.write("typed.json", data))
        self.assertEqual(ctx.exception.location, "edges[1][1]")
        with self.assertRaises(BundleError):
            read_bundle(self.dir / "missing.json")

    def test_defaults(self):
        data = {"operators": [{"id": 0}], "edges": [], "com_cost": [[0]]}
        bundle, report = parse_bundle(data)
        self.assertTrue(report.ok)
        self.assertEqual(bundle.params, ModelParams())
        self.assertTrue(bundle.topology.availability.all())

    def test_placement_file(self):
        path = self.dir / "placement.json"
        write_placement(MODIFIED_PLACEMENT, path, objective=1.185)
        self.assertEqual(read_placement(path), MODIFIED_PLACEMENT)

    def test_equality_ignores_source(self):
        bundle = load_bundle(WORKED_EXAMPLE)
        other = ProblemBundle(bundle.graph, bundle.topology, bundle.params, bundle.placement, bundle.scenario)
        self.assertEqual(bundle, other)


class TestReports(unittest.TestCase):
    """Evaluation, path listing and sweep reports."""

    def setUp(self):
        self.bundle = load_bundle(WORKED_EXAMPLE)

    def test_evaluation_report(self):
        report = evaluation_report(self.bundle)
        self.assertEqual(report["critical_operators"], [0, 1, 2])
        self.assertEqual([e["edge"] for e in report["edges"]], [[0, 1], [1, 2]])
        self.assertAlmostEqual(report["network_volume"], 1.49, delta=TOL)
        modified = evaluation_report(self.bundle, MODIFIED_PLACEMENT, self.bundle.params.with_dq(1.0))
        self.assertAlmostEqual(modified["latency"], 2.37, delta=TOL)
        self.assertAlmostEqual(modified["objective"], 1.185, delta=TOL)

    def test_evaluation_needs_placement(self):
        with self.assertRaises(UsageProblem):
            evaluation_report(self.bundle.with_placement(None))

    def test_path_listing(self):
        listing = path_listing(self.bundle)
        self.assertEqual(listing["count"], 1)
        self.assertTrue(listing["paths"][0]["critical"])
        self.assertAlmostEqual(listing["paths"][0]["latency"], 1.74, delta=TOL)
        structural = path_listing(self.bundle.with_placement(None))
        self.assertIsNone(structural["paths"][0]["latency"])

    def test_path_listing_diamond(self):
        diamond = OperatorGraph.build([1, 1, 1, 1], [(0, 1), (0, 2), (1, 3), (2, 3)])
        topo = DeviceTopology(EXAMPLE_TOPOLOGY.com_cost, np.ones((4, 3), dtype=bool))
        placement = Placement.from_rows([[1, 0, 0], [0, 1, 0], [1, 0, 0], [0, 0, 1]])
        listing = path_listing(ProblemBundle(diamond, topo, ModelParams(), placement))
        self.assertEqual(listing["count"], 2)
        by_path = {tuple(p["operators"]): p for p in listing["paths"]}
        # 0 -> 1 crosses devices 0 -> 1 (1.5), 1 -> 3 crosses 1 -> 2 (1.0)
        self.assertAlmostEqual(by_path[(0, 1, 3)]["latency"], 2.5, delta=TOL)
        # 0 -> 2 stays on device 0, 2 -> 3 crosses 0 -> 2 (2.0)
        self.assertAlmostEqual(by_path[(0, 2, 3)]["latency"], 2.0, delta=TOL)
        self.assertEqual([p["critical"] for p in listing["paths"]].count(True), 1)
        self.assertTrue(by_path[(0, 1, 3)]["critical"])
        self.assertAlmostEqual(listing["latency"], 2.5, delta=TOL)

    def test_sweep_worked_example_levels(self):
        rows = sweep_rows(self.bundle, [2.0, 1.0])
        self.assertEqual([(r.beta, r.dq_fraction) for r in rows], [(1.0, 0.5), (1.0, 1.0), (2.0, 0.5), (2.0, 1.0)])
        for row, want in zip(rows, (1.16, 1.185, 0.87, 0.79)):
            self.assertAlmostEqual(row.objective, want, delta=TOL)
            self.assertEqual(row.method, "fixed")
            self.assertAlmostEqual(row.objective, row.latency / (1 + row.beta * row.dq_fraction), delta=1e-12)

    def test_sweep_explicit_dq(self):
        rows = sweep_rows(self.bundle, [0.0, 3.0], dqs=[0.0])
        for row in rows:
            self.assertEqual(row.objective, row.latency)

    def test_sweep_reoptimizes(self):
        rows = sweep_rows(self.bundle, [1.0], method=SearchMethod.BRUTE_FORCE, config=OptimizerConfig(granularity=3))
        self.assertEqual(len(rows), 2)
        self.assertTrue(all(r.method == "brute" for r in rows))

    def test_sweep_empty_betas(self):
        with self.assertRaises(UsageProblem):
            sweep_rows(self.bundle, [])


class TestConfig(unittest.TestCase):
    """Test configuration management."""

    def test_default_config(self):
        config = Config()
        self.assertEqual(config.granularity, 10)
        self.assertEqual(config.human_digits, 4)
        self.assertEqual(config.machine_digits, 17)

    def test_config_from_dict(self):
        config = Config.from_dict({"granularity": 4, "seed": 9, "unknown": True})
        self.assertEqual(config.granularity, 4)
        self.assertEqual(config.seed, 9)
        self.assertFalse(hasattr(config, "unknown"))

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "config.json"
            config = Config.create(str(path))
            config.restarts = 3
            config.save_config()
            self.assertEqual(Config.create(str(path)).restarts, 3)
            path.write_text("[1, 2]", encoding="utf-8")
            with self.assertRaises(ConfigError):
                Config.create(str(path))

    def test_config_validation(self):
        config = Config(granularity=0)
        with self.assertRaises(ConfigError):
            config.validate()
        with self.assertRaises(ConfigError):
            Config(log_level="LOUD").validate()

    def test_config_value_types(self):
        for values in ({"log_level": 5}, {"path_cap": "x"}, {"human_digits": None}, {"granularity": "ten"}):
            with self.assertRaises(ConfigError, msg=str(values)):
                Config.from_dict(values).validate()
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "config.json"
            path.write_text(json.dumps({"path_cap": "x"}), encoding="utf-8")
            with self.assertRaises(ConfigError):
                Config.create(str(path))
            result = CliRunner().invoke(cli, ["--config", str(path), "paths", "-i", str(WORKED_EXAMPLE)])
            self.assertEqual(result.exit_code, 1)

    def test_optimizer_overrides(self):
        optimizer = Config(seed=1).optimizer_config(seed=5, restarts=None)
        self.assertEqual(optimizer.seed, 5)
        self.assertEqual(optimizer.restarts, 10)
        with self.assertRaises(ConfigError):
            Config().optimizer_config(decay=2.0)


class TestDisplayManager(unittest.TestCase):
    """Rendering of reports."""

    def setUp(self):
        from rich.console import Console
        self.buffer = io.StringIO()
        self.display = DisplayManager(config=Config(), console=Console(file=self.buffer, width=120))
        self.bundle = load_bundle(WORKED_EXAMPLE)

    def test_display_evaluation(self):
        self.display.display_evaluation(evaluation_report(self.bundle), "example")
        output = self.buffer.getvalue()
        self.assertIn("(1.26, 0, 0.45)", output)
        self.assertIn("1.74", output)
        self.assertIn("1.16", output)

    def test_display_evaluation_bad_report(self):
        with self.assertRaises(DisplayError):
            self.display.display_evaluation({})

    def test_csv_digits(self):
        rows = sweep_rows(self.bundle, [1.0])
        stream = io.StringIO()
        self.display.write_csv(rows, stream)
        parsed = list(csv.reader(io.StringIO(stream.getvalue())))
        self.assertEqual(tuple(parsed[0]), SWEEP_HEADER)
        self.assertEqual(float(parsed[1][3]), rows[0].objective)


class TestUtilities(unittest.TestCase):
    """Test utility functions."""

    def test_format_number(self):
        self.assertEqual(format_number(1.16), "1.16")
        self.assertEqual(format_number(0.1 + 0.2, 17), "0.30000000000000004")
        self.assertEqual(format_number(-0.0), "0")
        self.assertEqual(format_vector([1.26, 0.0, 0.45]), "(1.26, 0, 0.45)")

    def test_parse_number_list(self):
        self.assertEqual(parse_number_list("0, 0.5,1"), [0.0, 0.5, 1.0])
        self.assertEqual(parse_number_list(""), [])
        with self.assertRaises(ValueError):
            parse_number_list("1,x")

    def test_logging_setup(self):
        setup_logging(verbose=True)
        logger = get_logger("test")
        self.assertEqual(logger.name, "fracplace.test")
        logger.debug("debug message")

    def test_logging_level_and_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            log_file = Path(tmp) / "logs" / "fracplace.log"
            setup_logging(log_file=log_file, suppress_output=True, level="warning")
            logger = get_logger("test")
            self.assertEqual(logging.getLogger("fracplace").level, logging.WARNING)
            logger.warning("written")
            with log_elapsed(logger, "noop"):
                pass
            for handler in logging.getLogger().handlers:
                handler.flush()
            self.assertIn("written", log_file.read_text(encoding="utf-8"))
            setup_logging(suppress_output=True)


class TestExceptions(unittest.TestCase):
    """Test custom exceptions."""

    def test_hierarchy(self):
        for error in (ConfigError("x"), ParameterError("x"), GraphError("x"), UsageProblem("x"),
                      SearchSpaceError(10, 5), PathExplosionError(10, 5)):
            self.assertIsInstance(error, FracplaceError)

    def test_messages(self):
        self.assertIn("10 candidates", str(SearchSpaceError(10, 5)))
        self.assertEqual(str(BundleError("bad", "f.json", "edges[0]")), "f.json: edges[0]: bad")
        self.assertEqual(str(EdgeNotFoundError((1, 2))), "Edge 1->2 not found in operator graph")


class TestCLI(unittest.TestCase):
    """Commands, output formats and exit codes."""

    def setUp(self):
        self.runner = CliRunner()
        self.temp_dir = tempfile.TemporaryDirectory()
        self.dir = Path(self.temp_dir.name)
        self.example = str(WORKED_EXAMPLE)

    def tearDown(self):
        self.temp_dir.cleanup()

    def invoke(self, *args):
        return self.runner.invoke(cli, list(args))

    def test_help_and_version(self):
        result = self.invoke("--help")
        self.assertEqual(result.exit_code, 0)
        self.assertIn("fracplace", result.output)
        result = self.invoke("--version")
        self.assertEqual(result.exit_code, 0)
        self.assertIn("fracplace", result.output)

    def test_evaluate_human(self):
        result = self.invoke("evaluate", "-i", self.example)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("1.74", result.output)
        self.assertIn("1.16", result.output)

    def test_evaluate_json(self):
        result = self.invoke("evaluate", "-i", self.example, "--format", "json")
        self.assertEqual(result.exit_code, 0, result.output)
        data = json.loads(result.output)
        self.assertAlmostEqual(data["latency"], 1.74, delta=TOL)
        self.assertAlmostEqual(data["objective"], 1.16, delta=TOL)
        self.assertEqual(data["critical_path"], [[0, 1], [1, 2]])
        self.assertEqual(data["edges"][0]["enabled_links"], 3)

    def test_evaluate_modified_placement(self):
        placement = self.dir / "modified.json"
        write_placement(MODIFIED_PLACEMENT, placement)
        result = self.invoke("evaluate", "-i", self.example, "-p", str(placement), "--dq", "1", "-f", "json")
        self.assertEqual(result.exit_code, 0, result.output)
        data = json.loads(result.output)
        self.assertAlmostEqual(data["latency"], 2.37, delta=TOL)
        self.assertAlmostEqual(data["objective"], 1.185, delta=TOL)

    def test_evaluate_without_placement(self):
        bundle = load_bundle(WORKED_EXAMPLE).with_placement(None)
        path = self.dir / "graph_only.json"
        save_bundle(bundle, path)
        result = self.invoke("evaluate", "-i", str(path))
        self.assertEqual(result.exit_code, 1)
        self.assertIn("no placement", result.output)

    def test_evaluate_single_operator(self):
        path = self.dir / "single.json"
        path.write_text(json.dumps({"operators": [{"id": 0}], "edges": [], "com_cost": [[0]],
                                    "placement": [[1]]}), encoding="utf-8")
        result = self.invoke("evaluate", "-i", str(path), "-f", "json")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(json.loads(result.output)["latency"], 0.0)

    def test_optimize(self):
        out = self.dir / "best.json"
        result = self.invoke("optimize", "-i", self.example, "-g", "5", "--out", str(out), "-f", "json")
        self.assertEqual(result.exit_code, 0, result.output)
        data = json.loads(result.output)
        self.assertLessEqual(data["latency"], 1.74)
        self.assertEqual(read_placement(out).to_list(), data["placement"])

    def test_optimize_local_is_deterministic(self):
        args = ("optimize", "-i", self.example, "-m", "local", "--seed", "4", "--restarts", "3",
                "--iterations", "100", "-f", "json")
        first, second = self.invoke(*args), self.invoke(*args)
        self.assertEqual(first.exit_code, 0, first.output)
        self.assertEqual(first.output, second.output)

    def test_optimize_guard_exit_code(self):
        config = self.dir / "config.json"
        config.write_text(json.dumps({"candidate_cap": 1000}), encoding="utf-8")
        result = self.invoke("--config", str(config), "optimize", "-i", self.example)
        self.assertEqual(result.exit_code, 2)
        self.assertIn("candidates", result.output)

    def test_sweep_csv(self):
        result = self.invoke("sweep", "-i", self.example, "--beta", "1,2")
        self.assertEqual(result.exit_code, 0, result.output)
        rows = list(csv.reader(io.StringIO(result.output)))
        self.assertEqual(tuple(rows[0]), SWEEP_HEADER)
        objectives = [float(r[3]) for r in rows[1:]]
        for got, want in zip(objectives, (1.16, 1.185, 0.87, 0.79)):
            self.assertAlmostEqual(got, want, delta=TOL)
        for beta, dq, latency, objective, _ in rows[1:]:
            self.assertAlmostEqual(float(objective), float(latency) / (1 + float(beta) * float(dq)), delta=1e-12)

    def test_sweep_out_file(self):
        out = self.dir / "sweep.csv"
        result = self.invoke("sweep", "-i", self.example, "--beta", "0", "--dq", "0,1", "--out", str(out), "-f", "json")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(len(json.loads(result.output)["rows"]), 2)
        self.assertEqual(len(out.read_text(encoding="utf-8").splitlines()), 3)

    def test_sweep_empty_list(self):
        result = self.invoke("sweep", "-i", self.example, "--beta", "")
        self.assertEqual(result.exit_code, 1)
        result = self.invoke("sweep", "-i", self.example, "--dq", " ")
        self.assertEqual(result.exit_code, 1)

    def test_paths(self):
        result = self.invoke("paths", "-i", self.example, "-f", "json")
        self.assertEqual(result.exit_code, 0, result.output)
        listing = json.loads(result.output)
        self.assertEqual(listing["count"], 1)
        self.assertTrue(listing["paths"][0]["critical"])
        human = self.invoke("paths", "-i", self.example)
        self.assertIn("0 -> 1 -> 2", human.output)

    def test_paths_explosion_exit_code(self):
        graph = diamond_stack(4)
        n = graph.operator_count
        bundle = ProblemBundle(graph, DeviceTopology(np.zeros((1, 1)), np.ones((n, 1), dtype=bool)), ModelParams())
        path = self.dir / "stack.json"
        save_bundle(bundle, path)
        config = self.dir / "config.json"
        config.write_text(json.dumps({"path_cap": 4}), encoding="utf-8")
        result = self.invoke("--config", str(config), "paths", "-i", str(path))
        self.assertEqual(result.exit_code, 2)
        self.assertIn("evaluate", result.output)

    def test_validate(self):
        result = self.invoke("validate", "-i", self.example)
        self.assertEqual(result.exit_code, 0, result.output)
        data = json.loads(WORKED_EXAMPLE.read_text(encoding="utf-8"))
        data["placement"][0] = [0.5, 0.4, 0.0]
        bad = self.dir / "bad.json"
        bad.write_text(json.dumps(data), encoding="utf-8")
        result = self.invoke("validate", "-i", str(bad), "-f", "json")
        self.assertEqual(result.exit_code, 1)
        report = json.loads(result.output)
        self.assertEqual(report["violations"][0]["code"], "row-sum")

    def test_load_failure_exit_code(self):
        bad = self.dir / "broken.json"
        bad.write_text("{", encoding="utf-8")
        self.assertEqual(self.invoke("evaluate", "-i", str(bad)).exit_code, 1)
        self.assertEqual(self.invoke("evaluate", "-i", str(self.dir / "none.json")).exit_code, 1)

    def test_usage_error_exit_code(self):
        self.assertEqual(self.invoke("evaluate").exit_code, 1)
        self.assertEqual(self.invoke("optimize", "-i", self.example, "-m", "exhaustive").exit_code, 1)

    def test_generate(self):
        out = self.dir / "random.json"
        result = self.invoke("generate", "--seed", "3", "--operators", "5", "--out", str(out))
        self.assertEqual(result.exit_code, 0, result.output)
        bundle = load_bundle(out)
        self.assertEqual(bundle.graph.operator_count, 5)
        stdout = self.invoke("generate", "--seed", "3", "--operators", "5")
        self.assertEqual(json.loads(stdout.output), bundle_to_dict(bundle))


class TestGenerator(unittest.TestCase):
    """Seeded random instances."""

    def test_instances_are_valid(self):
        for seed in range(20):
            bundle = random_instance(seed, operators=6, devices=3, max_edges=8)
            self.assertLessEqual(len(bundle.graph.edge_set), 8)
            self.assertTrue(all(i < j for i, j in bundle.graph.edges))
            self.assertTrue(validate_graph(bundle.graph).ok)
            self.assertTrue(validate_placement(bundle.placement, bundle.graph, bundle.topology).ok)

    def test_max_edges_keeps_connecting_edges(self):
        with self.assertRaises(ParameterError):
            random_graph(1, 5, max_edges=0)
        for seed in range(10):
            graph = random_graph(seed, 5, edge_probability=1.0, max_edges=4)
            self.assertEqual(len(graph.edges), 4)
            self.assertEqual({j for _, j in graph.edges}, {1, 2, 3, 4})
        self.assertEqual(random_graph(1, 1, max_edges=0).edges, ())

    def test_seeded(self):
        self.assertEqual(random_instance(5), random_instance(5))


if __name__ == '__main__':
    # Run all tests
    unittest.main(verbosity=2)
