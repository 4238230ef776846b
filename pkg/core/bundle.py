"""
Problem bundle files: reading, validation and serialization.

A bundle is a JSON object mirroring the cost model symbols::

    {
      "operators": [{"id": 0, "selectivity": 1.0}, ...],
      "edges": [[0, 1], ...],
      "com_cost": [[0, 1.5, 2], ...],          # sender row, receiver column
      "availability": [[true, true, true], ...],  # operator rows
      "placement": [[0.8, 0.2, 0.0], ...],      # optional, operator rows
      "params": {"alpha": 0, "beta": 1, "dq_fraction": 0.5,
                 "link_count_mode": "pairs", "batch_size": 1},
      "scenario": [{"dq_fraction": 1.0,
                    "caps": [{"op": 2, "device": 0, "max_fraction": 0}],
                    "overrides": [{"op": 1, "device": 1, "available": false}],
                    "placement": [[...], ...]}]   # optional
    }

``availability`` may be omitted, meaning every operator may use every device.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.graph import validate_graph
from core.model import (
    DeviceTopology,
    LinkCountMode,
    ModelParams,
    Operator,
    OperatorGraph,
    Placement,
    ValidationReport,
    validate_placement,
    validate_topology,
)
from core.scenario import AvailabilityOverride, DqLevel, DqScenario, FractionCap, validate_scenario
from utils.exceptions import BundleError, BundleValidationError, ParameterError
from utils.logger import get_logger

logger = get_logger("bundle")

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class ProblemBundle:
    """Everything one command needs: graph, topology, parameters and optional placement/scenario."""

    graph: OperatorGraph
    topology: DeviceTopology
    params: ModelParams
    placement: Optional[Placement] = None
    scenario: Optional[DqScenario] = None
    source: Optional[str] = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProblemBundle):
            return NotImplemented
        return bundle_to_dict(self) == bundle_to_dict(other)

    __hash__ = None  # type: ignore[assignment]

    def with_placement(self, placement: Optional[Placement]) -> "ProblemBundle":
        return ProblemBundle(self.graph, self.topology, self.params, placement, self.scenario, self.source)

    def with_params(self, params: ModelParams) -> "ProblemBundle":
        return ProblemBundle(self.graph, self.topology, params, self.placement, self.scenario, self.source)


class _Reader:
    """Typed field access that reports the JSON path of anything malformed."""

    def __init__(self, source: str):
        self.source = source

    def fail(self, location: str, message: str) -> BundleError:
        return BundleError(message, self.source, location)

    def require(self, data: Dict[str, Any], key: str, location: str) -> Any:
        if key not in data:
            raise self.fail(location, f"missing required field '{key}'")
        return data[key]

    def number(self, value: Any, location: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(location, f"expected a number, got {json.dumps(value)}")
        if not math.isfinite(value):
            raise self.fail(location, "expected a finite number")
        return float(value)

    def integer(self, value: Any, location: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(location, f"expected an integer, got {json.dumps(value)}")
        return value

    def boolean(self, value: Any, location: str) -> bool:
        if not isinstance(value, bool):
            raise self.fail(location, f"expected true or false, got {json.dumps(value)}")
        return value

    def array(self, value: Any, location: str) -> List[Any]:
        if not isinstance(value, list):
            raise self.fail(location, f"expected a list, got {type(value).__name__}")
        return value

    def obj(self, value: Any, location: str) -> Dict[str, Any]:
        if not isinstance(value, dict):
            raise self.fail(location, f"expected an object, got {type(value).__name__}")
        return value

    def matrix(self, value: Any, location: str, cell=None) -> List[List[Any]]:
        cell = cell or self.number
        rows = self.array(value, location)
        result = []
        for r, row in enumerate(rows):
            row = self.array(row, f"{location}[{r}]")
            result.append([cell(v, f"{location}[{r}][{c}]") for c, v in enumerate(row)])
        return result


def _dimension_report(name: str, rows: Sequence[Sequence[Any]], height: int, width: int,
                      report: ValidationReport) -> bool:
    ok = True
    if len(rows) != height:
        report.add("dimension-mismatch", f"{name} has {len(rows)} rows, expected {height}", name)
        ok = False
    for r, row in enumerate(rows):
        if len(row) != width:
            report.add("dimension-mismatch", f"{name} row {r} has {len(row)} entries, expected {width}",
                       f"{name}[{r}]")
            ok = False
    return ok


def _parse_params(reader: _Reader, data: Dict[str, Any]) -> ModelParams:
    raw = reader.obj(data.get("params", {}), "params")
    values: Dict[str, Any] = {}
    for key in ("alpha", "beta", "dq_fraction", "batch_size"):
        if key in raw:
            values[key] = reader.number(raw[key], f"params.{key}")
    if "link_count_mode" in raw:
        mode = raw["link_count_mode"]
        try:
            values["link_count_mode"] = LinkCountMode(mode)
        except ValueError:
            choices = ", ".join(m.value for m in LinkCountMode)
            raise reader.fail("params.link_count_mode", f"expected one of {choices}, got {json.dumps(mode)}")
    try:
        return ModelParams(**values)
    except ParameterError as e:
        raise reader.fail("params", str(e))


def _parse_level(reader: _Reader, raw: Any, where: str, n_ops: int, n_devices: int,
                 report: ValidationReport) -> DqLevel:
    raw = reader.obj(raw, where)
    dq = reader.number(reader.require(raw, "dq_fraction", where), f"{where}.dq_fraction")
    caps = []
    for k, cap in enumerate(reader.array(raw.get("caps", []), f"{where}.caps")):
        loc = f"{where}.caps[{k}]"
        cap = reader.obj(cap, loc)
        caps.append(FractionCap(
            reader.integer(reader.require(cap, "op", loc), f"{loc}.op"),
            reader.integer(reader.require(cap, "device", loc), f"{loc}.device"),
            reader.number(reader.require(cap, "max_fraction", loc), f"{loc}.max_fraction"),
        ))
    overrides = []
    for k, override in enumerate(reader.array(raw.get("overrides", []), f"{where}.overrides")):
        loc = f"{where}.overrides[{k}]"
        override = reader.obj(override, loc)
        overrides.append(AvailabilityOverride(
            reader.integer(reader.require(override, "op", loc), f"{loc}.op"),
            reader.integer(reader.require(override, "device", loc), f"{loc}.device"),
            reader.boolean(reader.require(override, "available", loc), f"{loc}.available"),
        ))
    placement = None
    if raw.get("placement") is not None:
        rows = reader.matrix(raw["placement"], f"{where}.placement")
        if _dimension_report(f"{where}.placement", rows, n_ops, n_devices, report):
            placement = Placement.from_rows(rows)
    return DqLevel(dq, tuple(caps), tuple(overrides), placement)


def parse_bundle(data: Any, source: str = "<bundle>") -> Tuple[ProblemBundle, ValidationReport]:
    """
    Build a bundle from decoded JSON and report every constraint violation.

    Raises:
        BundleError: If a field is missing or has the wrong type.
        BundleValidationError: If matrix dimensions disagree so the model
            cannot be assembled.
    """
    reader = _Reader(source)
    data = reader.obj(data, "$")
    report = ValidationReport()

    operators = []
    for k, raw in enumerate(reader.array(reader.require(data, "operators", "$"), "operators")):
        loc = f"operators[{k}]"
        raw = reader.obj(raw, loc)
        op_id = reader.integer(raw.get("id", k), f"{loc}.id")
        selectivity = reader.number(raw.get("selectivity", 1.0), f"{loc}.selectivity")
        operators.append(Operator(op_id, selectivity))

    edges = []
    for k, raw in enumerate(reader.array(reader.require(data, "edges", "$"), "edges")):
        loc = f"edges[{k}]"
        pair = reader.array(raw, loc)
        if len(pair) != 2:
            raise reader.fail(loc, f"an edge is a pair [i, j], got {len(pair)} items")
        edges.append((reader.integer(pair[0], f"{loc}[0]"), reader.integer(pair[1], f"{loc}[1]")))
    graph = OperatorGraph(tuple(operators), tuple(edges))
    n_ops = len(operators)

    com_cost = reader.matrix(reader.require(data, "com_cost", "$"), "com_cost")
    n_devices = len(com_cost)
    _dimension_report("com_cost", com_cost, n_devices, n_devices, report)

    if "availability" in data:
        availability = reader.matrix(data["availability"], "availability", reader.boolean)
        _dimension_report("availability", availability, n_ops, n_devices, report)
    else:
        availability = [[True] * n_devices for _ in range(n_ops)]

    params = _parse_params(reader, data)

    placement_rows = None
    if data.get("placement") is not None:
        placement_rows = reader.matrix(data["placement"], "placement")
        _dimension_report("placement", placement_rows, n_ops, n_devices, report)

    levels = []
    if data.get("scenario") is not None:
        for k, raw in enumerate(reader.array(data["scenario"], "scenario")):
            levels.append(_parse_level(reader, raw, f"scenario[{k}]", n_ops, n_devices, report))

    if not report.ok:
        raise BundleValidationError(report, source)

    topology = DeviceTopology(
        np.array(com_cost, dtype=float).reshape(n_devices, n_devices),
        np.array(availability, dtype=bool).reshape(n_ops, n_devices),
    )
    placement = Placement(np.array(placement_rows, dtype=float).reshape(n_ops, n_devices)) \
        if placement_rows is not None else None
    scenario = DqScenario(tuple(levels)) if data.get("scenario") is not None else None
    bundle = ProblemBundle(graph, topology, params, placement, scenario, source)
    return bundle, validate_bundle(bundle)


def validate_bundle(bundle: ProblemBundle) -> ValidationReport:
    """Graph, topology, placement and scenario checks of an assembled bundle."""
    report = ValidationReport()
    report.extend(validate_graph(bundle.graph))
    report.extend(validate_topology(bundle.topology, bundle.graph))
    if bundle.placement is not None:
        report.extend(validate_placement(bundle.placement, bundle.graph, bundle.topology))
    if bundle.scenario is not None:
        report.extend(validate_scenario(bundle.scenario, bundle.graph, bundle.topology))
    return report


def read_bundle(path: PathLike) -> Tuple[ProblemBundle, ValidationReport]:
    """
    Parse a bundle file without rejecting constraint violations.

    Raises:
        BundleError: If the file is unreadable or malformed, with line and
            column for JSON syntax errors.
    """
    source = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise BundleError(f"cannot read file: {e.strerror or e}", source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise BundleError(e.msg, source, f"line {e.lineno}, column {e.colno}")
    return parse_bundle(data, source)


def load_bundle(path: PathLike) -> ProblemBundle:
    """
    Read and fully validate a bundle file.

    Raises:
        BundleError: If the file cannot be parsed.
        BundleValidationError: If any constraint is violated.
    """
    bundle, report = read_bundle(path)
    for warning in report.warnings:
        logger.warning(f"{path}: {warning.location}: {warning.message}")
    if not report.ok:
        raise BundleValidationError(report, str(path))
    logger.debug(
        f"Loaded {path}: {bundle.graph.operator_count} operators, "
        f"{len(bundle.graph.edge_set)} edges, {bundle.topology.device_count} devices"
    )
    return bundle


def bundle_to_dict(bundle: ProblemBundle) -> Dict[str, Any]:
    """JSON-ready form; ``parse_bundle`` of the result rebuilds an equal bundle."""
    data: Dict[str, Any] = {}
    data.update(bundle.graph.to_dict())
    data.update(bundle.topology.to_dict())
    data["params"] = bundle.params.to_dict()
    if bundle.placement is not None:
        data["placement"] = bundle.placement.to_list()
    if bundle.scenario is not None:
        data["scenario"] = bundle.scenario.to_list()
    return data


def save_bundle(bundle: ProblemBundle, path: PathLike) -> None:
    """Write a bundle as indented JSON."""
    Path(path).write_text(json.dumps(bundle_to_dict(bundle), indent=2) + "\n", encoding="utf-8")


def write_placement(placement: Placement, path: PathLike, **extra: Any) -> None:
    """Write ``{"placement": [[...]]}`` plus any extra fields, loadable as a bundle's placement."""
    data: Dict[str, Any] = {"placement": placement.to_list()}
    data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def read_placement(path: PathLike) -> Placement:
    """
    Read the ``placement`` field of a JSON file.

    Raises:
        BundleError: If the file or field is malformed.
    """
    source = str(path)
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise BundleError(f"cannot read file: {e.strerror or e}", source)
    except json.JSONDecodeError as e:
        raise BundleError(e.msg, source, f"line {e.lineno}, column {e.colno}")
    reader = _Reader(source)
    rows = reader.matrix(reader.require(reader.obj(data, "$"), "placement", "$"), "placement")
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise reader.fail("placement", "rows have different lengths")
    return Placement.from_rows(rows)
