"""
Custom exceptions for fracplace.
"""

from typing import Optional


class FracplaceError(Exception):
    """Base exception for fracplace."""
    pass


class ConfigError(FracplaceError):
    """Configuration related errors."""
    pass


class ModelError(FracplaceError):
    """Cost model related errors."""
    pass


class ParameterError(ModelError):
    """Model parameter out of range."""
    pass


class ShapeError(ModelError):
    """Placement, topology and graph dimensions disagree."""
    pass


class EdgeNotFoundError(ModelError):
    """Requested edge is not part of the operator graph."""

    def __init__(self, edge):
        self.edge = tuple(edge)
        super().__init__(f"Edge {self.edge[0]}->{self.edge[1]} not found in operator graph")


class InvalidCandidateError(ModelError):
    """Placement failed validation before evaluation."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"Invalid placement: {report.summary()}")


class GraphError(FracplaceError):
    """Operator graph is not a DAG."""
    pass


class BundleError(FracplaceError):
    """Problem file could not be parsed."""

    def __init__(self, message: str, source: Optional[str] = None, location: Optional[str] = None):
        self.source = source
        self.location = location
        prefix = ": ".join(part for part in (source, location) if part)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class BundleValidationError(FracplaceError):
    """Problem file parsed but violates model constraints."""

    def __init__(self, report, source: Optional[str] = None):
        self.report = report
        self.source = source
        where = f"{source}: " if source else ""
        super().__init__(f"{where}{report.summary()}")


class OptimizationError(FracplaceError):
    """Search could not produce a result."""
    pass


class DisplayError(FracplaceError):
    """Display related errors."""
    pass


class GuardError(FracplaceError):
    """A size guard refused the requested work."""
    pass


class SearchSpaceError(GuardError):
    """Brute-force candidate count exceeds the configured cap."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(
            f"Search space has {count} candidates, above the cap of {cap}; "
            "lower the granularity or use local search"
        )


class PathExplosionError(GuardError):
    """Source-to-sink path count exceeds the configured cap."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(
            f"Graph has {count} source-to-sink paths, above the cap of {cap}; "
            "use the critical path from 'evaluate' instead"
        )


class UsageProblem(FracplaceError):
    """The input lacks what the requested command needs."""
    pass
