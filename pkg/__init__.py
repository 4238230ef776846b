"""
fracplace - Quality-aware cost model for fractional operator placement

Evaluates and optimizes how the operators of a streaming job are split
across edge and cloud devices when latency is traded against the share of
data that passes quality checks.
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cli import __version__  # noqa: E402

__author__ = "fracplace contributors"
__license__ = "MIT"

from core.bundle import ProblemBundle, load_bundle
from core.config import Config
from core.display import DisplayManager
from core.model import DeviceTopology, ModelParams, OperatorGraph, Placement
from core.optimizer import OptimizerConfig, optimize_with_dq

__all__ = [
    "ProblemBundle",
    "load_bundle",
    "Config",
    "DisplayManager",
    "DeviceTopology",
    "ModelParams",
    "OperatorGraph",
    "Placement",
    "OptimizerConfig",
    "optimize_with_dq",
]
