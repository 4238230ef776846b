"""
Display manager for fracplace using Rich for terminal output, plus JSON and
CSV emitters for machine consumption.
"""

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

from rich.box import ROUNDED
from rich.console import Console, Group
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from core.model import ValidationReport
from core.optimizer import OptimizationResult
from core.reports import SWEEP_HEADER, SweepRow
from utils.exceptions import DisplayError
from utils.helpers import format_number, format_vector
from utils.logger import get_logger

logger = get_logger("display")


class DisplayManager:
    """Renders reports as Rich tables, JSON or CSV."""

    def __init__(self, config=None, console: Optional[Console] = None):
        """Initialize the display manager."""
        self.config = config
        self.console = console or Console()
        self.digits = config.human_digits if config else 4
        self.machine_digits = config.machine_digits if config else 17

    def _num(self, value: Optional[float]) -> str:
        return "-" if value is None else format_number(value, self.digits)

    def _display_header(self, title: str, subtitle: str = "") -> None:
        lines: List[Any] = [Text(title, style="bold bright_cyan", justify="center")]
        if subtitle:
            lines.append(Text(subtitle, style="dim", justify="center"))
        self.console.print(Panel(Group(*lines), border_style="bright_blue", padding=(0, 2)))

    def display_evaluation(self, report: Dict[str, Any], source: str = "") -> None:
        """Per-edge breakdown table followed by the summary of the placement."""
        try:
            self._display_header("PLACEMENT EVALUATION", source)

            edge_table = Table(
                title="Edge latencies",
                show_header=True,
                header_style="bold bright_magenta",
                box=ROUNDED,
                border_style="bright_blue"
            )
            edge_table.add_column("Edge", style="bright_cyan")
            edge_table.add_column("Per-device cost", style="bright_white")
            edge_table.add_column("Max", style="bright_yellow", justify="right")
            edge_table.add_column("Links", style="bright_blue", justify="right")
            edge_table.add_column("Latency", style="bright_green", justify="right")
            critical = {tuple(e) for e in report["critical_path"]}
            for edge in report["edges"]:
                i, j = edge["edge"]
                marker = " *" if (i, j) in critical else ""
                edge_table.add_row(
                    f"{i} -> {j}{marker}",
                    format_vector(edge["per_device_cost"], self.digits),
                    self._num(edge["max_cost"]),
                    str(edge["enabled_links"]),
                    self._num(edge["latency"]),
                )
            if report["edges"]:
                self.console.print(edge_table)
            else:
                self.console.print("[dim]Graph has no edges.[/dim]")

            params = report["params"]
            summary = Table(show_header=False, box=ROUNDED, border_style="bright_green")
            summary.add_column("Metric", style="bright_cyan")
            summary.add_column("Value", style="bold bright_white")
            path = report["critical_operators"]
            summary.add_row("Critical path", " -> ".join(str(i) for i in path) if path else "-")
            summary.add_row("Total latency", self._num(report["latency"]))
            summary.add_row(
                f"F (beta={self._num(params['beta'])}, DQ={self._num(params['dq_fraction'])})",
                self._num(report["objective"]),
            )
            summary.add_row("Network volume", self._num(report["network_volume"]))
            summary.add_row("Transfer time", self._num(report["transfer_time"]))
            self.console.print(summary)
        except (KeyError, TypeError) as e:
            raise DisplayError(f"Failed to display evaluation: {e}")

    def display_optimization(self, result: OptimizationResult, source: str = "") -> None:
        """Winning placement matrix and its metrics."""
        self._display_header("OPTIMIZATION RESULT", source)
        summary = Table(show_header=False, box=ROUNDED, border_style="bright_green")
        summary.add_column("Metric", style="bright_cyan")
        summary.add_column("Value", style="bold bright_white")
        summary.add_row("Method", result.method.value)
        summary.add_row("DQ fraction", self._num(result.dq_fraction))
        summary.add_row("Latency", self._num(result.latency))
        summary.add_row("Objective F", self._num(result.objective))
        summary.add_row("Network volume", self._num(result.network_volume))
        summary.add_row("Evaluations", str(result.evaluations))
        if result.critical_path is not None:
            summary.add_row("Critical path", str(result.critical_path))
        self.console.print(summary)

        matrix = Table(title="Placement", header_style="bold bright_magenta", box=ROUNDED,
                       border_style="bright_blue")
        matrix.add_column("Operator", style="bright_cyan")
        for u in range(result.placement.shape[1]):
            matrix.add_column(f"Device {u}", justify="right")
        for i, row in enumerate(result.placement.to_list()):
            matrix.add_row(str(i), *[self._num(v) for v in row])
        self.console.print(matrix)

    def display_sweep(self, rows: Sequence[SweepRow]) -> None:
        table = Table(title="Beta / DQ sweep", header_style="bold bright_magenta", box=ROUNDED,
                      border_style="bright_blue")
        for name in SWEEP_HEADER:
            table.add_column(name, justify="right" if name != "method" else "left")
        for row in rows:
            table.add_row(*[self._num(v) if not isinstance(v, str) else v for v in row.values()])
        self.console.print(table)

    def display_paths(self, listing: Dict[str, Any], source: str = "") -> None:
        self._display_header("SOURCE-TO-SINK PATHS", source)
        table = Table(header_style="bold bright_magenta", box=ROUNDED, border_style="bright_blue")
        table.add_column("#", justify="right")
        table.add_column("Path", style="bright_cyan")
        with_latency = listing["latency"] is not None
        if with_latency:
            table.add_column("Latency", justify="right", style="bright_green")
        for k, entry in enumerate(listing["paths"]):
            label = " -> ".join(str(i) for i in entry["operators"])
            if entry["critical"]:
                label = f"[bold bright_yellow]{label} (critical)[/bold bright_yellow]"
            cells = [str(k), label]
            if with_latency:
                cells.append(self._num(entry["latency"]))
            table.add_row(*cells)
        self.console.print(table)
        self.console.print(f"[dim]{listing['count']} path(s)[/dim]")

    def display_validation(self, report: ValidationReport, source: str = "") -> None:
        if not report.violations:
            self.console.print(f"[green]{source or 'bundle'}: valid[/green]")
            return
        table = Table(title=f"Diagnostics for {source}" if source else "Diagnostics",
                      header_style="bold bright_magenta", box=ROUNDED, border_style="bright_red")
        table.add_column("Severity")
        table.add_column("Location", style="bright_cyan")
        table.add_column("Code", style="bright_blue")
        table.add_column("Message")
        for v in report.violations:
            style = "red" if v.severity.value == "error" else "yellow"
            table.add_row(f"[{style}]{v.severity.value}[/{style}]", v.location, v.code, v.message)
        self.console.print(table)
        self.console.print(
            f"{len(report.errors)} error(s), {len(report.warnings)} warning(s)",
            style="red" if report.errors else "yellow",
        )

    def output_json(self, data: Dict[str, Any]) -> None:
        """Output data in JSON format."""
        try:
            json_output = json.dumps(data, indent=2)
            # Plain print keeps Rich from styling the payload
            print(json_output)
        except (TypeError, ValueError) as e:
            raise DisplayError(f"Failed to output JSON: {e}")

    def write_csv(self, rows: Sequence[SweepRow], stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([
                v if isinstance(v, str) else format_number(v, self.machine_digits)
                for v in row.values()
            ])

    def output_csv(self, rows: Sequence[SweepRow]) -> None:
        buffer = io.StringIO()
        self.write_csv(rows, buffer)
        print(buffer.getvalue(), end="")

    def save_csv(self, rows: Sequence[SweepRow], file_path: str) -> None:
        """Save sweep rows to a CSV file."""
        try:
            with open(Path(file_path), 'w', encoding='utf-8', newline='') as f:
                self.write_csv(rows, f)
            logger.debug(f"Saved {len(rows)} sweep rows to {file_path}")
        except OSError as e:
            raise DisplayError(f"Failed to save data to file: {e}")
