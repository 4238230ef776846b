"""
Main CLI entry point for fracplace - quality-aware placement workbench.
"""

import sys
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import click
from rich.console import Console
from rich.traceback import install

from cli import __version__
from core.bundle import bundle_to_dict, load_bundle, read_bundle, read_placement, save_bundle, write_placement
from core.config import Config
from core.display import DisplayManager
from core.generator import random_instance
from core.model import validate_placement
from core.optimizer import SearchMethod, optimize_with_dq
from core.reports import FIXED_METHOD, evaluation_report, path_listing, sweep_rows
from core.scenario import DqScenario
from utils.exceptions import BundleValidationError, FracplaceError, GuardError, UsageProblem
from utils.helpers import parse_number_list
from utils.logger import get_logger, setup_logging

install(show_locals=False)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GUARD = 2

console = Console()
error_console = Console(stderr=True)
logger = get_logger("cli")


@dataclass
class AppContext:
    config: Config
    verbose: bool


class FracplaceGroup(click.Group):
    """Command group with the exit codes 0 (success), 1 (usage or validation) and 2 (guard)."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            error_console.print("Operation cancelled by user.", style="yellow")
            sys.exit(EXIT_USAGE)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def _report_error(message: str) -> None:
    error_console.print(f"Error: {message}", style="red", markup=False, highlight=False)


@contextmanager
def handle_errors(verbose: bool) -> Iterator[None]:
    """Map fracplace errors onto exit codes, printing them to stderr."""
    try:
        yield
    except KeyboardInterrupt:
        error_console.print("Operation cancelled by user.", style="yellow")
        sys.exit(EXIT_USAGE)
    except GuardError as e:
        _report_error(str(e))
        sys.exit(EXIT_GUARD)
    except BundleValidationError as e:
        DisplayManager(console=error_console).display_validation(e.report, e.source or "")
        _report_error(str(e))
        sys.exit(EXIT_USAGE)
    except FracplaceError as e:
        _report_error(str(e))
        sys.exit(EXIT_USAGE)
    except Exception as e:
        error_console.print(f"Unexpected error: {e}", style="red", markup=False)
        if verbose:
            error_console.print_exception()
        sys.exit(EXIT_USAGE)


def _prepare(ctx: click.Context, output_format: str) -> AppContext:
    """Configure logging for the command; machine formats keep the console quiet."""
    app: AppContext = ctx.obj
    setup_logging(
        app.verbose,
        log_file=app.config.get_log_file_path(),
        suppress_output=output_format != "human",
        level=app.config.log_level,
    )
    return app


def _number_list(ctx: click.Context, param: click.Parameter, value: Sequence[str]) -> Optional[List[float]]:
    """Comma separated numbers, repeatable; None when the option is absent."""
    if not value:
        return None
    numbers: List[float] = []
    for item in value:
        try:
            numbers.extend(parse_number_list(item))
        except ValueError:
            raise click.BadParameter(f"expected comma separated numbers, got {item!r}")
    return numbers


input_option = click.option(
    "-i", "--input", "input_path", required=True, type=click.Path(dir_okay=False),
    help="Problem bundle (JSON)",
)


def format_option(*choices: str, default: str = "human"):
    return click.option(
        "-f", "--format", "output_format", type=click.Choice(choices), default=default,
        show_default=True, help="Output format",
    )


def optimizer_options(func):
    """Search flags shared by optimize and sweep; unset flags fall back to the config file."""
    options = [
        click.option("-g", "--granularity", type=int, help="Grid step 1/g of brute force and lattice moves"),
        click.option("--seed", type=int, help="Seed of the local search"),
        click.option("--restarts", type=int, help="Local search restarts per DQ level"),
        click.option("--iterations", type=int, help="Proposals per restart"),
        click.option("--step", type=float, help="Fraction moved per proposal"),
        click.option("--temperature", type=float, help="Initial annealing temperature (0 = greedy)"),
        click.option("--lattice/--continuous", default=None, help="Keep local search on the 1/g grid"),
        click.option("--workers", type=int, help="Threads running restarts"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _optimizer_config(app: AppContext, granularity, seed, restarts, iterations, step, temperature,
                      lattice, workers):
    return app.config.optimizer_config(
        granularity=granularity,
        seed=seed,
        restarts=restarts,
        max_iterations=iterations,
        move_step=step,
        initial_temperature=temperature,
        lattice=lattice,
        workers=workers,
    )


@click.group(cls=FracplaceGroup)
@click.option("-v", "--verbose", is_flag=True, help="Enable verbose logging")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Custom configuration file path")
@click.version_option(version=__version__, prog_name="fracplace")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, config_path: Optional[str]) -> None:
    """
    fracplace - quality-aware cost model for fractional operator placement

    Evaluate how a streaming job's operators are split across edge and cloud
    devices, search for the placement minimizing F = latency / (1 + beta * DQ),
    and sweep the trade-off between latency and data quality.

    \b
    Examples:
      fracplace evaluate -i data/worked_example.json
      fracplace optimize -i data/worked_example.json --method brute -g 10
      fracplace sweep -i data/worked_example.json --beta 1,2
      fracplace paths -i data/worked_example.json
      fracplace validate -i problem.json
    """
    with handle_errors(verbose):
        ctx.obj = AppContext(Config.create(config_path=config_path), verbose)


@cli.command()
@input_option
@click.option("-p", "--placement", "placement_path", type=click.Path(dir_okay=False),
              help="Evaluate the placement from this file instead of the bundle's")
@click.option("--beta", type=float, help="Override the bundle's beta")
@click.option("--dq", type=float, help="Override the bundle's DQ fraction")
@format_option("human", "json")
@click.pass_context
def evaluate(ctx: click.Context, input_path: str, placement_path: Optional[str], beta: Optional[float],
             dq: Optional[float], output_format: str) -> None:
    """Per-edge latencies, critical path, total latency and F of a placement."""
    app = _prepare(ctx, output_format)
    with handle_errors(app.verbose):
        bundle = load_bundle(input_path)
        if placement_path:
            placement = read_placement(placement_path)
            report = validate_placement(placement, bundle.graph, bundle.topology)
            if not report.ok:
                raise BundleValidationError(report, placement_path)
            bundle = bundle.with_placement(placement)
        params = bundle.params
        if beta is not None:
            params = params.with_beta(beta)
        if dq is not None:
            params = params.with_dq(dq)

        report = evaluation_report(bundle, params=params)
        display = DisplayManager(config=app.config, console=console)
        if output_format == "json":
            display.output_json(report)
        else:
            display.display_evaluation(report, input_path)


@cli.command()
@input_option
@click.option("-m", "--method", type=click.Choice([m.value for m in SearchMethod]),
              default=SearchMethod.BRUTE_FORCE.value, show_default=True, help="Search method")
@optimizer_options
@click.option("-o", "--out", type=click.Path(dir_okay=False), help="Write the winning placement to this file")
@format_option("human", "json")
@click.pass_context
def optimize(ctx: click.Context, input_path: str, method: str, granularity, seed, restarts, iterations,
             step, temperature, lattice, workers, out: Optional[str], output_format: str) -> None:
    """Search the placement and DQ level minimizing F."""
    app = _prepare(ctx, output_format)
    with handle_errors(app.verbose):
        bundle = load_bundle(input_path)
        config = _optimizer_config(app, granularity, seed, restarts, iterations, step, temperature,
                                   lattice, workers)
        scenario = bundle.scenario or DqScenario.single(bundle.params.dq_fraction)
        result = optimize_with_dq(bundle.graph, bundle.topology, bundle.params, scenario, config,
                                  SearchMethod(method))

        display = DisplayManager(config=app.config, console=console)
        if output_format == "json":
            display.output_json(result.to_dict())
        else:
            display.display_optimization(result, input_path)
        if out:
            write_placement(result.placement, out, dq_fraction=result.dq_fraction,
                            latency=result.latency, objective=result.objective)
            logger.info(f"Placement written to {out}")


@cli.command()
@input_option
@click.option("--beta", "betas", multiple=True, callback=_number_list,
              help="Beta values, comma separated (default: the bundle's beta)")
@click.option("--dq", "dqs", multiple=True, callback=_number_list,
              help="DQ fractions, comma separated (default: scenario levels, else the bundle's DQ)")
@click.option("-m", "--method", type=click.Choice([FIXED_METHOD] + [m.value for m in SearchMethod]),
              default=FIXED_METHOD, show_default=True,
              help="Evaluate fixed placements or re-optimize every DQ level")
@optimizer_options
@click.option("-o", "--out", type=click.Path(dir_okay=False), help="Also write the CSV to this file")
@format_option("csv", "json", "human", default="csv")
@click.pass_context
def sweep(ctx: click.Context, input_path: str, betas: Optional[List[float]], dqs: Optional[List[float]],
          method: str, granularity, seed, restarts, iterations, step, temperature, lattice, workers,
          out: Optional[str], output_format: str) -> None:
    """Objective F over a grid of beta and DQ values."""
    app = _prepare(ctx, output_format)
    with handle_errors(app.verbose):
        if dqs is not None and not dqs:
            raise UsageProblem("dq list is empty")
        bundle = load_bundle(input_path)
        config = _optimizer_config(app, granularity, seed, restarts, iterations, step, temperature,
                                   lattice, workers)
        rows = sweep_rows(
            bundle,
            betas if betas is not None else [bundle.params.beta],
            dqs or (),
            method=None if method == FIXED_METHOD else SearchMethod(method),
            config=config,
        )

        display = DisplayManager(config=app.config, console=console)
        if output_format == "csv":
            display.output_csv(rows)
        elif output_format == "json":
            display.output_json({"rows": [row.to_dict() for row in rows]})
        else:
            display.display_sweep(rows)
        if out:
            display.save_csv(rows, out)
            logger.info(f"Sweep written to {out}")


@cli.command()
@input_option
@format_option("human", "json")
@click.pass_context
def paths(ctx: click.Context, input_path: str, output_format: str) -> None:
    """Every source-to-sink path, with latencies when the bundle has a placement."""
    app = _prepare(ctx, output_format)
    with handle_errors(app.verbose):
        bundle = load_bundle(input_path)
        listing = path_listing(bundle, app.config.path_cap)
        display = DisplayManager(config=app.config, console=console)
        if output_format == "json":
            display.output_json(listing)
        else:
            display.display_paths(listing, input_path)


@cli.command()
@input_option
@format_option("human", "json")
@click.pass_context
def validate(ctx: click.Context, input_path: str, output_format: str) -> None:
    """Structured diagnostics of a bundle; exits 1 when it has errors."""
    app = _prepare(ctx, output_format)
    with handle_errors(app.verbose):
        try:
            _, report = read_bundle(input_path)
        except BundleValidationError as e:
            report = e.report
        display = DisplayManager(config=app.config, console=console)
        if output_format == "json":
            display.output_json({"source": input_path, **report.to_dict()})
        else:
            display.display_validation(report, input_path)
    if not report.ok:
        sys.exit(EXIT_USAGE)


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True, help="Instance seed")
@click.option("--operators", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--devices", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--edge-probability", type=click.FloatRange(0, 1), default=0.4, show_default=True)
@click.option("--max-edges", type=click.IntRange(min=0),
              help="Trim extra edges down to this count; the operators - 1 connecting edges are always kept")
@click.option("--availability", type=click.FloatRange(0, 1), default=0.7, show_default=True,
              help="Probability that an operator may run on a device")
@click.option("--placement/--no-placement", "with_placement", default=True, show_default=True,
              help="Include a random feasible placement")
@click.option("-o", "--out", type=click.Path(dir_okay=False), help="Write the bundle here instead of stdout")
@click.pass_context
def generate(ctx: click.Context, seed: int, operators: int, devices: int, edge_probability: float,
             max_edges: Optional[int], availability: float, with_placement: bool, out: Optional[str]) -> None:
    """Seeded random problem bundle."""
    app = _prepare(ctx, "human" if out else "json")
    with handle_errors(app.verbose):
        bundle = random_instance(
            seed,
            operators=operators,
            devices=devices,
            edge_probability=edge_probability,
            max_edges=max_edges,
            availability_probability=availability,
            with_placement=with_placement,
        )
        if out:
            save_bundle(bundle, out)
            logger.info(f"Bundle written to {out}")
        else:
            DisplayManager(config=app.config, console=console).output_json(bundle_to_dict(bundle))


def main() -> None:
    """Console script entry point."""
    cli()


if __name__ == "__main__":
    main()
