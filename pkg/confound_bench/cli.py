"""
Command-line interface for confound-bench.

Usage:
    confound-bench run experiment.json             # custom grid → CSV (+ SVG)
    confound-bench presets                         # list predefined figure experiments
    confound-bench preset fig2_top_W --reps 200    # run one of them
    confound-bench table scenario.json             # 24-cell analytic bias table
    confound-bench simulate scenario.json --dump data.csv
    confound-bench adjust scenario.json            # one dataset, three adjustment sets
    confound-bench serve                           # HTTP API

Exit codes: 0 success, 1 configuration error, 2 empirical/analytic disagreement.
"""
from __future__ import annotations

import logging
import sys
from functools import wraps

import click
from dotenv import load_dotenv

from . import __version__
from .core.presets import preset_names
from .handlers.experiment_handler import EXIT_CONFIG, ExperimentHandler, ExperimentOutcome, atomic_write_text

__all__ = [
    "cli",
]

logger = logging.getLogger(__name__)


def _handler() -> ExperimentHandler:
    from .deps import get_experiment_handler
    return get_experiment_handler()


def config_errors(fn):
    """Map domain and IO errors to exit code 1 with the message on stderr."""
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, OSError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_CONFIG)
    return wrapper


def _finish(outcome: ExperimentOutcome) -> None:
    report = outcome.report
    click.echo(f"CSV: {outcome.csv_path}")
    if outcome.svg_path:
        click.echo(f"SVG: {outcome.svg_path}")
    if outcome.spec.grid_note:
        click.echo(f"Note: {outcome.spec.grid_note}")
    if report.analytic_only:
        click.echo(f"{len(report.rows)} analytic rows.")
    else:
        agreeing = sum(1 for r in report.rows if r.agreement)
        judged = sum(1 for r in report.rows if r.agreement is not None)
        click.echo(f"{agreeing}/{judged} rows agree within z={report.z:g} MC SEs; {report.failure_count} failed fits.")
    sys.exit(outcome.exit_code)


@click.group()
@click.version_option(version=__version__, prog_name="confound-bench")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging.")
def cli(verbose: bool) -> None:
    """Bias of OLS, FE, LMM and preference-based IV under unmeasured confounding."""
    load_dotenv()
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.argument("config", type=click.Path())
@click.option("--out", "-o", "out_dir", default=None, help="Output directory when the config names no paths.")
@config_errors
def run(config: str, out_dir: str | None) -> None:
    """Run the experiment described by CONFIG (JSON)."""
    handler = _handler()
    spec = handler.parse_config(config)
    _finish(handler.run_experiment(spec, out_dir=out_dir))


@cli.command()
@click.argument("name")
@click.option("--reps", "-r", type=click.IntRange(min=2), default=None, help="Replications per grid point.")
@click.option("--out", "-o", "out_dir", default=None, help="Output directory (default $CONFOUND_BENCH_OUT).")
@click.option("--empirical", is_flag=True, help="Add Monte Carlo points to formula-only presets.")
@config_errors
def preset(name: str, reps: int | None, out_dir: str | None, empirical: bool) -> None:
    """Run a predefined figure experiment (see `confound-bench presets`)."""
    _finish(_handler().run_preset(name, reps=reps, out_dir=out_dir, empirical=empirical))


@cli.command()
def presets() -> None:
    """List the predefined figure experiments."""
    for name in preset_names():
        click.echo(name)


@cli.command()
@click.argument("config", type=click.Path())
@click.option("--csv", "csv_path", default=None, help="Also write the table as CSV.")
@config_errors
def table(config: str, csv_path: str | None) -> None:
    """Print the 24-cell analytic bias table for the scenario in CONFIG."""
    handler = _handler()
    req = handler.parse_scenario(config)
    out = handler.table(req.base, req.policy, req.calibration)
    click.echo(f"n = {req.base.n}")
    click.echo(out.frame.to_string(index=False, float_format=lambda v: f"{v:.6f}"))
    for scenario, plims in out.plims.items():
        if plims is not None:
            click.echo(
                f"LMM plims [{scenario}]: sigma_de2={plims.sigma_de2:.6g} sigma_chie2={plims.sigma_chie2:.6g} "
                f"(m_cal={plims.m_cal}, reps_cal={plims.reps_cal})"
            )
    if csv_path:
        atomic_write_text(csv_path, out.frame.to_csv(index=False, lineterminator="\n"))
        click.echo(f"CSV: {csv_path}")


@cli.command()
@click.argument("config", type=click.Path())
@click.option("--dump", "dump_path", required=True, help="CSV path for the simulated dataset.")
@click.option("--rep", "rep_index", type=click.IntRange(min=0), default=0, help="Replication index.")
@click.option("--latents", is_flag=True, help="Include the unmeasured W and B columns.")
@config_errors
def simulate(config: str, dump_path: str, rep_index: int, latents: bool) -> None:
    """Simulate one dataset from CONFIG and write it as CSV."""
    handler = _handler()
    req = handler.parse_scenario(config)
    frame = handler.simulate(req.base, dump_path, rep_index, include_latents=latents)
    click.echo(f"{len(frame)} rows → {dump_path}")


@cli.command()
@click.argument("config", type=click.Path())
@click.option("--rep", "rep_index", type=click.IntRange(min=0), default=0, help="Replication index.")
@click.option("--csv", "csv_path", default=None, help="Also write the comparison as CSV.")
@config_errors
def adjust(config: str, rep_index: int, csv_path: str | None) -> None:
    """Fit all methods on one dataset under the full / no_within / no_within_between adjustment sets."""
    handler = _handler()
    req = handler.parse_scenario(config)
    frame = handler.adjust(req.base, rep_index)
    click.echo(frame.to_string(index=False))
    if csv_path:
        atomic_write_text(csv_path, frame.to_csv(index=False, lineterminator="\n"))
        click.echo(f"CSV: {csv_path}")


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host: str, port: int) -> None:
    """Start the HTTP API."""
    import uvicorn
    uvicorn.run("confound_bench.main:app", host=host, port=port)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
