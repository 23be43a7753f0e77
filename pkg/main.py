"""Command-line entry point for salem-lab.

One subcommand per construction runs an experiment from flags or an INI file and writes its
reports; ``criteria`` evaluates the frame criteria on a saved measure payload.
"""

import configparser
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import click
from pydantic import ValidationError
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from config import config
from services.experiment_runner import (
    ExperimentError, RunReport, emit_report, evaluate_criteria, run_experiment,
)
from utils.logging_config import setup_logging, get_logger
from utils.validators import ExperimentConfig, load_experiment, validate_environment_config

console = Console()
logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2


# ─────────────────────────────
# Report Rendering
# ─────────────────────────────
def render_report(report: RunReport):
    """Print checks, fits and verdicts as rich tables"""
    title = f"{report.construction} (seed={report.seed})"
    checks = Table(title=f"Checks: {title}")
    checks.add_column("stage")
    checks.add_column("result")
    for name, result in report.checks.items():
        if isinstance(result, dict) and "passed" in result:
            checks.add_row(name, "[green]pass[/green]" if result["passed"] else "[red]fail[/red]")
        else:
            checks.add_row(name, "reported")
    for failure in report.failures:
        if failure["kind"] == "error":
            checks.add_row(failure["stage"], f"[red]{failure['error_type']}[/red]: {failure['message']}")
    console.print(checks)

    if report.fourier_profiles or report.ball_profiles:
        fits = Table(title="Fits")
        fits.add_column("profile")
        fits.add_column("exponent")
        fits.add_column("stderr")
        fits.add_column("flags")
        for name, p in report.fourier_profiles.items():
            fits.add_row(f"β̂ {name}", _fmt(p.fitted_beta), _fmt(p.stderr), ", ".join(p.flags))
        for name, p in report.ball_profiles.items():
            fits.add_row(f"α̂ {name}", _fmt(p.fitted_alpha), _fmt(p.stderr), ", ".join(p.flags))
        console.print(fits)

    for criterion in report.criteria:
        console.print(f"[bold]{criterion.criterion}[/bold]: {criterion.verdict}")
    if report.criteria:
        console.print(f"[dim]{report.criteria[0].disclaimer}[/dim]")


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


# ─────────────────────────────
# Experiment Execution
# ─────────────────────────────
def execute(ctx: click.Context, construction: str, overrides: Dict) -> int:
    """Merge file config and flags, run, emit, and map the outcome to an exit code"""
    options = ctx.obj
    if options["config"]:
        try:
            base = load_experiment(options["config"]).dict(by_alias=True, exclude_none=True)
        except (ValueError, configparser.Error) as e:
            console.print(f"[red]Invalid experiment file:[/red] {escape(str(e))}")
            return EXIT_ERROR
        if base["construction"] != construction:
            raise click.UsageError(
                f"config file describes {base['construction']!r}, not {construction!r}")
    else:
        base = {"construction": construction}

    tolerances = overrides.pop("tolerances", None)
    if tolerances:
        base["tolerances"] = {**base.get("tolerances", {}), **tolerances}
    for key, value in {**overrides, "seed": options["seed"], "output": options["out"]}.items():
        if value is not None:
            base[key] = value
    if options["formats"]:
        base["formats"] = list(options["formats"])
    if "seed" not in base and construction != "kaufman":
        base["seed"] = config.MASTER_SEED

    try:
        cfg = ExperimentConfig(**base)
    except ValidationError as e:
        console.print(f"[red]Invalid experiment config:[/red] {escape(str(e))}")
        return EXIT_ERROR

    out_dir = cfg.output or config.OUTPUT_DIR
    try:
        report = run_experiment(cfg)
    except ExperimentError as e:
        logger.error(f"Experiment failed: {e}")
        console.print(f"[red]{escape(str(e))}[/red]")
        if e.report is not None:
            emit_report(e.report, out_dir, cfg.formats)
        return EXIT_ERROR

    paths = emit_report(report, out_dir, cfg.formats)
    render_report(report)
    console.print(f"Report: {paths[0]}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


# ─────────────────────────────
# Command Line Interface
# ─────────────────────────────
@click.group()
@click.option("--seed", type=int, default=None, help="64-bit master seed")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Report directory")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="INI experiment file")
@click.option("--format", "formats", multiple=True, type=click.Choice(["json", "csv"]),
              help="Report formats (repeatable)")
@click.pass_context
def cli(ctx, seed, out, config_path, formats):
    """Salem measure laboratory: constructions, checks and frame criteria."""
    setup_logging()
    for issue in validate_environment_config():
        logger.warning(f"Configuration issue: {issue}")
    ctx.obj = {"seed": seed, "out": out, "config": config_path, "formats": formats}


def _read_t_vector(path: Optional[str]) -> Optional[List[float]]:
    if path is None:
        return None
    text = Path(path).read_text(encoding="utf-8")
    return [float(v) for v in text.replace(",", " ").split()]


@cli.command()
@click.option("--s", "s", type=float, default=None, help="Dimension s ∈ (0, 1]")
@click.option("--levels", type=int, default=None, help="Number of convolution levels K")
@click.option("--t-vector", type=click.Path(exists=True, dir_okay=False), default=None,
              help="File of t_k values in [0, 1]")
@click.pass_context
def convolution(ctx, s, levels, t_vector):
    """Infinite-convolution Cantor measure."""
    ctx.exit(execute(ctx, "convolution", {"s": s, "levels": levels, "t_vector": _read_t_vector(t_vector)}))


@cli.command()
@click.option("--s", "s", type=float, default=None)
@click.option("--levels", type=int, default=None, help="Depth J")
@click.option("--retry-cap", type=int, default=None, help="Bernstein rejection retry cap")
@click.pass_context
def cantor(ctx, s, levels, retry_cap):
    """Random dyadic Cantor measure with a heavy chain."""
    tolerances = {"retry_cap": retry_cap} if retry_cap is not None else None
    ctx.exit(execute(ctx, "cantor", {"s": s, "levels": levels, "tolerances": tolerances}))


@cli.command()
@click.option("--s", "s", type=float, default=None, help="Dimension s ∈ (0, 1/2]")
@click.option("--levels", type=int, default=None, help="Base measure depth J")
@click.option("--paths", type=int, default=None, help="Monte Carlo replicas (≥ 100)")
@click.option("--xi-max", type=float, default=None, help="Largest frequency of the decay scan")
@click.pass_context
def brownian(ctx, s, levels, paths, xi_max):
    """Brownian images of the heavy-at-zero base measure."""
    ctx.exit(execute(ctx, "brownian", {"s": s, "levels": levels, "paths": paths, "xi_max": xi_max}))


@cli.command()
@click.option("--s", "s", type=float, default=None)
@click.option("--q1", type=float, default=None)
@click.option("--q2", type=float, default=None)
@click.option("--cs", type=float, default=None, help="C_s (0 calibrates)")
@click.option("--kmax", type=int, default=None, help="Output coefficient window K_out")
@click.option("--n", "n", type=int, default=None, help="Number of product levels (1 or 2)")
@click.pass_context
def kaufman(ctx, s, q1, q2, cs, kmax, n):
    """Diophantine product measures with positive coefficients."""
    q = None
    if q1 is not None or q2 is not None:
        q = [v for v in (q1 or config.KAUFMAN_Q[0], q2 or config.KAUFMAN_Q[-1])]
    ctx.exit(execute(ctx, "kaufman", {"s": s, "q": q, "cs": cs, "kmax": kmax, "n": n}))


@cli.command()
@click.option("--rmax", type=float, default=None, help="Largest |ξ| of the decay scan (≤ 1e5)")
@click.option("--samples", type=int, default=None, help="Samples per dyadic band")
@click.option("--gram-k", type=int, default=None, help="Gram check size K (≤ 512)")
@click.pass_context
def arc(ctx, rmax, samples, gram_k):
    """Weighted arc: Gram check and stationary-phase decay scan."""
    ctx.exit(execute(ctx, "arc", {"rmax": rmax, "samples": samples, "gram_k": gram_k}))


@cli.command()
@click.option("--s", "s", type=float, default=None)
@click.option("--levels", type=int, default=None)
@click.option("--x0", type=float, default=None, help="Support point of the taper (default: heavy cell)")
@click.pass_context
def oneline(ctx, s, levels, x0):
    """Combination of a Cantor measure with its tapered translate."""
    ctx.exit(execute(ctx, "one_line", {"s": s, "levels": levels, "x0": x0}))


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="JSON payload: measure, profiles, ratios, lambda, ball, integral")
@click.pass_context
def criteria(ctx, input_path):
    """Criterion reports on a serialized measure and its profiles."""
    payload = json.loads(Path(input_path).read_text(encoding="utf-8"))
    try:
        result = evaluate_criteria(payload)
    except Exception as e:
        logger.error(f"Criteria evaluation failed: {e}")
        console.print(f"[red]{type(e).__name__}: {escape(str(e))}[/red]")
        ctx.exit(EXIT_ERROR)

    out_dir = Path(ctx.obj["out"] or config.OUTPUT_DIR)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / f"{Path(input_path).stem}.verdicts.json"
    target.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for report in result["criteria"]:
        console.print(f"[bold]{report['criterion']}[/bold]: {report['verdict']}")
    console.print(f"Verdicts: {target}")
    ctx.exit(EXIT_OK)


# ─────────────────────────────
# Application Entry Point
# ─────────────────────────────
def main():
    try:
        code = cli.main(standalone_mode=False)
    except click.ClickException as e:
        e.show()
        sys.exit(EXIT_ERROR)
    except click.Abort:
        sys.exit(EXIT_ERROR)
    sys.exit(code or EXIT_OK)


if __name__ == "__main__":
    main()
