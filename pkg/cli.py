"""
Command-line surface: dataset generation, fitting, prediction, rate sweeps,
comparisons and verification.

Every option also reads a LOCALNET_* environment variable.
"""

import json
import logging
from pathlib import Path
from typing import Optional

import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from charts import Atlas
from estimator import MODES, DeepNetEstimator
from harness import (
    emit_results,
    fit_estimator,
    generate_dataset,
    load_config,
    load_dataset,
    predict_queries,
    read_queries,
    run_dimension_comparison,
    run_feedback_comparison,
    run_rate_sweeps,
    run_verification,
    write_predictions,
)

load_dotenv()

app = typer.Typer(add_completion=False, help="Deep-net regression on manifolds.")
console = Console()


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(message)s',
        datefmt='%H:%M:%S',
        handlers=[RichHandler(console=console, show_path=False)],
    )


def _fail(e: Exception) -> None:
    console.print(f"[bold red]Error:[/bold red] {e}")
    raise typer.Exit(code=1)


def _rate_table(results) -> Table:
    table = Table(title="Learning curves")
    table.add_column("series")
    table.add_column("m", justify="right")
    table.add_column("n", justify="right")
    table.add_column("mse", justify="right")
    table.add_column("slope", justify="right")
    for result in results:
        slope = f"{result.slope:.3f}" if result.slope_defined else "undefined"
        for point in result.points:
            table.add_row(result.label or result.mode, str(point.m), str(point.n_used), f"{point.mse_mean:.4e}", slope)
    return table


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", envvar="LOCALNET_VERBOSE")):
    _setup_logging(verbose)


@app.command()
def gen(
    config: Optional[Path] = typer.Option(None, "--config", envvar="LOCALNET_CONFIG"),
    out: Path = typer.Option(..., "--out", envvar="LOCALNET_OUT"),
    m: int = typer.Option(1024, "--m", min=1, envvar="LOCALNET_M"),
    seed: Optional[int] = typer.Option(None, "--seed", envvar="LOCALNET_SEED"),
):
    """Draw a sample set and write it as CSV."""
    try:
        cfg = load_config(config)
        sample = generate_dataset(cfg, m, seed)
        sample.to_csv(out)
    except Exception as e:
        _fail(e)
    console.print(f"Wrote {len(sample)} samples (M={sample.bound:.4g}) to {out}")


@app.command()
def fit(
    config: Optional[Path] = typer.Option(None, "--config", envvar="LOCALNET_CONFIG"),
    data: Path = typer.Option(..., "--data", exists=True, envvar="LOCALNET_DATA"),
    out: Path = typer.Option(..., "--out", envvar="LOCALNET_OUT"),
):
    """Build the atlas and the estimator from a dataset CSV."""
    try:
        cfg = load_config(config)
        est = fit_estimator(cfg, load_dataset(cfg, data))
        payload = {"atlas": est.atlas.to_dict(), "estimator": est.to_dict(atlas_ref="inline")}
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
    except Exception as e:
        _fail(e)
    console.print(
        f"Estimator with n={est.n}, {len(est.table.counts)} cells and {est.atlas.size} charts written to {out}"
    )


@app.command()
def predict(
    est: Path = typer.Option(..., "--est", exists=True, envvar="LOCALNET_EST"),
    queries: Path = typer.Option(..., "--queries", exists=True, envvar="LOCALNET_QUERIES"),
    mode: str = typer.Option("feedback", "--mode", envvar="LOCALNET_MODE"),
    out: Path = typer.Option(..., "--out", envvar="LOCALNET_OUT"),
):
    """Predict at query points and write the predictions with Lambda-set sizes."""
    try:
        if mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}")
        with open(est, "r", encoding="utf-8") as f:
            payload = json.load(f)
        estimator = DeepNetEstimator.from_dict(payload["estimator"], Atlas.from_dict(payload["atlas"]))
        rows = predict_queries(estimator, read_queries(queries), mode)
        write_predictions(rows, out)
    except Exception as e:
        _fail(e)
    console.print(f"Wrote {len(rows)} {mode} predictions to {out}")


@app.command()
def rates(
    config: Optional[Path] = typer.Option(None, "--config", envvar="LOCALNET_CONFIG"),
    out: Path = typer.Option(..., "--out", envvar="LOCALNET_OUT"),
    fmt: str = typer.Option("json", "--format", envvar="LOCALNET_FORMAT"),
):
    """Learning-curve sweep over m for every configured mode."""
    try:
        results = run_rate_sweeps(load_config(config))
        emit_results(results, out, fmt)
    except Exception as e:
        _fail(e)
    console.print(_rate_table(results.values()))


@app.command("compare-feedback")
def compare_feedback(
    config: Optional[Path] = typer.Option(None, "--config", envvar="LOCALNET_CONFIG"),
    out: Path = typer.Option(..., "--out", envvar="LOCALNET_OUT"),
    baseline: str = typer.Option("literal", "--baseline", envvar="LOCALNET_BASELINE"),
    fmt: str = typer.Option("json", "--format", envvar="LOCALNET_FORMAT"),
):
    """Baseline mode against feedback under boundary atoms."""
    try:
        comparison = run_feedback_comparison(load_config(config), baseline)
        emit_results(comparison, out, fmt)
    except Exception as e:
        _fail(e)
    console.print(_rate_table([comparison.literal, comparison.feedback]))
    for point, ratio, wins in zip(comparison.feedback.points, comparison.ratio, comparison.feedback_wins):
        console.print(f"m={point.m}: mse ratio {ratio:.3f}, feedback better in {wins}/{comparison.trials} trials")


@app.command("compare-dimension")
def compare_dimension(
    config: Optional[Path] = typer.Option(None, "--config", envvar="LOCALNET_CONFIG"),
    out: Path = typer.Option(..., "--out", envvar="LOCALNET_OUT"),
    high_dim: Optional[int] = typer.Option(None, "--high-dim", min=1, envvar="LOCALNET_HIGH_DIM"),
    fmt: str = typer.Option("json", "--format", envvar="LOCALNET_FORMAT"),
):
    """Same intrinsic manifold at two ambient dimensions."""
    try:
        comparison = run_dimension_comparison(load_config(config), high_dim)
        emit_results(comparison, out, fmt)
    except Exception as e:
        _fail(e)
    console.print(_rate_table([comparison.low, comparison.high]))
    console.print(f"slope difference: {comparison.slope_difference:.3f}")


@app.command()
def verify(
    out: Path = typer.Option(..., "--out", envvar="LOCALNET_OUT"),
    seed: int = typer.Option(0, "--seed", envvar="LOCALNET_SEED"),
    quick: bool = typer.Option(False, "--quick", envvar="LOCALNET_QUICK"),
):
    """Run the property and Monte-Carlo checks and write the reports."""
    try:
        reports = run_verification(seed, quick)
        emit_results(reports, out)
    except Exception as e:
        _fail(e)
    table = Table(title="Verification")
    for column in ("check", "estimate", "bound", "trials", "passed"):
        table.add_column(column)
    for r in reports:
        table.add_row(r.name, f"{r.estimate:.4g}", f"{r.bound:.4g}", str(r.trials), "[green]yes" if r.passed else "[red]no")
    console.print(table)
    if not all(r.passed for r in reports):
        raise typer.Exit(code=1)


if __name__ == "__main__":
    app()
