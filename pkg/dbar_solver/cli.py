"""
dbarsolver - command line for the bounded dbar-solver.

Exit codes: 0 all good, 1 a verification or certificate failed, 2 bad input
or an inadmissible run.
"""
import json
import logging
import math
import os
from contextlib import contextmanager
from typing import List, Optional

import numpy as np
import typer
from rich import print as rprint
from rich.console import Console
from rich.table import Table

from . import __version__
from .blaschke_engine import BlaschkeProduct, level_samples, radius_r
from .cauchy_transform import weak_residual
from .config import DEFAULT_CONFIG, RunConfig, load_config, save_config
from .db import run_ledger as ledger
from .errors import CertificateError, DbarError, InputFormatError
from .io_formats import load_sequence, save_sequence, write_level_csv, write_manifest, write_solution
from .lk_pipeline import exterior_decomposition
from .sequence_analysis import greedy_chain, interpolation_bounds, split_depth, split_sqrt_delta
from .settings import configure_logging
from .verification import RunContext, bump_suite, run_verification

logger = logging.getLogger(__name__)

# Main App and Sub-Apps
app = typer.Typer(help="Bounded solution operators for the dbar-equation on the unit disk", add_completion=False)
blaschke_app = typer.Typer(help="Finite Blaschke products: values and level sets")
history_app = typer.Typer(help="Run ledger maintenance")

app.add_typer(blaschke_app, name="blaschke")
app.add_typer(history_app, name="history")

console = Console()


@app.callback()
def main():
    configure_logging()


@contextmanager
def reported_errors():
    """Turn solver errors into a red message and the matching exit code."""
    try:
        yield
    except CertificateError as e:
        rprint(f"[bold red]✗ Certificate failed:[/bold red] {e}")
        raise typer.Exit(1)
    except DbarError as e:
        rprint(f"[bold red]Error:[/bold red] {e}")
        raise typer.Exit(2)


def _fmt(x) -> str:
    if isinstance(x, complex):
        return f"{x.real:.10g}{x.imag:+.10g}j"
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _configured(config: Optional[str], grid_nr, grid_ntheta, contour_q, nmax, tol, seed, dim, parallel,
                out) -> RunConfig:
    cfg = load_config(config)
    return cfg.override(grid_nr=grid_nr, grid_ntheta=grid_ntheta, contour_q=contour_q, nmax=nmax, tol=tol,
                        seed=seed, dim=dim, parallel=parallel, out=out)


# ==============================================================================
# CONFIG & SEQUENCES
# ==============================================================================

@app.command()
def init(path: str = typer.Argument("dbar_config.json", help="Where to write the config"),
         force: bool = typer.Option(False, "--force", "-f", help="Overwrite an existing file")):
    """Write a RunConfig with every default spelled out."""
    if os.path.exists(path) and not force:
        rprint(f"[red]{path} exists; use --force to overwrite.[/red]")
        raise typer.Exit(2)
    save_config(DEFAULT_CONFIG, path)
    rprint(f"[green]✓ Default config written to {path}[/green]")


@app.command("analyze-sequence")
def analyze_sequence(path: str = typer.Argument(..., help="Sequence file (JSON [re, im] pairs)"),
                     eps: float = typer.Option(0.1, "--eps", help="Chain parameter")):
    """Characteristic, interpolation bounds, chain and split data of a sequence."""
    with reported_errors():
        seq = load_sequence(path)
        delta = seq.delta
        bounds = interpolation_bounds(delta)
        chain = greedy_chain(seq.points, eps)

        table = Table(title=f"Sequence {os.path.basename(path)}", box=None, show_header=False)
        table.add_column("Property", style="cyan")
        table.add_column("Value", style="yellow")
        table.add_row("points", str(len(seq)))
        table.add_row("delta", _fmt(delta))
        table.add_row("M lower (1/delta)", _fmt(bounds.lower))
        table.add_row("M Jones", _fmt(bounds.jones))
        table.add_row("M Earl", _fmt(bounds.earl))
        table.add_row("M bound", _fmt(bounds.upper))
        table.add_section()
        table.add_row(f"chain at eps={eps:g}", f"{len(chain)} points")
        if len(seq) >= 2:
            split = split_sqrt_delta(seq)
            table.add_row("split delta", f"{_fmt(split.certificate)} >= sqrt(delta) = {_fmt(math.sqrt(delta))}")
        table.add_row("split depth", str(split_depth(delta, eps)))
        console.print(table)


@app.command()
def chain(path: str = typer.Argument(..., help="Candidate points (sequence file format)"),
          eps: float = typer.Option(..., "--eps", help="Separation of the chain"),
          out: str = typer.Option("chain.json", "--out", help="Where to write the chain")):
    """Greedy eps-chain of a candidate file."""
    with reported_errors():
        candidates = load_sequence(path)
        result = greedy_chain(candidates.points, eps)
        save_sequence(result, out)
    rprint(f"[green]✓ {len(result)} of {len(candidates)} points kept, written to {out}[/green]")


# ==============================================================================
# BLASCHKE PRODUCTS
# ==============================================================================

def _parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise InputFormatError(f"cannot read {text!r} as a complex number") from None


@blaschke_app.command("eval")
def blaschke_eval_cmd(path: str = typer.Argument(..., help="Zeros (sequence file)"),
                      z: List[str] = typer.Argument(..., help="Points such as 0.1+0.2j")):
    """Print B(z) and B'(z)."""
    with reported_errors():
        b = BlaschkeProduct(load_sequence(path))
        points = np.array([_parse_complex(s) for s in z])
        values = b(points)
        slopes = b.derivative(points)

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("z")
    table.add_column("B(z)")
    table.add_column("|B(z)|")
    table.add_column("B'(z)")
    for p, v, d in zip(points, values, slopes):
        table.add_row(_fmt(complex(p)), _fmt(complex(v)), _fmt(float(abs(v))), _fmt(complex(d)))
    console.print(table)


@blaschke_app.command("levels")
def blaschke_levels(path: str = typer.Argument(..., help="Zeros (sequence file)"),
                    lam: float = typer.Option(..., "--lam", help="Component radius lambda"),
                    out: str = typer.Option("levels.csv", "--out", help="CSV of (re, im, |B|)"),
                    grid_nr: int = typer.Option(64, "--grid-nr"),
                    grid_ntheta: int = typer.Option(128, "--grid-ntheta")):
    """Write a level-set table and print the level radius r(delta, lambda)."""
    with reported_errors():
        seq = load_sequence(path)
        b = BlaschkeProduct(seq)
        rows = level_samples(b, grid_nr, grid_ntheta)
        r = radius_r(seq.delta, lam)
        write_level_csv(rows[:, 0] + 1j * rows[:, 1], rows[:, 2], out)
    rprint(f"Components of |B| < r: r = [bold]{_fmt(r)}[/bold], each inside D(z_n, {lam:g})")
    rprint(f"[green]✓ {rows.shape[0]} samples written to {out}[/green]")


# ==============================================================================
# SOLVE / VERIFY / DECOMPOSE
# ==============================================================================

@app.command()
def solve(config: str = typer.Argument(..., help="RunConfig JSON"),
          grid_nr: Optional[int] = typer.Option(None, "--grid-nr"),
          grid_ntheta: Optional[int] = typer.Option(None, "--grid-ntheta"),
          contour_q: Optional[int] = typer.Option(None, "--contour-q"),
          nmax: Optional[int] = typer.Option(None, "--nmax"),
          tol: Optional[float] = typer.Option(None, "--tol"),
          seed: Optional[int] = typer.Option(None, "--seed"),
          dim: Optional[int] = typer.Option(None, "--dim"),
          parallel: Optional[int] = typer.Option(None, "--parallel"),
          out: Optional[str] = typer.Option(None, "--out")):
    """Assemble L_K, sample L_K f and write manifest, solution and weak residuals."""
    with reported_errors():
        cfg = _configured(config, grid_nr, grid_ntheta, contour_q, nmax, tol, seed, dim, parallel, out)
        ctx = RunContext(cfg)
        a, f = ctx.assembled, ctx.density
        z = ctx.samples
        values = a.evaluate(f, z)

        manifest = {"config": cfg.to_dict(), "config_digest": cfg.digest, "operator": a.manifest(f)}
        manifest_text = write_manifest(manifest, os.path.join(cfg.out, "manifest.json"))
        write_solution(z, values, os.path.join(cfg.out, "solution.csv"), os.path.join(cfg.out, "solution.json"))

        def rhs(w):
            return f(w) / (1.0 - np.abs(w) ** 2)[..., None]

        def nothing(w):
            return np.zeros(w.shape + (f.dim,), dtype=complex)

        residuals = []
        for bump in bump_suite(ctx):
            residuals.append({"center": bump.center, "radius": bump.radius,
                              "residual": weak_residual(lambda w: a.evaluate(f, w), rhs, bump),
                              "source": weak_residual(nothing, rhs, bump)})
        write_manifest({"bumps": residuals}, os.path.join(cfg.out, "residual.json"))

    peak = float(np.max(np.linalg.norm(values, axis=-1))) if values.size else 0.0
    ledger.add_run_entry("solve", cfg.digest, ledger.digest(manifest_text),
                         summary={"parts": len(a), "sup": peak, "certificate": a.certificate})
    table = Table(title="L_K solve", box=None, show_header=False)
    table.add_column("Property", style="cyan")
    table.add_column("Value", style="yellow")
    table.add_row("parts", str(len(a)))
    table.add_row("split depth", str(a.depth))
    table.add_row("sup |L_K f| sampled", _fmt(peak))
    table.add_row("norm certificate", _fmt(a.certificate))
    table.add_row("output", cfg.out)
    console.print(table)
    rprint("[green]✓ Solve complete.[/green]")


@app.command()
def verify(config: Optional[str] = typer.Argument(None, help="RunConfig JSON; defaults when omitted"),
           grid_nr: Optional[int] = typer.Option(None, "--grid-nr"),
           grid_ntheta: Optional[int] = typer.Option(None, "--grid-ntheta"),
           contour_q: Optional[int] = typer.Option(None, "--contour-q"),
           nmax: Optional[int] = typer.Option(None, "--nmax"),
           tol: Optional[float] = typer.Option(None, "--tol"),
           seed: Optional[int] = typer.Option(None, "--seed"),
           dim: Optional[int] = typer.Option(None, "--dim"),
           parallel: Optional[int] = typer.Option(None, "--parallel"),
           out: Optional[str] = typer.Option(None, "--out"),
           report: Optional[str] = typer.Option(None, "--report", help="Report path (default OUT/verification.json)"),
           only: Optional[List[str]] = typer.Option(None, "--only", help="Run just these check ids")):
    """Run the verification suite; exit 1 on any failed check."""
    with reported_errors():
        cfg = _configured(config, grid_nr, grid_ntheta, contour_q, nmax, tol, seed, dim, parallel, out)
    result = run_verification(cfg, only or None)
    text = write_manifest(result.to_dict(), report or os.path.join(cfg.out, "verification.json"))

    table = Table(title="Verification", show_header=True, header_style="bold magenta")
    table.add_column("Check", style="cyan")
    table.add_column("Measured")
    table.add_column("Bound")
    table.add_column("")
    for c in result.checks:
        mark = "[green]✓[/green]" if c.passed else "[red]✗[/red]"
        table.add_row(c.check_id, _fmt(c.measured), _fmt(c.bound), mark)
    console.print(table)

    ledger.add_run_entry("verify", cfg.digest, ledger.digest(text), passed=result.passed,
                         summary={"checks": len(result.checks), "failures": [c.check_id for c in result.failures]})
    if not result.passed:
        for c in result.failures:
            rprint(f"[red]✗ {c.check_id}[/red] [{c.reference}] {c.detail}")
        raise typer.Exit(1)
    rprint(f"[green]✓ All {len(result.checks)} checks passed.[/green]")


@app.command()
def decompose(config: str = typer.Argument(..., help="RunConfig JSON"),
              nu: Optional[float] = typer.Option(None, "--nu", help="Neighbourhood size in (0, 2 - sqrt 3]"),
              seed: Optional[int] = typer.Option(None, "--seed"),
              out: Optional[str] = typer.Option(None, "--out")):
    """Build the exterior decomposition of L_K and check its containment chain."""
    with reported_errors():
        cfg = load_config(config).override(nu=nu, seed=seed, out=out)
        ctx = RunContext(cfg)
        dec = exterior_decomposition(ctx.assembled, cfg.nu)
        report = dec.check_containment(cfg.containment_samples, ctx.rng("containment"), strict=True)
        text = write_manifest({"config_digest": cfg.digest, "decomposition": dec.manifest(),
                               "containment": {"checked": report.checked, "worst": report.worst}},
                              os.path.join(cfg.out, "decomposition.json"))

    ledger.add_run_entry("decompose", cfg.digest, ledger.digest(text), passed=True,
                         summary={"k_star": dec.k_star, "nu": cfg.nu})
    table = Table(title="Exterior decomposition", box=None, show_header=False)
    table.add_column("Property", style="cyan")
    table.add_column("Value", style="yellow")
    table.add_row("nu", _fmt(dec.nu))
    table.add_row("eps_nu", _fmt(dec.eps_nu))
    table.add_row("k*", f"{dec.k_star} (bound {_fmt(dec.k_bound)})")
    table.add_row("H bound (3/5) nu", _fmt(dec.h_bound))
    table.add_row("largest part bound", _fmt(max(swo.certificates["l"] for swo in dec.parts)))
    table.add_row("containment samples", str(sum(report.checked.values())))
    console.print(table)
    rprint("[green]✓ Containment chain holds on all samples.[/green]")


app.command("theorem13", help="Alias of decompose.")(decompose)


# ==============================================================================
# RUN LEDGER
# ==============================================================================

@history_app.command("list")
def history_list(command: Optional[str] = typer.Option(None, "--command", help="solve, verify or decompose"),
                 limit: int = typer.Option(20, "--limit")):
    """List recent runs."""
    runs = ledger.list_runs(command, limit)
    if not runs:
        rprint("[yellow]No runs recorded.[/yellow]")
        return
    table = Table(title="Runs")
    table.add_column("ID", style="dim")
    table.add_column("Command")
    table.add_column("Config")
    table.add_column("Report")
    table.add_column("Passed")
    table.add_column("Date")
    for r in runs:
        passed = "" if r["passed"] is None else ("[green]yes[/green]" if r["passed"] else "[red]no[/red]")
        table.add_row(str(r["id"]), r["command"], r["config_digest"][:12], r["report_digest"][:12], passed,
                      str(r["created_date"]))
    console.print(table)


@history_app.command("count-duplicates")
def history_count():
    """Count reruns of an already recorded (command, config)."""
    count = ledger.get_duplicate_count()
    rprint(f"Found {count} duplicates.")


@history_app.command("clean")
def history_clean():
    """Remove reruns, keeping the first run of each (command, config)."""
    count = ledger.remove_duplicates()
    rprint(f"[green]Cleaned {count} duplicates from the ledger.[/green]")


@app.command()
def version():
    """Print the package version."""
    rprint(json.dumps({"moduler-dbarsolver": __version__}))


if __name__ == "__main__":
    app()
