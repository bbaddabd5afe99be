"""Command-line entry point: `python -m harness.cli <command>`."""
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import click
import orjson

from common.config import get_settings
from common.errors import LabError
from common.log import configure_logging
from harness.config import ScenarioConfig, SolverSpec, VerifierSpec, load_configs
from harness.orchestrator import ScenarioOutcome
from harness.report import reports_frame
from harness.runner import emit_outcomes, run_scenarios
from mechanism.properties import check_monotone, check_normalized, check_subadditive
from mechanism.valuations import shipped_families

CONSTRUCTIONS = ("bayesian-lb", "scalefree", "poly-lb")
# accepted on the command line, left out of default batches
ALIASES = ("thm1",)
SUITES = ("budget-suite", "concave-suite", "polyhedral-suite", "subadditive-suite", "bayesian-budget")
# families the subadditivity check must reject
NOT_SUBADDITIVE = frozenset({"geometric_mean", "min_coordinate"})


def _finish(outcomes: Sequence[ScenarioOutcome], out: Optional[str], fmt: str) -> None:
    reports = [r for o in outcomes for r in o.reports]
    if reports:
        click.echo(reports_frame(reports).drop(columns=["wallclock_ms"]).to_string(index=False))
    for o in outcomes:
        if o.error is not None:
            click.echo(f"scenario {o.config.scenario_id} failed: {o.error}", err=True)
    try:
        for path in emit_outcomes(outcomes, out, fmt):
            click.echo(f"wrote {path}")
    except LabError as e:
        raise click.ClickException(str(e)) from e
    sys.exit(0 if outcomes and all(o.passed for o in outcomes) else 1)


@click.group()
@click.option("--log-level", default=None, help="Override KELLYLAB_LOG_LEVEL")
def main(log_level: Optional[str]):
    """Proportional allocation laboratory: equilibria, welfare and price-of-anarchy checks."""
    configure_logging(log_level)


@main.command()
@click.option("--scenario", type=click.Choice(CONSTRUCTIONS + ALIASES), required=True)
@click.option("--m", "m", type=int, default=4, show_default=True, help="Number of resources")
@click.option("--eps", type=float, default=0.01, show_default=True, help="poly-lb parameter")
@click.option("--V", "V", type=float, default=1.0, show_default=True, help="scalefree value scale")
@click.option("--samples", type=int, default=100_000, show_default=True, help="Monte-Carlo samples")
@click.option("--grid-step", type=float, default=None, help="Deviation grid step")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None, help="Report path (default: <output_dir>/<scenario>.<format>)")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
def verify(scenario: str, m: int, eps: float, V: float, samples: int, grid_step: Optional[float], seed: int,
           out: Optional[str], fmt: str):
    """Verify the equilibrium of a construction and report its welfare ratio."""
    cfg = ScenarioConfig(scenario_id=f"{scenario}-m{m}" if scenario != "poly-lb" else f"{scenario}-eps{eps:g}",
                         kind=scenario, m=m, eps=eps, V=V, seed=seed, format=fmt, output=out,
                         verifier=VerifierSpec(samples=samples, grid_step=grid_step))
    _finish(run_scenarios([cfg]), out, fmt)


@main.command()
@click.option("--suite", type=click.Choice(SUITES), required=True)
@click.option("--solver", type=click.Choice(["br", "hedge"]), default=None, help="Default depends on the suite")
@click.option("--rounds", type=int, default=None, help="Dynamics rounds or Hedge horizon")
@click.option("--grid-step", type=float, default=0.01, show_default=True)
@click.option("--size", type=int, default=None, help="Suite size")
@click.option("--index", type=int, default=None, help="Run a single suite instance")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
def solve(suite: str, solver: Optional[str], rounds: Optional[int], grid_step: float, size: Optional[int],
          index: Optional[int], seed: int, out: Optional[str], fmt: str):
    """Compute equilibria of a random suite and check its welfare bound."""
    cfg = ScenarioConfig(scenario_id=f"{suite}-{seed}", kind=suite, suite_size=size, suite_index=index, seed=seed,
                         solver=SolverSpec(kind=solver, rounds=rounds, grid_step=grid_step), format=fmt, output=out)
    _finish(run_scenarios([cfg]), out, fmt)


@main.command("poa-report")
@click.option("--suite", "suites", type=click.Choice(CONSTRUCTIONS + ALIASES + SUITES), multiple=True,
              help="Scenario to include (repeatable); all of them by default")
@click.option("--size", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None, help="Single report file for the whole batch")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
def poa_report(suites: Sequence[str], size: Optional[int], seed: int, out: Optional[str], fmt: str):
    """Run several scenarios concurrently and emit one price-of-anarchy table."""
    kinds: List[str] = list(suites) or list(CONSTRUCTIONS + SUITES)
    configs = [ScenarioConfig(scenario_id=f"{kind}-{seed}", kind=kind, suite_size=size, seed=seed, format=fmt)
               for kind in kinds]
    target = out or str(Path(get_settings().output_dir) / f"poa-report.{fmt}")
    _finish(run_scenarios(configs), target, fmt)


@main.command("check-props")
@click.option("--samples", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dim", type=int, default=2, show_default=True)
@click.option("--json", "as_json", is_flag=True, default=False, help="Print reports as JSON")
def check_props(samples: int, seed: int, dim: int, as_json: bool):
    """Run the subadditivity, monotonicity and normalization checks on every shipped family."""
    tol = get_settings().property_tol
    ok = True
    rows = []
    for name, v in shipped_families(dim).items():
        checks = [
            check_subadditive(v, samples, seed, tol, dim=dim),
            check_monotone(v, samples, seed, tol, dim=dim),
            check_normalized(v, dim, tol),
        ]
        for report in checks:
            expected = not (report.property == "subadditive" and name in NOT_SUBADDITIVE)
            ok &= report.holds == expected
            rows.append(report.to_dict())
            if not as_json:
                click.echo(f"{name:<18} {report.property:<12} {report.verdict:<17} gap={report.gap:.3g}")
    if as_json:
        click.echo(orjson.dumps(rows, option=orjson.OPT_INDENT_2).decode())
    sys.exit(0 if ok else 1)


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", default=None, help="Single report file for the whole batch")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
def run(config: Path, out: Optional[str], fmt: str):
    """Run the scenarios of a JSON config file (one object or a list)."""
    try:
        configs = load_configs(config.read_bytes())
    except (ValueError, orjson.JSONDecodeError) as e:
        raise click.ClickException(f"invalid config {config}: {e}") from e
    _finish(run_scenarios(configs), out, fmt)


if __name__ == "__main__":
    main()
