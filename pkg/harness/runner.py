import asyncio
from pathlib import Path
from typing import List, Optional, Sequence

from common.config import get_settings
from harness.config import ScenarioConfig
from harness.orchestrator import Orchestrator, ScenarioOutcome, default_orchestrator
from harness.report import RunReport, emit_report


def run_scenario(cfg: ScenarioConfig, orchestrator: Optional[Orchestrator] = None) -> List[RunReport]:
    """Build, solve or load, verify and report one scenario; failures surface as ScenarioError."""
    return (orchestrator or default_orchestrator()).run(cfg)


def run_scenarios(configs: Sequence[ScenarioConfig], workers: Optional[int] = None) -> List[ScenarioOutcome]:
    return asyncio.run(default_orchestrator(workers).run_batch(configs))


def default_output(cfg: ScenarioConfig) -> Path:
    return Path(get_settings().output_dir) / f"{cfg.scenario_id}.{cfg.format}"


def emit_outcomes(outcomes: Sequence[ScenarioOutcome], path: Optional[str] = None,
                  format: str = "csv") -> List[Path]:
    """One file for the whole batch when `path` is given, else one per scenario at its configured output."""
    written: List[Path] = []
    if path is not None:
        reports = [r for o in outcomes for r in o.reports]
        if reports:
            written.append(emit_report(reports, format, path))
        return written
    for outcome in outcomes:
        if outcome.reports:
            cfg = outcome.config
            written.append(emit_report(outcome.reports, cfg.format, cfg.output or str(default_output(cfg))))
    return written
