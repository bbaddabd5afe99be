import asyncio
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from loguru import logger

from common.audit import audit_event
from common.config import get_settings
from common.errors import DeviationFeasibilityError, LabError, ScenarioError
from harness.config import ScenarioConfig
from harness.report import RunReport
from harness.scenarios import BaseScenario, default_scenarios


@dataclass
class ScenarioOutcome:
    config: ScenarioConfig
    reports: List[RunReport] = field(default_factory=list)
    error: Optional[ScenarioError] = None

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.reports) and all(r.passed for r in self.reports)


class Orchestrator:
    """Routes scenario configs to registered handlers and runs batches concurrently."""

    def __init__(self, workers: Optional[int] = None):
        self._scenarios: Dict[str, BaseScenario] = {}
        self.workers = workers or get_settings().workers

    def register_scenario(self, scenario: BaseScenario) -> None:
        for kind in [scenario.config.name, *scenario.config.aliases]:
            self._scenarios[kind] = scenario
        logger.debug(f"Registered scenario {scenario.config.name} v{scenario.config.version}")

    @property
    def kinds(self) -> List[str]:
        return sorted(self._scenarios)

    def run(self, cfg: ScenarioConfig) -> List[RunReport]:
        scenario = self._scenarios.get(cfg.kind)
        if scenario is None:
            raise ScenarioError(cfg.scenario_id, LabError(f"no handler registered for {cfg.kind}"))
        logger.info(f"Running scenario {cfg.scenario_id} ({cfg.kind}, seed {cfg.seed})")
        try:
            reports = scenario.run(cfg)
        except (LabError, DeviationFeasibilityError) as e:
            raise ScenarioError(cfg.scenario_id, e) from e
        audit_event("scenario.finished", cfg.scenario_id,
                    {"kind": cfg.kind, "reports": len(reports), "passed": sum(r.passed for r in reports)}, cfg.seed)
        return reports

    async def _run_one(self, cfg: ScenarioConfig, gate: asyncio.Semaphore) -> ScenarioOutcome:
        async with gate:
            try:
                reports = await asyncio.to_thread(self.run, cfg)
                return ScenarioOutcome(cfg, reports)
            except ScenarioError as e:
                logger.exception(f"Scenario {cfg.scenario_id} error: {e}")
                return ScenarioOutcome(cfg, error=e)

    async def run_batch(self, configs: Sequence[ScenarioConfig]) -> List[ScenarioOutcome]:
        """Outcomes come back in config order, whatever order the scenarios finish in."""
        gate = asyncio.Semaphore(self.workers)
        return list(await asyncio.gather(*(self._run_one(cfg, gate) for cfg in configs)))


def default_orchestrator(workers: Optional[int] = None) -> Orchestrator:
    orchestrator = Orchestrator(workers)
    for scenario in default_scenarios():
        orchestrator.register_scenario(scenario)
    return orchestrator
