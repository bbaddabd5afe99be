"""Scenario handlers: build an instance family, find or load its equilibrium, and report the welfare ratio."""
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from common.errors import EnumerationLimitError, ModeError, SearchConfigError
from constructions import bayesian_lower_bound, polyhedral, scale_free
from constructions.suites import build_bayesian_budget_suite, build_budget_suite, build_concave_suite, \
    build_polyhedral_suite, build_subadditive_suite
from equilibria.deviations import budget_safe_bound, polyhedral_bound, share_scaled_bound
from equilibria.dynamics import bayesian_br_dynamics, br_dynamics
from equilibria.learning import hedge_learn
from equilibria.outcomes import bayesian_effective_benchmark, bayesian_effective_welfare, \
    bayesian_optimal_welfare, bayesian_welfare, bayesian_welfare_mc, mixed_welfare
from equilibria.profiles import CorrelatedProfile, SearchConfig, TypeSpace
from equilibria.search import default_upper
from equilibria.verification import verify_bayesian_ne, verify_cce, verify_mixed_ne, verify_pure_ne
from harness.config import ScenarioConfig
from harness.report import Bound, RunReport
from mechanism.allocation import allocation_of
from mechanism.instance import Instance
from mechanism.welfare import EFFECTIVE, SOCIAL, expected_effective_welfare, expected_social_welfare, \
    optimal_welfare, social_welfare

JsonDict = Dict[str, Any]

PHI = (1 + math.sqrt(5)) / 2
BUDGET_BOUND = PHI + 1 + 0.05
BUDGET_SOCIAL_BOUND = 2.05
SUBADDITIVE_BOUND = 2.05
CONCAVE_BOUND = 4 / 3 + 1e-3
POLYHEDRAL_BOUND = 2 + 1e-3
DIAGNOSTIC_SLACK = 0.02


@dataclass
class HandlerConfig:
    name: str
    version: str = "1.0.0"
    description: Optional[str] = None
    defaults: JsonDict = field(default_factory=dict)
    # extra kinds routed to the same handler
    aliases: List[str] = field(default_factory=list)


class BaseScenario:
    def __init__(self, config: HandlerConfig):
        self.config = config

    def run(self, cfg: ScenarioConfig) -> List[RunReport]:
        raise NotImplementedError

    def default(self, key: str, value: Any) -> Any:
        return self.config.defaults.get(key) if value is None else value

    def check_mechanism(self, cfg: ScenarioConfig, instance: Instance) -> str:
        mechanism = "polyhedral" if instance.is_polyhedral else "proportional"
        if cfg.mechanism is not None and cfg.mechanism != mechanism:
            raise ModeError(f"{cfg.kind} builds {mechanism} instances, config asks for {cfg.mechanism}")
        if cfg.benchmark == EFFECTIVE:
            # budgeted scenarios report both benchmarks anyway
            instance.require_budgets()
        return mechanism


def _elapsed_ms(started: float) -> float:
    return (time.perf_counter() - started) * 1000.0


def _with_tolerance(configs: Sequence[SearchConfig], tolerance: float) -> List[SearchConfig]:
    return [replace(c, tolerance=tolerance) for c in configs]


class BayesianLowerBoundScenario(BaseScenario):
    def __init__(self):
        super().__init__(HandlerConfig(
            name="bayesian-lb",
            aliases=["thm1"],
            description="sqrt(m)/2 lower bound for Bayesian equilibria",
            defaults={"verifier": "bayesian", "grid_step": 1e-4, "refinement_rounds": 3, "tolerance": 1e-6},
        ))

    def run(self, cfg: ScenarioConfig) -> List[RunReport]:
        started = time.perf_counter()
        instance, types, strategies, c = bayesian_lower_bound.build_bayesian_lower_bound(cfg.m)
        mechanism = self.check_mechanism(cfg, instance)
        v = cfg.verifier
        eps, tolerance = 0.0, None
        if self.default("verifier", v.kind) != "none":
            tolerance = self.default("tolerance", v.tolerance)
            configs = bayesian_lower_bound.deviation_configs(c, self.default("grid_step", v.grid_step),
                                                             self.default("refinement_rounds", v.refinement_rounds))
            eps = verify_bayesian_ne(instance, types, strategies, _with_tolerance(configs, tolerance)).eps
        sw_eq = bayesian_welfare(instance, types, strategies)
        mc, se = bayesian_welfare_mc(instance, types, strategies, v.samples, cfg.seed)
        if abs(mc - sw_eq) > 3 * se:
            logger.warning(f"{instance.name}: sampled welfare {mc:.6g} is more than 3 SE from {sw_eq:.6g}")
        try:
            sw_opt = bayesian_optimal_welfare(instance, types, cfg.resolution or 0)
        except EnumerationLimitError as e:
            logger.info(f"{instance.name}: using the closed-form optimum ({e})")
            sw_opt = c.optimal_welfare
        return [RunReport.build(
            instance_id=instance.name, mechanism=mechanism, eq_kind="bayesian", eps=eps, sw_eq=sw_eq, sw_opt=sw_opt,
            bound=Bound("sw_opt", "sw_eq", ">=", c.bound, tolerance), seed=cfg.seed,
            wallclock_ms=_elapsed_ms(started),
        )]


class ScaleFreeScenario(BaseScenario):
    def __init__(self):
        super().__init__(HandlerConfig(
            name="scalefree",
            description="mixed equilibrium of threshold agents approaching ratio 2",
            defaults={"verifier": "mixed", "tolerance": 0.01, "slack": 0.02},
        ))

    def run(self, cfg: ScenarioConfig) -> List[RunReport]:
        started = time.perf_counter()
        instance, profile, c = scale_free.build_scale_free(cfg.m, cfg.V)
        mechanism = self.check_mechanism(cfg, instance)
        v = cfg.verifier
        eps, eps_ci, tolerance = 0.0, 0.0, None
        if self.default("verifier", v.kind) != "none":
            tolerance = self.default("tolerance", v.tolerance)
            points = 10 if v.grid_step is None else max(1, int(round(c.top / v.grid_step)))
            configs = _with_tolerance(scale_free.deviation_configs(c, points), tolerance)
            report = verify_mixed_ne(instance, profile, v.samples, configs, seed=cfg.seed)
            eps, eps_ci = report.eps, report.ci_halfwidth
        sw_eq, se = mixed_welfare(instance, profile, v.samples, seed=cfg.seed + 1)
        if sw_eq > c.welfare_cap + 1.96 * se:
            logger.warning(f"{instance.name}: welfare {sw_eq:.6g} above the cap {c.welfare_cap:.6g}")
        return [RunReport.build(
            instance_id=instance.name, mechanism=mechanism, eq_kind="mixed", eps=eps, eps_ci=eps_ci, sw_eq=sw_eq,
            sw_opt=c.optimal_welfare, bound=Bound("sw_opt", "sw_eq", ">=", c.bound - self.config.defaults["slack"],
                                                  tolerance),
            seed=cfg.seed, wallclock_ms=_elapsed_ms(started),
        )]


class PolyhedralLowerBoundScenario(BaseScenario):
    def __init__(self):
        super().__init__(HandlerConfig(
            name="poly-lb",
            description="pure equilibrium with ratio 2/(1+eps) under one shared constraint",
            defaults={"verifier": "pure", "grid_step": 1e-5, "refinement_rounds": 2, "tolerance": 1e-6},
        ))

    def run(self, cfg: ScenarioConfig) -> List[RunReport]:
        started = time.perf_counter()
        instance, bids, c = polyhedral.build_polyhedral_lower_bound(cfg.eps)
        mechanism = self.check_mechanism(cfg, instance)
        v = cfg.verifier
        eps, tolerance = 0.0, None
        if self.default("verifier", v.kind) != "none":
            tolerance = self.default("tolerance", v.tolerance)
            configs = polyhedral.deviation_configs(c, self.default("grid_step", v.grid_step),
                                                   self.default("refinement_rounds", v.refinement_rounds))
            eps = verify_pure_ne(instance, bids, _with_tolerance(configs, tolerance)).eps
        sw_eq = social_welfare(instance, allocation_of(instance, bids))
        sw_opt = optimal_welfare(instance, cfg.resolution).value
        return [RunReport.build(
            instance_id=instance.name, mechanism=mechanism, eq_kind="pure", eps=eps, sw_eq=sw_eq, sw_opt=sw_opt,
            bound=Bound("sw_opt", "sw_eq", "<=", 2.0, tolerance), seed=cfg.seed, wallclock_ms=_elapsed_ms(started),
        )]


@dataclass
class _Play:
    profile: CorrelatedProfile
    eq_kind: str
    eps: float
    tolerance: float
    converged: bool = True


def _initial_bids(instance: Instance) -> np.ndarray:
    rows = []
    for i, v in enumerate(instance.valuations):
        top = default_upper(v, instance.alloc_dim, instance.budget(i))
        rows.append(np.full(instance.m, top / (4.0 * instance.m)))
    return np.array(rows)


def _verifier_config(cfg: ScenarioConfig, tolerance: float) -> SearchConfig:
    v = cfg.verifier
    return SearchConfig(step=v.grid_step or cfg.solver.grid_step,
                        refinement_rounds=2 if v.refinement_rounds is None else v.refinement_rounds,
                        tolerance=tolerance, seed=cfg.seed)


class SuiteScenario(BaseScenario):
    """Runs one seeded suite instance after another; a single one when suite_index is set."""

    def instances(self, cfg: ScenarioConfig) -> List[Any]:
        raise NotImplementedError

    def evaluate(self, cfg: ScenarioConfig, instance: Any, started: float) -> List[RunReport]:
        raise NotImplementedError

    def run(self, cfg: ScenarioConfig) -> List[RunReport]:
        items = self.instances(cfg)
        if cfg.suite_index is not None:
            if cfg.suite_index >= len(items):
                raise SearchConfigError(f"suite has {len(items)} instances, index {cfg.suite_index} requested")
            items = [items[cfg.suite_index]]
        reports: List[RunReport] = []
        for item in items:
            reports.extend(self.evaluate(cfg, item, time.perf_counter()))
        logger.info(f"{self.config.name}: {len(reports)} reports, {sum(r.passed for r in reports)} passing")
        return reports

    def size(self, cfg: ScenarioConfig) -> int:
        return cfg.suite_size or self.config.defaults["size"]

    def solve(self, cfg: ScenarioConfig, instance: Instance) -> _Play:
        s = cfg.solver
        kind = self.default("solver", s.kind)
        if kind == "br":
            tolerance = s.tolerance or 1e-8
            search_cfg = SearchConfig(step=s.grid_step, polish=True, seed=cfg.seed)
            result = br_dynamics(instance, _initial_bids(instance), max_rounds=s.rounds or 200, tol=tolerance,
                                 cfg=search_cfg)
            play = _Play(CorrelatedProfile.point_mass(result.profile), "pure", result.residual, tolerance,
                         result.converged)
        elif kind == "hedge":
            result = hedge_learn(instance, rounds=s.rounds or 10_000, step=s.grid_step, schedule=s.schedule,
                                 seed=cfg.seed)
            # regret/T is only guaranteed down to the Hedge bound for the rounds actually run
            tolerance = max(s.tolerance or 0.01, result.regret_tolerance)
            play = _Play(result.profile, "cce", float(result.average_regret.max()), tolerance)
        else:
            raise SearchConfigError(f"solver {kind!r} cannot produce a profile for {instance.name}")
        vkind = cfg.verifier.kind
        if vkind == "pure" and play.profile.support.shape[0] == 1:
            tolerance = cfg.verifier.tolerance or 1e-6
            report = verify_pure_ne(instance, play.profile.support[0], _verifier_config(cfg, tolerance))
            play.eps, play.tolerance, play.eq_kind = report.eps, tolerance, "pure"
        elif vkind == "cce":
            tolerance = max(cfg.verifier.tolerance or 0.01, play.tolerance)
            report = verify_cce(instance, play.profile, _verifier_config(cfg, tolerance))
            play.eps, play.tolerance, play.eq_kind = report.eps, tolerance, "cce"
        elif vkind not in (None, "none"):
            raise SearchConfigError(f"verifier {vkind!r} does not apply to {self.config.name}")
        return play


class ConcaveSuiteScenario(SuiteScenario):
    def __init__(self):
        super().__init__(HandlerConfig(
            name="concave-suite",
            description="pure equilibria of single-resource concave agents against the 4/3 bound",
            defaults={"solver": "br", "size": 50},
        ))

    def instances(self, cfg: ScenarioConfig) -> List[Instance]:
        return build_concave_suite(cfg.seed, self.size(cfg))

    def evaluate(self, cfg: ScenarioConfig, instance: Instance, started: float) -> List[RunReport]:
        mechanism = self.check_mechanism(cfg, instance)
        play = self.solve(cfg, instance)
        sw_eq = expected_social_welfare(instance, play.profile)
        sw_opt = optimal_welfare(instance, cfg.resolution).value
        return [RunReport.build(
            instance_id=instance.name, mechanism=mechanism, eq_kind=play.eq_kind, eps=play.eps, sw_eq=sw_eq,
            sw_opt=sw_opt, bound=Bound("sw_opt", "sw_eq", "<=", CONCAVE_BOUND, play.tolerance), seed=cfg.seed,
            wallclock_ms=_elapsed_ms(started),
        )]


class PolyhedralSuiteScenario(SuiteScenario):
    def __init__(self):
        super().__init__(HandlerConfig(
            name="polyhedral-suite",
            description="converged best-response profiles of random polyhedral environments",
            defaults={"solver": "br", "size": 50},
        ))

    def instances(self, cfg: ScenarioConfig) -> List[Instance]:
        return build_polyhedral_suite(cfg.seed, self.size(cfg))

    def evaluate(self, cfg: ScenarioConfig, instance: Instance, started: float) -> List[RunReport]:
        mechanism = self.check_mechanism(cfg, instance)
        play = self.solve(cfg, instance)
        if not play.converged:
            # the row stays in the report; its eps is the last bid change, above the tolerance
            logger.warning(f"{instance.name}: no convergence (residual {play.eps:.3g}), row fails")
        optimum = optimal_welfare(instance, cfg.resolution)
        bids = play.profile.support[0]
        if play.converged and play.profile.support.shape[0] == 1 and np.all(bids.sum(axis=0) > 0):
            lhs, rhs = polyhedral_bound(instance, bids, optimum.allocation)
            if np.any(lhs < rhs - 1e-9):
                logger.warning(f"{instance.name}: deviation diagnostic violated, lhs={lhs} rhs={rhs}")
        sw_eq = expected_social_welfare(instance, play.profile)
        return [RunReport.build(
            instance_id=instance.name, mechanism=mechanism, eq_kind=play.eq_kind, eps=play.eps, sw_eq=sw_eq,
            sw_opt=optimum.value, bound=Bound("sw_opt", "sw_eq", "<=", POLYHEDRAL_BOUND, play.tolerance),
            seed=cfg.seed, wallclock_ms=_elapsed_ms(started),
        )]


class SubadditiveSuiteScenario(SuiteScenario):
    def __init__(self):
        super().__init__(HandlerConfig(
            name="subadditive-suite",
            description="no-regret play of subadditive agents against the coarse-correlated bound 2",
            defaults={"solver": "hedge", "size": 20},
        ))

    def instances(self, cfg: ScenarioConfig) -> List[Instance]:
        return build_subadditive_suite(cfg.seed, self.size(cfg))

    def evaluate(self, cfg: ScenarioConfig, instance: Instance, started: float) -> List[RunReport]:
        mechanism = self.check_mechanism(cfg, instance)
        play = self.solve(cfg, instance)
        optimum = optimal_welfare(instance, cfg.resolution)
        lhs, rhs = share_scaled_bound(instance, play.profile, optimum.allocation, seed=cfg.seed)
        if lhs < rhs - DIAGNOSTIC_SLACK:
            logger.warning(f"{instance.name}: share-scaled deviation diagnostic violated ({lhs:.4g} < {rhs:.4g})")
        sw_eq = expected_social_welfare(instance, play.profile)
        return [RunReport.build(
            instance_id=instance.name, mechanism=mechanism, eq_kind=play.eq_kind, eps=play.eps, sw_eq=sw_eq,
            sw_opt=optimum.value, bound=Bound("sw_opt", "sw_eq", "<=", SUBADDITIVE_BOUND, play.tolerance),
            seed=cfg.seed, wallclock_ms=_elapsed_ms(started),
        )]


def _budget_reports(instance_id: str, mechanism: str, eq_kind: str, eps: float, tolerance: Optional[float],
                    sw_eq: float, ew_eq: float, sw_opt: float, ew_opt: float, seed: int,
                    started: float) -> List[RunReport]:
    """Effective welfare against phi+1, and social welfare against the same benchmark with factor 2."""
    shared = dict(instance_id=instance_id, mechanism=mechanism, eq_kind=eq_kind, eps=eps, sw_eq=sw_eq, ew_eq=ew_eq,
                  sw_opt=sw_opt, ew_opt=ew_opt, seed=seed)
    elapsed = _elapsed_ms(started)
    return [
        RunReport.build(bound=Bound("ew_opt", "ew_eq", "<=", BUDGET_BOUND, tolerance), wallclock_ms=elapsed, **shared),
        RunReport.build(bound=Bound("ew_opt", "sw_eq", "<=", BUDGET_SOCIAL_BOUND, tolerance), wallclock_ms=elapsed,
                        **shared),
    ]


class BudgetSuiteScenario(SuiteScenario):
    def __init__(self):
        super().__init__(HandlerConfig(
            name="budget-suite",
            description="budgeted agents: effective welfare against phi+1 and social welfare against 2",
            defaults={"solver": "hedge", "size": 50},
        ))

    def instances(self, cfg: ScenarioConfig) -> List[Instance]:
        return build_budget_suite(cfg.seed, self.size(cfg))

    def evaluate(self, cfg: ScenarioConfig, instance: Instance, started: float) -> List[RunReport]:
        mechanism = self.check_mechanism(cfg, instance)
        play = self.solve(cfg, instance)
        effective = optimal_welfare(instance, cfg.resolution, EFFECTIVE)
        social = optimal_welfare(instance, cfg.resolution, SOCIAL)
        lhs, rhs = budget_safe_bound(instance, play.profile, effective.allocation, seed=cfg.seed)
        if np.any(lhs < rhs - DIAGNOSTIC_SLACK):
            logger.warning(f"{instance.name}: budget-safe deviation diagnostic violated, lhs={lhs} rhs={rhs}")
        return _budget_reports(instance.name, mechanism, play.eq_kind, play.eps, play.tolerance,
                               expected_social_welfare(instance, play.profile),
                               expected_effective_welfare(instance, play.profile), social.value, effective.value,
                               cfg.seed, started)


class BayesianBudgetScenario(SuiteScenario):
    def __init__(self):
        super().__init__(HandlerConfig(
            name="bayesian-budget",
            description="Bayesian single-resource concave agents with private budgets",
            defaults={"size": 10, "tolerance": 1e-4},
        ))

    def instances(self, cfg: ScenarioConfig) -> List[Tuple[Instance, TypeSpace]]:
        return build_bayesian_budget_suite(cfg.seed, self.size(cfg))

    def evaluate(self, cfg: ScenarioConfig, item: Tuple[Instance, TypeSpace], started: float) -> List[RunReport]:
        instance, types = item
        mechanism = self.check_mechanism(cfg, instance)
        s = cfg.solver
        if s.kind not in (None, "br"):
            raise SearchConfigError("Bayesian scenarios are solved by per-type best-response dynamics")
        search_cfg = SearchConfig(step=s.grid_step, polish=True, seed=cfg.seed)
        dynamics = bayesian_br_dynamics(instance, types, max_rounds=s.rounds or 200, tol=s.tolerance or 1e-8,
                                        cfg=search_cfg)
        tolerance = self.default("tolerance", cfg.verifier.tolerance)
        eps = verify_bayesian_ne(instance, types, dynamics.strategies, _verifier_config(cfg, tolerance)).eps
        return _budget_reports(instance.name, mechanism, "bayesian", eps, tolerance,
                               bayesian_welfare(instance, types, dynamics.strategies),
                               bayesian_effective_welfare(instance, types, dynamics.strategies),
                               bayesian_optimal_welfare(instance, types, cfg.resolution or 0),
                               bayesian_effective_benchmark(instance, types, cfg.resolution or 0),
                               cfg.seed, started)


def default_scenarios() -> List[BaseScenario]:
    return [
        BayesianLowerBoundScenario(), ScaleFreeScenario(), PolyhedralLowerBoundScenario(), ConcaveSuiteScenario(),
        PolyhedralSuiteScenario(), SubadditiveSuiteScenario(), BudgetSuiteScenario(), BayesianBudgetScenario(),
    ]
