"""Round-robin best-response dynamics, complete-information and Bayesian."""
from dataclasses import dataclass, field
from typing import Any, List, Optional

import numpy as np
from loguru import logger

from common.config import get_settings
from equilibria.best_response import best_response
from equilibria.profiles import AgentConfigs, FiniteStrategy, SearchConfig, StrategyMap, TypeSpace, config_for, \
    convolve_prices
from equilibria.search import UtilityOracle, default_upper, search
from mechanism.instance import Instance

CONVERGED = "converged"
OSCILLATING = "oscillating"


@dataclass
class DynamicsResult:
    profile: np.ndarray
    trace: List[np.ndarray] = field(default_factory=list)
    changes: List[float] = field(default_factory=list)
    verdict: str = OSCILLATING

    @property
    def converged(self) -> bool:
        return self.verdict == CONVERGED

    @property
    def rounds(self) -> int:
        return len(self.changes)

    @property
    def residual(self) -> float:
        return self.changes[-1] if self.changes else float("inf")


def br_dynamics(instance: Instance, init: Any, max_rounds: int = 100, tol: float = 1e-9,
                cfg: Optional[AgentConfigs] = None) -> DynamicsResult:
    """Agents best-respond in index order; converged once a full round moves no bid by tol or more.

    Non-convergence within max_rounds is reported as the oscillating verdict.
    """
    cfg = cfg or SearchConfig()
    b = instance.validate_bids(init).copy()
    result = DynamicsResult(profile=b, trace=[b.copy()])
    for r in range(max_rounds):
        before = b.copy()
        for i in range(instance.n):
            b[i] = best_response(instance, i, b, config_for(cfg, i), incumbent=b[i]).bid
        change = float(np.abs(b - before).max())
        result.trace.append(b.copy())
        result.changes.append(change)
        logger.debug(f"{instance.name} round {r + 1}: max bid change {change:.3g}")
        if change < tol:
            result.verdict = CONVERGED
            break
    result.profile = b
    logger.info(f"best-response dynamics on {instance.name}: {result.verdict} after {result.rounds} rounds "
                f"(residual {result.residual:.3g})")
    return result


@dataclass
class BayesianDynamicsResult:
    strategies: StrategyMap
    changes: List[float] = field(default_factory=list)
    verdict: str = OSCILLATING

    @property
    def converged(self) -> bool:
        return self.verdict == CONVERGED

    @property
    def rounds(self) -> int:
        return len(self.changes)


def _initial_map(instance: Instance, types: TypeSpace) -> StrategyMap:
    rows = []
    for i, ts in enumerate(types.types):
        row = []
        for t in ts:
            budget = t.budget if t.budget is not None else instance.budget(i)
            top = default_upper(t.valuation, instance.alloc_dim, budget)
            row.append(FiniteStrategy.point(np.full(instance.m, 0.25 * top / instance.m)))
        rows.append(tuple(row))
    return StrategyMap(tuple(rows))


def bayesian_br_dynamics(instance: Instance, types: TypeSpace, max_rounds: int = 100, tol: float = 1e-9,
                         cfg: Optional[AgentConfigs] = None, init: Optional[StrategyMap] = None) -> BayesianDynamicsResult:
    """Pure per-type best responses against the type-marginalized bids of the other agents."""
    cfg = cfg or SearchConfig()
    limit = get_settings().bayes_enumeration_limit
    current = init or _initial_map(instance, types)
    current.check(types)
    bids = [[s.bids[0].copy() for s in row] for row in current.strategies]
    result = BayesianDynamicsResult(strategies=current)
    for r in range(max_rounds):
        change = 0.0
        for i, ts in enumerate(types.types):
            snapshot = StrategyMap(tuple(tuple(FiniteStrategy.point(b) for b in row) for row in bids))
            others = [snapshot.marginal(k, types) for k in range(types.n) if k != i]
            prices, weights = convolve_prices(others, instance.m, limit)
            for t, agent_type in enumerate(ts):
                budget = agent_type.budget if agent_type.budget is not None else instance.budget(i)
                oracle = UtilityOracle(instance, i, prices, weights, agent_type.valuation)
                res = search(oracle, config_for(cfg, i), bids[i][t], budget)
                change = max(change, float(np.abs(res.bid - bids[i][t]).max()))
                bids[i][t] = res.bid
        result.changes.append(change)
        logger.debug(f"bayesian dynamics round {r + 1}: max bid change {change:.3g}")
        if change < tol:
            result.verdict = CONVERGED
            break
    result.strategies = StrategyMap(tuple(tuple(FiniteStrategy.point(b) for b in row) for row in bids))
    logger.info(f"bayesian best-response dynamics on {instance.name}: {result.verdict} after {result.rounds} rounds")
    return result
