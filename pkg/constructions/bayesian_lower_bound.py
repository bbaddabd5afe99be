"""Bayesian instance whose equilibrium welfare is 2/(sqrt(m)+1) while the optimum is 1.

Agent 0 wants every resource (min-coordinate valuation) and bids beta on each.
Agent 1 wants a single resource j, drawn uniformly, with value x_j/sqrt(m),
and bids delta on it.
"""
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from loguru import logger

from common.errors import InstanceError
from equilibria.profiles import AgentType, FiniteStrategy, SearchConfig, StrategyMap, TypeSpace
from mechanism.instance import Instance
from mechanism.valuations import MinCoordinate, ScaledCoordinate


@dataclass(frozen=True)
class BayesianLowerBound:
    m: int

    @property
    def delta(self) -> float:
        return 1.0 / (math.sqrt(self.m) + 1.0) ** 2

    @property
    def beta(self) -> float:
        return math.sqrt(self.delta / self.m) - self.delta

    @property
    def equilibrium_welfare(self) -> float:
        return 2.0 / (math.sqrt(self.m) + 1.0)

    @property
    def optimal_welfare(self) -> float:
        return 1.0

    @property
    def ratio(self) -> float:
        return self.optimal_welfare / self.equilibrium_welfare

    @property
    def bound(self) -> float:
        return math.sqrt(self.m) / 2.0

    @property
    def agent0_utility(self) -> float:
        return self.delta

    @property
    def degenerate(self) -> bool:
        return self.m == 1


def build_bayesian_lower_bound(m: int) -> Tuple[Instance, TypeSpace, StrategyMap, BayesianLowerBound]:
    if m < 1:
        raise InstanceError(f"m must be >= 1, got {m}")
    c = BayesianLowerBound(m)
    if c.degenerate:
        logger.warning("m=1: the construction degenerates to ratio 1 and the bound is vacuous")
    scale = 1.0 / math.sqrt(m)
    wants_all = MinCoordinate(1.0)
    single = tuple(ScaledCoordinate(j, scale) for j in range(m))
    types = TypeSpace((
        (AgentType(wants_all, 1.0),),
        tuple(AgentType(v, 1.0 / m) for v in single),
    ))
    eye = np.eye(m)
    strategies = StrategyMap((
        (FiniteStrategy.point(np.full(m, c.beta)),),
        tuple(FiniteStrategy.point(c.delta * eye[j]) for j in range(m)),
    ))
    instance = Instance(m=m, valuations=(wants_all, single[0]), name=f"bayesian-lb-m{m}")
    return instance, types, strategies, c


def deviation_configs(c: BayesianLowerBound, step: float = 1e-4, rounds: int = 3) -> List[SearchConfig]:
    """Per-resource grids: [0, 4 beta] for agent 0 and [0, 4 delta] for agent 1.

    Agent 0's deviation utility separates across resources, so coordinate
    search over these grids is exhaustive up to the grid.
    """
    return [
        SearchConfig(upper=4 * c.beta, step=min(step, c.beta), refinement_rounds=rounds, mode="coordinate"),
        SearchConfig(upper=4 * c.delta, step=min(step, c.delta), refinement_rounds=rounds, mode="coordinate"),
    ]
