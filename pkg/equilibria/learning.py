"""Full-information multiplicative weights (Hedge) over finite bid grids."""
import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from common.config import get_settings
from common.errors import EnumerationLimitError, SearchConfigError
from equilibria.profiles import CorrelatedProfile
from equilibria.search import default_upper
from mechanism.allocation import agent_shares
from mechanism.instance import Instance

SCHEDULES = ("fixed", "anytime")
REGRET_CONFIDENCE = 0.01
_CACHE_ELEMS = 5_000_000


@dataclass
class HedgeResult:
    profile: CorrelatedProfile
    regret: np.ndarray
    rounds: int
    etas: List[float]
    regret_bounds: np.ndarray

    @property
    def average_regret(self) -> np.ndarray:
        return self.regret / self.rounds

    @property
    def regret_tolerance(self) -> float:
        """Largest per-agent bound on regret/T; realized play stays below it with high probability."""
        return float(self.regret_bounds.max())


def action_grid(instance: Instance, i: int, step: float, upper: Optional[float] = None) -> np.ndarray:
    """Joint per-resource bid grid of agent i, budget-infeasible vectors removed."""
    if not step > 0:
        raise SearchConfigError(f"grid step must be positive, got {step}")
    budget = instance.budget(i)
    top = default_upper(instance.valuations[i], instance.alloc_dim, budget) if upper is None else upper
    axis = step * np.arange(int(math.floor(top / step + 1e-9)) + 1)
    count = axis.size ** instance.m
    limit = get_settings().hedge_action_limit
    if count > limit:
        raise EnumerationLimitError(f"agent {i} would have {count} grid actions, limit {limit}")
    grid = np.array(list(itertools.product(axis, repeat=instance.m)), dtype=float)
    if math.isfinite(budget):
        grid = grid[grid.sum(axis=1) <= budget + 1e-12]
    return grid


def regret_bound(value_range: float, actions: int, rounds: int, schedule: str = "fixed",
                 confidence: float = REGRET_CONFIDENCE) -> float:
    """Bound on regret/T of one Hedge learner with utilities spread over value_range.

    The expected-play regret is at most R sqrt(T ln k / 2) for the fixed step and
    R (sqrt(2 T ln k) + sqrt(ln k / 8)) for the anytime step; sampling the played
    action adds R sqrt(T ln(1/confidence) / 2) with probability 1 - confidence.
    """
    if schedule not in SCHEDULES:
        raise SearchConfigError(f"unknown step schedule {schedule}")
    if rounds < 1 or not 0.0 < confidence < 1.0:
        raise SearchConfigError("regret bound needs rounds >= 1 and confidence in (0, 1)")
    log_k = math.log(max(actions, 2))
    expected = math.sqrt(log_k / (2.0 * rounds))
    if schedule == "anytime":
        expected = 2.0 * expected + math.sqrt(log_k / 8.0) / rounds
    sampling = math.sqrt(math.log(1.0 / confidence) / (2.0 * rounds))
    return value_range * (expected + sampling)


class _Learner:
    def __init__(self, instance: Instance, i: int, actions: np.ndarray, rounds: int, schedule: str):
        self.instance = instance
        self.i = i
        self.actions = actions
        self.costs = actions.sum(axis=1)
        self.cumulative = np.zeros(actions.shape[0])
        self.realized = 0.0
        self.value_range = instance.valuations[i].max_value(instance.alloc_dim) + float(self.costs.max())
        self.scale = 1.0 / max(self.value_range, 1e-12)
        self.log_k = math.log(max(actions.shape[0], 2))
        self.rounds = rounds
        self.schedule = schedule
        self._cache: Dict[bytes, np.ndarray] = {}

    def eta(self, t: int) -> float:
        horizon = self.rounds if self.schedule == "fixed" else t + 1
        return math.sqrt(8.0 * self.log_k / horizon) * self.scale

    def draw(self, rng: np.random.Generator, t: int) -> int:
        logits = self.eta(t) * self.cumulative
        w = np.exp(logits - logits.max())
        cdf = np.cumsum(w)
        return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), cdf.size - 1))

    def payoffs(self, price: np.ndarray) -> np.ndarray:
        key = price.tobytes()
        u = self._cache.get(key)
        if u is None:
            shares = agent_shares(self.instance, self.i, self.actions, price)
            u = self.instance.valuations[self.i](shares) - self.costs
            if len(self._cache) * self.actions.shape[0] > _CACHE_ELEMS:
                self._cache.clear()
            self._cache[key] = u
        return u

    def update(self, price: np.ndarray, played: int) -> None:
        u = self.payoffs(price)
        self.cumulative += u
        self.realized += float(u[played])

    @property
    def regret(self) -> float:
        return float(self.cumulative.max()) - self.realized


def hedge_learn(instance: Instance, grids: Optional[Sequence[np.ndarray]] = None, rounds: int = 10_000,
                step: float = 0.01, schedule: str = "fixed", seed: int = 0) -> HedgeResult:
    """Every agent runs Hedge on its grid with full-information feedback.

    The step size is sqrt(8 ln k / T) / R_i with R_i the utility range of agent i
    (`schedule="anytime"` uses the current round instead of T). Returns the
    empirical distribution of joint play and each agent's external regret.
    """
    if schedule not in SCHEDULES:
        raise SearchConfigError(f"unknown step schedule {schedule}")
    if rounds < 1:
        raise SearchConfigError("rounds must be >= 1")
    if grids is None:
        grids = [action_grid(instance, i, step) for i in range(instance.n)]
    limit = get_settings().hedge_action_limit
    learners = []
    for i, g in enumerate(grids):
        g = np.atleast_2d(np.asarray(g, dtype=float))
        if g.shape[0] > limit:
            raise EnumerationLimitError(f"agent {i} has {g.shape[0]} grid actions, limit {limit}")
        learners.append(_Learner(instance, i, g, rounds, schedule))
    rng = np.random.default_rng(seed)
    played = np.empty((rounds, instance.n), dtype=np.int64)
    for t in range(rounds):
        idx = [learner.draw(rng, t) for learner in learners]
        bids = np.stack([learner.actions[k] for learner, k in zip(learners, idx)])
        # all agents draw before anyone updates
        for i, learner in enumerate(learners):
            learner.update(np.delete(bids, i, axis=0).sum(axis=0), idx[i])
        played[t] = idx
        if (t + 1) % max(1, rounds // 10) == 0:
            logger.debug(f"hedge round {t + 1}/{rounds}: regret/T {[round(l.regret / (t + 1), 5) for l in learners]}")
    joint, counts = np.unique(played, axis=0, return_counts=True)
    support = np.stack([np.stack([learners[i].actions[row[i]] for i in range(instance.n)]) for row in joint])
    profile = CorrelatedProfile(support, counts / rounds)
    regret = np.array([learner.regret for learner in learners])
    logger.info(f"hedge on {instance.name}: T={rounds}, regret/T={np.round(regret / rounds, 5).tolist()}, "
                f"{joint.shape[0]} distinct joint profiles")
    bounds = np.array([regret_bound(l.value_range, l.actions.shape[0], rounds, schedule) for l in learners])
    return HedgeResult(profile=profile, regret=regret, rounds=rounds, etas=[l.eta(rounds - 1) for l in learners],
                       regret_bounds=bounds)
