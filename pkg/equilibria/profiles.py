"""Randomized bid profiles, Bayesian type spaces, search settings and reports."""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from common.errors import EnumerationLimitError, ProfileError, SearchConfigError
from mechanism.instance import Instance
from mechanism.valuations import Valuation

JsonDict = Dict[str, Any]

WEIGHT_TOL = 1e-12


def _check_weights(weights: Any, size: int, what: str) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (size,):
        raise ProfileError(f"{what}: expected {size} weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ProfileError(f"{what}: weights must be nonnegative")
    if abs(w.sum() - 1.0) > WEIGHT_TOL * max(1, size):
        raise ProfileError(f"{what}: weights sum to {w.sum()!r}, not 1")
    return w


@dataclass(frozen=True, eq=False)
class FiniteStrategy:
    """Finite weighted distribution over bid vectors of one agent."""
    bids: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        bids = np.atleast_2d(np.asarray(self.bids, dtype=float))
        if bids.size == 0:
            raise ProfileError("strategy needs at least one bid vector")
        if np.any(bids < 0) or not np.all(np.isfinite(bids)):
            raise ProfileError("strategy bids must be nonnegative and finite")
        object.__setattr__(self, "bids", bids)
        object.__setattr__(self, "weights", _check_weights(self.weights, bids.shape[0], "strategy"))

    @classmethod
    def point(cls, bid: Any) -> "FiniteStrategy":
        return cls(np.atleast_2d(np.asarray(bid, dtype=float)), np.ones(1))

    @classmethod
    def uniform(cls, bids: Any) -> "FiniteStrategy":
        bids = np.atleast_2d(np.asarray(bids, dtype=float))
        return cls(bids, np.full(bids.shape[0], 1.0 / bids.shape[0]))

    @property
    def size(self) -> int:
        return self.bids.shape[0]

    @property
    def is_pure(self) -> bool:
        return self.size == 1

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cdf = np.cumsum(self.weights)
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return self.bids[np.minimum(idx, self.size - 1)]

    def mean(self) -> np.ndarray:
        return self.weights @ self.bids


@dataclass(frozen=True)
class SamplerStrategy:
    """Bid distribution known only through a seeded sampler (rng, size) -> (size, m)."""
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    label: str = "sampler"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.sampler(rng, size), dtype=float)


Strategy = Union[FiniteStrategy, SamplerStrategy]


def mix(strategies: Sequence[FiniteStrategy], probs: Sequence[float]) -> FiniteStrategy:
    bids = np.vstack([s.bids for s in strategies])
    weights = np.concatenate([p * s.weights for s, p in zip(strategies, probs)])
    return FiniteStrategy(bids, weights / weights.sum())


def convolve_prices(strategies: Sequence[FiniteStrategy], m: int, limit: int) -> Tuple[np.ndarray, np.ndarray]:
    """Exact distribution of the sum of independent finite bid distributions."""
    prices, weights = np.zeros((1, m)), np.ones(1)
    for s in strategies:
        size = prices.shape[0] * s.size
        if size > limit:
            raise EnumerationLimitError(f"opponent price support of {size} exceeds {limit}")
        prices = (prices[:, None, :] + s.bids[None, :, :]).reshape(-1, m)
        weights = np.outer(weights, s.weights).ravel()
    return prices, weights


@dataclass(frozen=True, eq=False)
class CorrelatedProfile:
    """Finite weighted distribution over joint bid profiles, support shape (k, n, m)."""
    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 2:
            support = support[None]
        if support.ndim != 3 or support.shape[0] == 0:
            raise ProfileError(f"support must have shape (k, n, m), got {support.shape}")
        if np.any(support < 0) or not np.all(np.isfinite(support)):
            raise ProfileError("profile bids must be nonnegative and finite")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", _check_weights(self.weights, support.shape[0], "correlated profile"))

    @classmethod
    def point_mass(cls, b: Any) -> "CorrelatedProfile":
        return cls(np.asarray(b, dtype=float)[None], np.ones(1))

    @property
    def n(self) -> int:
        return self.support.shape[1]

    def opponent_prices(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        return np.delete(self.support, i, axis=1).sum(axis=1), self.weights

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return FiniteStrategy(self.support.reshape(self.support.shape[0], -1), self.weights) \
            .sample(rng, size).reshape(size, *self.support.shape[1:])

    def to_dict(self) -> JsonDict:
        return {"support": self.support.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True)
class MixedProfile:
    """Independent per-agent bid distributions."""
    strategies: Tuple[Strategy, ...]

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if not self.strategies:
            raise ProfileError("mixed profile needs one strategy per agent")

    @classmethod
    def pure(cls, b: Any) -> "MixedProfile":
        return cls(tuple(FiniteStrategy.point(row) for row in np.asarray(b, dtype=float)))

    @property
    def n(self) -> int:
        return len(self.strategies)

    @property
    def is_finite(self) -> bool:
        return all(isinstance(s, FiniteStrategy) for s in self.strategies)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Joint draws of shape (size, n, m); agents sampled in index order."""
        return np.stack([s.sample(rng, size) for s in self.strategies], axis=1)

    def opponent_prices(self, i: int, m: int, limit: int) -> Tuple[np.ndarray, np.ndarray]:
        if not self.is_finite:
            raise ProfileError("exact opponent prices need finite strategies")
        return convolve_prices([s for k, s in enumerate(self.strategies) if k != i], m, limit)

    def to_correlated(self, m: int, limit: int = 10**6) -> CorrelatedProfile:
        if not self.is_finite:
            raise ProfileError("only finite mixed profiles have a finite joint support")
        support, weights = np.zeros((1, 0, m)), np.ones(1)
        for s in self.strategies:
            size = support.shape[0] * s.size
            if size > limit:
                raise ProfileError(f"joint support of {size} profiles exceeds {limit}")
            support = np.concatenate([
                np.repeat(support, s.size, axis=0),
                np.tile(s.bids, (support.shape[0], 1))[:, None, :],
            ], axis=1)
            weights = np.outer(weights, s.weights).ravel()
        return CorrelatedProfile(support, weights)


@dataclass(frozen=True)
class AgentType:
    valuation: Valuation
    probability: float
    budget: Optional[float] = None


@dataclass(frozen=True)
class TypeSpace:
    """Independent finite type distributions, one tuple of AgentType per agent."""
    types: Tuple[Tuple[AgentType, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(tuple(t) for t in self.types))
        for i, ts in enumerate(self.types):
            if not ts:
                raise ProfileError(f"agent {i} has no types")
            _check_weights([t.probability for t in ts], len(ts), f"type distribution of agent {i}")

    @classmethod
    def complete_information(cls, instance: Instance) -> "TypeSpace":
        return cls(tuple((AgentType(v, 1.0, instance.budget(i) if instance.has_budgets else None),)
                         for i, v in enumerate(instance.valuations)))

    @property
    def n(self) -> int:
        return len(self.types)

    def probabilities(self, i: int) -> np.ndarray:
        return np.array([t.probability for t in self.types[i]])

    def type_profiles(self, limit: int):
        """Yields (type indices, probability) over the product of type spaces."""
        count = math.prod(len(ts) for ts in self.types)
        if count > limit:
            raise EnumerationLimitError(f"{count} type profiles exceed {limit}")
        for idx in np.ndindex(*[len(ts) for ts in self.types]):
            yield idx, math.prod(self.types[i][t].probability for i, t in enumerate(idx))

    def realize(self, base: Instance, idx: Sequence[int]) -> Instance:
        """Complete-information instance for one type profile."""
        chosen = [self.types[i][t] for i, t in enumerate(idx)]
        valuations = [t.valuation for t in chosen]
        if any(t.budget is not None for t in chosen) or base.has_budgets:
            budgets = tuple(t.budget if t.budget is not None else base.budget(i) for i, t in enumerate(chosen))
            return Instance(base.m, tuple(valuations), budgets, base.constraint_matrix, base.tie_break, base.name)
        return base.with_valuations(valuations)


@dataclass(frozen=True)
class StrategyMap:
    """Per agent, one finite bid distribution per type."""
    strategies: Tuple[Tuple[FiniteStrategy, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(tuple(s) for s in self.strategies))

    def check(self, types: TypeSpace) -> None:
        if len(self.strategies) != types.n:
            raise ProfileError(f"strategy map covers {len(self.strategies)} agents, type space {types.n}")
        for i, (ss, ts) in enumerate(zip(self.strategies, types.types)):
            if len(ss) != len(ts):
                raise ProfileError(f"agent {i}: {len(ts)} types but {len(ss)} strategies")

    def marginal(self, i: int, types: TypeSpace) -> FiniteStrategy:
        """Bid distribution of agent i with its type integrated out."""
        return mix(self.strategies[i], types.probabilities(i))

    def profile(self, idx: Sequence[int]) -> MixedProfile:
        return MixedProfile(tuple(self.strategies[i][t] for i, t in enumerate(idx)))


Bounds = Union[float, Sequence[float]]

SEARCH_MODES = ("auto", "joint", "coordinate", "structured")


@dataclass
class SearchConfig:
    """Deviation grid: per-resource [lower, upper] at `step`, refined around the incumbent."""
    lower: Bounds = 0.0
    upper: Optional[Bounds] = None
    step: float = 0.01
    grid_points: Optional[Sequence[float]] = None
    refinement_rounds: int = 2
    lam: float = 1.0
    seed: int = 0
    mode: str = "auto"
    resources: Optional[Tuple[int, ...]] = None
    polish: bool = False
    improvement_tol: float = 1e-12
    tolerance: float = 1e-6
    samples: int = 10_000
    max_sweeps: int = 50
    max_candidates: int = 2_000_000

    def __post_init__(self):
        if not self.step > 0:
            raise SearchConfigError(f"step must be positive, got {self.step}")
        if self.refinement_rounds < 0:
            raise SearchConfigError("refinement_rounds must be >= 0")
        if self.lam < 1:
            raise SearchConfigError(f"lambda must be >= 1, got {self.lam}")
        if self.mode not in SEARCH_MODES:
            raise SearchConfigError(f"unknown search mode {self.mode}")
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        if np.any(lo < 0):
            raise SearchConfigError("lower must be >= 0")
        if self.upper is not None and np.any(np.atleast_1d(np.asarray(self.upper, dtype=float)) < lo):
            raise SearchConfigError("upper must be >= lower")
        if self.grid_points is not None and (len(self.grid_points) == 0 or min(self.grid_points) < 0):
            raise SearchConfigError("grid points must be nonempty and nonnegative")

    def bounds(self, m: int, default_upper: float) -> Tuple[np.ndarray, np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (m,)).copy()
        up = np.broadcast_to(np.asarray(default_upper if self.upper is None else self.upper, dtype=float), (m,)).copy()
        return lo, np.maximum(up, lo)

    def axis(self, lo: float, hi: float, step: Optional[float] = None) -> np.ndarray:
        if self.grid_points is not None and step is None:
            pts = np.asarray(sorted(self.grid_points), dtype=float)
            inside = pts[(pts >= lo) & (pts <= hi)]
            return inside if inside.size else np.array([lo])
        step = step or self.step
        if hi <= lo:
            return np.array([lo])
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        pts = lo + step * np.arange(count)
        if hi - pts[-1] > 1e-12:
            pts = np.append(pts, hi)
        return pts

    def describe(self) -> JsonDict:
        return {
            "lower": self.lower, "upper": self.upper, "step": self.step,
            "grid_points": None if self.grid_points is None else list(self.grid_points),
            "refinement_rounds": self.refinement_rounds, "mode": self.mode,
            "resources": None if self.resources is None else list(self.resources),
            "lam": self.lam, "polish": self.polish,
        }


AgentConfigs = Union[SearchConfig, Sequence[SearchConfig]]


def config_for(cfg: AgentConfigs, i: int) -> SearchConfig:
    if isinstance(cfg, SearchConfig):
        return cfg
    return cfg[i]


@dataclass
class EquilibriumReport:
    kind: str
    agent_eps: List[float]
    grid: JsonDict
    tolerance: float
    samples: int = 0
    ci_halfwidth: float = 0.0
    agent_ci: List[float] = field(default_factory=list)
    best_deviations: List[Any] = field(default_factory=list)

    @property
    def eps(self) -> float:
        return max(self.agent_eps) if self.agent_eps else 0.0

    @property
    def verdict(self) -> bool:
        return self.eps <= self.tolerance

    def to_dict(self) -> JsonDict:
        return {
            "kind": self.kind,
            "eps": self.eps,
            "agents": [
                {"agent": i, "eps": e, "ci_halfwidth": self.agent_ci[i] if self.agent_ci else 0.0}
                for i, e in enumerate(self.agent_eps)
            ],
            "grid": self.grid,
            "samples": self.samples,
            "ci_halfwidth": self.ci_halfwidth,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }
