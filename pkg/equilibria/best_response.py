import math
from typing import Any, Optional, Tuple, Union

import numpy as np
from loguru import logger

from common.config import get_settings
from common.errors import BidError, EnumerationLimitError
from equilibria.profiles import CorrelatedProfile, MixedProfile, SearchConfig
from equilibria.search import SearchResult, UtilityOracle, search
from mechanism.instance import Instance
from mechanism.valuations import Linear, Valuation

Opponents = Union[np.ndarray, MixedProfile, CorrelatedProfile]


def best_response_linear(v_slope: float, p: float) -> float:
    """argmax_b v*b/(b+p) - b = max(0, sqrt(v p) - p); 0 when p = 0 (no maximizer exists)."""
    if v_slope < 0 or p < 0:
        raise BidError("slope and opponent bid must be nonnegative")
    if p == 0:
        return 0.0
    return max(0.0, math.sqrt(v_slope * p) - p)


def opponent_prices(instance: Instance, i: int, opponents: Opponents, cfg: SearchConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Weighted opponent bid totals seen by agent i: exact when finite, Monte-Carlo otherwise."""
    if isinstance(opponents, CorrelatedProfile):
        return opponents.opponent_prices(i)
    if not isinstance(opponents, MixedProfile):
        opponents = MixedProfile.pure(instance.validate_bids(opponents))
    if opponents.is_finite:
        try:
            return opponents.opponent_prices(i, instance.m, get_settings().bayes_enumeration_limit)
        except EnumerationLimitError as e:
            logger.info(f"falling back to Monte-Carlo prices for agent {i}: {e}")
    rng = np.random.default_rng(cfg.seed)
    draws = opponents.sample(rng, cfg.samples)
    prices = np.delete(draws, i, axis=1).sum(axis=1)
    return prices, np.full(cfg.samples, 1.0 / cfg.samples)


def _closed_form(instance: Instance, valuation: Valuation, prices: np.ndarray, budget: float) -> Optional[np.ndarray]:
    if not isinstance(valuation, Linear) or instance.is_polyhedral or math.isfinite(budget):
        return None
    if prices.shape[0] != 1 or np.any(prices[0] <= 0):
        return None
    return np.array([best_response_linear(w, p) for w, p in zip(valuation.weights, prices[0])])


def best_response(instance: Instance, i: int, opponents: Opponents, cfg: SearchConfig,
                  incumbent: Optional[Any] = None, valuation: Optional[Valuation] = None,
                  budget: Optional[float] = None) -> SearchResult:
    """Utility-maximizing bid vector of agent i against fixed or randomized opponents.

    Linear valuations facing a point-mass price with every p_j > 0 use the
    closed form; everything else goes through the grid search. When some
    p_j = 0 the supremum is approached as the bid goes to 0, so the search may
    return the smallest positive grid point; it does so only when that point
    beats bidding 0 and receiving the tie-break share.
    """
    valuation = valuation or instance.valuations[i]
    budget = instance.budget(i) if budget is None else budget
    prices, weights = opponent_prices(instance, i, opponents, cfg)
    oracle = UtilityOracle(instance, i, prices, weights, valuation)
    exact = _closed_form(instance, valuation, prices, budget)
    if exact is not None:
        start = exact if incumbent is None else np.asarray(incumbent, dtype=float)
        inc_u = float(oracle(start)[0])
        u = float(oracle(exact)[0])
        if u <= inc_u + cfg.improvement_tol:
            return SearchResult(start, inc_u, inc_u, "closed-form", oracle.evaluations)
        return SearchResult(exact, u, inc_u, "closed-form", oracle.evaluations)
    return search(oracle, cfg, incumbent, budget)
