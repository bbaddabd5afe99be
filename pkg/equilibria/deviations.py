"""Deviation strategies behind the welfare upper bounds, used as diagnostics.

share_scaled_deviation: bid o_ij * b'_ij with b'_i drawn from the opponents'
price distribution (subadditive, no budgets).
budget_safe_deviation: the same against truncated prices, scaled by 1/lambda,
never exceeding the budget.
polyhedral_deviation: b'_ij = o_i * a_ji * p_ij for the polyhedral rule.
"""
import math
from typing import Any, FrozenSet, Optional, Tuple, Union

import numpy as np
from loguru import logger

from common.config import get_settings
from common.errors import DeviationFeasibilityError, EnumerationLimitError, ProfileError, SearchConfigError
from equilibria.profiles import CorrelatedProfile, FiniteStrategy, MixedProfile
from mechanism.allocation import agent_shares
from mechanism.instance import Instance
from mechanism.valuations import Valuation

MAX_TRUNCATION_RESOURCES = 20

Profile = Union[CorrelatedProfile, MixedProfile]


def _price_set(price_samples: Any, weights: Optional[Any]) -> Tuple[np.ndarray, np.ndarray]:
    prices = np.atleast_2d(np.asarray(price_samples, dtype=float))
    if prices.shape[0] == 0 or prices.size == 0:
        raise ProfileError("deviation needs at least one price sample")
    if weights is None:
        return prices, np.full(prices.shape[0], 1.0 / prices.shape[0])
    return prices, np.asarray(weights, dtype=float)


def share_scaled_deviation(i: int, o_i: Any, price_samples: Any, weights: Optional[Any] = None) -> FiniteStrategy:
    """Draw b'_i from the price samples and bid (o_ij * b'_ij)_j."""
    prices, w = _price_set(price_samples, weights)
    o = np.asarray(o_i, dtype=float)
    logger.debug(f"share-scaled deviation for agent {i} over {prices.shape[0]} price samples")
    return FiniteStrategy(o[None, :] * prices, w)


def truncation_set(v_trunc: Valuation, o_i: Any, p_i: Any, lam: float) -> FrozenSet[int]:
    """Inclusion-maximal T with v^c(1_T) < (1/lam) sum_{j in T} o_ij p_ij.

    The full resource set is tried first; otherwise resources are added
    greedily in index order while the inequality keeps holding.
    """
    if lam < 1:
        raise SearchConfigError(f"lambda must be >= 1, got {lam}")
    o = np.asarray(o_i, dtype=float)
    p = np.asarray(p_i, dtype=float)
    m = o.size
    if m > MAX_TRUNCATION_RESOURCES:
        raise EnumerationLimitError(f"truncation sets limited to {MAX_TRUNCATION_RESOURCES} resources, got {m}")
    weighted = o * p / lam

    def qualifies(members) -> bool:
        if not members:
            return False
        idx = sorted(members)
        indicator = np.zeros(m)
        indicator[idx] = 1.0
        return float(v_trunc(indicator)) < float(weighted[idx].sum())

    full = set(range(m))
    if qualifies(full):
        return frozenset(full)
    chosen: set = set()
    grew = True
    while grew:
        grew = False
        for j in range(m):
            if j not in chosen and qualifies(chosen | {j}):
                chosen.add(j)
                grew = True
    return frozenset(chosen)


def truncate_prices(v_trunc: Valuation, o_i: Any, price_samples: Any, lam: float) -> np.ndarray:
    """Zero every price sample on its own truncation set."""
    prices = np.atleast_2d(np.asarray(price_samples, dtype=float)).copy()
    for row in prices:
        members = truncation_set(v_trunc, o_i, row, lam)
        if members:
            row[sorted(members)] = 0.0
    return prices


def budget_safe_deviation(i: int, o_i: Any, truncated_prices: Any, lam: float, budget: float,
                          weights: Optional[Any] = None) -> FiniteStrategy:
    """Bid (1/lam) o_ij b'_ij with b'_i drawn from the truncated prices; every pure bid fits the budget."""
    if lam < 1:
        raise SearchConfigError(f"lambda must be >= 1, got {lam}")
    prices, w = _price_set(truncated_prices, weights)
    bids = np.asarray(o_i, dtype=float)[None, :] * prices / lam
    spend = bids.sum(axis=1)
    over = spend > budget + get_settings().feasibility_tol
    if np.any(over):
        k = int(np.argmax(over))
        raise DeviationFeasibilityError(f"agent {i}: deviation bid total {spend[k]!r} exceeds budget {budget!r}")
    return FiniteStrategy(bids, w)


def polyhedral_deviation(instance: Instance, i: int, o_i: float, price_samples: Any,
                         weights: Optional[Any] = None) -> FiniteStrategy:
    """b'_ij = o_i * a_ji * p_ij, one pure bid per price sample."""
    a = instance.require_polyhedral()
    prices, w = _price_set(price_samples, weights)
    return FiniteStrategy(float(o_i) * a[:, i][None, :] * prices, w)


def _deviation_utility(instance: Instance, i: int, valuation: Valuation, bids: np.ndarray,
                       prices: np.ndarray) -> np.ndarray:
    return valuation(agent_shares(instance, i, bids, prices)) - bids.sum(axis=1)


def share_scaled_bound(instance: Instance, profile: Profile, optimum: Any, samples: int = 10_000,
                       seed: int = 0) -> Tuple[float, float]:
    """Monte-Carlo (lhs, rhs) of sum_i u_i(a_i, B_-i) >= 1/2 sum_i v_i(o_i) - sum_ij E[b_ij]."""
    instance.require_standard()
    o = np.asarray(optimum, dtype=float)
    rng = np.random.default_rng(seed)
    play = profile.sample(rng, samples)
    shadow = profile.sample(rng, samples)
    lhs = 0.0
    for i, v in enumerate(instance.valuations):
        prices = np.delete(play, i, axis=1).sum(axis=1)
        b_prime = np.delete(shadow, i, axis=1).sum(axis=1)
        lhs += float(_deviation_utility(instance, i, v, o[i][None, :] * b_prime, prices).mean())
    rhs = 0.5 * sum(float(v(o[i])) for i, v in enumerate(instance.valuations)) - float(play.sum(axis=(1, 2)).mean())
    return lhs, rhs


def budget_safe_bound(instance: Instance, profile: Profile, optimum: Any, lam: float = (1 + math.sqrt(5)) / 2,
                      samples: int = 10_000, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Per-agent Monte-Carlo (lhs, rhs) of
    u_i(a_i, B_-i) >= v_i^c(o_i)/(lam+1) - (1/lam) sum_j o_ij sum_k E[b_kj].
    """
    instance.require_standard()
    budgets = instance.require_budgets()
    truncated = instance.truncated().valuations
    o = np.asarray(optimum, dtype=float)
    rng = np.random.default_rng(seed)
    play = profile.sample(rng, samples)
    shadow = profile.sample(rng, samples)
    column_spend = play.sum(axis=1).mean(axis=0)
    lhs, rhs = np.zeros(instance.n), np.zeros(instance.n)
    for i, v in enumerate(instance.valuations):
        prices = np.delete(play, i, axis=1).sum(axis=1)
        shadow_prices = truncate_prices(truncated[i], o[i], np.delete(shadow, i, axis=1).sum(axis=1), lam)
        dev = budget_safe_deviation(i, o[i], shadow_prices, lam, budgets[i])
        lhs[i] = float(_deviation_utility(instance, i, v, dev.bids, prices).mean())
        rhs[i] = float(truncated[i](o[i])) / (lam + 1) - float(o[i] @ column_spend) / lam
    return lhs, rhs


def polyhedral_bound(instance: Instance, b: Any, optimum: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Per-agent (lhs, rhs) of u_i(b'_i, b_-i) >= v_i(o_i)/2 - sum_j o_i a_ji p_ij at a pure profile."""
    a = instance.require_polyhedral()
    bids = instance.validate_bids(b)
    o = np.asarray(optimum, dtype=float).reshape(-1)
    lhs, rhs = np.zeros(instance.n), np.zeros(instance.n)
    for i, v in enumerate(instance.valuations):
        p = np.delete(bids, i, axis=0).sum(axis=0)
        dev = polyhedral_deviation(instance, i, o[i], p[None, :])
        lhs[i] = float(_deviation_utility(instance, i, v, dev.bids, p[None, :])[0])
        rhs[i] = 0.5 * float(v(np.array([o[i]]))) - float(o[i] * a[:, i] @ p)
    return lhs, rhs
