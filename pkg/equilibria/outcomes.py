"""Welfare of randomized and Bayesian outcomes, and the matching benchmarks."""
import math
from typing import Dict, Iterator, Tuple

import numpy as np

from common.config import get_settings
from equilibria.profiles import MixedProfile, StrategyMap, TypeSpace
from mechanism.allocation import agent_shares
from mechanism.instance import Instance
from mechanism.welfare import EFFECTIVE, SOCIAL, expected_values, optimal_welfare


def sampled_values(instance: Instance, draws: np.ndarray) -> np.ndarray:
    """v_i(x_i(b)) for a batch of profiles (s, n, m); result (s, n)."""
    out = np.empty(draws.shape[:2])
    for i, v in enumerate(instance.valuations):
        prices = np.delete(draws, i, axis=1).sum(axis=1)
        out[:, i] = v(agent_shares(instance, i, draws[:, i, :], prices))
    return out


def mixed_welfare(instance: Instance, profile: MixedProfile, samples: int = 10_000,
                  seed: int = 0) -> Tuple[float, float]:
    """Monte-Carlo E[SW] with its standard error."""
    draws = profile.sample(np.random.default_rng(seed), samples)
    sw = sampled_values(instance, draws).sum(axis=1)
    return float(sw.mean()), float(sw.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0


def _budget(instance: Instance, types: TypeSpace, i: int, t: int) -> float:
    b = types.types[i][t].budget
    return instance.budget(i) if b is None else b


def _outcomes(instance: Instance, types: TypeSpace, s: StrategyMap) -> Iterator[Tuple[Tuple[int, ...], float, np.ndarray]]:
    limit = get_settings().bayes_enumeration_limit
    s.check(types)
    for idx, prob in types.type_profiles(limit):
        realized = types.realize(instance, idx)
        dist = s.profile(idx).to_correlated(instance.m, limit)
        yield idx, prob, expected_values(realized, dist)


def bayesian_welfare(instance: Instance, types: TypeSpace, s: StrategyMap) -> float:
    """E_t E_b[SW] by exact enumeration of type profiles and bid supports."""
    return float(sum(prob * values.sum() for _, prob, values in _outcomes(instance, types, s)))


def bayesian_welfare_mc(instance: Instance, types: TypeSpace, s: StrategyMap, samples: int = 100_000,
                        seed: int = 0) -> Tuple[float, float]:
    """Monte-Carlo E_t E_b[SW] with its standard error."""
    s.check(types)
    rng = np.random.default_rng(seed)
    drawn_types = [rng.choice(len(ts), size=samples, p=types.probabilities(i)) for i, ts in enumerate(types.types)]
    draws = np.zeros((samples, instance.n, instance.m))
    for i, row in enumerate(s.strategies):
        for t, strategy in enumerate(row):
            mask = drawn_types[i] == t
            if mask.any():
                draws[mask, i, :] = strategy.sample(rng, int(mask.sum()))
    sw = np.zeros(samples)
    for i, ts in enumerate(types.types):
        prices = np.delete(draws, i, axis=1).sum(axis=1)
        for t, agent_type in enumerate(ts):
            mask = drawn_types[i] == t
            if mask.any():
                shares = agent_shares(instance, i, draws[mask, i, :], prices[mask])
                sw[mask] += agent_type.valuation(shares)
    return float(sw.mean()), float(sw.std(ddof=1) / math.sqrt(samples))


def _interim_caps(instance: Instance, types: TypeSpace, contributions: Dict[Tuple[int, int], float]) -> float:
    total = 0.0
    for i, ts in enumerate(types.types):
        for t, agent_type in enumerate(ts):
            if agent_type.probability <= 0:
                continue
            conditional = contributions.get((i, t), 0.0) / agent_type.probability
            total += agent_type.probability * min(conditional, _budget(instance, types, i, t))
    return total


def bayesian_effective_welfare(instance: Instance, types: TypeSpace, s: StrategyMap) -> float:
    """sum_i E_{t_i}[min(E[v_i(x_i) | t_i], c_i(t_i))]."""
    contributions: Dict[Tuple[int, int], float] = {}
    for idx, prob, values in _outcomes(instance, types, s):
        for i, t in enumerate(idx):
            contributions[(i, t)] = contributions.get((i, t), 0.0) + prob * float(values[i])
    return _interim_caps(instance, types, contributions)


def bayesian_optimal_welfare(instance: Instance, types: TypeSpace, resolution: int = 0) -> float:
    """E_t[SW(o^t)] with o^t the grid-optimal allocation of each type profile."""
    limit = get_settings().bayes_enumeration_limit
    total = 0.0
    for idx, prob in types.type_profiles(limit):
        total += prob * optimal_welfare(types.realize(instance, idx), resolution or None, SOCIAL).value
    return total


def bayesian_effective_benchmark(instance: Instance, types: TypeSpace, resolution: int = 0) -> float:
    """sum_i E_{t_i}[min(E_{t_-i}[v_i(o_i^t)], c_i)] with o^t maximizing effective welfare per type profile."""
    limit = get_settings().bayes_enumeration_limit
    contributions: Dict[Tuple[int, int], float] = {}
    for idx, prob in types.type_profiles(limit):
        realized = types.realize(instance, idx)
        report = optimal_welfare(realized, resolution or None, EFFECTIVE)
        for i, t in enumerate(idx):
            value = float(realized.valuations[i](report.allocation[i]))
            contributions[(i, t)] = contributions.get((i, t), 0.0) + prob * value
    return _interim_caps(instance, types, contributions)

