"""Epsilon-equilibrium verifiers.

All reports are relative to the deviation grid in the SearchConfig plus its
refinement rounds: eps_i is the best gain found there, never a certificate
over the continuous bid space.
"""
import math
from typing import Any, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.stats import norm

from common.config import get_settings
from common.errors import ProfileError
from equilibria.profiles import AgentConfigs, CorrelatedProfile, EquilibriumReport, FiniteStrategy, \
    MixedProfile, SearchConfig, StrategyMap, TypeSpace, config_for, convolve_prices
from equilibria.search import UtilityOracle, search
from mechanism.allocation import agent_shares
from mechanism.instance import Instance
from mechanism.valuations import Valuation

MIN_MC_SAMPLES = 100
Z_95 = float(norm.ppf(0.975))


def _grid(cfg: AgentConfigs, n: int) -> Any:
    if isinstance(cfg, SearchConfig):
        return cfg.describe()
    return {"agents": [config_for(cfg, i).describe() for i in range(n)]}


def _tolerance(cfg: AgentConfigs) -> float:
    return config_for(cfg, 0).tolerance


def _interim_gain(instance: Instance, i: int, valuation: Valuation, budget: float, prices: np.ndarray,
                  weights: np.ndarray, own: FiniteStrategy, cfg) -> Tuple[float, np.ndarray]:
    """Best pure deviation gain of agent i playing `own` independently of the opponents' prices."""
    oracle = UtilityOracle(instance, i, prices, weights, valuation)
    if own.is_pure:
        res = search(oracle, cfg, own.bids[0], budget)
        return res.gain, res.bid
    own_u = oracle(own.bids)
    res = search(oracle, cfg, own.bids[int(np.argmax(own_u))], budget)
    return max(0.0, res.utility - float(own.weights @ own_u)), res.bid


def verify_pure_ne(instance: Instance, b: Any, cfg: AgentConfigs) -> EquilibriumReport:
    bids = instance.validate_bids(b)
    profile = MixedProfile.pure(bids)
    limit = get_settings().bayes_enumeration_limit
    eps, best = [], []
    for i in range(instance.n):
        prices, weights = profile.opponent_prices(i, instance.m, limit)
        gain, dev = _interim_gain(instance, i, instance.valuations[i], instance.budget(i), prices, weights,
                                  profile.strategies[i], config_for(cfg, i))
        eps.append(gain)
        best.append(dev.tolist())
    report = EquilibriumReport("pure", eps, _grid(cfg, instance.n), _tolerance(cfg), best_deviations=best)
    logger.info(f"pure NE check on {instance.name}: eps={report.eps:.3g} verdict={report.verdict}")
    return report


def _opponent_prices_bayes(instance: Instance, i: int, types: TypeSpace, s: StrategyMap,
                           mc_samples: Optional[int], seed: int) -> Tuple[np.ndarray, np.ndarray, int]:
    others = [s.marginal(k, types) for k in range(types.n) if k != i]
    limit = get_settings().bayes_enumeration_limit
    if mc_samples is None:
        prices, weights = convolve_prices(others, instance.m, limit)
        return prices, weights, 0
    rng = np.random.default_rng([seed, i])
    prices = np.zeros((mc_samples, instance.m))
    for marginal in others:
        prices += marginal.sample(rng, mc_samples)
    return prices, np.full(mc_samples, 1.0 / mc_samples), mc_samples


def verify_bayesian_ne(instance: Instance, types: TypeSpace, s: StrategyMap, cfg: AgentConfigs,
                       mc_samples: Optional[int] = None, seed: int = 0) -> EquilibriumReport:
    """Interim gains per agent and type; opponents' types and bids are enumerated exactly.

    Exact enumeration is refused above the configured limit: pass mc_samples
    to estimate the opponents' price distribution instead.
    """
    s.check(types)
    if mc_samples is not None and mc_samples < MIN_MC_SAMPLES:
        raise ProfileError(f"need at least {MIN_MC_SAMPLES} Monte-Carlo samples, got {mc_samples}")
    eps, best = [], []
    samples = 0
    for i, ts in enumerate(types.types):
        prices, weights, samples = _opponent_prices_bayes(instance, i, types, s, mc_samples, seed)
        worst, worst_dev = -math.inf, None
        for t, agent_type in enumerate(ts):
            budget = agent_type.budget if agent_type.budget is not None else instance.budget(i)
            gain, dev = _interim_gain(instance, i, agent_type.valuation, budget, prices, weights,
                                      s.strategies[i][t], config_for(cfg, i))
            logger.debug(f"agent {i} type {t}: interim gain {gain:.3g}")
            if gain > worst:
                worst, worst_dev = gain, dev
        eps.append(worst)
        best.append(worst_dev.tolist())
    report = EquilibriumReport("bayesian", eps, _grid(cfg, instance.n), _tolerance(cfg), samples=samples,
                               best_deviations=best)
    logger.info(f"bayesian NE check on {instance.name}: eps={report.eps:.3g} verdict={report.verdict}")
    return report


def verify_mixed_ne(instance: Instance, profile: MixedProfile, mc_samples: int, cfg: AgentConfigs,
                    seed: int = 0) -> EquilibriumReport:
    """Monte-Carlo gain of the best pure deviation, with common random numbers.

    The deviation and the equilibrium strategy are scored on the same joint
    draws; the confidence half-width is 1.96 standard errors of the paired
    difference at the best deviation.
    """
    if mc_samples < MIN_MC_SAMPLES:
        raise ProfileError(f"need at least {MIN_MC_SAMPLES} Monte-Carlo samples, got {mc_samples}")
    if profile.n != instance.n:
        raise ProfileError(f"profile has {profile.n} agents, instance {instance.n}")
    rng = np.random.default_rng(seed)
    draws = profile.sample(rng, mc_samples)
    eps: List[float] = []
    cis: List[float] = []
    best = []
    for i in range(instance.n):
        own = draws[:, i, :]
        prices = np.delete(draws, i, axis=1).sum(axis=1)
        valuation = instance.valuations[i]
        eq_u = valuation(agent_shares(instance, i, own, prices)) - own.sum(axis=1)
        oracle = UtilityOracle(instance, i, prices, None, valuation)
        res = search(oracle, config_for(cfg, i), np.zeros(instance.m), instance.budget(i))
        diff = oracle.utility_samples(res.bid) - eq_u
        gain = float(diff.mean())
        ci = Z_95 * float(diff.std(ddof=1)) / math.sqrt(mc_samples)
        eps.append(max(0.0, gain))
        cis.append(ci)
        best.append(res.bid.tolist())
        logger.debug(f"agent {i}: eq utility {eq_u.mean():.4g}, best deviation gain {gain:.4g} +- {ci:.2g}")
    worst = int(np.argmax(eps))
    report = EquilibriumReport("mixed", eps, _grid(cfg, instance.n), _tolerance(cfg), samples=mc_samples,
                               ci_halfwidth=cis[worst], agent_ci=cis, best_deviations=best)
    logger.info(f"mixed NE check on {instance.name}: eps={report.eps:.3g} +- {report.ci_halfwidth:.2g} "
                f"({mc_samples} samples)")
    return report


def verify_cce(instance: Instance, dist: CorrelatedProfile, cfg: AgentConfigs) -> EquilibriumReport:
    """Exact coarse-correlated gap: best fixed deviation against the joint play of the others."""
    if dist.n != instance.n:
        raise ProfileError(f"profile has {dist.n} agents, instance {instance.n}")
    eps, best = [], []
    for i in range(instance.n):
        prices, weights = dist.opponent_prices(i)
        own = dist.support[:, i, :]
        valuation = instance.valuations[i]
        eq_u = float(weights @ (valuation(agent_shares(instance, i, own, prices)) - own.sum(axis=1)))
        oracle = UtilityOracle(instance, i, prices, weights, valuation)
        res = search(oracle, config_for(cfg, i), own[int(np.argmax(weights))], instance.budget(i))
        eps.append(max(0.0, res.utility - eq_u))
        best.append(res.bid.tolist())
    report = EquilibriumReport("cce", eps, _grid(cfg, instance.n), _tolerance(cfg), best_deviations=best)
    logger.info(f"CCE check on {instance.name}: eps={report.eps:.3g} over {dist.support.shape[0]} profiles")
    return report
