"""Seeded random instance suites for the property-form welfare checks.

Every builder is a pure function of (seed, size): regenerating a suite with
the same arguments yields the same instances in the same order.
"""
from typing import List, Tuple

import numpy as np

from equilibria.profiles import AgentType, TypeSpace
from mechanism.instance import Instance, TieBreak
from mechanism.valuations import AdditiveConcavePiecewise, ConcaveCurve, Linear, PolyJump, ThresholdHigh, \
    ThresholdLow, Valuation

BUDGET_REGIMES = ("slack", "binding", "mixed")


def random_curve(rng: np.random.Generator, pieces: int = 3, top_slope: float = 2.0) -> ConcaveCurve:
    """Concave piecewise-linear curve with `pieces` segments and decreasing positive slopes."""
    inner = np.sort(rng.uniform(0.05, 0.95, size=pieces - 1))
    breakpoints = np.concatenate([[0.0], inner, [1.0]])
    slopes = np.sort(rng.uniform(0.05, top_slope, size=pieces))[::-1]
    return ConcaveCurve.from_slopes(breakpoints, slopes)


def _concave(rng: np.random.Generator, m: int) -> AdditiveConcavePiecewise:
    return AdditiveConcavePiecewise(tuple(random_curve(rng, int(rng.integers(1, 4))) for _ in range(m)))


def _subadditive(rng: np.random.Generator, m: int) -> Valuation:
    kind = int(rng.integers(0, 4))
    if kind == 0:
        return Linear(tuple(float(w) for w in rng.uniform(0.1, 1.0, size=m)))
    if kind == 1:
        return _concave(rng, m)
    if kind == 2:
        return ThresholdLow(0.5, float(rng.uniform(0.1, 0.5)))
    return ThresholdHigh(0.5, float(rng.uniform(0.2, 1.0)))


def _budgets(rng: np.random.Generator, valuations, m: int, regime: str) -> Tuple[float, ...]:
    tops = np.array([v.max_value(m) for v in valuations])
    if regime == "slack":
        factors = np.full(tops.size, 2.0)
    elif regime == "binding":
        factors = rng.uniform(0.2, 0.8, size=tops.size)
    else:
        factors = rng.choice([0.0, 0.3, 0.6, 2.0], size=tops.size)
    return tuple(float(c) for c in np.round(factors * tops, 6))


def build_budget_suite(seed: int, size: int = 50) -> List[Instance]:
    """Single-resource and two-resource budgeted instances across budget regimes."""
    rng = np.random.default_rng(seed)
    suite = []
    for k in range(size):
        m = 1 if k % 2 == 0 else 2
        n = int(rng.integers(2, 4)) if m == 1 else 2
        valuations = tuple(_concave(rng, m) if m == 1 else _subadditive(rng, m) for _ in range(n))
        regime = BUDGET_REGIMES[k % len(BUDGET_REGIMES)]
        budgets = _budgets(rng, valuations, m, regime)
        suite.append(Instance(m=m, valuations=valuations, budgets=budgets,
                              name=f"budget-{seed}-{k:03d}-{regime}"))
    return suite


def build_concave_suite(seed: int, size: int = 50, max_agents: int = 4) -> List[Instance]:
    rng = np.random.default_rng(seed)
    return [
        Instance(m=1, valuations=tuple(_concave(rng, 1) for _ in range(int(rng.integers(2, max_agents + 1)))),
                 name=f"concave-{seed}-{k:03d}")
        for k in range(size)
    ]


def _single_variable(rng: np.random.Generator) -> Valuation:
    kind = int(rng.integers(0, 3))
    if kind == 0:
        return Linear((float(rng.uniform(0.1, 1.0)),))
    if kind == 1:
        return _concave(rng, 1)
    return PolyJump(float(rng.uniform(0.05, 0.5)))


def build_polyhedral_suite(seed: int, size: int = 50, max_agents: int = 3) -> List[Instance]:
    """Random A x <= 1 environments with 1 or 2 rows; every agent appears in some row."""
    rng = np.random.default_rng(seed)
    suite = []
    for k in range(size):
        n = int(rng.integers(2, max_agents + 1))
        rows = int(rng.integers(1, 3))
        a = rng.uniform(0.5, 1.5, size=(rows, n)) * (rng.random((rows, n)) < 0.8)
        for i in np.flatnonzero(a.sum(axis=0) == 0):
            a[int(rng.integers(0, rows)), i] = float(rng.uniform(0.5, 1.5))
        suite.append(Instance(m=rows, valuations=tuple(_single_variable(rng) for _ in range(n)),
                              constraint_matrix=np.round(a, 6), name=f"polyhedral-{seed}-{k:03d}"))
    return suite


def build_subadditive_suite(seed: int, size: int = 20) -> List[Instance]:
    """Two-agent subadditive instances on one or two resources, threshold pairs included."""
    rng = np.random.default_rng(seed)
    suite = []
    for k in range(size):
        m = 1 if k % 2 == 0 else 2
        if k % 4 == 1:
            level = float(rng.uniform(0.2, 0.6))
            valuations: Tuple[Valuation, ...] = (ThresholdLow(0.5, level / np.sqrt(2)), ThresholdHigh(0.5, level))
            tie = TieBreak.to_agent(1)
        else:
            valuations = (_subadditive(rng, m), _subadditive(rng, m))
            tie = TieBreak.split_equally()
        suite.append(Instance(m=m, valuations=valuations, tie_break=tie, name=f"subadditive-{seed}-{k:03d}"))
    return suite


def build_bayesian_budget_suite(seed: int, size: int = 10, max_types: int = 4) -> List[Tuple[Instance, TypeSpace]]:
    """Single-resource concave agents with finite private types and type-dependent budgets."""
    rng = np.random.default_rng(seed)
    suite = []
    for k in range(size):
        rows = []
        for _ in range(2):
            count = int(rng.integers(1, max_types + 1))
            probs = rng.dirichlet(np.ones(count))
            probs = probs / probs.sum()
            row = []
            for p in probs:
                v = _concave(rng, 1)
                row.append(AgentType(v, float(p), float(np.round(rng.uniform(0.3, 1.5) * v.max_value(1), 6))))
            rows.append(tuple(row))
        types = TypeSpace(tuple(rows))
        base = Instance(m=1, valuations=tuple(r[0].valuation for r in rows),
                        budgets=tuple(r[0].budget for r in rows), name=f"bayes-budget-{seed}-{k:03d}")
        suite.append((base, types))
    return suite
