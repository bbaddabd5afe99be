"""Social and effective welfare, plus the grid oracle for optimal welfare."""
import itertools
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np
from loguru import logger

from common.config import get_settings
from common.errors import EnumerationLimitError, InfeasibleAllocationError, SearchConfigError
from mechanism.allocation import allocation_of, check_feasible
from mechanism.instance import Instance
from mechanism.valuations import Valuation

JsonDict = Dict[str, Any]

SOCIAL = "social"
EFFECTIVE = "effective"

_CHUNK = 1 << 15


@dataclass
class WelfareReport:
    value: float
    allocation: np.ndarray
    resolution: int
    mode: str = SOCIAL
    method: str = "grid"

    def to_dict(self) -> JsonDict:
        return {
            "value": self.value,
            "allocation": self.allocation.tolist(),
            "resolution": self.resolution,
            "mode": self.mode,
            "method": self.method,
        }


def agent_values(instance: Instance, x: Any) -> np.ndarray:
    arr = check_feasible(instance, x)
    return np.array([float(v(arr[i])) for i, v in enumerate(instance.valuations)])


def social_welfare(instance: Instance, x: Any) -> float:
    """SW(x) = sum_i v_i(x_i)."""
    return float(agent_values(instance, x).sum())


def effective_welfare(instance: Instance, x: Any) -> float:
    """EW(x) = sum_i min(v_i(x_i), c_i)."""
    budgets = np.asarray(instance.require_budgets())
    return float(np.minimum(agent_values(instance, x), budgets).sum())


def expected_values(instance: Instance, dist: Any) -> np.ndarray:
    """E[v_i(x_i(b))] per agent for a finite distribution over bid profiles."""
    total = np.zeros(instance.n)
    for b, w in zip(dist.support, dist.weights):
        total += w * agent_values(instance, allocation_of(instance, b))
    return total


def expected_social_welfare(instance: Instance, dist: Any) -> float:
    return float(expected_values(instance, dist).sum())


def expected_effective_welfare(instance: Instance, dist: Any) -> float:
    """sum_i min(E[v_i(x_i)], c_i); the cap applies after the expectation."""
    budgets = np.asarray(instance.require_budgets())
    return float(np.minimum(expected_values(instance, dist), budgets).sum())


def simplex_grid(n: int, k: int) -> np.ndarray:
    """All (k_1..k_n) >= 0 summing to k, in lexicographic order."""
    rows = [c + (k - sum(c),) for c in itertools.product(range(k + 1), repeat=n - 1) if sum(c) <= k]
    return np.array(rows, dtype=float).reshape(-1, n)


def _total_value(valuations: Sequence[Valuation], x: np.ndarray) -> np.ndarray:
    # x: (batch, n, d)
    return sum(v(x[:, i, :]) for i, v in enumerate(valuations))


def _enumerate_product(valuations: Sequence[Valuation], comps: np.ndarray, m: int, k: int):
    c = comps.shape[0]
    total = c ** m
    best_val, best_idx = -math.inf, 0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = np.empty((idx.size, m), dtype=np.int64)
        rem = idx.copy()
        for j in range(m - 1, -1, -1):
            digits[:, j] = rem % c
            rem //= c
        x = np.transpose(comps[digits] / k, (0, 2, 1))
        vals = _total_value(valuations, x)
        pos = int(np.argmax(vals))
        if vals[pos] > best_val:
            best_val, best_idx = float(vals[pos]), int(idx[pos])
    digits = []
    rem = best_idx
    for _ in range(m):
        digits.append(rem % c)
        rem //= c
    alloc = np.stack([comps[d] for d in reversed(digits)], axis=1) / k
    return best_val, alloc


def _optimal_standard(valuations: Sequence[Valuation], n: int, m: int, k: int, limit: int):
    comps = simplex_grid(n, k)
    if all(v.is_additive for v in valuations):
        # each resource is an independent problem
        alloc = np.zeros((n, m))
        for j in range(m):
            x = np.zeros((comps.shape[0], n, m))
            x[:, :, j] = comps / k
            vals = _total_value(valuations, x)
            alloc[:, j] = comps[int(np.argmax(vals))] / k
        return float(sum(v(alloc[i]) for i, v in enumerate(valuations))), alloc, "additive-grid"
    count = comps.shape[0] ** m
    if count > limit:
        raise EnumerationLimitError(f"{count} grid allocations exceed the limit {limit} (n={n}, m={m}, K={k})")
    value, alloc = _enumerate_product(valuations, comps, m, k)
    return value, alloc, "grid"


def _optimal_polyhedral(instance: Instance, valuations: Sequence[Valuation], k: int, limit: int, tol: float):
    n = instance.n
    count = (k + 1) ** n
    if count > limit:
        raise EnumerationLimitError(f"{count} grid allocations exceed the limit {limit} (n={n}, K={k})")
    levels = np.arange(k + 1) / k
    best_val, best_x = -math.inf, np.zeros(n)
    a = instance.constraint_matrix
    for start in range(0, count, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, count), dtype=np.int64)
        digits = np.empty((idx.size, n), dtype=np.int64)
        rem = idx.copy()
        for i in range(n - 1, -1, -1):
            digits[:, i] = rem % (k + 1)
            rem //= k + 1
        x = levels[digits]
        feasible = np.all(x @ a.T <= 1.0 + tol, axis=1)
        if not feasible.any():
            continue
        x = x[feasible]
        vals = _total_value(valuations, x[:, :, None])
        pos = int(np.argmax(vals))
        if vals[pos] > best_val:
            best_val, best_x = float(vals[pos]), x[pos]
    return best_val, best_x[:, None], "grid"


def optimal_welfare(instance: Instance, resolution: Optional[int] = None, mode: str = SOCIAL) -> WelfareReport:
    """Best allocation on the K-grid; exact whenever an optimum lies on the grid.

    Ties go to the first allocation in lexicographic order of the per-resource
    compositions (resource 0 most significant), so the answer does not depend
    on chunking.
    """
    settings = get_settings()
    k = resolution or settings.grid_resolution
    if k < 1:
        raise SearchConfigError("grid resolution must be >= 1")
    valuations = instance.truncated().valuations if mode == EFFECTIVE else instance.valuations
    if instance.is_polyhedral:
        value, alloc, method = _optimal_polyhedral(instance, valuations, k, settings.enumeration_limit,
                                                   settings.feasibility_tol)
    else:
        value, alloc, method = _optimal_standard(valuations, instance.n, instance.m, k, settings.enumeration_limit)
    if not math.isfinite(value):
        raise InfeasibleAllocationError(f"no feasible grid allocation for {instance.name}")
    logger.debug(f"optimal {mode} welfare of {instance.name} on K={k}: {value:.6g} ({method})")
    return WelfareReport(value=value, allocation=alloc, resolution=k, mode=mode, method=method)
