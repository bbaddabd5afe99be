"""Proportional allocation rule, its polyhedral variant, payments and utilities."""
from typing import Any

import numpy as np

from common.errors import InfeasibleAllocationError, InstanceError
from mechanism.instance import Instance

FEASIBILITY_TOL = 1e-12


def _tie_column(instance: Instance, row: int = -1) -> np.ndarray:
    if row < 0:
        eligible = np.ones(instance.n, dtype=bool)
    else:
        eligible = instance.constraint_matrix[row] > 0
    return instance.tie_break.shares(eligible)


def _proportional(b_i: np.ndarray, total: np.ndarray, tie_share: float) -> np.ndarray:
    positive = total > 0
    safe = np.where(positive, total, 1.0)
    return np.where(positive, b_i / safe, tie_share)


def _bottleneck(instance: Instance, i: int, b_i: np.ndarray, total: np.ndarray) -> np.ndarray:
    a_col = instance.constraint_matrix[:, i]
    rows = np.flatnonzero(a_col > 0)
    if rows.size == 0:
        raise InstanceError(f"agent {i} appears in no constraint row; polyhedral allocation undefined")
    x = np.full(np.broadcast_shapes(b_i.shape, total.shape)[:-1], np.inf)
    for r in rows:
        tie = _tie_column(instance, int(r))[i]
        share = _proportional(b_i[..., r], total[..., r], tie)
        x = np.minimum(x, share / a_col[r])
    return np.minimum(x, 1.0)


def allocate(instance: Instance, b: Any) -> np.ndarray:
    """x_ij = b_ij / sum_k b_kj; zero-bid columns go by the instance tie-break."""
    instance.require_standard()
    bids = instance.validate_bids(b)
    totals = bids.sum(axis=0)
    tie = _tie_column(instance)
    x = np.empty_like(bids)
    for i in range(instance.n):
        x[i] = _proportional(bids[i], totals, tie[i])
    return x


def allocate_polyhedral(instance: Instance, b: Any) -> np.ndarray:
    """x_i = min over rows j with a_ji > 0 of b_ij / (a_ji sum_k b_kj), capped at 1."""
    instance.require_polyhedral()
    bids = instance.validate_bids(b)
    totals = bids.sum(axis=0)
    return np.array([float(_bottleneck(instance, i, bids[i], totals)) for i in range(instance.n)])


def allocation_of(instance: Instance, b: Any) -> np.ndarray:
    """Per-agent allocation vectors, shape (n, alloc_dim), in either mode."""
    if instance.is_polyhedral:
        return allocate_polyhedral(instance, b)[:, None]
    return allocate(instance, b)


def agent_shares(instance: Instance, i: int, bids_i: Any, prices: Any) -> np.ndarray:
    """Allocation vector of agent i bidding bids_i against opponent bid totals `prices`.

    Both arguments broadcast over leading axes; the result has shape (..., alloc_dim)
    and matches allocate / allocate_polyhedral row i for the same profile.
    """
    b_i = np.asarray(bids_i, dtype=float)
    p = np.asarray(prices, dtype=float)
    total = b_i + p
    if instance.is_polyhedral:
        return _bottleneck(instance, i, b_i, total)[..., None]
    return _proportional(b_i, total, _tie_column(instance)[i])


def payments(b: Any) -> np.ndarray:
    return np.asarray(b, dtype=float).sum(axis=1)


def utility(instance: Instance, i: int, b: Any) -> float:
    """u_i(b) = v_i(x_i(b)) - q_i(b); may be negative."""
    bids = instance.validate_bids(b)
    x = allocation_of(instance, bids)
    return float(instance.valuations[i](x[i])) - float(bids[i].sum())


def utilities(instance: Instance, b: Any) -> np.ndarray:
    bids = instance.validate_bids(b)
    x = allocation_of(instance, bids)
    q = payments(bids)
    return np.array([float(v(x[i])) for i, v in enumerate(instance.valuations)]) - q


def check_feasible(instance: Instance, x: Any, tol: float = FEASIBILITY_TOL) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape != (instance.n, instance.alloc_dim):
        raise InfeasibleAllocationError(f"allocation must be {instance.n}x{instance.alloc_dim}, got {arr.shape}")
    if arr.min() < -tol or arr.max() > 1.0 + tol:
        raise InfeasibleAllocationError("allocation fractions must lie in [0,1]")
    if instance.is_polyhedral:
        load = instance.constraint_matrix @ arr[:, 0]
        if np.any(load > 1.0 + tol):
            raise InfeasibleAllocationError(f"A.x exceeds 1 on rows {np.flatnonzero(load > 1.0 + tol).tolist()}")
    elif np.any(arr.sum(axis=0) > 1.0 + tol):
        raise InfeasibleAllocationError("resource over-allocated")
    return arr
