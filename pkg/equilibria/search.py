"""Grid search for best responses against a weighted set of opponent prices.

Every verifier, best-response routine and diagnostic goes through
`UtilityOracle` + `search`, so a profile's deviation gain is computed the
same way whatever the equilibrium notion.
"""
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from loguru import logger
from scipy.optimize import minimize_scalar

from common.errors import SearchConfigError
from equilibria.profiles import SearchConfig
from mechanism.allocation import agent_shares
from mechanism.instance import Instance
from mechanism.valuations import Valuation

_CHUNK_ELEMS = 4_000_000


class UtilityOracle:
    """Expected utility of agent i for candidate bid vectors.

    `prices` holds opponent bid totals, one row per scenario, and `weights`
    their probabilities (uniform 1/s for Monte-Carlo draws).
    """

    def __init__(self, instance: Instance, i: int, prices: np.ndarray, weights: Optional[np.ndarray] = None,
                 valuation: Optional[Valuation] = None):
        self.instance = instance
        self.i = i
        self.valuation = valuation or instance.valuations[i]
        self.prices = np.atleast_2d(np.asarray(prices, dtype=float))
        s = self.prices.shape[0]
        self.weights = np.full(s, 1.0 / s) if weights is None else np.asarray(weights, dtype=float)
        self.evaluations = 0

    @property
    def m(self) -> int:
        return self.prices.shape[1]

    def __call__(self, bids: np.ndarray) -> np.ndarray:
        bids = np.atleast_2d(np.asarray(bids, dtype=float))
        k, s = bids.shape[0], self.prices.shape[0]
        self.evaluations += k
        expected = np.zeros(k)
        per_sample = max(1, min(s, _CHUNK_ELEMS // max(1, self.m)))
        per_cand = max(1, _CHUNK_ELEMS // (per_sample * max(1, self.m)))
        for c0 in range(0, k, per_cand):
            block = bids[c0:c0 + per_cand]
            for s0 in range(0, s, per_sample):
                shares = agent_shares(self.instance, self.i, block[:, None, :], self.prices[None, s0:s0 + per_sample])
                expected[c0:c0 + per_cand] += self.valuation(shares) @ self.weights[s0:s0 + per_sample]
        return expected - bids.sum(axis=1)

    def utility_samples(self, bid: np.ndarray) -> np.ndarray:
        """Per-scenario utility of one bid vector, shape (s,)."""
        bid = np.asarray(bid, dtype=float)
        out = np.empty(self.prices.shape[0])
        per_sample = max(1, _CHUNK_ELEMS // max(1, self.m))
        for s0 in range(0, out.size, per_sample):
            shares = agent_shares(self.instance, self.i, bid[None, :], self.prices[s0:s0 + per_sample])
            out[s0:s0 + per_sample] = self.valuation(shares)
        return out - bid.sum()


@dataclass
class SearchResult:
    bid: np.ndarray
    utility: float
    incumbent_utility: float
    mode: str
    evaluations: int

    @property
    def gain(self) -> float:
        return self.utility - self.incumbent_utility


def default_upper(valuation: Valuation, dim: int, budget: float) -> float:
    # bidding more than v(1) in total can never pay off
    cap = valuation.max_value(dim)
    return float(min(cap, budget)) if math.isfinite(budget) else float(cap)


def resolve_mode(cfg: SearchConfig, oracle: UtilityOracle, budget: float) -> str:
    if cfg.mode != "auto":
        return cfg.mode
    if oracle.valuation.is_additive and not math.isfinite(budget) and not oracle.instance.is_polyhedral:
        return "coordinate"
    return "joint" if oracle.m <= 2 else "coordinate"


class _Search:
    def __init__(self, oracle: UtilityOracle, cfg: SearchConfig, budget: float, lo: np.ndarray, up: np.ndarray):
        self.oracle = oracle
        self.cfg = cfg
        self.budget = budget
        self.lo = lo
        self.up = up
        self.best = None
        self.best_u = -math.inf

    def _feasible(self, cand: np.ndarray) -> np.ndarray:
        if not math.isfinite(self.budget):
            return cand
        return cand[cand.sum(axis=1) <= self.budget + 1e-12]

    def offer(self, cand: np.ndarray) -> bool:
        cand = self._feasible(np.atleast_2d(cand))
        if cand.shape[0] == 0:
            return False
        u = self.oracle(cand)
        k = int(np.argmax(u))
        if u[k] > self.best_u + self.cfg.improvement_tol:
            self.best, self.best_u = cand[k].copy(), float(u[k])
            return True
        return False

    def _axis(self, j: int, center: Optional[float], half: Optional[float], step: Optional[float]) -> np.ndarray:
        if center is None:
            return self.cfg.axis(self.lo[j], self.up[j])
        return self.cfg.axis(max(self.lo[j], center - half), min(self.up[j], center + half), step)

    def joint(self, half: Optional[float] = None, step: Optional[float] = None) -> None:
        center = self.best
        axes = [self._axis(j, None if half is None else center[j], half, step) for j in range(self.oracle.m)]
        count = math.prod(len(a) for a in axes)
        if count > self.cfg.max_candidates:
            raise SearchConfigError(f"joint grid of {count} points exceeds {self.cfg.max_candidates}; "
                                    f"use coordinate or structured mode")
        grid = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, self.oracle.m)
        self.offer(grid)

    def coordinate(self, half: Optional[float] = None, step: Optional[float] = None) -> None:
        for sweep in range(self.cfg.max_sweeps):
            improved = False
            for j in range(self.oracle.m):
                pts = self._axis(j, None if half is None else self.best[j], half, step)
                cand = np.repeat(self.best[None, :], len(pts), axis=0)
                cand[:, j] = pts
                improved |= self.offer(cand)
            if not improved:
                logger.debug(f"coordinate search settled after {sweep + 1} sweeps")
                return

    def _directions(self) -> np.ndarray:
        m = self.oracle.m
        resources = self.cfg.resources if self.cfg.resources is not None else range(m)
        eye = np.eye(m)
        return np.vstack([eye[list(resources)], np.ones((1, m))])

    def structured(self, half: Optional[float] = None, step: Optional[float] = None) -> None:
        if half is None or not np.any(self.best > 0):
            pts = self.cfg.axis(self.lo[0], self.up[0]) if half is None else self.cfg.axis(0.0, half, step)
            dirs = self._directions()
        else:
            scale = float(self.best.max())
            pts = self.cfg.axis(max(0.0, scale - half), min(scale + half, float(self.up.max())), step)
            dirs = (self.best / scale)[None, :]
        self.offer((pts[:, None, None] * dirs[None, :, :]).reshape(-1, self.oracle.m))

    def polish(self, mode: str, half: float) -> None:
        if mode == "structured" and np.any(self.best > 0):
            scale = float(self.best.max())
            direction = self.best / scale
            lines = [(direction, scale)]
        else:
            lines = []
            for j in range(self.oracle.m):
                e = np.zeros(self.oracle.m)
                e[j] = 1.0
                lines.append((e, float(self.best[j])))
        for direction, t0 in lines:
            base = self.best - t0 * direction
            a, b = max(0.0, t0 - half), t0 + half
            res = minimize_scalar(lambda t: -float(self.oracle(base + t * direction)[0]), bounds=(a, b),
                                  method="bounded", options={"xatol": 1e-13})
            if res.success:
                self.offer(base + float(res.x) * direction)


def search(oracle: UtilityOracle, cfg: SearchConfig, incumbent: Optional[np.ndarray] = None,
           budget: float = math.inf) -> SearchResult:
    """Coarse grid in the configured mode, then `refinement_rounds` rounds at step/10 around the best point.

    The incumbent is kept unless a candidate beats it by more than cfg.improvement_tol.
    """
    m = oracle.m
    lo, up = cfg.bounds(m, default_upper(oracle.valuation, oracle.instance.alloc_dim, budget))
    if math.isfinite(budget):
        up = np.minimum(up, budget)
    start = np.zeros(m) if incumbent is None else np.asarray(incumbent, dtype=float).copy()
    state = _Search(oracle, cfg, budget, lo, up)
    inc_u = float(oracle(start)[0])
    state.best, state.best_u = start, inc_u
    mode = resolve_mode(cfg, oracle, budget)
    run: Callable[..., None] = getattr(state, mode)
    run()
    step = cfg.step
    for _ in range(cfg.refinement_rounds):
        run(half=step, step=step / 10.0)
        step /= 10.0
    if cfg.polish:
        state.polish(mode, step)
    return SearchResult(bid=state.best, utility=state.best_u, incumbent_utility=inc_u, mode=mode,
                        evaluations=oracle.evaluations)
