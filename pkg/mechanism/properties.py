"""Sampling-based property checks for valuations.

Fixed corner pairs are always tested first, then seeded random pairs with
sparse supports so that boundary behavior (zero coordinates, threshold
edges) is hit often.
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from loguru import logger

from common.errors import SearchConfigError
from mechanism.valuations import Valuation

JsonDict = Dict[str, Any]

HOLDS = "holds-on-samples"
VIOLATED = "violated"

DEFAULT_TOL = 1e-9
SPARSITY = 0.3


@dataclass
class PropertyReport:
    property: str
    family: str
    verdict: str
    samples: int
    tolerance: float
    witness: Optional[Tuple[np.ndarray, np.ndarray]] = None
    gap: float = 0.0

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def reevaluate(self, v: Valuation) -> bool:
        """True when the stored witness is still a violation of the property."""
        if self.witness is None:
            return False
        x, y = self.witness
        if self.property == "subadditive":
            return bool(v(x + y) > v(x) + v(y) + self.tolerance)
        if self.property == "monotone":
            return bool(v(x) > v(y) + self.tolerance)
        return bool(abs(float(v(x))) > self.tolerance)

    def to_dict(self) -> JsonDict:
        return {
            "property": self.property,
            "family": self.family,
            "verdict": self.verdict,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "gap": self.gap,
            "witness": None if self.witness is None else [w.tolist() for w in self.witness],
        }


def _dim(v: Valuation, dim: Optional[int]) -> int:
    return v.dim or dim or 2


def _sparse_uniform(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    u = rng.random((count, d))
    return np.where(rng.random((count, d)) < SPARSITY, 0.0, u)


def _subadditive_pairs(rng: np.random.Generator, count: int, d: int) -> Tuple[np.ndarray, np.ndarray]:
    eye = np.eye(d)
    xs = [eye[j] for j in range(d) for k in range(d) if j != k]
    ys = [eye[k] for j in range(d) for k in range(d) if j != k]
    xs += [np.full(d, 0.5), np.ones(d), np.zeros(d)]
    ys += [np.full(d, 0.5), np.zeros(d), np.ones(d)]
    fixed_x, fixed_y = np.array(xs), np.array(ys)
    rest = max(count - len(xs), 0)
    x = _sparse_uniform(rng, rest, d)
    y = _sparse_uniform(rng, rest, d) * (1.0 - x)
    return np.vstack([fixed_x, x])[:count], np.vstack([fixed_y, y])[:count]


def _monotone_pairs(rng: np.random.Generator, count: int, d: int) -> Tuple[np.ndarray, np.ndarray]:
    eye = np.eye(d)
    lo = [np.zeros(d)] * d + [np.zeros(d)] + [eye[j] for j in range(d)] + [np.full(d, 0.5)]
    hi = [eye[j] for j in range(d)] + [np.ones(d)] + [np.ones(d)] * d + [np.ones(d)]
    fixed_lo, fixed_hi = np.array(lo), np.array(hi)
    rest = max(count - len(lo), 0)
    x = _sparse_uniform(rng, rest, d)
    step = _sparse_uniform(rng, rest, d) * (1.0 - x)
    return np.vstack([fixed_lo, x])[:count], np.vstack([fixed_hi, np.minimum(x + step, 1.0)])[:count]


def _report(name: str, v: Valuation, gaps: np.ndarray, x: np.ndarray, y: np.ndarray, tol: float) -> PropertyReport:
    bad = np.flatnonzero(gaps > tol)
    if bad.size == 0:
        logger.debug(f"{v.family}: {name} holds on {len(gaps)} samples")
        return PropertyReport(name, v.family, HOLDS, len(gaps), tol, gap=float(gaps.max(initial=0.0)))
    k = int(bad[0])
    logger.info(f"{v.family}: {name} violated at sample {k} (gap {gaps[k]:.3g})")
    return PropertyReport(name, v.family, VIOLATED, len(gaps), tol, witness=(x[k].copy(), y[k].copy()),
                          gap=float(gaps[k]))


def check_subadditive(v: Valuation, samples: int = 10_000, seed: int = 0, tol: float = DEFAULT_TOL,
                      dim: Optional[int] = None) -> PropertyReport:
    """First pair with v(x+y) > v(x) + v(y) + tol, x + y inside the unit box."""
    if samples < 1:
        raise SearchConfigError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    x, y = _subadditive_pairs(rng, samples, _dim(v, dim))
    gaps = v(np.minimum(x + y, 1.0)) - v(x) - v(y)
    return _report("subadditive", v, gaps, x, y, tol)


def check_monotone(v: Valuation, samples: int = 10_000, seed: int = 0, tol: float = DEFAULT_TOL,
                   dim: Optional[int] = None) -> PropertyReport:
    """First ordered pair x <= x' with v(x) > v(x') + tol."""
    if samples < 1:
        raise SearchConfigError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = _monotone_pairs(rng, samples, _dim(v, dim))
    gaps = v(lo) - v(hi)
    return _report("monotone", v, gaps, lo, hi, tol)


def check_normalized(v: Valuation, dim: Optional[int] = None, tol: float = DEFAULT_TOL) -> PropertyReport:
    zero = np.zeros((1, _dim(v, dim)))
    gaps = np.abs(v(zero))
    return _report("normalized", v, gaps, zero, zero, tol)
