"""Valuation families over fractional allocations.

Every valuation maps an allocation vector in [0,1]^d to a nonnegative real,
is normalized (v(0) = 0) and monotone. Evaluation is vectorized over leading
axes: an array of shape (..., d) yields values of shape (...).
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, fields
from typing import Any, Callable, ClassVar, Dict, Optional, Tuple, Type

import numpy as np

from common.errors import ValuationDomainError, ValuationSpecError

JsonDict = Dict[str, Any]

DOMAIN_TOL = 1e-12

_FAMILIES: Dict[str, Type["Valuation"]] = {}


def register(family: str) -> Callable[[Type["Valuation"]], Type["Valuation"]]:
    def wrap(cls: Type["Valuation"]) -> Type["Valuation"]:
        cls.family = family
        _FAMILIES[family] = cls
        return cls
    return wrap


class Valuation(ABC):
    family: ClassVar[str] = "abstract"
    # None means "any dimension"
    dim: Optional[int] = None
    is_additive: ClassVar[bool] = False

    def __call__(self, x: Any) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if self.dim is not None and arr.shape[-1] != self.dim:
            raise ValuationDomainError(f"{self.family} expects dimension {self.dim}, got {arr.shape[-1]}")
        if arr.size and (arr.min() < -DOMAIN_TOL or arr.max() > 1.0 + DOMAIN_TOL):
            raise ValuationDomainError(f"{self.family}: allocation coordinate outside [0,1]")
        return self._evaluate(np.clip(arr, 0.0, 1.0))

    @abstractmethod
    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        ...

    def value(self, x: Any) -> float:
        return float(self(x))

    def max_value(self, dim: int) -> float:
        return float(self(np.ones(self.dim or dim)))

    def to_dict(self) -> JsonDict:
        params: JsonDict = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, Valuation):
                val = val.to_dict()
            elif isinstance(val, tuple):
                val = [c.to_dict() if isinstance(c, ConcaveCurve) else c for c in val]
            params[f.name] = val
        return {"family": self.family, **params}


@dataclass(frozen=True)
class ConcaveCurve:
    """Concave piecewise-linear curve on [0,1] through (breakpoints[k], values[k])."""
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp.ndim != 1 or bp.shape != vals.shape or bp.size < 2:
            raise ValuationSpecError("curve needs matching breakpoints/values with at least two points")
        if bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise ValuationSpecError("breakpoints must increase strictly from 0 to 1")
        if vals[0] != 0.0:
            raise ValuationSpecError("curve must pass through the origin")
        slopes = np.diff(vals) / np.diff(bp)
        if np.any(slopes < -DOMAIN_TOL):
            raise ValuationSpecError("curve must be nondecreasing")
        if np.any(np.diff(slopes) > 1e-9):
            raise ValuationSpecError("curve slopes must be nonincreasing (concavity)")

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(np.asarray(self.values)) / np.diff(np.asarray(self.breakpoints))

    def __call__(self, t: np.ndarray) -> np.ndarray:
        return np.interp(t, self.breakpoints, self.values)

    def to_dict(self) -> JsonDict:
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}

    @classmethod
    def from_slopes(cls, breakpoints, slopes) -> "ConcaveCurve":
        bp = np.asarray(breakpoints, dtype=float)
        vals = np.concatenate([[0.0], np.cumsum(np.asarray(slopes, dtype=float) * np.diff(bp))])
        return cls(tuple(float(b) for b in bp), tuple(float(v) for v in vals))


@register("linear")
@dataclass(frozen=True)
class Linear(Valuation):
    weights: Tuple[float, ...]
    is_additive: ClassVar[bool] = True

    def __post_init__(self):
        if len(self.weights) == 0 or any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ValuationSpecError("linear weights must be nonnegative and finite")

    @property
    def dim(self) -> int:  # type: ignore[override]
        return len(self.weights)

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        return x @ np.asarray(self.weights, dtype=float)


@register("additive_concave")
@dataclass(frozen=True)
class AdditiveConcavePiecewise(Valuation):
    curves: Tuple[ConcaveCurve, ...]
    is_additive: ClassVar[bool] = True

    def __post_init__(self):
        if len(self.curves) == 0:
            raise ValuationSpecError("need one curve per resource")

    @property
    def dim(self) -> int:  # type: ignore[override]
        return len(self.curves)

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        total = np.zeros(x.shape[:-1])
        for j, curve in enumerate(self.curves):
            total = total + curve(x[..., j])
        return total


@register("min_coordinate")
@dataclass(frozen=True)
class MinCoordinate(Valuation):
    scale: float = 1.0

    def __post_init__(self):
        if self.scale < 0:
            raise ValuationSpecError("scale must be nonnegative")

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.scale * x.min(axis=-1)


@register("scaled_coordinate")
@dataclass(frozen=True)
class ScaledCoordinate(Valuation):
    resource: int
    scale: float = 1.0
    is_additive: ClassVar[bool] = True

    def __post_init__(self):
        if self.resource < 0 or self.scale < 0:
            raise ValuationSpecError("resource index and scale must be nonnegative")

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] <= self.resource:
            raise ValuationDomainError(f"resource {self.resource} missing from allocation of size {x.shape[-1]}")
        return self.scale * x[..., self.resource]


def _check_threshold(h: float, level: float) -> None:
    if not 0.0 < h <= 1.0:
        raise ValuationSpecError("threshold h must lie in (0, 1]")
    if level < 0:
        raise ValuationSpecError("threshold value must be nonnegative")


@register("threshold_low")
@dataclass(frozen=True)
class ThresholdLow(Valuation):
    """level if every coordinate is below h (and one is positive), twice level once any reaches h."""
    h: float
    level: float

    def __post_init__(self):
        _check_threshold(self.h, self.level)

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        any_pos = (x > 0).any(axis=-1)
        reached = (x >= self.h).any(axis=-1)
        return np.where(reached, 2.0 * self.level, np.where(any_pos, self.level, 0.0))


@register("threshold_high")
@dataclass(frozen=True)
class ThresholdHigh(Valuation):
    """level if some coordinate is below h (and one is positive), twice level once all reach h."""
    h: float
    level: float

    def __post_init__(self):
        _check_threshold(self.h, self.level)

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        any_pos = (x > 0).any(axis=-1)
        reached = (x >= self.h).all(axis=-1)
        return np.where(reached, 2.0 * self.level, np.where(any_pos, self.level, 0.0))


@register("poly_jump")
@dataclass(frozen=True)
class PolyJump(Valuation):
    eps: float
    dim: ClassVar[int] = 1

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValuationSpecError("eps must lie in (0, 1)")

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        t = x[..., 0]
        return np.where(t >= 1.0, 2.0, np.where(t > 0, 1.0 + self.eps * t, 0.0))


@register("geometric_mean")
@dataclass(frozen=True)
class GeometricMean(Valuation):
    """sqrt(x1 * x2); concave and monotone but not subadditive."""
    dim: ClassVar[int] = 2

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.sqrt(x[..., 0] * x[..., 1])


@register("budget_truncated")
@dataclass(frozen=True)
class BudgetTruncated(Valuation):
    inner: Valuation
    cap: float

    def __post_init__(self):
        if not self.cap >= 0:
            raise ValuationSpecError("cap must be nonnegative")

    @property
    def dim(self) -> Optional[int]:  # type: ignore[override]
        return self.inner.dim

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(self.inner._evaluate(x), self.cap)


def truncate(v: Valuation, cap: float) -> Valuation:
    """v^c(x) = min(v(x), c)."""
    if not cap >= 0:
        raise ValuationSpecError("cap must be nonnegative")
    if isinstance(v, BudgetTruncated) and v.cap <= cap:
        return v
    if isinstance(v, BudgetTruncated):
        return BudgetTruncated(v.inner, float(cap))
    return BudgetTruncated(v, float(cap))


def valuation_from_dict(spec: JsonDict) -> Valuation:
    spec = dict(spec)
    family = spec.pop("family", None)
    cls = _FAMILIES.get(family or "")
    if cls is None:
        raise ValuationSpecError(f"unknown valuation family {family!r}")
    try:
        if cls is AdditiveConcavePiecewise:
            curves = tuple(ConcaveCurve(tuple(c["breakpoints"]), tuple(c["values"])) for c in spec["curves"])
            return cls(curves)
        if cls is BudgetTruncated:
            return cls(valuation_from_dict(spec["inner"]), float(spec["cap"]))
        if cls is Linear:
            return cls(tuple(float(w) for w in spec["weights"]))
        return cls(**spec)
    except (KeyError, TypeError) as e:
        raise ValuationSpecError(f"bad parameters for {family}: {e}") from e


def shipped_families(dim: int = 2) -> Dict[str, Valuation]:
    """One representative of each family, used by the property suites."""
    curve = ConcaveCurve((0.0, 0.3, 1.0), (0.0, 0.6, 0.9))
    return {
        "linear": Linear(tuple([1.0] * dim)),
        "additive_concave": AdditiveConcavePiecewise(tuple([curve] * dim)),
        "min_coordinate": MinCoordinate(1.0),
        "scaled_coordinate": ScaledCoordinate(0, 0.5),
        "threshold_low": ThresholdLow(0.5, 0.3),
        "threshold_high": ThresholdHigh(0.5, 1.0),
        "poly_jump": PolyJump(0.2),
        "geometric_mean": GeometricMean(),
        "budget_truncated": truncate(ThresholdHigh(0.5, 1.0), 1.5),
    }
