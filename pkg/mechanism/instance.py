import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from common.errors import BidError, InstanceError, MissingBudgetError, ModeError
from mechanism.valuations import Valuation, truncate, valuation_from_dict

JsonDict = Dict[str, Any]


@dataclass(frozen=True)
class TieBreak:
    """How a resource (or constraint row) nobody bids on is handed out."""
    kind: str = "split"
    agent: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("split", "agent"):
            raise InstanceError(f"unknown tie-break kind {self.kind}")
        if self.kind == "agent" and (self.agent is None or self.agent < 0):
            raise InstanceError("to_agent tie-break needs a nonnegative agent index")

    @classmethod
    def split_equally(cls) -> "TieBreak":
        return cls("split")

    @classmethod
    def to_agent(cls, k: int) -> "TieBreak":
        return cls("agent", int(k))

    def shares(self, eligible: np.ndarray) -> np.ndarray:
        """Shares of a zero-bid column among agents flagged in `eligible`."""
        out = np.zeros(eligible.shape[0])
        if self.kind == "agent":
            if self.agent < eligible.shape[0] and eligible[self.agent]:
                out[self.agent] = 1.0
            return out
        count = int(eligible.sum())
        if count:
            out[eligible] = 1.0 / count
        return out

    def to_dict(self) -> JsonDict:
        return {"kind": self.kind, "agent": self.agent}


@dataclass(frozen=True, eq=False)
class Instance:
    """n agents competing for m divisible resources.

    In polyhedral mode `constraint_matrix` is an m x n matrix A, bids are
    indexed by its rows, and every valuation is single-variable.
    """
    m: int
    valuations: Tuple[Valuation, ...]
    budgets: Optional[Tuple[float, ...]] = None
    constraint_matrix: Optional[np.ndarray] = None
    tie_break: TieBreak = field(default_factory=TieBreak.split_equally)
    name: str = "instance"

    def __post_init__(self):
        object.__setattr__(self, "valuations", tuple(self.valuations))
        if self.n < 1 or self.m < 1:
            raise InstanceError(f"need n >= 1 and m >= 1, got n={self.n} m={self.m}")
        if self.budgets is not None:
            budgets = tuple(float(c) for c in self.budgets)
            if len(budgets) != self.n:
                raise InstanceError(f"expected {self.n} budgets, got {len(budgets)}")
            if any(c < 0 or math.isnan(c) for c in budgets):
                raise InstanceError("budgets must be nonnegative")
            object.__setattr__(self, "budgets", budgets)
        if self.constraint_matrix is not None:
            a = np.array(self.constraint_matrix, dtype=float)
            if a.ndim != 2 or a.shape != (self.m, self.n):
                raise InstanceError(f"constraint matrix must be {self.m}x{self.n}, got {a.shape}")
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise InstanceError("constraint matrix entries must be nonnegative and finite")
            a.setflags(write=False)
            object.__setattr__(self, "constraint_matrix", a)
            for i, v in enumerate(self.valuations):
                if v.dim not in (None, 1):
                    raise InstanceError(f"polyhedral agent {i} needs a single-variable valuation")
        else:
            for i, v in enumerate(self.valuations):
                if v.dim is not None and v.dim != self.m:
                    raise InstanceError(f"valuation of agent {i} has dimension {v.dim}, instance has m={self.m}")
        if self.tie_break.kind == "agent" and self.tie_break.agent >= self.n:
            raise InstanceError(f"tie-break agent {self.tie_break.agent} out of range")

    @property
    def n(self) -> int:
        return len(self.valuations)

    @property
    def is_polyhedral(self) -> bool:
        return self.constraint_matrix is not None

    @property
    def has_budgets(self) -> bool:
        return self.budgets is not None

    @property
    def alloc_dim(self) -> int:
        return 1 if self.is_polyhedral else self.m

    def require_budgets(self) -> Tuple[float, ...]:
        if self.budgets is None:
            raise MissingBudgetError(f"{self.name} has no budgets")
        return self.budgets

    def require_standard(self) -> None:
        if self.is_polyhedral:
            raise ModeError(f"{self.name} is polyhedral; standard-mode operation requested")

    def require_polyhedral(self) -> np.ndarray:
        if self.constraint_matrix is None:
            raise ModeError(f"{self.name} is not polyhedral")
        return self.constraint_matrix

    def budget(self, i: int) -> float:
        return math.inf if self.budgets is None else self.budgets[i]

    def validate_bids(self, b: Any) -> np.ndarray:
        arr = np.asarray(b, dtype=float)
        if arr.shape != (self.n, self.m):
            raise BidError(f"bid profile must be {self.n}x{self.m}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise BidError("bids must be finite")
        if np.any(arr < 0):
            raise BidError("bids must be nonnegative")
        return arr

    def with_valuations(self, valuations: Sequence[Valuation]) -> "Instance":
        return replace(self, valuations=tuple(valuations))

    def truncated(self) -> "Instance":
        """Same instance with every v_i replaced by min(v_i, c_i)."""
        budgets = self.require_budgets()
        return self.with_valuations([truncate(v, c) for v, c in zip(self.valuations, budgets)])

    def to_dict(self) -> JsonDict:
        return {
            "name": self.name,
            "m": self.m,
            "valuations": [v.to_dict() for v in self.valuations],
            "budgets": list(self.budgets) if self.budgets is not None else None,
            "constraint_matrix": self.constraint_matrix.tolist() if self.constraint_matrix is not None else None,
            "tie_break": self.tie_break.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: JsonDict) -> "Instance":
        try:
            tb = data.get("tie_break") or {}
            return cls(
                m=int(data["m"]),
                valuations=tuple(valuation_from_dict(v) for v in data["valuations"]),
                budgets=data.get("budgets"),
                constraint_matrix=data.get("constraint_matrix"),
                tie_break=TieBreak(tb.get("kind", "split"), tb.get("agent")),
                name=data.get("name", "instance"),
            )
        except KeyError as e:
            raise InstanceError(f"instance spec missing field {e}") from e
