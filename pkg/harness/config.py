from typing import Any, Dict, Literal, Optional

import orjson
from pydantic import BaseModel, Field

JsonDict = Dict[str, Any]

ScenarioKind = Literal[
    "bayesian-lb", "thm1", "scalefree", "poly-lb", "budget-suite", "concave-suite", "polyhedral-suite",
    "subadditive-suite", "bayesian-budget",
]


class SolverSpec(BaseModel):
    kind: Optional[Literal["br", "hedge", "none"]] = None
    rounds: Optional[int] = Field(None, ge=1)
    grid_step: float = Field(0.01, gt=0)
    schedule: Literal["fixed", "anytime"] = "fixed"
    # eps tolerance: residual bid change for br, regret/T for hedge
    tolerance: Optional[float] = Field(None, gt=0)


class VerifierSpec(BaseModel):
    kind: Optional[Literal["pure", "mixed", "bayesian", "cce", "none"]] = None
    grid_step: Optional[float] = Field(None, gt=0)
    refinement_rounds: Optional[int] = Field(None, ge=0)
    samples: int = Field(100_000, ge=1)
    tolerance: Optional[float] = Field(None, gt=0)


class ScenarioConfig(BaseModel):
    """One scenario run: what to build, how to solve and verify it, and where the reports go."""
    scenario_id: str
    kind: ScenarioKind
    m: int = Field(4, ge=1)
    eps: float = Field(0.01, gt=0, lt=1)
    V: float = Field(1.0, gt=0)
    suite_size: Optional[int] = Field(None, ge=1)
    suite_index: Optional[int] = Field(None, ge=0)
    mechanism: Optional[Literal["proportional", "polyhedral"]] = None
    solver: SolverSpec = Field(default_factory=SolverSpec)
    verifier: VerifierSpec = Field(default_factory=VerifierSpec)
    resolution: Optional[int] = Field(None, ge=1)
    benchmark: Literal["social", "effective"] = "social"
    seed: int = 0
    output: Optional[str] = None
    format: Literal["csv", "json"] = "csv"

    def dump(self) -> bytes:
        return self.model_dump_json().encode()

    @classmethod
    def load(cls, raw: bytes) -> "ScenarioConfig":
        return cls.model_validate_json(raw)


def load_configs(raw: bytes) -> list[ScenarioConfig]:
    """A config file holds either one scenario object or a list of them."""
    data = orjson.loads(raw)
    items = data if isinstance(data, list) else [data]
    return [ScenarioConfig.model_validate(item) for item in items]
