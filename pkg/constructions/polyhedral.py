"""Two agents sharing one constraint x_0 + x_1 <= 1 with a pure equilibrium of welfare 1 + eps."""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from common.errors import InstanceError
from equilibria.profiles import SearchConfig
from mechanism.instance import Instance
from mechanism.valuations import Linear, PolyJump


@dataclass(frozen=True)
class PolyhedralLowerBound:
    eps: float

    @property
    def bid(self) -> float:
        return self.eps / 4.0

    @property
    def equilibrium_welfare(self) -> float:
        return 1.0 + self.eps

    @property
    def optimal_welfare(self) -> float:
        return 2.0

    @property
    def ratio(self) -> float:
        return self.optimal_welfare / self.equilibrium_welfare


def build_polyhedral_lower_bound(eps: float) -> Tuple[Instance, np.ndarray, PolyhedralLowerBound]:
    if not 0.0 < eps < 1.0:
        raise InstanceError(f"eps must lie in (0, 1), got {eps}")
    c = PolyhedralLowerBound(float(eps))
    instance = Instance(
        m=1,
        valuations=(PolyJump(c.eps), Linear((c.eps,))),
        constraint_matrix=np.array([[1.0, 1.0]]),
        name=f"poly-lb-eps{eps:g}",
    )
    return instance, np.array([[c.bid], [c.bid]]), c


def deviation_configs(c: PolyhedralLowerBound, step: float = 1e-5, rounds: int = 2) -> List[SearchConfig]:
    cfg = SearchConfig(upper=4 * c.bid, step=step, refinement_rounds=rounds, mode="joint")
    return [cfg, cfg]
