"""Mixed equilibrium with threshold valuations whose welfare ratio tends to 2.

Agent 0 picks one resource uniformly and bids y ~ G on it; agent 1 bids a
common z ~ F on every resource, with an atom of mass 1 - 1/sqrt(m) at 0.
Zero columns go to agent 1, so whenever agent 1 bids 0 she still holds the
m - 1 resources agent 0 left alone.
"""
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from common.errors import InstanceError
from equilibria.profiles import MixedProfile, SamplerStrategy, SearchConfig
from mechanism.instance import Instance, TieBreak
from mechanism.valuations import ThresholdHigh, ThresholdLow

THRESHOLD = 0.5


@dataclass(frozen=True)
class ScaleFree:
    m: int
    V: float
    zero_atom: bool = True

    @property
    def v(self) -> float:
        return self.V / math.sqrt(self.m)

    @property
    def top(self) -> float:
        """Largest bid either agent ever places, V/m."""
        return self.V / self.m

    @property
    def atom(self) -> float:
        return 1.0 - 1.0 / math.sqrt(self.m) if self.zero_atom else 0.0

    def F(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        inside = (self.v - self.top + z) / self.v if self.zero_atom else z / self.top
        return np.where(z < 0, 0.0, np.where(z >= self.top, 1.0, inside))

    def G(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.clip(y / self.top, 0.0, 1.0)

    def F_inverse(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if not self.zero_atom:
            return u * self.top
        return np.where(u < self.atom, 0.0, np.maximum(self.top - self.v * (1.0 - u), 0.0))

    def G_inverse(self, u) -> np.ndarray:
        return np.asarray(u, dtype=float) * self.top

    def sample_agent0(self, rng: np.random.Generator, size: int) -> np.ndarray:
        bids = np.zeros((size, self.m))
        resource = rng.integers(0, self.m, size=size)
        bids[np.arange(size), resource] = self.G_inverse(rng.random(size))
        return bids

    def sample_agent1(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.repeat(self.F_inverse(rng.random(size))[:, None], self.m, axis=1)

    @property
    def optimal_welfare(self) -> float:
        return 2.0 * (self.V + self.v)

    @property
    def welfare_cap(self) -> float:
        return self.V * (1.0 + 3.0 / math.sqrt(self.m))

    @property
    def bound(self) -> float:
        root = math.sqrt(self.m)
        return 2.0 * (1.0 + 1.0 / root) / (1.0 + 3.0 / root)

    @property
    def agent0_utility(self) -> float:
        return 2.0 * self.v - self.top


def build_scale_free(m: int, V: float = 1.0, zero_atom: bool = True) -> Tuple[Instance, MixedProfile, ScaleFree]:
    if m < 2:
        raise InstanceError(f"m must be >= 2, got {m}")
    if not V > 0:
        raise InstanceError(f"V must be positive, got {V}")
    c = ScaleFree(m, float(V), zero_atom)
    instance = Instance(
        m=m,
        valuations=(ThresholdLow(THRESHOLD, c.v), ThresholdHigh(THRESHOLD, c.V)),
        tie_break=TieBreak.to_agent(1),
        name=f"scalefree-m{m}" + ("" if zero_atom else "-no-atom"),
    )
    profile = MixedProfile((SamplerStrategy(c.sample_agent0, "G"), SamplerStrategy(c.sample_agent1, "F")))
    return instance, profile, c


def deviation_configs(c: ScaleFree, points: int = 10) -> List[SearchConfig]:
    """Single-resource and uniform bids up to 2 V/m.

    Resources are exchangeable, so one interior and the last resource stand
    in for every single-resource direction.
    """
    cfg = SearchConfig(upper=2 * c.top, step=c.top / points, refinement_rounds=0, mode="structured",
                       resources=(0, c.m - 1), tolerance=0.01)
    return [cfg, cfg]


def cdf_distance(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance between samples and a CDF that may have atoms."""
    x = np.sort(np.asarray(samples, dtype=float))
    values, counts = np.unique(x, return_counts=True)
    n = x.size
    upto = np.cumsum(counts) / n
    below = upto - counts / n
    right = np.abs(upto - cdf(values))
    left = np.abs(below - cdf(np.nextafter(values, -np.inf)))
    return float(max(right.max(), left.max()))
