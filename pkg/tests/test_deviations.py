import math

import numpy as np
import pytest

from common.errors import DeviationFeasibilityError, EnumerationLimitError, SearchConfigError
from constructions.polyhedral import build_polyhedral_lower_bound
from constructions.suites import build_budget_suite, build_subadditive_suite
from equilibria.deviations import budget_safe_bound, budget_safe_deviation, polyhedral_bound, \
    polyhedral_deviation, share_scaled_bound, share_scaled_deviation, truncate_prices, truncation_set
from equilibria.profiles import CorrelatedProfile
from mechanism.valuations import Linear, truncate
from mechanism.welfare import EFFECTIVE, optimal_welfare

PHI = (1 + math.sqrt(5)) / 2


class TestDeviationStrategies:

    def test_share_scaled_bids(self):
        dev = share_scaled_deviation(0, [0.5, 1.0], [[1.0, 2.0], [3.0, 4.0]])
        assert dev.bids == pytest.approx(np.array([[0.5, 2.0], [1.5, 4.0]]))
        assert dev.weights == pytest.approx([0.5, 0.5])

    def test_truncation_set_full(self):
        v = truncate(Linear((1.0, 1.0)), 0.5)
        assert truncation_set(v, [1.0, 1.0], [1.0, 1.0], lam=1.0) == frozenset({0, 1})

    def test_truncation_set_empty_when_prices_are_low(self):
        v = truncate(Linear((1.0, 1.0)), 0.5)
        assert truncation_set(v, [1.0, 1.0], [0.1, 0.1], lam=1.0) == frozenset()

    def test_truncation_set_partial(self):
        v = truncate(Linear((0.1, 1.0)), 5.0)
        # only resource 0 is priced above its own value
        assert truncation_set(v, [1.0, 1.0], [0.5, 0.2], lam=1.0) == frozenset({0})
        assert truncate_prices(v, [1.0, 1.0], [[0.5, 0.2]], lam=1.0) == pytest.approx(np.array([[0.0, 0.2]]))

    def test_truncation_needs_lambda_at_least_one(self):
        with pytest.raises(SearchConfigError):
            truncation_set(Linear((1.0,)), [1.0], [1.0], lam=0.5)

    def test_truncation_resource_limit(self):
        with pytest.raises(EnumerationLimitError):
            truncation_set(Linear(tuple([1.0] * 21)), np.ones(21), np.ones(21), lam=1.0)

    def test_budget_safe_deviation(self):
        dev = budget_safe_deviation(0, [1.0, 1.0], [[0.2, 0.3]], PHI, budget=0.5)
        assert dev.bids.sum() == pytest.approx(0.5 / PHI)

    def test_budget_safe_deviation_over_budget(self):
        with pytest.raises(DeviationFeasibilityError):
            budget_safe_deviation(0, [1.0, 1.0], [[0.2, 0.3]], PHI, budget=0.1)

    def test_polyhedral_deviation(self):
        instance, _, _ = build_polyhedral_lower_bound(0.2)
        dev = polyhedral_deviation(instance, 0, 0.5, [[0.2]])
        assert dev.bids == pytest.approx(np.array([[0.1]]))


class TestDeviationBounds:

    def test_share_scaled_bound_at_linear_equilibrium(self, two_linear):
        profile = CorrelatedProfile.point_mass([[2 / 9], [1 / 9]])
        lhs, rhs = share_scaled_bound(two_linear, profile, [[1.0], [0.0]], samples=100)
        assert lhs == pytest.approx(0.5 - 1 / 9)
        assert rhs == pytest.approx(0.5 - 1 / 3)
        assert lhs >= rhs

    def test_polyhedral_bound_at_construction(self):
        instance, bids, c = build_polyhedral_lower_bound(0.2)
        lhs, rhs = polyhedral_bound(instance, bids, [[1.0], [0.0]])
        assert np.all(lhs >= rhs - 1e-12)
        assert lhs[0] == pytest.approx(1.0 + 0.1 - 0.05)
        assert rhs[0] == pytest.approx(1.0 - 0.05)

    def test_budget_safe_deviations_stay_within_budget(self):
        rng = np.random.default_rng(0)
        for instance in build_budget_suite(seed=4, size=6):
            optimum = optimal_welfare(instance, resolution=10, mode=EFFECTIVE)
            support = rng.exponential(0.2, size=(5,) + (instance.n, instance.m))
            weights = rng.dirichlet(np.ones(5))
            profile = CorrelatedProfile(support, weights / weights.sum())
            lhs, rhs = budget_safe_bound(instance, profile, optimum.allocation, samples=200, seed=1)
            assert lhs.shape == rhs.shape == (instance.n,)

    def test_share_scaled_bound_on_subadditive_suite(self):
        rng = np.random.default_rng(2)
        for instance in build_subadditive_suite(seed=1, size=6):
            optimum = optimal_welfare(instance, resolution=20)
            profile = CorrelatedProfile.point_mass(rng.uniform(0.05, 0.5, size=(instance.n, instance.m)))
            lhs, rhs = share_scaled_bound(instance, profile, optimum.allocation, samples=50, seed=0)
            assert lhs >= rhs - 1e-9, instance.name

    def test_budget_safe_bound_on_budget_suite(self):
        rng = np.random.default_rng(3)
        for instance in build_budget_suite(seed=2, size=6):
            optimum = optimal_welfare(instance, resolution=10, mode=EFFECTIVE)
            spend = np.array([instance.budget(i) for i in range(instance.n)])[:, None]
            bids = rng.uniform(0.1, 0.9, size=(instance.n, instance.m)) * spend / instance.m
            lhs, rhs = budget_safe_bound(instance, CorrelatedProfile.point_mass(bids), optimum.allocation,
                                         samples=50, seed=0)
            assert lhs.sum() >= rhs.sum() - 0.02, instance.name
