import math

import numpy as np
import pytest

from common.errors import EnumerationLimitError, InfeasibleAllocationError, MissingBudgetError, SearchConfigError
from constructions.bayesian_lower_bound import build_bayesian_lower_bound
from constructions.polyhedral import build_polyhedral_lower_bound
from equilibria.profiles import CorrelatedProfile
from mechanism.allocation import allocate, allocation_of
from mechanism.instance import Instance
from mechanism.valuations import Linear, MinCoordinate, ThresholdHigh, ThresholdLow
from mechanism.welfare import EFFECTIVE, effective_welfare, expected_effective_welfare, expected_social_welfare, \
    optimal_welfare, simplex_grid, social_welfare


def _random_feasible(rng, n, m, k):
    comps = simplex_grid(n, k)
    return np.stack([comps[rng.integers(0, comps.shape[0])] for _ in range(m)], axis=1) / k


class TestSocialWelfare:

    def test_bayesian_construction_type_profile(self):
        base, types, strategies, c = build_bayesian_lower_bound(4)
        realized = types.realize(base, (0, 2))
        bids = np.vstack([strategies.strategies[0][0].bids[0], strategies.strategies[1][2].bids[0]])
        assert social_welfare(realized, allocate(realized, bids)) == pytest.approx(2 / 3)
        assert c.equilibrium_welfare == pytest.approx(2 / 3)

    def test_polyhedral_construction(self):
        instance, bids, _ = build_polyhedral_lower_bound(0.2)
        assert social_welfare(instance, allocation_of(instance, bids)) == pytest.approx(1.2)

    def test_zero_allocation(self):
        instance = Instance(m=2, valuations=(ThresholdLow(0.5, 1.0), MinCoordinate(1.0)))
        assert social_welfare(instance, np.zeros((2, 2))) == 0.0

    def test_infeasible_allocation(self, two_linear):
        with pytest.raises(InfeasibleAllocationError):
            social_welfare(two_linear, [[0.8], [0.8]])


class TestEffectiveWelfare:

    def test_single_agent_capped(self):
        instance = Instance(m=1, valuations=(Linear((1.5,)),), budgets=(1.0,))
        assert effective_welfare(instance, [[1.0]]) == pytest.approx(1.0)

    def test_componentwise_min(self):
        instance = Instance(m=2, valuations=(Linear((0.3, 0.0)), Linear((0.0, 0.9))), budgets=(0.5, 0.5))
        assert effective_welfare(instance, [[1.0, 0.0], [0.0, 1.0]]) == pytest.approx(0.8)

    def test_infinite_budgets_match_social_welfare(self):
        instance = Instance(m=2, valuations=(Linear((0.3, 0.7)), Linear((0.5, 0.9))), budgets=(math.inf, math.inf))
        x = [[0.4, 0.1], [0.6, 0.9]]
        assert effective_welfare(instance, x) == pytest.approx(social_welfare(instance, x))

    def test_bounded_by_social_welfare_and_budgets(self):
        rng = np.random.default_rng(0)
        instance = Instance(m=2, valuations=(Linear((0.8, 0.4)), ThresholdHigh(0.5, 0.6), ThresholdLow(0.5, 0.2)),
                            budgets=(0.3, 0.7, 0.1))
        for _ in range(200):
            x = _random_feasible(rng, 3, 2, 10)
            ew = effective_welfare(instance, x)
            assert ew <= social_welfare(instance, x) + 1e-12
            assert ew <= sum(instance.budgets) + 1e-12

    def test_missing_budgets(self, two_linear):
        with pytest.raises(MissingBudgetError):
            effective_welfare(two_linear, [[1.0], [0.0]])


class TestExpectedWelfare:

    def _instance(self, budget=0.5):
        return Instance(m=1, valuations=(Linear((2.0,)), Linear((0.0,))), budgets=(budget, budget))

    def test_cap_applies_after_expectation(self):
        dist = CorrelatedProfile(np.array([[[1.0], [0.0]], [[0.0], [1.0]]]), np.array([0.5, 0.5]))
        assert expected_effective_welfare(self._instance(), dist) == pytest.approx(0.5)

    def test_point_mass_matches_effective_welfare(self):
        instance = self._instance()
        b = np.array([[0.3], [0.1]])
        dist = CorrelatedProfile.point_mass(b)
        assert expected_effective_welfare(instance, dist) == pytest.approx(
            effective_welfare(instance, allocate(instance, b)))

    def test_large_budget_matches_expected_social_welfare(self):
        instance = self._instance(budget=10.0)
        dist = CorrelatedProfile(np.array([[[1.0], [0.0]], [[1.0], [3.0]]]), np.array([0.25, 0.75]))
        assert expected_effective_welfare(instance, dist) == pytest.approx(expected_social_welfare(instance, dist))
        assert expected_social_welfare(instance, dist) == pytest.approx(0.25 * 2.0 + 0.75 * 0.5)

    def test_dominates_expected_capped_welfare(self):
        rng = np.random.default_rng(1)
        instance = Instance(m=1, valuations=(Linear((1.0,)), Linear((0.6,))), budgets=(0.4, 0.3))
        for _ in range(1000 // 10):
            k = int(rng.integers(1, 5))
            support = rng.exponential(size=(k, 2, 1))
            weights = rng.dirichlet(np.ones(k))
            dist = CorrelatedProfile(support, weights / weights.sum())
            capped = sum(w * effective_welfare(instance, allocate(instance, b)) for b, w in zip(support, dist.weights))
            assert expected_effective_welfare(instance, dist) >= capped - 1e-12


class TestOptimalWelfare:

    def test_bayesian_construction_optimum(self):
        base, types, _, _ = build_bayesian_lower_bound(4)
        report = optimal_welfare(types.realize(base, (0, 1)), resolution=2)
        assert report.value == pytest.approx(1.0)
        assert report.allocation[0] == pytest.approx(np.ones(4))

    def test_dominant_slope(self, two_linear):
        for k in (1, 5, 20):
            report = optimal_welfare(two_linear, resolution=k)
            assert report.value == pytest.approx(1.0)
            assert report.allocation == pytest.approx(np.array([[1.0], [0.0]]))
            assert report.method == "additive-grid"

    def test_polyhedral_optimum(self):
        instance, _, c = build_polyhedral_lower_bound(0.2)
        report = optimal_welfare(instance, resolution=20)
        assert report.value == pytest.approx(c.optimal_welfare)
        assert np.all(instance.constraint_matrix @ report.allocation[:, 0] <= 1.0 + 1e-12)

    def test_value_matches_allocation(self):
        instance = Instance(m=2, valuations=(ThresholdLow(0.5, 0.4), ThresholdHigh(0.5, 1.0)))
        report = optimal_welfare(instance, resolution=10)
        assert report.value == pytest.approx(social_welfare(instance, report.allocation), abs=1e-12)
        assert report.value == pytest.approx(2.4)

    def test_dominates_random_grid_allocations(self):
        rng = np.random.default_rng(2)
        instance = Instance(m=2, valuations=(ThresholdLow(0.5, 0.3), MinCoordinate(1.0), Linear((0.2, 0.5))))
        report = optimal_welfare(instance, resolution=6)
        for _ in range(1000):
            assert report.value >= social_welfare(instance, _random_feasible(rng, 3, 2, 6)) - 1e-12

    def test_ties_go_to_first_allocation(self):
        instance = Instance(m=1, valuations=(Linear((1.0,)), Linear((1.0,))))
        report = optimal_welfare(instance, resolution=4)
        assert report.allocation == pytest.approx(np.array([[0.0], [1.0]]))

    def test_effective_mode_uses_caps(self):
        instance = Instance(m=1, valuations=(Linear((1.0,)), Linear((0.5,))), budgets=(0.2, 1.0))
        report = optimal_welfare(instance, resolution=10, mode=EFFECTIVE)
        assert report.value == pytest.approx(0.2 + 0.4)
        assert report.mode == EFFECTIVE

    def test_enumeration_guard(self):
        instance = Instance(m=7, valuations=(MinCoordinate(1.0), MinCoordinate(1.0)))
        with pytest.raises(EnumerationLimitError):
            optimal_welfare(instance, resolution=20)

    def test_resolution_validated(self, two_linear):
        with pytest.raises(SearchConfigError):
            optimal_welfare(two_linear, resolution=-1)

    def test_report_serializes(self, two_linear):
        data = optimal_welfare(two_linear, resolution=2).to_dict()
        assert data["resolution"] == 2
        assert data["allocation"] == [[1.0], [0.0]]
