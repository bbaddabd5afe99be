import numpy as np
import pytest

from common.errors import EnumerationLimitError, ProfileError, SearchConfigError
from equilibria.profiles import AgentType, CorrelatedProfile, EquilibriumReport, FiniteStrategy, MixedProfile, \
    SamplerStrategy, SearchConfig, StrategyMap, TypeSpace, convolve_prices, mix
from mechanism.instance import Instance
from mechanism.valuations import Linear


class TestStrategies:

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ProfileError):
            FiniteStrategy(np.array([[0.1], [0.2]]), np.array([0.5, 0.6]))

    def test_negative_bids_rejected(self):
        with pytest.raises(ProfileError):
            FiniteStrategy.point([-0.1, 0.2])

    def test_uniform_and_mean(self):
        s = FiniteStrategy.uniform([[0.0, 1.0], [1.0, 0.0]])
        assert s.mean() == pytest.approx([0.5, 0.5])
        assert not s.is_pure

    def test_sampling_follows_weights(self):
        s = FiniteStrategy(np.array([[0.0], [1.0]]), np.array([0.2, 0.8]))
        draws = s.sample(np.random.default_rng(0), 20_000)
        assert draws.mean() == pytest.approx(0.8, abs=0.02)

    def test_mix_reweights(self):
        mixed = mix([FiniteStrategy.point([0.1]), FiniteStrategy.uniform([[0.2], [0.4]])], [0.5, 0.5])
        assert mixed.weights == pytest.approx([0.5, 0.25, 0.25])


class TestProfiles:

    def test_convolution_is_exact(self):
        a = FiniteStrategy(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
        b = FiniteStrategy(np.array([[0.0], [2.0]]), np.array([0.25, 0.75]))
        prices, weights = convolve_prices([a, b], 1, limit=100)
        order = np.argsort(prices[:, 0])
        assert prices[order, 0] == pytest.approx([0.0, 1.0, 2.0, 3.0])
        assert weights[order] == pytest.approx([0.125, 0.125, 0.375, 0.375])

    def test_convolution_limit(self):
        s = FiniteStrategy.uniform(np.arange(10.0)[:, None])
        with pytest.raises(EnumerationLimitError):
            convolve_prices([s, s, s], 1, limit=500)

    def test_mixed_to_correlated(self):
        profile = MixedProfile((FiniteStrategy.uniform([[0.0], [1.0]]), FiniteStrategy.point([0.5])))
        dist = profile.to_correlated(1)
        assert dist.support.shape == (2, 2, 1)
        assert dist.weights == pytest.approx([0.5, 0.5])
        prices, _ = dist.opponent_prices(1)
        assert prices[:, 0] == pytest.approx([0.0, 1.0])

    def test_sampler_profile_has_no_finite_support(self):
        profile = MixedProfile((SamplerStrategy(lambda rng, size: rng.random((size, 1))), FiniteStrategy.point([0.5])))
        assert not profile.is_finite
        with pytest.raises(ProfileError):
            profile.to_correlated(1)
        assert profile.sample(np.random.default_rng(0), 7).shape == (7, 2, 1)

    def test_correlated_weights_checked(self):
        with pytest.raises(ProfileError):
            CorrelatedProfile(np.zeros((2, 2, 1)), np.array([0.7, 0.7]))

    def test_point_mass_serializes(self):
        dist = CorrelatedProfile.point_mass([[0.1], [0.2]])
        assert dist.to_dict() == {"support": [[[0.1], [0.2]]], "weights": [1.0]}


class TestTypes:

    def test_complete_information(self):
        instance = Instance(m=1, valuations=(Linear((1.0,)), Linear((0.5,))), budgets=(0.3, 0.4))
        types = TypeSpace.complete_information(instance)
        assert [len(ts) for ts in types.types] == [1, 1]
        assert types.types[1][0].budget == 0.4

    def test_type_profiles_enumerate_product(self):
        types = TypeSpace((
            (AgentType(Linear((1.0,)), 0.5), AgentType(Linear((2.0,)), 0.5)),
            (AgentType(Linear((1.0,)), 0.25), AgentType(Linear((3.0,)), 0.75)),
        ))
        profiles = list(types.type_profiles(limit=10))
        assert len(profiles) == 4
        assert sum(p for _, p in profiles) == pytest.approx(1.0)
        with pytest.raises(EnumerationLimitError):
            list(types.type_profiles(limit=3))

    def test_realize_keeps_type_budgets(self):
        base = Instance(m=1, valuations=(Linear((1.0,)), Linear((1.0,))))
        types = TypeSpace(((AgentType(Linear((2.0,)), 1.0, 0.7),), (AgentType(Linear((3.0,)), 1.0),)))
        realized = types.realize(base, (0, 0))
        assert realized.budgets == (0.7, float("inf"))
        assert realized.valuations[1] == Linear((3.0,))

    def test_strategy_map_shape_checked(self):
        types = TypeSpace(((AgentType(Linear((1.0,)), 1.0),), (AgentType(Linear((1.0,)), 1.0),)))
        with pytest.raises(ProfileError):
            StrategyMap(((FiniteStrategy.point([0.1]),),)).check(types)


class TestSearchConfig:

    @pytest.mark.parametrize("kwargs", [
        {"step": 0.0}, {"refinement_rounds": -1}, {"lam": 0.5}, {"mode": "random"}, {"lower": -1.0},
        {"lower": 0.5, "upper": 0.1}, {"grid_points": []},
    ])
    def test_rejects_bad_settings(self, kwargs):
        with pytest.raises(SearchConfigError):
            SearchConfig(**kwargs)

    def test_axis_includes_upper_end(self):
        pts = SearchConfig(step=0.3).axis(0.0, 1.0)
        assert pts == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])

    def test_explicit_grid_points(self):
        cfg = SearchConfig(grid_points=[0.5, 0.1, 2.0])
        assert cfg.axis(0.0, 1.0) == pytest.approx([0.1, 0.5])

    def test_report_verdict(self):
        report = EquilibriumReport("pure", [1e-8, 3e-7], {}, tolerance=1e-6)
        assert report.eps == pytest.approx(3e-7)
        assert report.verdict
        assert report.to_dict()["agents"][1]["eps"] == pytest.approx(3e-7)
