import pytest
from pydantic import ValidationError

from common.config import Settings, get_settings
from harness.config import ScenarioConfig, SolverSpec, VerifierSpec, load_configs


class TestSettings:

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("KELLYLAB_OUTPUT_DIR")
        settings = Settings(_env_file=None)
        assert settings.grid_resolution == 20
        assert settings.enumeration_limit == 10**8
        assert settings.hedge_action_limit == 10**5
        assert settings.output_dir == "reports"

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("KELLYLAB_GRID_RESOLUTION", "12")
        monkeypatch.setenv("KELLYLAB_LOG_LEVEL", "debug")
        get_settings.cache_clear()
        assert get_settings().grid_resolution == 12
        assert get_settings().log_level == "debug"

    def test_rejects_bad_values(self, monkeypatch):
        monkeypatch.setenv("KELLYLAB_WORKERS", "0")
        with pytest.raises(ValidationError):
            Settings(_env_file=None)


class TestScenarioConfig:

    def test_dump_and_load(self):
        cfg = ScenarioConfig(scenario_id="sf", kind="scalefree", m=100, V=2.0, seed=3,
                             verifier=VerifierSpec(samples=5_000, tolerance=0.02))
        loaded = ScenarioConfig.load(cfg.dump())
        assert loaded == cfg
        assert loaded.verifier.samples == 5_000

    def test_defaults(self):
        cfg = ScenarioConfig(scenario_id="x", kind="poly-lb")
        assert cfg.eps == 0.01
        assert cfg.solver == SolverSpec()
        assert cfg.verifier.samples == 100_000
        assert cfg.format == "csv"

    def test_single_object(self):
        [cfg] = load_configs(b'{"scenario_id": "a", "kind": "bayesian-lb", "m": 9}')
        assert cfg.m == 9

    def test_list(self):
        configs = load_configs(b'[{"scenario_id": "a", "kind": "poly-lb"},'
                               b' {"scenario_id": "b", "kind": "budget-suite", "solver": {"kind": "hedge"}}]')
        assert [c.scenario_id for c in configs] == ["a", "b"]
        assert configs[1].solver.kind == "hedge"

    @pytest.mark.parametrize("raw", [
        b'{"scenario_id": "a", "kind": "unknown"}',
        b'{"scenario_id": "a", "kind": "poly-lb", "eps": 1.5}',
        b'{"scenario_id": "a", "kind": "bayesian-lb", "m": 0}',
        b'{"scenario_id": "a", "kind": "budget-suite", "solver": {"grid_step": -0.1}}',
        b'{"kind": "poly-lb"}',
    ])
    def test_invalid(self, raw):
        with pytest.raises(ValidationError):
            load_configs(raw)
