import asyncio
import time

import orjson
import pytest
from click.testing import CliRunner

from common.errors import InstanceError, ScenarioError
from harness import cli
from harness.config import ScenarioConfig, SolverSpec, VerifierSpec
from harness.orchestrator import Orchestrator, default_orchestrator
from harness.report import Bound, RunReport, load_reports
from harness.runner import emit_outcomes, run_scenario, run_scenarios
from harness.scenarios import BaseScenario, HandlerConfig


class FakeScenario(BaseScenario):
    """Answers after a delay taken from the config's m; m == 13 fails."""

    def __init__(self, name="poly-lb"):
        super().__init__(HandlerConfig(name=name, description="test double"))

    def run(self, cfg):
        time.sleep(0.01 * cfg.m)
        if cfg.m == 13:
            raise InstanceError("unlucky")
        return [RunReport.build(instance_id=cfg.scenario_id, mechanism="proportional", eq_kind="pure", eps=0.0,
                                sw_eq=1.0, sw_opt=1.5, bound=Bound("sw_opt", "sw_eq", "<=", 2.0), seed=cfg.seed,
                                wallclock_ms=0.0)]


class TestOrchestrator:

    def test_default_registers_every_kind(self):
        assert default_orchestrator().kinds == sorted([
            "bayesian-lb", "thm1", "scalefree", "poly-lb", "budget-suite", "concave-suite", "polyhedral-suite",
            "subadditive-suite", "bayesian-budget",
        ])

    def test_aliases_share_the_handler(self):
        orchestrator = default_orchestrator()
        assert orchestrator._scenarios["thm1"] is orchestrator._scenarios["bayesian-lb"]

    def test_unregistered_kind(self):
        with pytest.raises(ScenarioError):
            Orchestrator(workers=1).run(ScenarioConfig(scenario_id="x", kind="scalefree"))

    def test_errors_are_wrapped(self):
        orchestrator = Orchestrator(workers=1)
        orchestrator.register_scenario(FakeScenario())
        with pytest.raises(ScenarioError) as info:
            orchestrator.run(ScenarioConfig(scenario_id="bad", kind="poly-lb", m=13))
        assert info.value.scenario_id == "bad"
        assert isinstance(info.value.cause, InstanceError)

    def test_batch_keeps_config_order(self):
        orchestrator = Orchestrator(workers=3)
        orchestrator.register_scenario(FakeScenario())
        configs = [ScenarioConfig(scenario_id=f"s{m}", kind="poly-lb", m=m) for m in (9, 1, 13, 4)]
        outcomes = asyncio.run(orchestrator.run_batch(configs))
        assert [o.config.scenario_id for o in outcomes] == ["s9", "s1", "s13", "s4"]
        assert [o.passed for o in outcomes] == [True, True, False, True]
        assert outcomes[2].error is not None and not outcomes[2].reports

    def test_finished_event_is_audited(self, audit_log):
        orchestrator = Orchestrator(workers=1)
        orchestrator.register_scenario(FakeScenario())
        orchestrator.run(ScenarioConfig(scenario_id="audited", kind="poly-lb", m=1))
        assert any("scenario.finished" in m and "audited" in m for m in audit_log)


class TestScenarios:

    def test_polyhedral_lower_bound(self):
        [report] = run_scenario(ScenarioConfig(scenario_id="poly", kind="poly-lb", eps=0.2))
        assert report.passed
        assert report.ratio == pytest.approx(5 / 3)
        assert report.sw_opt == pytest.approx(2.0)
        assert report.eps <= 1e-6
        assert report.recheck()

    def test_bayesian_lower_bound(self):
        [report] = run_scenario(ScenarioConfig(scenario_id="blb", kind="bayesian-lb", m=4,
                                               verifier=VerifierSpec(samples=500)))
        assert report.passed
        assert report.eq_kind == "bayesian"
        assert report.ratio == pytest.approx(1.5)
        assert report.bound.startswith("sw_opt/sw_eq>=")

    def test_thm1_runs_the_bayesian_construction(self):
        [report] = run_scenario(ScenarioConfig(scenario_id="t1", kind="thm1", m=4, verifier=VerifierSpec(samples=500)))
        assert report.passed
        assert report.ratio == pytest.approx(1.5)

    def test_scale_free(self):
        [report] = run_scenario(ScenarioConfig(scenario_id="sf", kind="scalefree", m=16,
                                               verifier=VerifierSpec(samples=20_000)))
        assert report.passed
        assert report.eq_kind == "mixed"
        assert report.sw_opt == pytest.approx(2.5)

    def test_mechanism_mismatch(self):
        with pytest.raises(ScenarioError):
            run_scenario(ScenarioConfig(scenario_id="mm", kind="poly-lb", eps=0.2, mechanism="proportional"))

    def test_effective_benchmark_needs_budgets(self):
        with pytest.raises(ScenarioError):
            run_scenario(ScenarioConfig(scenario_id="eb", kind="poly-lb", eps=0.2, benchmark="effective"))

    def test_suite_index_out_of_range(self):
        with pytest.raises(ScenarioError):
            run_scenario(ScenarioConfig(scenario_id="ix", kind="concave-suite", suite_size=2, suite_index=5))

    def test_concave_suite_reports(self):
        cfg = ScenarioConfig(scenario_id="cs", kind="concave-suite", suite_size=2, seed=3,
                             solver=SolverSpec(grid_step=0.02, rounds=50), resolution=10)
        reports = run_scenario(cfg)
        assert [r.instance_id for r in reports] == ["concave-3-000", "concave-3-001"]
        for r in reports:
            assert r.mechanism == "proportional"
            assert r.eq_kind == "pure"
            assert r.recheck() == r.passed

    def test_hedge_tolerance_follows_the_horizon(self):
        cfg = ScenarioConfig(scenario_id="ht", kind="subadditive-suite", suite_size=2, seed=1,
                             solver=SolverSpec(rounds=300, grid_step=0.1), resolution=10)
        for report in run_scenario(cfg):
            tol = Bound.parse(report.bound).eps_tol
            assert tol > 0.01
            assert report.eps <= tol
            assert report.recheck() == report.passed

    def test_unconverged_polyhedral_rows_are_reported(self):
        cfg = ScenarioConfig(scenario_id="pu", kind="polyhedral-suite", suite_size=4, seed=0,
                             solver=SolverSpec(rounds=1, grid_step=0.05), resolution=10)
        reports = run_scenario(cfg)
        assert [r.instance_id for r in reports] == [f"polyhedral-0-{k:03d}" for k in range(4)]
        for report in reports:
            if report.eps >= Bound.parse(report.bound).eps_tol:
                assert not report.passed
            assert report.recheck() == report.passed

    @pytest.mark.slow
    def test_polyhedral_suite_keeps_every_instance(self):
        reports = run_scenario(ScenarioConfig(scenario_id="ps", kind="polyhedral-suite", suite_size=15, seed=0))
        assert len(reports) == 15
        assert {"polyhedral-0-006", "polyhedral-0-012"} <= {r.instance_id for r in reports}

    @pytest.mark.slow
    @pytest.mark.parametrize("kind", ["budget-suite", "subadditive-suite"])
    def test_hedge_suites_pass(self, kind):
        cfg = ScenarioConfig(scenario_id=kind, kind=kind, suite_size=4, seed=0, solver=SolverSpec(rounds=5_000))
        reports = run_scenario(cfg)
        assert reports and all(r.passed for r in reports), [(r.instance_id, r.eps, r.bound) for r in reports]

    @pytest.mark.slow
    @pytest.mark.parametrize("kind, size, rows", [
        ("budget-suite", 3, 6), ("subadditive-suite", 3, 3), ("polyhedral-suite", 3, 3), ("concave-suite", 3, 3),
        ("bayesian-budget", 2, 4),
    ])
    def test_small_suites(self, kind, size, rows):
        cfg = ScenarioConfig(scenario_id=kind, kind=kind, suite_size=size, seed=1,
                             solver=SolverSpec(rounds=2_000, grid_step=0.05), resolution=10)
        reports = run_scenario(cfg)
        assert len(reports) == rows
        assert all(r.recheck() == r.passed for r in reports)

    def test_run_scenarios_and_emit(self, tmp_path, isolated_settings):
        configs = [ScenarioConfig(scenario_id="p1", kind="poly-lb", eps=0.2),
                   ScenarioConfig(scenario_id="p2", kind="poly-lb", eps=0.5, format="json")]
        outcomes = run_scenarios(configs, workers=2)
        assert all(o.passed for o in outcomes)
        written = emit_outcomes(outcomes)
        assert [p.name for p in written] == ["p1.csv", "p2.json"]
        assert all(str(p).startswith(isolated_settings.output_dir) for p in written)
        batch = emit_outcomes(outcomes, str(tmp_path / "all.csv"))
        assert len(load_reports(str(batch[0]))) == 2


class TestCli:

    @pytest.fixture
    def runner(self, monkeypatch):
        monkeypatch.setattr(cli, "configure_logging", lambda level=None: None)
        return CliRunner()

    def test_check_props(self, runner):
        result = runner.invoke(cli.main, ["check-props", "--samples", "500"])
        assert result.exit_code == 0, result.output
        assert "geometric_mean" in result.output

    def test_check_props_json(self, runner):
        result = runner.invoke(cli.main, ["check-props", "--samples", "200", "--json"])
        assert result.exit_code == 0
        rows = orjson.loads(result.output)
        violated = {r["family"] for r in rows if r["verdict"] == "violated"}
        assert violated == {"geometric_mean", "min_coordinate"}

    def test_verify_writes_report(self, runner, tmp_path):
        out = tmp_path / "poly.csv"
        result = runner.invoke(cli.main, ["verify", "--scenario", "poly-lb", "--eps", "0.2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        [report] = load_reports(str(out))
        assert report.passed
        assert report.instance_id == "poly-lb-eps0.2"

    def test_verify_accepts_thm1(self, runner, tmp_path):
        out = tmp_path / "thm1.csv"
        result = runner.invoke(cli.main, ["verify", "--scenario", "thm1", "--m", "4", "--samples", "500",
                                          "--out", str(out)])
        assert result.exit_code == 0, result.output
        [report] = load_reports(str(out))
        assert report.passed
        assert report.eq_kind == "bayesian"

    def test_run_config_file(self, runner, tmp_path):
        out = tmp_path / "run.json"
        config = tmp_path / "scenarios.json"
        config.write_bytes(orjson.dumps([
            {"scenario_id": "a", "kind": "poly-lb", "eps": 0.2},
            {"scenario_id": "b", "kind": "poly-lb", "eps": 0.4},
        ]))
        result = runner.invoke(cli.main, ["run", str(config), "--out", str(out), "--format", "json"])
        assert result.exit_code == 0, result.output
        assert [r.eps <= 1e-6 for r in load_reports(str(out))] == [True, True]

    def test_failing_scenario_exits_nonzero(self, runner, tmp_path):
        config = tmp_path / "bad.json"
        config.write_bytes(orjson.dumps({"scenario_id": "mm", "kind": "poly-lb", "mechanism": "proportional"}))
        result = runner.invoke(cli.main, ["run", str(config)])
        assert result.exit_code == 1

    def test_invalid_config(self, runner, tmp_path):
        config = tmp_path / "invalid.json"
        config.write_bytes(orjson.dumps({"scenario_id": "x", "kind": "no-such-kind"}))
        result = runner.invoke(cli.main, ["run", str(config)])
        assert result.exit_code == 1
        assert "invalid config" in result.output
