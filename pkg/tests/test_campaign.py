import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safeval.campaign import (
    AdaptiveBudgetPolicy,
    CampaignConfig,
    load_result,
    report,
    resolve_simulator,
    run_joint,
    sample_tasks,
    save_result,
)
from safeval.core import InvalidArgumentError, SchemaVersionError
from safeval.falsify import FalsifyBudget


def tiny_config(**overrides):
    base = dict(
        simulator="braking",
        task_count=2,
        params_per_task=2,
        outer_iterations=4,
        master_seed=17,
        falsify_budget=FalsifyBudget(max_evaluations=128, population=64),
        budget_policy=AdaptiveBudgetPolicy(base_budget=128, scale=0.5),
        analysis_pairs=12,
    )
    base.update(overrides)
    return CampaignConfig(**base)


@pytest.fixture(scope="module")
def tiny_result(tmp_path_factory):
    out = tmp_path_factory.mktemp("campaign")
    cfg = tiny_config()
    return run_joint(cfg, output_dir=out), out, cfg


class TestBudgetPolicy:
    @given(
        sigma=st.floats(0.0, 5.0),
        bump=st.floats(0.0, 2.0),
        ref=st.floats(0.01, 5.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_nondecreasing_in_sigma(self, sigma, bump, ref):
        policy = AdaptiveBudgetPolicy(base_budget=100, scale=1.5)
        low = policy.budget_at(sigma, ref, minimum=4)
        high = policy.budget_at(sigma + bump, ref, minimum=4)
        assert high >= low

    def test_respects_minimum(self):
        policy = AdaptiveBudgetPolicy(base_budget=4, scale=0.0)
        assert policy.budget_at(0.0, 1.0, minimum=64) == 64

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            AdaptiveBudgetPolicy(base_budget=0)
        with pytest.raises(InvalidArgumentError):
            AdaptiveBudgetPolicy(scale=-1.0)


class TestConfig:
    def test_round_trip(self):
        cfg = tiny_config()
        again = CampaignConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_task_weights_round_trip(self):
        cfg = tiny_config(task_weights={"task-0": 2.0, "task-1": 0.5})
        again = CampaignConfig.from_dict(cfg.to_dict())
        assert again.task_weights == {"task-0": 2.0, "task-1": 0.5}

    def test_unknown_field_rejected(self):
        data = tiny_config().to_dict()
        data["wormhole"] = True
        with pytest.raises(InvalidArgumentError):
            CampaignConfig.from_dict(data)

    def test_from_json_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(tiny_config().to_dict()))
        cfg = CampaignConfig.from_json_file(path)
        assert cfg == tiny_config()

    def test_bad_json_reports_offset(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"simulator": "braking", ')
        with pytest.raises(InvalidArgumentError) as err:
            CampaignConfig.from_json_file(path)
        assert "byte offset" in str(err.value)

    def test_resolve_builtin(self):
        assert resolve_simulator("braking").id == "braking"
        with pytest.raises(InvalidArgumentError):
            resolve_simulator("warpdrive")


class TestSampleTasks:
    def test_counts_and_determinism(self, braking):
        tasks = sample_tasks(braking, 3, 4, seed=5)
        assert [t.id for t in tasks] == ["task-0", "task-1", "task-2"]
        assert all(len(t.sampled_params) == 4 for t in tasks)
        again = sample_tasks(braking, 3, 4, seed=5)
        assert tasks == again

    def test_per_task_counts(self, braking):
        tasks = sample_tasks(braking, 3, (1, 2, 5), seed=5)
        assert [len(t.sampled_params) for t in tasks] == [1, 2, 5]
        with pytest.raises(InvalidArgumentError):
            sample_tasks(braking, 2, (1, 2, 3), seed=5)

    def test_config_accepts_per_task_list(self):
        cfg = tiny_config(task_count=2, params_per_task=[1, 3])
        assert cfg.params_per_task == (1, 3)
        assert CampaignConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(InvalidArgumentError):
            tiny_config(task_count=2, params_per_task=[1, 2, 3])


class TestRunJoint:
    def test_record_count_and_invariants(self, tiny_result):
        result, out, cfg = tiny_result
        assert len(result.iterations) == cfg.outer_iterations
        cums = [r.cumulative_regret for r in result.iterations]
        assert all(b >= a - 1e-12 for a, b in zip(cums, cums[1:]))
        assert all(r.regret >= -1e-12 for r in result.iterations)
        assert result.best_loss == min(r.loss for r in result.iterations)
        assert result.regret_reference_is_proxy

    def test_call_conservation(self, tiny_result):
        result, _, _ = tiny_result
        t = result.totals
        assert t["high_calls"] == (
            t["setup_high_calls"] + t["loss_high_calls"] + t["analysis_high_calls"]
        )
        assert t["low_calls"] == (
            t["inner_low_calls"] + t["loss_low_calls"] + t["analysis_low_calls"]
        )
        assert t["inner_low_calls"] == sum(r.inner_sim_calls for r in result.iterations)
        assert t["loss_high_calls"] + t["loss_low_calls"] == sum(
            r.high_calls + r.low_calls - r.inner_sim_calls for r in result.iterations
        )

    def test_counterexample_set_grows_monotonically(self, tiny_result):
        result, _, _ = tiny_result
        found_at = [c.found_at for c in result.counterexamples]
        assert found_at == sorted(found_at)
        seen = 0
        for rec in result.iterations:
            if rec.counterexample_found:
                seen += 1
        assert len(result.counterexamples) == seen

    def test_adaptive_budget_floor(self, tiny_result):
        result, _, cfg = tiny_result
        for rec in result.iterations:
            assert rec.inner_budget >= cfg.falsify_budget.population
            assert rec.inner_evaluations <= rec.inner_budget

    def test_files_written(self, tiny_result):
        _, out, _ = tiny_result
        assert (out / "result.json").exists()
        assert (out / "events.jsonl").exists()
        events = [json.loads(line) for line in (out / "events.jsonl").read_text().splitlines()]
        kinds = [e["event"] for e in events]
        assert kinds[0] == "start"
        assert kinds[-1] == "finish"
        assert all("timestamp" in e for e in events)

    def test_partial_results_flushed_on_unrecoverable_error(self, tmp_path, monkeypatch):
        import safeval.campaign as campaign_mod

        real_falsify = campaign_mod.falsify
        calls = {"n": 0}

        def exploding(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 2:
                raise RuntimeError("synthetic hard failure")
            return real_falsify(*args, **kwargs)

        monkeypatch.setattr(campaign_mod, "falsify", exploding)
        with pytest.raises(RuntimeError):
            run_joint(tiny_config(), output_dir=tmp_path)
        partial = json.loads((tmp_path / "result.partial.json").read_text())
        assert partial["completed"] is False
        assert len(partial["iterations"]) == 1
        events = [json.loads(line) for line in (tmp_path / "events.jsonl").read_text().splitlines()]
        assert events[-1]["event"] == "error"
        assert "synthetic hard failure" in events[-1]["message"]

    def test_deterministic_result_bytes(self, tiny_result, tmp_path):
        result, out, cfg = tiny_result
        rerun = run_joint(cfg, output_dir=tmp_path)
        assert (tmp_path / "result.json").read_bytes() == (out / "result.json").read_bytes()
        # events differ only in their timestamp fields
        strip = lambda p: [
            {k: v for k, v in json.loads(line).items() if k != "timestamp"}
            for line in p.read_text().splitlines()
        ]
        assert strip(tmp_path / "events.jsonl") == strip(out / "events.jsonl")


class TestPersistence:
    def test_round_trip(self, tiny_result, tmp_path):
        result, _, _ = tiny_result
        path = tmp_path / "copy.json"
        save_result(result, path)
        loaded = load_result(path)
        assert loaded == result
        save_result(loaded, tmp_path / "copy2.json")
        assert (tmp_path / "copy.json").read_bytes() == (tmp_path / "copy2.json").read_bytes()

    def test_truncated_file_reports_offset(self, tiny_result, tmp_path):
        result, out, _ = tiny_result
        raw = (out / "result.json").read_text()
        path = tmp_path / "truncated.json"
        path.write_text(raw[: len(raw) // 2])
        with pytest.raises(InvalidArgumentError) as err:
            load_result(path)
        assert "byte offset" in str(err.value)

    def test_unknown_field_rejected_with_guidance(self, tiny_result, tmp_path):
        result, out, _ = tiny_result
        data = json.loads((out / "result.json").read_text())
        data["from_the_future"] = 1
        path = tmp_path / "next.json"
        path.write_text(json.dumps(data))
        with pytest.raises(SchemaVersionError) as err:
            load_result(path)
        assert "newer schema" in str(err.value)

    def test_wrong_version_rejected(self, tiny_result, tmp_path):
        result, out, _ = tiny_result
        data = json.loads((out / "result.json").read_text())
        data["schema_version"] = 99
        path = tmp_path / "v99.json"
        path.write_text(json.dumps(data))
        with pytest.raises(SchemaVersionError):
            load_result(path)


class TestReport:
    def test_markdown_iteration_rows(self, tiny_result):
        result, _, cfg = tiny_result
        md = report(result, "markdown")
        section = md.split("## Iterations")[1].split("##")[0]
        rows = [
            line
            for line in section.splitlines()
            if line.startswith("| ") and line.split("|")[1].strip().isdigit()
        ]
        assert len(rows) == cfg.outer_iterations

    def test_csv_regret_nondecreasing(self, tiny_result):
        result, _, _ = tiny_result
        csvs = report(result, "csv")
        lines = csvs["regret.csv"].strip().splitlines()
        header = lines[0].split(",")
        r_index = header.index("R_T")
        values = [float(line.split(",")[r_index]) for line in lines[1:]]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_csv_matches_json_totals(self, tiny_result):
        result, _, _ = tiny_result
        csvs = report(result, "csv")
        lines = csvs["regret.csv"].strip().splitlines()
        header = lines[0].split(",")
        loss_idx = header.index("loss")
        csv_losses = [float(line.split(",")[loss_idx]) for line in lines[1:]]
        assert csv_losses == [r.loss for r in result.iterations]
        assert float(lines[-1].split(",")[header.index("R_T")]) == pytest.approx(
            result.iterations[-1].cumulative_regret
        )
        inner = csvs["inner_traces.csv"].strip().splitlines()[1:]
        assert len(inner) == sum(len(r.inner_trace) for r in result.iterations)

    def test_unknown_format(self, tiny_result):
        result, _, _ = tiny_result
        with pytest.raises(InvalidArgumentError):
            report(result, "pdf")
