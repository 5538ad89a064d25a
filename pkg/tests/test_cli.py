import json

import pytest

from safeval.cli import main


def read_stripped_events(path):
    return [
        {k: v for k, v in json.loads(line).items() if k != "timestamp"}
        for line in path.read_text().splitlines()
    ]


def tiny_config_file(tmp_path, **overrides):
    base = dict(
        simulator="braking",
        task_count=1,
        params_per_task=2,
        outer_iterations=3,
        master_seed=5,
        falsify_budget=dict(
            max_evaluations=128,
            population=64,
            elite_fraction=0.25,
            stop_tolerance=0.0,
            samples_per_eval=1,
        ),
        budget_policy=dict(base_budget=128, scale=0.0, sigma_threshold=1e-3),
        analysis_pairs=12,
    )
    base.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(base))
    return path


class TestFalsifyCommand:
    def test_writes_result_and_exits_zero(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            [
                "falsify",
                "--sim",
                "braking",
                "--budget",
                "256",
                "--seed",
                "1",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        payload = json.loads((out / "falsify.json").read_text())
        assert payload["counterexample_found"] is True
        assert payload["evaluations_used"] <= 256
        assert "counterexample" in capsys.readouterr().out

    def test_deterministic_output_bytes(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert (
                main(
                    ["falsify", "--sim", "braking", "--budget", "128", "--seed", "9", "--out", str(out)]
                )
                == 0
            )
            outs.append((out / "falsify.json").read_bytes())
        assert outs[0] == outs[1]

    def test_require_counterexample_exit_code(self, tmp_path):
        # A spec that always holds on the oscillator: no counterexample.
        code = main(
            [
                "falsify",
                "--sim",
                "oscillator",
                "--spec",
                "G[0,6](x > -999)",
                "--budget",
                "64",
                "--seed",
                "0",
                "--out",
                str(tmp_path / "safe"),
                "--require-counterexample",
            ]
        )
        assert code == 3

    def test_unknown_simulator_is_usage_error(self, tmp_path):
        code = main(
            ["falsify", "--sim", "warpdrive", "--budget", "64", "--out", str(tmp_path)]
        )
        assert code == 1

    def test_bad_flag_is_usage_error(self):
        assert main(["falsify", "--nope"]) == 1

    def test_bad_spec_is_usage_error(self, tmp_path):
        code = main(
            [
                "falsify",
                "--sim",
                "braking",
                "--spec",
                "G[0,(gap>",
                "--budget",
                "64",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 1


class TestTuneFidelityCommand:
    def test_writes_json_and_csv(self, tmp_path):
        out = tmp_path / "tune"
        code = main(
            [
                "tune-fidelity",
                "--sim",
                "braking",
                "--tasks",
                "1",
                "--per-task",
                "2",
                "--iters",
                "4",
                "--seed",
                "2",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        payload = json.loads((out / "fidelity.json").read_text())
        assert len(payload["losses"]) == 4
        lines = (out / "regret.csv").read_text().strip().splitlines()
        assert lines[0].startswith("t,f_0")
        assert len(lines) == 5


class TestJointCommand:
    def test_runs_and_is_deterministic(self, tmp_path):
        cfg = tiny_config_file(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["joint", "--config", str(cfg), "--out", str(out_a)]) == 0
        assert main(["joint", "--config", str(cfg), "--out", str(out_b)]) == 0
        assert (out_a / "result.json").read_bytes() == (out_b / "result.json").read_bytes()
        assert read_stripped_events(out_a / "events.jsonl") == read_stripped_events(
            out_b / "events.jsonl"
        )

    def test_missing_config_file(self, tmp_path):
        assert main(["joint", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1

    def test_runtime_failure_exit_code(self, tmp_path):
        # A structurally valid config whose external adapter cannot execute
        # fails at runtime, not at argument validation.
        config = {
            "simulator": {
                "id": "ghost-sim",
                "adapter": str(tmp_path / "missing-binary"),
                "environment": {"lower": [0.0], "upper": [1.0], "names": ["x"]},
                "fidelity_dimension": 1,
                "channels": ["y"],
                "base_dt": 0.1,
                "duration": 2.0,
                "safety_spec": "G[0,2](y > 0)",
            },
            "task_count": 1,
            "params_per_task": 1,
            "outer_iterations": 1,
            "master_seed": 0,
        }
        cfg = tmp_path / "ghost.json"
        cfg.write_text(json.dumps(config))
        assert main(["joint", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 2


class TestAnalyzeCommand:
    def test_writes_analysis_json(self, tmp_path):
        cfg = tiny_config_file(tmp_path)
        out = tmp_path / "analysis"
        assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == 0
        payload = json.loads((out / "analysis.json").read_text())
        assert payload["lipschitz_env"]["constant"] > 0
        assert payload["sample_plan"]["total_samples"] == (
            payload["sample_plan"]["n_per_iteration"] * 128 * 3
        )

    def test_deterministic(self, tmp_path):
        cfg = tiny_config_file(tmp_path)
        blobs = []
        for name in ("x", "y"):
            out = tmp_path / name
            assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == 0
            blobs.append((out / "analysis.json").read_bytes())
        assert blobs[0] == blobs[1]


class TestReportCommand:
    @pytest.fixture()
    def result_file(self, tmp_path):
        cfg = tiny_config_file(tmp_path)
        out = tmp_path / "camp"
        assert main(["joint", "--config", str(cfg), "--out", str(out)]) == 0
        return out / "result.json"

    def test_markdown_to_stdout(self, result_file, capsys):
        assert main(["report", "--result", str(result_file), "--format", "md"]) == 0
        text = capsys.readouterr().out
        assert "# Campaign report" in text
        assert "## Iterations" in text

    def test_csv_bundle_written(self, result_file, tmp_path, capsys):
        out = tmp_path / "csv"
        assert main(
            ["report", "--result", str(result_file), "--format", "csv", "--out", str(out)]
        ) == 0
        assert (out / "regret.csv").exists()
        assert (out / "inner_traces.csv").exists()

    def test_missing_result_is_usage_error(self, tmp_path):
        assert main(["report", "--result", str(tmp_path / "ghost.json")]) == 1
