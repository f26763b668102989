import json
from pathlib import Path

import yaml

from promptopt.cli import main
from promptopt.dsl import parse_program

from .conftest import FIXTURES, PROGRAMS, requires_sandbox


def _write_config(tmp_path: Path, **overrides) -> Path:
    config = {
        "task": "gsm8k",
        "dataset": str(FIXTURES / "gsm8k.jsonl"),
        "splits": {"train": 6, "valid": 4, "test": 2},
        "seed": 5,
        "k": 6,
        "v_min": 2,
        "v_max": 4,
        "model_id": "mock",
        "output_dir": str(tmp_path / "run"),
        "search_space": {
            "patterns": ["ZeroShot", "CoT"],
            "num_demonstrations": [0, 2],
        },
        "backend": {"kind": "scripted", "default": "The answer is 27"},
    }
    config.update(overrides)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(config))
    return path


def test_optimize_smoke(tmp_path, capsys):
    config = _write_config(tmp_path)
    assert main(["optimize", "--config", str(config)]) == 0
    out = capsys.readouterr().out
    solution = tmp_path / "run" / "solution.pdl.yaml"
    log = tmp_path / "run" / "experiment_log.jsonl"
    assert solution.exists() and log.exists()
    parse_program(solution.read_text())  # must re-parse
    assert f"solution: {solution}" in out
    assert "test_accuracy:" in out


def test_optimize_reproducible_log(tmp_path):
    config = _write_config(tmp_path)
    assert main(["optimize", "--config", str(config)]) == 0
    first = (tmp_path / "run" / "experiment_log.jsonl").read_bytes()
    assert main(["optimize", "--config", str(config)]) == 0
    second = (tmp_path / "run" / "experiment_log.jsonl").read_bytes()
    assert first == second


def test_optimize_vmin_too_large_names_field(tmp_path, capsys):
    config = _write_config(tmp_path, v_min=99, v_max=99)
    assert main(["optimize", "--config", str(config)]) == 1
    assert "v_min" in capsys.readouterr().err


def test_optimize_unreachable_backend_exits_2(tmp_path):
    config = _write_config(
        tmp_path,
        backend={
            "kind": "http",
            "base_url": "http://127.0.0.1:9",
            "timeout_s": 0.3,
            "max_retries": 0,
        },
    )
    assert main(["optimize", "--config", str(config)]) == 2


def test_optimize_missing_dataset_exits_3(tmp_path):
    config = _write_config(tmp_path, dataset=str(tmp_path / "nope.jsonl"))
    assert main(["optimize", "--config", str(config)]) == 3


def test_optimize_bad_config_exits_1(tmp_path, capsys):
    path = tmp_path / "config.yaml"
    path.write_text("task: gsm8k\n")  # missing dataset and splits
    assert main(["optimize", "--config", str(path)]) == 1
    assert "dataset" in capsys.readouterr().err


def test_evaluate_reports_accuracy(tmp_path, capsys):
    config = _write_config(tmp_path)
    assert main(["optimize", "--config", str(config)]) == 0
    capsys.readouterr()
    solution = tmp_path / "run" / "solution.pdl.yaml"
    verdicts = tmp_path / "verdicts.jsonl"
    code = main(
        [
            "evaluate",
            str(solution),
            "--config",
            str(config),
            "--split",
            "test",
            "--verdicts",
            str(verdicts),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    accuracy_lines = [l for l in out.splitlines() if l.startswith("accuracy: ")]
    assert len(accuracy_lines) == 1
    value = float(accuracy_lines[0].split(": ")[1])
    assert 0.0 <= value <= 1.0
    records = [json.loads(line) for line in verdicts.read_text().splitlines()]
    assert len(records) == 2
    assert {"id", "correct", "extracted"} <= set(records[0])


def test_evaluate_zero_shot_baseline_program(tmp_path, capsys):
    config = _write_config(tmp_path)
    program = tmp_path / "baseline.pdl.yaml"
    from promptopt.optimizer import Candidate, candidate_program
    from promptopt.patterns import PatternKind
    from promptopt.tools import calc_registry
    from promptopt.dsl import serialize_program

    baseline = candidate_program(
        Candidate(PatternKind.ZERO_SHOT, 0, (), None, "Solve.", 0), [], calc_registry()
    )
    program.write_text(serialize_program(baseline))
    assert main(["evaluate", str(program), "--config", str(config), "--split", "test"]) == 0
    out = capsys.readouterr().out
    assert any(line.startswith("accuracy: ") for line in out.splitlines())


def test_evaluate_missing_program_exits_3(tmp_path):
    config = _write_config(tmp_path)
    assert main(["evaluate", str(tmp_path / "ghost.yaml"), "--config", str(config)]) == 3


@requires_sandbox
def test_run_calculator_dispatch_prints_tool_result(tmp_path, capsys):
    config = _write_config(tmp_path, backend={
        "kind": "scripted",
        "rules": [
            {
                "substring": "48 divided by 4",
                "response": '{"action": "Calc", "arguments": {"expr": "48/4"}}',
            }
        ],
    })
    code = main(
        [
            "run",
            str(PROGRAMS / "calculator_dispatch.pdl.yaml"),
            "--config",
            str(config),
            "--var",
            'tools={"name": "Calc"}',
            "--model-id",
            "mock",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert out.rstrip().endswith("12")


def test_run_unbound_variable_exits_1(capsys):
    code = main(["run", str(PROGRAMS / "calculator_dispatch.pdl.yaml")])
    assert code == 1
    assert "tools" in capsys.readouterr().err


def test_run_var_flows_into_template(tmp_path, capsys):
    program = tmp_path / "echo.pdl.yaml"
    program.write_text("text:\n- 'Question: ${ question }'\n")
    assert main(["run", str(program), "--var", "question=what is 2+2?"]) == 0
    assert capsys.readouterr().out.rstrip() == "Question: what is 2+2?"


def test_run_uses_pattern_library(tmp_path, capsys):
    config = _write_config(tmp_path, backend={"kind": "scripted", "default": "The answer is 4"})
    code = main(
        [
            "run",
            str(PROGRAMS / "call_pattern_library.pdl.yaml"),
            "--config",
            str(config),
            "--var",
            "question=2+2?",
            "--model-id",
            "mock",
        ]
    )
    assert code == 0
    assert capsys.readouterr().out.rstrip().endswith("The answer is 4")


def test_optimize_cross_transfer_bank(tmp_path, capsys):
    config = _write_config(
        tmp_path,
        task="gsmhard",
        dataset=str(FIXTURES / "gsmhard.jsonl"),
        splits={"train": 0, "valid": 3, "test": 3},
        cross_train_bank=str(FIXTURES / "gsm8k.jsonl"),
        cross_train_task="gsm8k",
        k=4,
        v_min=2,
        v_max=3,
        search_space={"patterns": ["CoT"], "num_demonstrations": [2]},
        backend={"kind": "scripted", "default": "The answer is 0"},
    )
    assert main(["optimize", "--config", str(config)]) == 0
    capsys.readouterr()
    solution = (tmp_path / "run" / "solution.pdl.yaml").read_text()
    parse_program(solution)
    # Demonstrations in the emitted program come from the borrowed bank.
    gsm8k_questions = [
        json.loads(line)["question"]
        for line in (FIXTURES / "gsm8k.jsonl").read_text().splitlines()
    ]
    assert any(question in solution for question in gsm8k_questions)


def test_trajectories_build_and_skip(tmp_path, capsys):
    output = tmp_path / "trajs.jsonl"
    code = main(
        [
            "trajectories",
            "--task",
            "gsm8k",
            "--input",
            str(FIXTURES / "gsm8k.jsonl"),
            "--output",
            str(output),
            "--kind",
            "ReAct",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "built: 11" in out
    assert "skipped: 1" in out  # the annotation-free riddle
    lines = output.read_text().splitlines()
    assert len(lines) == 11
    record = json.loads(lines[0])
    assert record["kind"] == "ReAct"
    assert record["task"] == "gsm8k"
    assert record["steps"][-1]["type"] == "finish"


def test_trajectories_rewoo_for_reactive_only_task_exits_1(tmp_path, capsys):
    code = main(
        [
            "trajectories",
            "--task",
            "mbpp",
            "--input",
            str(FIXTURES / "mbpp.jsonl"),
            "--output",
            str(tmp_path / "out.jsonl"),
            "--kind",
            "ReWOO",
        ]
    )
    assert code == 1
    assert "reactive" in capsys.readouterr().err


def test_trajectories_cot_variant(tmp_path, capsys):
    output = tmp_path / "cot.jsonl"
    code = main(
        [
            "trajectories",
            "--task",
            "fever",
            "--input",
            str(FIXTURES / "fever.jsonl"),
            "--output",
            str(output),
            "--kind",
            "CoT",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "built: 5" in out and "skipped: 1" in out
    first = json.loads(output.read_text().splitlines()[0])
    assert "reasoning" in first and "steps" not in first
