"""Cross-module runs: whole-task optimizations over each tool family."""

import json

import yaml

from promptopt.backends import ScriptedBackend, ScriptRule
from promptopt.cli import main
from promptopt.optimizer import (
    CandidateEvaluator,
    SearchSpace,
    experiment_log_lines,
    run_optimization,
)
from promptopt.patterns import PatternKind
from promptopt.tasks import (
    SplitSizes,
    load_dataset,
    make_evaluator,
    make_registry,
    make_splits,
)
from promptopt.wiki import FixtureSearchClient

from .conftest import FIXTURES, requires_sandbox

FEVER_FIXTURES = {
    "Eiffel Tower": "The Eiffel Tower is a wrought-iron lattice tower in Paris, France.",
    "Mount Everest": "Mount Everest is Earth's highest mountain, in the Himalayas.",
    "Nile": "The Nile is a major north-flowing river in northeastern Africa.",
    "Brazil": "Brazil is the largest country in South America.",
    "Marie Curie": "Marie Curie was a pioneering physicist and chemist.",
    "Honey": "Honey is a sweet substance made by bees.",
}


def test_fever_optimization_through_search_tool(tmp_path, capsys):
    instances = load_dataset(str(FIXTURES / "fever.jsonl"), "fever")
    answers = {inst.question[:30]: inst.answer for inst in instances}
    rules = [
        {"substring": prefix, "response": f"Checked the evidence.\nThe claim is {answer}."}
        for prefix, answer in answers.items()
    ]
    config = {
        "task": "fever",
        "dataset": str(FIXTURES / "fever.jsonl"),
        "splits": {"train": 2, "valid": 2, "test": 2},
        "seed": 2,
        "k": 4,
        "v_min": 1,
        "v_max": 2,
        "model_id": "mock",
        "output_dir": str(tmp_path / "run"),
        "search_space": {"patterns": ["ZeroShot", "CoT", "ReAct", "ReWOO"], "num_demonstrations": [0, 1]},
        "backend": {"kind": "scripted", "rules": rules, "default": "Cannot decide."},
        "search_fixtures": FEVER_FIXTURES,
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(config))
    assert main(["optimize", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    accuracy = [l for l in out.splitlines() if l.startswith("test_accuracy")]
    assert accuracy and float(accuracy[0].split(": ")[1]) == 1.0
    log = (tmp_path / "run" / "experiment_log.jsonl").read_text().splitlines()
    assert json.loads(log[-1])["test_accuracy"] == 1.0


@requires_sandbox
def test_mbpp_optimization_through_sandbox(tmp_path, capsys):
    instances = load_dataset(str(FIXTURES / "mbpp.jsonl"), "mbpp")
    rules = []
    for inst in instances:
        if not inst.metadata.get("solution"):
            continue
        marker = inst.question.splitlines()[0]
        rules.append(
            {
                "substring": marker,
                "response": f"<solution>\n{inst.metadata['solution']}\n</solution>",
            }
        )
    config = {
        "task": "mbpp",
        "dataset": str(FIXTURES / "mbpp.jsonl"),
        "splits": {"train": 2, "valid": 2, "test": 2},
        "seed": 1,
        "k": 3,
        "v_min": 1,
        "v_max": 2,
        "model_id": "mock",
        "output_dir": str(tmp_path / "run"),
        "search_space": {"patterns": ["ZeroShot", "ReAct"], "num_demonstrations": [0, 1]},
        "backend": {"kind": "scripted", "rules": rules, "default": "no idea"},
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(config))
    assert main(["optimize", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    accuracy = [l for l in out.splitlines() if l.startswith("test_accuracy")]
    assert accuracy and float(accuracy[0].split(": ")[1]) == 1.0
    solution = (tmp_path / "run" / "solution.pdl.yaml").read_text()
    # The coding task always uses tag-style actions in its tool primer.
    assert "<solution>" in solution or "zero_shot" in solution


def _gsm8k_harness(instances, parallelism_seed=0):
    backend = ScriptedBackend(
        [ScriptRule(substring="quarter of 48", response="The answer is 27")],
        default="The answer is 0",
    )
    return CandidateEvaluator(
        task="gsm8k",
        bank=instances[:6],
        backend=backend,
        tools=make_registry("gsm8k"),
        evaluator=make_evaluator("gsm8k"),
        model_id="mock",
    )


def test_parallel_and_serial_runs_produce_identical_logs(gsm8k_instances):
    space = SearchSpace(
        patterns=(PatternKind.ZERO_SHOT, PatternKind.COT),
        num_demonstrations=(0, 2),
        instructions=("solve",),
    )
    logs = []
    for parallelism in (1, 4):
        harness = _gsm8k_harness(gsm8k_instances)
        result = run_optimization(
            space,
            harness,
            gsm8k_instances[6:10],
            gsm8k_instances[10:12],
            k=6,
            v_min=2,
            v_max=4,
            seed=9,
            parallelism=parallelism,
        )
        logs.append(experiment_log_lines(result))
    assert logs[0] == logs[1]
