"""Command-line entry point.

Subcommands: ``optimize`` (sample, race, emit, final-eval), ``evaluate``
(score a program file on a split), ``run`` (execute one program), and
``trajectories`` (build demonstration trajectories as JSONL).

One YAML config file drives runs; flags override config fields.  Exit
codes: 0 success, 1 configuration error, 2 backend error, 3 data error.
Stdout carries machine-parseable ``key: value`` lines only; prose goes to
stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Sequence

import yaml

from .backends import Backend, HttpBackend, ScriptedBackend, ScriptRule
from .dsl import Program, parse_program, serialize_program
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    DslParseError,
    PromptOptError,
    ReWOOUnsupportedError,
    TrajectoryBuildError,
    UnboundPathError,
)
from .interpreter import ExecutionLimits, Scope, execute_program, library_scope
from .optimizer import (
    CandidateEvaluator,
    SearchSpace,
    run_optimization,
    write_experiment_log,
)
from .patterns import PatternKind, PatternLimits, SystemPromptStyle, load_library
from .sandbox import SubprocessSandboxClient, sandbox_available
from .tasks import (
    SplitSizes,
    Splits,
    load_dataset,
    make_evaluator,
    make_registry,
    make_splits,
    task_def,
)
from .trajectories import (
    build_demonstration,
    demonstration_to_json,
)
from .wiki import FixtureSearchClient, WikipediaSearchClient

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BACKEND = 2
EXIT_DATA = 3


@dataclass
class RunConfig:
    """Everything one optimization run needs; defaults follow the reference setup."""

    task: str
    dataset: str
    splits: SplitSizes
    seed: int = 0
    k: int = 100
    v_min: int = 16
    v_max: int | None = None
    parallelism: int = 1
    model_id: str = "default"
    output_dir: str = "run"
    cross_train_bank: str | None = None
    cross_train_task: str | None = None
    patterns: tuple[PatternKind, ...] = ()
    num_demonstrations: tuple[int, ...] = (0, 3, 5)
    system_prompts: tuple[SystemPromptStyle, ...] = tuple(SystemPromptStyle)
    instructions: tuple[str, ...] = ()
    backend: dict[str, Any] = field(default_factory=dict)
    search_fixtures: dict[str, Any] | None = None
    sandbox_cmd: str | None = None
    limits: ExecutionLimits = field(default_factory=ExecutionLimits)
    pattern_limits: PatternLimits = field(default_factory=PatternLimits)


def _require(mapping: dict, key: str, kind: type, where: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{where}{key}", "missing required field")
    value = mapping[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f"{where}{key}", f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"malformed YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", "document must be a mapping")
    task = _require(raw, "task", str, "")
    dataset = _require(raw, "dataset", str, "")
    splits_raw = _require(raw, "splits", dict, "")
    sizes = SplitSizes(
        train=_require(splits_raw, "train", int, "splits."),
        valid=_require(splits_raw, "valid", int, "splits."),
        test=_require(splits_raw, "test", int, "splits."),
    )
    config = RunConfig(task=task, dataset=dataset, splits=sizes)
    if "seed" in raw:
        config.seed = _require(raw, "seed", int, "")
    if "k" in raw:
        config.k = _require(raw, "k", int, "")
    if "v_min" in raw:
        config.v_min = _require(raw, "v_min", int, "")
    if "v_max" in raw and raw["v_max"] is not None:
        config.v_max = _require(raw, "v_max", int, "")
    if "parallelism" in raw:
        config.parallelism = _require(raw, "parallelism", int, "")
    if "model_id" in raw:
        config.model_id = _require(raw, "model_id", str, "")
    if "output_dir" in raw:
        config.output_dir = _require(raw, "output_dir", str, "")
    if "cross_train_bank" in raw and raw["cross_train_bank"] is not None:
        config.cross_train_bank = _require(raw, "cross_train_bank", str, "")
    if "cross_train_task" in raw and raw["cross_train_task"] is not None:
        config.cross_train_task = _require(raw, "cross_train_task", str, "")
    space_raw = raw.get("search_space", {})
    if not isinstance(space_raw, dict):
        raise ConfigError("search_space", "must be a mapping")
    if "patterns" in space_raw:
        try:
            config.patterns = tuple(PatternKind(p) for p in space_raw["patterns"])
        except ValueError as exc:
            raise ConfigError("search_space.patterns", str(exc)) from exc
    if "num_demonstrations" in space_raw:
        nums = space_raw["num_demonstrations"]
        if not isinstance(nums, list) or not all(isinstance(n, int) for n in nums):
            raise ConfigError("search_space.num_demonstrations", "must be a list of integers")
        config.num_demonstrations = tuple(nums)
    if "system_prompts" in space_raw:
        try:
            config.system_prompts = tuple(
                SystemPromptStyle(s) for s in space_raw["system_prompts"]
            )
        except ValueError as exc:
            raise ConfigError("search_space.system_prompts", str(exc)) from exc
    if "instructions" in space_raw:
        instructions = space_raw["instructions"]
        if not isinstance(instructions, list) or not all(isinstance(i, str) for i in instructions):
            raise ConfigError("search_space.instructions", "must be a list of strings")
        config.instructions = tuple(instructions)
    backend_raw = raw.get("backend", {})
    if not isinstance(backend_raw, dict):
        raise ConfigError("backend", "must be a mapping")
    config.backend = backend_raw
    fixtures = raw.get("search_fixtures")
    if fixtures is not None and not isinstance(fixtures, dict):
        raise ConfigError("search_fixtures", "must be a mapping")
    config.search_fixtures = fixtures
    if "sandbox_cmd" in raw and raw["sandbox_cmd"] is not None:
        config.sandbox_cmd = _require(raw, "sandbox_cmd", str, "")
    limits_raw = raw.get("limits", {})
    if not isinstance(limits_raw, dict):
        raise ConfigError("limits", "must be a mapping")
    config.limits = ExecutionLimits(
        max_model_calls=limits_raw.get("max_model_calls", 25),
        max_wall_seconds=limits_raw.get("max_wall_seconds", 300.0),
    )
    config.pattern_limits = PatternLimits(
        max_tao_iterations=limits_raw.get("max_tao_iterations", 7),
        max_execute_attempts=limits_raw.get("max_execute_attempts", 5),
    )
    return config


def build_backend(config: RunConfig) -> Backend:
    spec = config.backend or {"kind": "scripted", "default": ""}
    kind = spec.get("kind")
    if kind == "scripted":
        rules = []
        for i, rule in enumerate(spec.get("rules", [])):
            if not isinstance(rule, dict) or "response" not in rule:
                raise ConfigError(f"backend.rules[{i}]", "each rule needs a response")
            rules.append(
                ScriptRule(
                    response=rule["response"],
                    substring=rule.get("substring"),
                    fingerprint=rule.get("fingerprint"),
                )
            )
        return ScriptedBackend(rules, default=spec.get("default"))
    if kind == "http":
        api_key = spec.get("api_key")
        if api_key is None and spec.get("api_key_env"):
            api_key = os.environ.get(spec["api_key_env"], "")
        return HttpBackend(
            base_url=spec.get("base_url"),
            api_key=api_key,
            timeout_s=spec.get("timeout_s", 60.0),
            max_retries=spec.get("max_retries", 3),
        )
    raise ConfigError("backend.kind", f"unknown backend kind {kind!r}")


def build_search_client(config: RunConfig):
    if config.search_fixtures is not None:
        return FixtureSearchClient(config.search_fixtures)
    return WikipediaSearchClient()


def build_sandbox(config: RunConfig) -> SubprocessSandboxClient | None:
    if config.sandbox_cmd:
        import shlex

        return SubprocessSandboxClient(shlex.split(config.sandbox_cmd))
    if sandbox_available():
        return SubprocessSandboxClient()
    return None


def build_splits(config: RunConfig) -> Splits:
    instances = load_dataset(config.dataset, config.task)
    bank = None
    if config.cross_train_bank:
        bank_task = config.cross_train_task or config.task
        bank = load_dataset(config.cross_train_bank, bank_task)
    return make_splits(instances, config.splits, config.seed, cross_train_bank=bank)


def build_space(config: RunConfig) -> SearchSpace:
    definition = task_def(config.task)
    patterns = config.patterns or (
        PatternKind.ZERO_SHOT,
        PatternKind.COT,
        PatternKind.REACT,
    ) + (() if definition.reactive_only else (PatternKind.REWOO,))
    instructions = config.instructions or (definition.default_instruction,)
    return SearchSpace(
        patterns=patterns,
        num_demonstrations=config.num_demonstrations,
        system_prompts=config.system_prompts,
        instructions=instructions,
        reactive_only=definition.reactive_only,
    )


def _machine(line: str) -> None:
    sys.stdout.write(line + "\n")


def _prose(line: str) -> None:
    sys.stderr.write(line + "\n")


# --- Subcommands ---------------------------------------------------------------------

def cmd_optimize(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.output_dir is not None:
        config.output_dir = args.output_dir
    splits = build_splits(config)
    if config.v_min > len(splits.valid):
        raise ConfigError("v_min", f"{config.v_min} exceeds validation split size {len(splits.valid)}")
    v_max = config.v_max if config.v_max is not None else len(splits.valid)
    if v_max > len(splits.valid):
        raise ConfigError("v_max", f"{v_max} exceeds validation split size {len(splits.valid)}")
    space = build_space(config)
    backend = build_backend(config)
    definition = task_def(config.task)
    search_client = build_search_client(config) if definition.needs_search else None
    sandbox = build_sandbox(config) if definition.needs_sandbox else None
    registry = make_registry(config.task, search_client, sandbox)
    evaluator = make_evaluator(config.task, sandbox)
    harness = CandidateEvaluator(
        task=config.task,
        bank=splits.train,
        backend=backend,
        tools=registry,
        evaluator=evaluator,
        model_id=config.model_id,
        exec_limits=config.limits,
        pattern_limits=config.pattern_limits,
    )
    result = run_optimization(
        space,
        harness,
        splits.valid,
        splits.test,
        k=config.k,
        v_min=config.v_min,
        v_max=v_max,
        seed=config.seed,
        parallelism=config.parallelism,
    )
    os.makedirs(config.output_dir, exist_ok=True)
    solution_path = os.path.join(config.output_dir, "solution.pdl.yaml")
    with open(solution_path, "w", encoding="utf-8") as handle:
        handle.write(serialize_program(result.emitted_program))
    log_path = os.path.join(config.output_dir, "experiment_log.jsonl")
    write_experiment_log(log_path, result)
    _prose(f"winner: {result.winner.pattern.value} n={result.winner.n}")
    _machine(f"solution: {solution_path}")
    _machine(f"log: {log_path}")
    if result.test_accuracy is not None:
        _machine(f"test_accuracy: {result.test_accuracy}")
    return EXIT_OK


def _read_program(path: str) -> Program:
    try:
        with open(path, encoding="utf-8") as handle:
            return parse_program(handle.read())
    except OSError as exc:
        raise DataError(f"cannot read program {path!r}: {exc}") from exc


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    program = _read_program(args.program)
    splits = build_splits(config)
    split = {"valid": splits.valid, "test": splits.test, "train": splits.train}[args.split]
    if not split:
        raise ConfigError("splits", f"{args.split} split is empty")
    backend = build_backend(config)
    definition = task_def(config.task)
    search_client = build_search_client(config) if definition.needs_search else None
    sandbox = build_sandbox(config) if definition.needs_sandbox else None
    registry = make_registry(config.task, search_client, sandbox)
    evaluator = make_evaluator(config.task, sandbox)
    from .optimizer import evaluate_final

    report = evaluate_final(
        program, split, backend, registry, evaluator, config.model_id, config.limits
    )
    verdict_path = args.verdicts or os.path.join(config.output_dir, "verdicts.jsonl")
    os.makedirs(os.path.dirname(verdict_path) or ".", exist_ok=True)
    with open(verdict_path, "w", encoding="utf-8") as handle:
        for instance_id, verdict in report.verdicts:
            handle.write(
                json.dumps(
                    {
                        "id": instance_id,
                        "correct": verdict.correct,
                        "extracted": verdict.extracted,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    _machine(f"accuracy: {report.accuracy}")
    _prose(f"verdicts: {verdict_path}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    program = _read_program(args.program)
    variables: dict[str, Any] = {"model_id": args.model_id}
    for assignment in args.var or []:
        if "=" not in assignment:
            raise ConfigError("var", f"expected name=value, got {assignment!r}")
        name, value = assignment.split("=", 1)
        variables[name] = value
    if args.config:
        config = load_config(args.config)
        backend = build_backend(config)
        definition = task_def(config.task)
        search_client = build_search_client(config) if definition.needs_search else None
        sandbox = build_sandbox(config)
        registry = make_registry(
            config.task, search_client, sandbox if definition.needs_sandbox else None
        )
        limits = config.limits
    else:
        backend = ScriptedBackend(default="")
        registry = make_registry("gsm8k")
        sandbox = SubprocessSandboxClient() if sandbox_available() else None
        limits = ExecutionLimits()
    if registry.sandbox is None and sandbox is not None:
        # Standalone programs may carry code blocks even on tool-free tasks.
        registry.sandbox = sandbox
    parent = library_scope(load_library()) if not args.no_library else None
    scope = Scope(variables, parent=parent)
    result = execute_program(program, scope, backend, registry, limits)
    sys.stdout.write(result.output)
    if result.output and not result.output.endswith("\n"):
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_trajectories(args: argparse.Namespace) -> int:
    definition = task_def(args.task)
    try:
        kind = PatternKind(args.kind)
    except ValueError as exc:
        raise ConfigError("kind", str(exc)) from exc
    if kind not in (PatternKind.REACT, PatternKind.REWOO, PatternKind.COT):
        raise ConfigError("kind", f"cannot build demonstrations for {kind.value}")
    if kind == PatternKind.REWOO and definition.reactive_only:
        raise ConfigError("kind", f"task {args.task!r} is reactive-only; plan-style demos unsupported")
    instances = load_dataset(args.input, args.task)
    built = 0
    skipped = 0
    with open(args.output, "w", encoding="utf-8") as handle:
        for instance in instances:
            try:
                demo = build_demonstration(args.task, instance, kind)
            except TrajectoryBuildError:
                skipped += 1
                continue
            handle.write(json.dumps(demonstration_to_json(demo), sort_keys=True) + "\n")
            built += 1
    _machine(f"built: {built}")
    _machine(f"skipped: {skipped}")
    return EXIT_OK


# --- Entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptopt",
        description="Optimize prompting pattern and prompt content for a task.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run the full optimization loop")
    p_opt.add_argument("--config", required=True)
    p_opt.add_argument("--seed", type=int, default=None)
    p_opt.add_argument("--output-dir", default=None)
    p_opt.set_defaults(handler=cmd_optimize)

    p_eval = sub.add_parser("evaluate", help="evaluate a program file on a split")
    p_eval.add_argument("program")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p_eval.add_argument("--verdicts", default=None)
    p_eval.set_defaults(handler=cmd_evaluate)

    p_run = sub.add_parser("run", help="execute one program")
    p_run.add_argument("program")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--var", action="append", metavar="NAME=VALUE")
    p_run.add_argument("--model-id", default="default")
    p_run.add_argument("--no-library", action="store_true")
    p_run.set_defaults(handler=cmd_run)

    p_traj = sub.add_parser("trajectories", help="build demonstration trajectories")
    p_traj.add_argument("--task", required=True)
    p_traj.add_argument("--input", required=True)
    p_traj.add_argument("--output", required=True)
    p_traj.add_argument("--kind", default="ReAct")
    p_traj.set_defaults(handler=cmd_trajectories)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, UnboundPathError) as exc:
        _prose(f"configuration error: {exc}")
        return EXIT_CONFIG
    except BackendError as exc:
        _prose(f"backend error: {exc}")
        return EXIT_BACKEND
    except (DataError, DslParseError, OSError) as exc:
        _prose(f"data error: {exc}")
        return EXIT_DATA
    except ReWOOUnsupportedError as exc:
        _prose(f"configuration error: {exc}")
        return EXIT_CONFIG
    except PromptOptError as exc:
        _prose(f"error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
