"""Search-space sampling and the successive-halving race.

The search space is the product of pattern, demonstration count, sampled
demonstrations, system prompt (reactive pattern on JSON-tool tasks only),
and instruction.  Candidates are drawn with per-candidate RNG streams
derived from the master seed, so results do not depend on evaluation
order or parallelism.  When zero demonstrations is an option, every
sampled set contains at least one zero-shot candidate.

The race repeatedly scores all survivors on a growing prefix of the
validation split, keeps the better half (ties broken by sampling order),
and doubles the prefix up to its cap.  Per-instance verdicts are cached:
because subsets grow strictly by prefix, a survivor re-scored on a longer
prefix only pays for the new instances.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from .backends import Backend
from .dsl import Program, parse_program, serialize_program
from .errors import (
    AuthenticationError,
    BackendUnavailableError,
    EmptySpaceError,
    InsufficientDataError,
    PromptOptError,
    ReWOOUnsupportedError,
)
from .interpreter import ExecutionLimits, execute_program
from .patterns import (
    PatternKind,
    PatternLimits,
    SystemPromptStyle,
    instantiate_pattern,
)
from .tasks import TaskInstance, Verdict
from .tools import ToolRegistry
from .trajectories import Demonstration, build_demonstration, refinement_examples

LossFn = Callable[["Candidate", Sequence[TaskInstance]], float]


@dataclass(frozen=True)
class SearchSpace:
    patterns: tuple[PatternKind, ...]
    num_demonstrations: tuple[int, ...] = (0, 3, 5)
    system_prompts: tuple[SystemPromptStyle, ...] = tuple(SystemPromptStyle)
    instructions: tuple[str, ...] = ("",)
    reactive_only: bool = False

    def __post_init__(self) -> None:
        if not self.patterns:
            raise EmptySpaceError("patterns dimension is empty")
        if not self.num_demonstrations:
            raise EmptySpaceError("num_demonstrations dimension is empty")
        if not self.instructions:
            raise EmptySpaceError("instructions dimension is empty")
        if any(n < 0 for n in self.num_demonstrations):
            raise EmptySpaceError("demonstration counts must be non-negative")
        if self.reactive_only and PatternKind.REWOO in self.patterns:
            raise ReWOOUnsupportedError(
                "plan-then-solve cannot be searched on a reactive-only task"
            )


@dataclass(frozen=True)
class Candidate:
    pattern: PatternKind
    n: int
    demo_ids: tuple[int, ...]
    system_prompt: SystemPromptStyle | None
    instruction: str
    candidate_index: int

    def to_json(self) -> dict[str, Any]:
        return {
            "pattern": self.pattern.value,
            "n": self.n,
            "demo_ids": list(self.demo_ids),
            "system_prompt": self.system_prompt.value if self.system_prompt else None,
            "instruction": self.instruction,
            "candidate_index": self.candidate_index,
        }


@dataclass(frozen=True)
class RoundRecord:
    round: int
    subset_size: int
    survivors: tuple[int, ...]
    losses: dict[int, float]

    def to_json(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "subset_size": self.subset_size,
            "survivors": list(self.survivors),
            "losses": {str(index): loss for index, loss in sorted(self.losses.items())},
        }


@dataclass
class OptimizationResult:
    winner: Candidate
    rounds: list[RoundRecord]
    emitted_program: Program | None = None
    test_accuracy: float | None = None


def candidate_seed(master_seed: int, candidate_index: int) -> int:
    """Platform-stable per-candidate RNG seed."""
    digest = hashlib.sha256(f"{master_seed}:{candidate_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def sample_candidates(
    space: SearchSpace,
    k: int,
    train_bank_size: int,
    seed: int,
    eligible: Mapping[PatternKind, Sequence[int]] | None = None,
) -> list[Candidate]:
    """Draw k candidates uniformly over the dimension product.

    Demonstrations are drawn with replacement from the train bank (or the
    per-pattern eligible subset).  If zero demonstrations is an option and
    the sample has no zero-shot candidate, the first slot is replaced by
    one, so the baseline is always in the race.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if train_bank_size < max(space.num_demonstrations):
        raise InsufficientDataError(
            f"train bank of {train_bank_size} cannot supply "
            f"{max(space.num_demonstrations)} demonstrations"
        )
    candidates: list[Candidate] = []
    for index in range(k):
        rng = random.Random(candidate_seed(seed, index))
        pattern = rng.choice(space.patterns)
        n = rng.choice(space.num_demonstrations)
        if pattern == PatternKind.ZERO_SHOT:
            n = 0
        pool: Sequence[int] | None = None
        if n > 0:
            pool = (eligible or {}).get(pattern)
            if pool is None:
                pool = range(train_bank_size)
            if not pool:
                raise EmptySpaceError(
                    f"no eligible demonstrations for pattern {pattern.value}"
                )
        demo_ids = tuple(pool[rng.randrange(len(pool))] for _ in range(n)) if n else ()
        style = None
        if (
            pattern == PatternKind.REACT
            and not space.reactive_only
            and space.system_prompts
        ):
            style = rng.choice(space.system_prompts)
        instruction = rng.choice(space.instructions)
        candidates.append(Candidate(pattern, n, demo_ids, style, instruction, index))
    if 0 in space.num_demonstrations and PatternKind.ZERO_SHOT in space.patterns:
        if not any(c.pattern == PatternKind.ZERO_SHOT and c.n == 0 for c in candidates):
            first = candidates[0]
            candidates[0] = Candidate(
                PatternKind.ZERO_SHOT, 0, (), None, first.instruction, 0
            )
    return candidates


# --- Candidate evaluation --------------------------------------------------------

def candidate_program(
    candidate: Candidate,
    demos: Sequence[Demonstration],
    tools: ToolRegistry,
    pattern_limits: PatternLimits | None = None,
) -> Program:
    return instantiate_pattern(
        candidate.pattern,
        candidate.instruction,
        demos,
        tools.specs,
        candidate.system_prompt,
        pattern_limits,
    )


def run_instance(
    program: Program,
    instance: TaskInstance,
    backend: Backend,
    tools: ToolRegistry,
    evaluator: Callable[[str, TaskInstance], Verdict],
    model_id: str,
    limits: ExecutionLimits | None = None,
) -> Verdict:
    """Execute one program on one instance; execution failure is incorrect."""
    scope = {"question": instance.question, "model_id": model_id}
    try:
        result = execute_program(program, scope, backend, tools, limits or ExecutionLimits())
    except (BackendUnavailableError, AuthenticationError):
        raise
    except PromptOptError:
        return Verdict(False, None)
    return evaluator(result.output, instance)


def candidate_loss(
    candidate: Candidate,
    subset: Sequence[TaskInstance],
    backend: Backend,
    tools: ToolRegistry,
    evaluator: Callable[[str, TaskInstance], Verdict],
    demos: Sequence[Demonstration] = (),
    model_id: str = "default",
    exec_limits: ExecutionLimits | None = None,
    pattern_limits: PatternLimits | None = None,
) -> float:
    """Negative accuracy of the candidate's program on the given subset."""
    if not subset:
        raise InsufficientDataError("validation subset must be nonempty")
    program = candidate_program(candidate, demos, tools, pattern_limits)
    correct = sum(
        run_instance(program, inst, backend, tools, evaluator, model_id, exec_limits).correct
        for inst in subset
    )
    return -correct / len(subset)


class CandidateEvaluator:
    """Materializes candidate programs and caches per-instance verdicts.

    Safe for concurrent use during a round: candidates are evaluated on
    disjoint cache keys and insertions are lock-protected.
    """

    def __init__(
        self,
        task: str,
        bank: Sequence[TaskInstance],
        backend: Backend,
        tools: ToolRegistry,
        evaluator: Callable[[str, TaskInstance], Verdict],
        model_id: str = "default",
        exec_limits: ExecutionLimits | None = None,
        pattern_limits: PatternLimits | None = None,
    ) -> None:
        self.task = task
        self.bank = list(bank)
        self.backend = backend
        self.tools = tools
        self.evaluator = evaluator
        self.model_id = model_id
        self.exec_limits = exec_limits or ExecutionLimits()
        self.pattern_limits = pattern_limits or PatternLimits()
        self._programs: dict[int, Program] = {}
        self._cache: dict[tuple[int, str], bool] = {}
        self._lock = threading.Lock()

    def demonstrations(self, candidate: Candidate) -> list[Demonstration]:
        demos = [
            build_demonstration(self.task, self.bank[i], candidate.pattern)
            for i in candidate.demo_ids
        ]
        if self.task == "mbpp" and candidate.pattern == PatternKind.REACT and demos:
            demos = list(refinement_examples()) + demos
        return demos

    def eligible_demo_ids(self, space: SearchSpace) -> dict[PatternKind, list[int]]:
        eligible: dict[PatternKind, list[int]] = {}
        for pattern in space.patterns:
            if pattern == PatternKind.ZERO_SHOT:
                continue
            good: list[int] = []
            for i, instance in enumerate(self.bank):
                try:
                    build_demonstration(self.task, instance, pattern)
                except PromptOptError:
                    continue
                good.append(i)
            eligible[pattern] = good
        return eligible

    def program_for(self, candidate: Candidate) -> Program:
        with self._lock:
            program = self._programs.get(candidate.candidate_index)
        if program is None:
            program = candidate_program(
                candidate, self.demonstrations(candidate), self.tools, self.pattern_limits
            )
            with self._lock:
                self._programs[candidate.candidate_index] = program
        return program

    def loss(self, candidate: Candidate, subset: Sequence[TaskInstance]) -> float:
        if not subset:
            raise InsufficientDataError("validation subset must be nonempty")
        program = self.program_for(candidate)
        correct = 0
        for instance in subset:
            key = (candidate.candidate_index, instance.id)
            with self._lock:
                cached = self._cache.get(key)
            if cached is None:
                cached = run_instance(
                    program,
                    instance,
                    self.backend,
                    self.tools,
                    self.evaluator,
                    self.model_id,
                    self.exec_limits,
                ).correct
                with self._lock:
                    self._cache[key] = cached
            correct += cached
        return -correct / len(subset)


# --- The race -----------------------------------------------------------------------

def successive_halving(
    candidates: Sequence[Candidate],
    d_valid_ordered: Sequence[TaskInstance],
    v_min: int,
    v_max: int,
    loss_fn: LossFn,
    parallelism: int = 1,
) -> tuple[Candidate, list[RoundRecord]]:
    """Race candidates on doubling validation prefixes, halving each round.

    Returns the single surviving candidate and the per-round records.  Ties
    are broken by sampling order (lower candidate index survives).
    """
    if not candidates:
        raise ValueError("candidate list must be nonempty")
    if v_min < 1:
        raise ValueError("v_min must be >= 1")
    if v_max < v_min:
        raise ValueError("v_max must be >= v_min")
    if v_max > len(d_valid_ordered):
        raise InsufficientDataError(
            f"v_max {v_max} exceeds validation split size {len(d_valid_ordered)}"
        )
    survivors = list(candidates)
    rounds: list[RoundRecord] = []
    v = v_min
    round_no = 0
    while len(survivors) > 1:
        subset = list(d_valid_ordered[:v])
        if parallelism > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                loss_values = list(pool.map(lambda c: loss_fn(c, subset), survivors))
        else:
            loss_values = [loss_fn(c, subset) for c in survivors]
        losses = {c.candidate_index: loss for c, loss in zip(survivors, loss_values)}
        keep = len(survivors) // 2
        survivors = sorted(
            survivors, key=lambda c: (losses[c.candidate_index], c.candidate_index)
        )[:keep]
        rounds.append(
            RoundRecord(round_no, v, tuple(c.candidate_index for c in survivors), losses)
        )
        v = min(v_max, 2 * v)
        round_no += 1
    return survivors[0], rounds


def emit_optimized_program(
    winner: Candidate,
    demos: Sequence[Demonstration],
    tools: ToolRegistry,
    pattern_limits: PatternLimits | None = None,
) -> Program:
    """Source form of the winning candidate; round-trips through the parser."""
    program = candidate_program(winner, demos, tools, pattern_limits)
    reparsed = parse_program(serialize_program(program))
    if reparsed != program:
        raise PromptOptError("emitted program failed the round-trip check")
    return program


@dataclass(frozen=True)
class FinalReport:
    accuracy: float
    verdicts: list[tuple[str, Verdict]] = field(default_factory=list)


def evaluate_final(
    program: Program,
    test_split: Sequence[TaskInstance],
    backend: Backend,
    tools: ToolRegistry,
    evaluator: Callable[[str, TaskInstance], Verdict],
    model_id: str = "default",
    limits: ExecutionLimits | None = None,
) -> FinalReport:
    if not test_split:
        raise InsufficientDataError("test split must be nonempty")
    verdicts: list[tuple[str, Verdict]] = []
    for instance in test_split:
        verdict = run_instance(program, instance, backend, tools, evaluator, model_id, limits)
        verdicts.append((instance.id, verdict))
    accuracy = sum(v.correct for _, v in verdicts) / len(verdicts)
    return FinalReport(accuracy, verdicts)


# --- Orchestration & logging ----------------------------------------------------------

def run_optimization(
    space: SearchSpace,
    harness: CandidateEvaluator,
    d_valid: Sequence[TaskInstance],
    d_test: Sequence[TaskInstance],
    k: int = 100,
    v_min: int = 16,
    v_max: int | None = None,
    seed: int = 0,
    parallelism: int = 1,
) -> OptimizationResult:
    """Sample, race, emit, and (when a test split is given) evaluate."""
    v_max = len(d_valid) if v_max is None else v_max
    eligible = harness.eligible_demo_ids(space)
    candidates = sample_candidates(space, k, len(harness.bank), seed, eligible)
    winner, rounds = successive_halving(
        candidates, d_valid, v_min, v_max, harness.loss, parallelism
    )
    program = emit_optimized_program(
        winner, harness.demonstrations(winner), harness.tools, harness.pattern_limits
    )
    result = OptimizationResult(winner, rounds, program)
    if d_test:
        report = evaluate_final(
            program,
            d_test,
            harness.backend,
            harness.tools,
            harness.evaluator,
            harness.model_id,
            harness.exec_limits,
        )
        result.test_accuracy = report.accuracy
    return result


def experiment_log_lines(result: OptimizationResult) -> list[str]:
    """One JSON line per round plus the terminal winner line; byte-stable."""
    lines = [
        json.dumps(record.to_json(), sort_keys=True, separators=(",", ":"))
        for record in result.rounds
    ]
    terminal = {
        "winner": result.winner.to_json(),
        "test_accuracy": result.test_accuracy,
    }
    lines.append(json.dumps(terminal, sort_keys=True, separators=(",", ":")))
    return lines


def write_experiment_log(path: str, result: OptimizationResult) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for line in experiment_log_lines(result):
            handle.write(line + "\n")
