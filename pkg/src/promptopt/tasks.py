"""Dataset loading, deterministic splits, and per-task correctness evaluation.

The canonical ingestion format is JSONL, one instance per line:

    {"id": ..., "question": ..., "answer": ..., "metadata": {...}}

Per-task metadata (see docs/datasets.md): math instances carry annotated
reasoning ``steps``; claim instances carry ``evidence`` articles with titles,
summaries, and sentences; coding instances carry the reference ``solution``,
the single prompt ``test``, and the hidden ``tests`` list.  Converters from
raw public dumps live in scripts/ and are not part of this API.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .errors import (
    DataError,
    DatasetSchemaError,
    InsufficientDataError,
    SandboxUnavailableError,
)
from .sandbox import SandboxClient, SandboxRequest
from .tools import (
    ToolRegistry,
    calc_registry,
    execute_registry,
    search_registry,
)
from .wiki import SearchClient

KNOWN_TASKS = ("gsm8k", "gsmhard", "fever", "mbpp")

MBPP_EVAL_TIMEOUT_S = 10.0


@dataclass(frozen=True)
class TaskInstance:
    id: str
    question: str
    answer: str
    metadata: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SplitSizes:
    train: int
    valid: int
    test: int


@dataclass(frozen=True)
class Splits:
    train: list[TaskInstance]
    valid: list[TaskInstance]
    test: list[TaskInstance]


@dataclass(frozen=True)
class Verdict:
    correct: bool
    extracted: str | None = None


# --- Loading -----------------------------------------------------------------------

def load_dataset(path: str, task: str) -> list[TaskInstance]:
    """Load canonical JSONL; malformed lines are hard errors with line numbers."""
    if task not in KNOWN_TASKS:
        raise DataError(f"unknown task {task!r}; known: {KNOWN_TASKS}")
    instances: list[TaskInstance] = []
    seen: set[str] = set()
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path!r}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetSchemaError(lineno, f"not JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise DatasetSchemaError(lineno, "record must be a JSON object")
        for key in ("id", "question", "answer"):
            if key not in record:
                raise DatasetSchemaError(lineno, f"missing {key!r}")
            if not isinstance(record[key], str):
                raise DatasetSchemaError(lineno, f"{key!r} must be a string")
        if not record["answer"]:
            raise DatasetSchemaError(lineno, "answer must be nonempty")
        metadata = record.get("metadata", {})
        if not isinstance(metadata, dict):
            raise DatasetSchemaError(lineno, "metadata must be an object")
        if record["id"] in seen:
            raise DatasetSchemaError(lineno, f"duplicate id {record['id']!r}")
        seen.add(record["id"])
        if task == "fever" and record["answer"] not in ("true", "false"):
            raise DatasetSchemaError(lineno, "claim answers must be 'true' or 'false'")
        instances.append(
            TaskInstance(record["id"], record["question"], record["answer"], metadata)
        )
    return instances


# --- Splits ------------------------------------------------------------------------

def make_splits(
    instances: Sequence[TaskInstance],
    sizes: SplitSizes,
    seed: int,
    cross_train_bank: Sequence[TaskInstance] | None = None,
) -> Splits:
    """Seeded shuffle, then partition; the bank replaces train when given.

    The post-shuffle validation order is the racing order: growing subsets
    are prefixes of the valid split as returned here.
    """
    needed = sizes.valid + sizes.test + (0 if cross_train_bank is not None else sizes.train)
    if needed > len(instances):
        raise InsufficientDataError(
            f"need {needed} instances for the requested sizes, have {len(instances)}"
        )
    if cross_train_bank is not None and sizes.train not in (0, len(cross_train_bank)):
        raise InsufficientDataError(
            "sizes.train must be 0 (or the bank size) when a cross-train bank is supplied"
        )
    pool = list(instances)
    random.Random(seed).shuffle(pool)
    if cross_train_bank is not None:
        train = list(cross_train_bank)
        valid = pool[: sizes.valid]
        test = pool[sizes.valid : sizes.valid + sizes.test]
    else:
        train = pool[: sizes.train]
        valid = pool[sizes.train : sizes.train + sizes.valid]
        test = pool[sizes.train + sizes.valid : sizes.train + sizes.valid + sizes.test]
    train_ids = {inst.id for inst in train}
    eval_ids = {inst.id for inst in valid} | {inst.id for inst in test}
    if train_ids & eval_ids:
        raise DataError(
            f"train bank shares ids with valid/test: {sorted(train_ids & eval_ids)[:5]}"
        )
    return Splits(train, valid, test)


# --- Math evaluation ------------------------------------------------------------------

_NUMBER_RE = re.compile(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?")
_DELIMITER_RE = re.compile(r"The answer is|####", re.IGNORECASE)


def normalize_number(text: str) -> str:
    out = text.replace(",", "")
    if out.startswith("+"):
        out = out[1:]
    match = re.fullmatch(r"(-?\d+)\.0+", out)
    if match:
        out = match.group(1)
    return out


def eval_gsm8k(model_output: str, truth: str) -> Verdict:
    """Exact match on the extracted final number.

    The number right after the last answer delimiter wins; without a
    delimiter, the last number anywhere in the output is used.
    """
    candidate: str | None = None
    delimiters = list(_DELIMITER_RE.finditer(model_output))
    if delimiters:
        after = model_output[delimiters[-1].end() :]
        match = _NUMBER_RE.search(after)
        if match:
            candidate = match.group(0)
    if candidate is None:
        matches = list(_NUMBER_RE.finditer(model_output))
        if matches:
            candidate = matches[-1].group(0)
    if candidate is None:
        return Verdict(False, None)
    extracted = normalize_number(candidate)
    return Verdict(extracted == normalize_number(truth.strip()), extracted)


# --- Claim evaluation -------------------------------------------------------------------

def eval_fever(model_output: str, truth: str) -> Verdict:
    """Presence of exactly one of true/false in the final nonempty line."""
    lines = [line for line in model_output.splitlines() if line.strip()]
    if not lines:
        return Verdict(False, None)
    final = lines[-1].lower()
    has_true = "true" in final
    has_false = "false" in final
    if has_true == has_false:
        return Verdict(False, None)
    extracted = "true" if has_true else "false"
    return Verdict(extracted == truth.strip().lower(), extracted)


# --- Coding evaluation ---------------------------------------------------------------------

_SOLUTION_TAG_RE = re.compile(r"<solution>(.*?)</solution>", re.DOTALL)
_CODE_FENCE_RE = re.compile(r"```(?:python)?\s*\n(.*?)```", re.DOTALL)


def extract_solution_code(model_output: str) -> str:
    """Pull submitted code out of model output: solution tag, fence, or raw text."""
    match = _SOLUTION_TAG_RE.search(model_output)
    if match:
        return match.group(1).strip("\n")
    match = _CODE_FENCE_RE.search(model_output)
    if match:
        return match.group(1).strip("\n")
    return model_output.strip()


def eval_mbpp(
    solution_code: str,
    hidden_tests: Sequence[str],
    sandbox: SandboxClient,
    timeout_s: float = MBPP_EVAL_TIMEOUT_S,
) -> Verdict:
    """Run the hidden test suite; correct when every assertion passes."""
    if not hidden_tests:
        raise DataError("hidden test list must be nonempty")
    response = sandbox.run(
        SandboxRequest(
            code=solution_code,
            timeout_s=timeout_s,
            mode="test_suite",
            tests=tuple(hidden_tests),
        )
    )
    if response.status != "ok" or response.per_test is None:
        return Verdict(False, None)
    return Verdict(all(response.per_test), None)


# --- Task registry ---------------------------------------------------------------------------

Evaluator = Callable[[str, TaskInstance], Verdict]


@dataclass(frozen=True)
class TaskDef:
    name: str
    reactive_only: bool
    default_instruction: str
    needs_search: bool = False
    needs_sandbox: bool = False


TASKS: dict[str, TaskDef] = {
    "gsm8k": TaskDef(
        name="gsm8k",
        reactive_only=False,
        default_instruction=(
            "Solve the grade school math word problem. Give the final numeric "
            "answer on a line of the form 'The answer is <number>'."
        ),
    ),
    "gsmhard": TaskDef(
        name="gsmhard",
        reactive_only=False,
        default_instruction=(
            "Solve the math word problem. The numbers may be unusually large; "
            "compute carefully. Give the final numeric answer on a line of the "
            "form 'The answer is <number>'."
        ),
    ),
    "fever": TaskDef(
        name="fever",
        reactive_only=False,
        needs_search=True,
        default_instruction=(
            "Decide whether the claim is true or false. End your response with "
            "a line of the form 'The claim is true.' or 'The claim is false.'"
        ),
    ),
    "mbpp": TaskDef(
        name="mbpp",
        reactive_only=True,
        needs_sandbox=True,
        default_instruction=(
            "Write a self-contained Python function that solves the problem and "
            "passes the given test."
        ),
    ),
}


def task_def(task: str) -> TaskDef:
    try:
        return TASKS[task]
    except KeyError:
        raise DataError(f"unknown task {task!r}; known: {sorted(TASKS)}") from None


def make_registry(
    task: str,
    search_client: SearchClient | None = None,
    sandbox: SandboxClient | None = None,
) -> ToolRegistry:
    definition = task_def(task)
    if definition.needs_search:
        if search_client is None:
            raise DataError(f"task {task!r} needs a search client")
        return search_registry(search_client)
    if definition.needs_sandbox:
        if sandbox is None:
            raise SandboxUnavailableError(f"task {task!r} needs a sandbox client")
        return execute_registry(sandbox)
    return calc_registry()


def make_evaluator(task: str, sandbox: SandboxClient | None = None) -> Evaluator:
    definition = task_def(task)
    if definition.name in ("gsm8k", "gsmhard"):
        return lambda output, instance: eval_gsm8k(output, instance.answer)
    if definition.name == "fever":
        return lambda output, instance: eval_fever(output, instance.answer)
    if sandbox is None:
        raise SandboxUnavailableError("coding evaluation needs a sandbox client")

    def evaluate(output: str, instance: TaskInstance) -> Verdict:
        code = extract_solution_code(output)
        tests = instance.metadata.get("tests", [])
        verdict = eval_mbpp(code, tests, sandbox)
        return Verdict(verdict.correct, code)

    return evaluate
