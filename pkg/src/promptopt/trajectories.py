"""Rule-based construction of agentic demonstration trajectories.

Each supported task has a deterministic template that turns a raw training
instance into a thought/action/observation sequence:

* math word problems: one Calc step per annotated expression
  (``<<expr=result>>`` markers in the reasoning steps), closing with the
  answer thought and a Finish action.  The plan-style variant rewords
  thoughts, drops observations and the finish, and rewrites literal results
  of earlier steps as #E1..#En placeholders.
* claim verification: one Search step per evidence article followed by the
  relevant sentences, closing with the verdict thought and Finish; the CoT
  variant keeps only the concatenated evidence sentences.
* coding: run the known-good solution against the prompt test case, observe
  the success sentinel, then submit the solution.

Identical instances always produce byte-identical trajectories.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence, Union

from .errors import (
    MissingTestCaseError,
    NoEvidenceError,
    NoExpressionsError,
    TrajectoryBuildError,
)
from .tools import ToolCall


class PatternKind(Enum):
    ZERO_SHOT = "ZeroShot"
    COT = "CoT"
    REWOO = "ReWOO"
    REACT = "ReAct"


@dataclass(frozen=True)
class Thought:
    text: str


@dataclass(frozen=True)
class Action:
    call: ToolCall


@dataclass(frozen=True)
class Observation:
    text: str


@dataclass(frozen=True)
class Finish:
    value: str


Step = Union[Thought, Action, Observation, Finish]


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    kind: PatternKind
    task: str
    question: str

    def __post_init__(self) -> None:
        if not self.steps:
            raise TrajectoryBuildError("trajectories are never empty")
        if self.kind == PatternKind.REWOO:
            for step in self.steps:
                if isinstance(step, (Observation, Finish)):
                    raise TrajectoryBuildError(
                        "plan-style trajectories carry no observations or finish"
                    )
        elif self.kind == PatternKind.REACT:
            if not isinstance(self.steps[-1], Finish):
                raise TrajectoryBuildError("reactive trajectories must end with Finish")
            for i, step in enumerate(self.steps):
                if isinstance(step, Observation) and not isinstance(self.steps[i - 1], Action):
                    raise TrajectoryBuildError("observations must follow actions")
        else:
            raise TrajectoryBuildError(f"trajectory kind must be ReAct or ReWOO, got {self.kind}")


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    reasoning: str | None = None


Demonstration = Union[QAPair, Trajectory]


# --- JSON round-trip -----------------------------------------------------------

def step_to_json(step: Step) -> dict[str, Any]:
    if isinstance(step, Thought):
        return {"type": "thought", "text": step.text}
    if isinstance(step, Action):
        return {"type": "action", "action": step.call.action, "arguments": step.call.arguments}
    if isinstance(step, Observation):
        return {"type": "observation", "text": step.text}
    if isinstance(step, Finish):
        return {"type": "finish", "value": step.value}
    raise TypeError(f"not a step: {step!r}")


def step_from_json(node: dict[str, Any]) -> Step:
    kind = node.get("type")
    if kind == "thought":
        return Thought(node["text"])
    if kind == "action":
        return Action(ToolCall(node["action"], dict(node.get("arguments", {}))))
    if kind == "observation":
        return Observation(node["text"])
    if kind == "finish":
        return Finish(node["value"])
    raise TrajectoryBuildError(f"unknown step type {kind!r}")


def trajectory_to_json(traj: Trajectory) -> dict[str, Any]:
    return {
        "task": traj.task,
        "kind": traj.kind.value,
        "question": traj.question,
        "steps": [step_to_json(step) for step in traj.steps],
    }


def trajectory_from_json(node: dict[str, Any]) -> Trajectory:
    return Trajectory(
        steps=tuple(step_from_json(s) for s in node["steps"]),
        kind=PatternKind(node["kind"]),
        task=node["task"],
        question=node.get("question", ""),
    )


def demonstration_to_json(demo: Demonstration) -> dict[str, Any]:
    if isinstance(demo, Trajectory):
        return trajectory_to_json(demo)
    node: dict[str, Any] = {"question": demo.question, "answer": demo.answer}
    if demo.reasoning is not None:
        node["reasoning"] = demo.reasoning
    return node


def demonstration_from_json(node: dict[str, Any]) -> Demonstration:
    if "steps" in node:
        return trajectory_from_json(node)
    return QAPair(
        question=node["question"],
        answer=node["answer"],
        reasoning=node.get("reasoning"),
    )


# --- Rendering -------------------------------------------------------------------

def _action_line(call: ToolCall, xml_actions: bool) -> str:
    if xml_actions:
        return f"Act: <execute>\n{call.arguments.get('code', '')}\n</execute>"
    body = json.dumps(
        {"action": call.action, "arguments": call.arguments},
        separators=(",", ":"),
        sort_keys=True,
        ensure_ascii=False,
    )
    return f"Act: {body}"


def _finish_line(value: str, xml_actions: bool) -> str:
    if xml_actions:
        return f"Act: <solution>\n{value}\n</solution>"
    body = json.dumps(
        {"action": "Finish", "arguments": {"answer": value}},
        separators=(",", ":"),
        sort_keys=True,
        ensure_ascii=False,
    )
    return f"Act: {body}"


def render_trajectory(traj: Trajectory) -> str:
    """Deterministic text form: Tho:/Act:/Obs: lines after the question."""
    xml_actions = traj.task == "mbpp"
    lines = [f"Question: {traj.question}"]
    for step in traj.steps:
        if isinstance(step, Thought):
            lines.append(f"Tho: {step.text}")
        elif isinstance(step, Action):
            lines.append(_action_line(step.call, xml_actions))
        elif isinstance(step, Observation):
            lines.append(f"Obs: {step.text}")
        else:
            lines.append(_finish_line(step.value, xml_actions))
    return "\n".join(lines)


def render_qa_pair(pair: QAPair) -> str:
    if pair.reasoning:
        return f"Q: {pair.question}\nA: {pair.reasoning}\nThe answer is {pair.answer}"
    return f"Q: {pair.question}\nA: The answer is {pair.answer}"


# --- Math word problems ------------------------------------------------------------

_ANNOTATION_RE = re.compile(r"<<([^<>]+)>>")


def _annotated_expressions(steps: Sequence[str]) -> list[tuple[str, str, str]]:
    """Yield (leading text, expression, result) per calculator annotation."""
    found: list[tuple[str, str, str]] = []
    for step in steps:
        pos = 0
        for match in _ANNOTATION_RE.finditer(step):
            content = match.group(1)
            if "=" not in content:
                continue
            expr, result = content.rsplit("=", 1)
            leading = step[pos : match.start()].strip()
            # Drop the inline echo of the expression preceding the marker.
            if leading.endswith("="):
                leading = leading[:-1].strip()
            if leading.endswith(expr.strip()):
                leading = leading[: len(leading) - len(expr.strip())].strip()
                if leading.endswith("="):
                    leading = leading[:-1].strip()
            found.append((leading, expr.strip(), result.strip()))
            pos = match.end()
    return found


def _boundary_replace(text: str, needle: str, replacement: str) -> str:
    pattern = re.compile(rf"(?<![\w.]){re.escape(needle)}(?![\w.])")
    return pattern.sub(replacement, text)


def build_gsm8k_trajectory(
    instance: "TaskInstanceLike", kind: PatternKind, task: str = "gsm8k"
) -> Trajectory:
    """Turn annotated reasoning steps into a Calc trajectory.

    Reactive form: per expression a thought ("... I need to calculate e"),
    the Calc action, and the result observation; then the answer thought and
    Finish.  Plan form: "Calculate e" thoughts, no observations or finish,
    with literal results of earlier steps replaced by #E placeholders.
    """
    if kind not in (PatternKind.REACT, PatternKind.REWOO):
        raise TrajectoryBuildError(f"unsupported kind {kind} for math trajectories")
    annotations = _annotated_expressions(_metadata(instance).get("steps", []))
    if not annotations:
        raise NoExpressionsError(f"instance {instance.id} has no annotated expression")
    steps: list[Step] = []
    if kind == PatternKind.REACT:
        for leading, expr, result in annotations:
            prefix = f"{leading} " if leading else ""
            steps.append(Thought(f"{prefix}I need to calculate {expr}"))
            steps.append(Action(ToolCall("Calc", {"expr": expr})))
            steps.append(Observation(result))
        steps.append(Thought(f"The answer is {instance.answer}"))
        steps.append(Finish(instance.answer))
        return Trajectory(tuple(steps), PatternKind.REACT, task, instance.question)
    results: list[str] = []
    for leading, expr, result in annotations:
        for i, earlier in enumerate(results, start=1):
            expr = _boundary_replace(expr, earlier, f"#E{i}")
            leading = _boundary_replace(leading, earlier, f"#E{i}")
        prefix = f"{leading} " if leading else ""
        steps.append(Thought(f"{prefix}Calculate {expr}"))
        steps.append(Action(ToolCall("Calc", {"expr": expr})))
        results.append(result)
    return Trajectory(tuple(steps), PatternKind.REWOO, task, instance.question)


# --- Claim verification ---------------------------------------------------------------

def build_fever_trajectory(
    instance: "TaskInstanceLike", kind: PatternKind
) -> Trajectory | QAPair:
    """Search trajectory over evidence articles, or an evidence-only QA pair."""
    evidence = _metadata(instance).get("evidence", [])
    if not evidence:
        raise NoEvidenceError(f"instance {instance.id} has no evidence articles")
    label = instance.answer
    if kind == PatternKind.COT:
        sentences = [s for article in evidence for s in article.get("sentences", [])]
        return QAPair(instance.question, label, reasoning=" ".join(sentences))
    if kind not in (PatternKind.REACT, PatternKind.REWOO):
        raise TrajectoryBuildError(f"unsupported kind {kind} for claim trajectories")
    steps: list[Step] = []
    for article in evidence:
        title = article["title"]
        sentences = " ".join(article.get("sentences", []))
        if kind == PatternKind.REACT:
            steps.append(Thought(f"I need to search for {title}"))
            steps.append(Action(ToolCall("Search", {"query": title})))
            summary = article.get("summary") or sentences or title
            steps.append(Observation(summary))
        else:
            steps.append(Thought(f"Search for {title}"))
            steps.append(Action(ToolCall("Search", {"query": title})))
        if sentences:
            steps.append(Thought(sentences))
    if kind == PatternKind.REACT:
        steps.append(Thought(f"The claim is {label}"))
        steps.append(Finish(label))
    return Trajectory(tuple(steps), kind, "fever", instance.question)


# --- Coding ------------------------------------------------------------------------

_EXEC_OK = "[Executed Successfully with No Output]"

_ASSERT_RE = re.compile(r"^\s*assert\s+(.*?)\s*==\s*(.*?)\s*$", re.DOTALL)


def _assertion_harness(test_case: str) -> str:
    match = _ASSERT_RE.match(test_case)
    if not match:
        return test_case.strip()
    call, expected = match.group(1), match.group(2)
    return (
        f"res = {call}; "
        f'assert res == {expected}, "Expected {expected} but got {{}}".format(res)'
    )


def build_mbpp_trajectory(instance: "TaskInstanceLike") -> Trajectory:
    """Run-then-submit trajectory for a coding instance with a known solution."""
    metadata = _metadata(instance)
    solution = metadata.get("solution")
    test_case = metadata.get("test")
    if not solution or not test_case:
        raise MissingTestCaseError(f"instance {instance.id} lacks a solution or prompt test case")
    payload = f"{solution}\n{_assertion_harness(test_case)}"
    steps: tuple[Step, ...] = (
        Thought("I should run a solution on the test case before proposing a solution."),
        Action(ToolCall("Execute", {"code": payload})),
        Observation(_EXEC_OK),
        Thought("There is no more AssertionError. I can now submit the solution."),
        Finish(solution),
    )
    return Trajectory(steps, PatternKind.REACT, "mbpp", instance.question)


# --- Fixed refinement examples --------------------------------------------------------

_REFINEMENT_SPECS: list[dict[str, Any]] = [
    {
        "question": (
            "Write a function max_of_two(a, b) that returns the larger of two numbers.\n"
            "Your solution should pass: assert max_of_two(3, 7) == 7"
        ),
        "bad": "def max_of_two(a, b):\n    return a if a < b else b",
        "good": "def max_of_two(a, b):\n    return a if a > b else b",
        "test_call": "max_of_two(3, 7)",
        "expected": "7",
        "got": "3",
        "reflection": "The comparison is inverted; the function returns the smaller number. I should flip it.",
    },
    {
        "question": (
            "Write a function sum_positive(xs) that returns the sum of the positive numbers in a list.\n"
            "Your solution should pass: assert sum_positive([1, -2, 3]) == 4"
        ),
        "bad": "def sum_positive(xs):\n    return sum(xs)",
        "good": "def sum_positive(xs):\n    return sum(x for x in xs if x > 0)",
        "test_call": "sum_positive([1, -2, 3])",
        "expected": "4",
        "got": "2",
        "reflection": "Negative numbers must be filtered out before summing.",
    },
]


def _refinement_trajectory(spec: dict[str, Any]) -> Trajectory:
    def harness(code: str) -> str:
        return (
            f"{code}\n"
            f"res = {spec['test_call']}; "
            f'assert res == {spec["expected"]}, '
            f'"Expected {spec["expected"]} but got {{}}".format(res)'
        )

    failure = (
        "Traceback (most recent call last):\n"
        '  File "<string>", line 3, in <module>\n'
        f"AssertionError: Expected {spec['expected']} but got {spec['got']}"
    )
    steps: tuple[Step, ...] = (
        Thought("I should run a solution on the test case before proposing a solution."),
        Action(ToolCall("Execute", {"code": harness(spec["bad"])})),
        Observation(failure),
        Thought(spec["reflection"]),
        Action(ToolCall("Execute", {"code": harness(spec["good"])})),
        Observation(_EXEC_OK),
        Thought("There is no more AssertionError. I can now submit the solution."),
        Finish(spec["good"]),
    )
    return Trajectory(steps, PatternKind.REACT, "mbpp", spec["question"])


def refinement_examples() -> list[Trajectory]:
    """Two fixed fail-then-fix trajectories, always prepended to coding demos."""
    return [_refinement_trajectory(spec) for spec in _REFINEMENT_SPECS]


# --- Demonstration dispatch ------------------------------------------------------------

def _strip_annotations(text: str) -> str:
    return _ANNOTATION_RE.sub("", text)


def build_demonstration(task: str, instance: "TaskInstanceLike", kind: PatternKind) -> Demonstration:
    """Build the demonstration variant the pattern expects for this task."""
    if kind == PatternKind.ZERO_SHOT:
        raise TrajectoryBuildError("zero-shot uses no demonstrations")
    if task in ("gsm8k", "gsmhard"):
        if kind == PatternKind.COT:
            steps = _metadata(instance).get("steps", [])
            reasoning = " ".join(_strip_annotations(s).strip() for s in steps).strip()
            return QAPair(instance.question, instance.answer, reasoning=reasoning or None)
        return build_gsm8k_trajectory(instance, kind, task="gsm8k")
    if task == "fever":
        return build_fever_trajectory(instance, kind)
    if task == "mbpp":
        if kind == PatternKind.COT:
            return QAPair(instance.question, _metadata(instance).get("solution", instance.answer))
        if kind == PatternKind.REWOO:
            raise TrajectoryBuildError("plan-style demos are not defined for coding tasks")
        return build_mbpp_trajectory(instance)
    raise TrajectoryBuildError(f"unknown task {task!r}")


def _metadata(instance: "TaskInstanceLike") -> dict[str, Any]:
    return instance.metadata or {}


class TaskInstanceLike:
    """Structural stand-in for tasks.TaskInstance (id, question, answer, metadata)."""

    id: str
    question: str
    answer: str
    metadata: dict[str, Any]
