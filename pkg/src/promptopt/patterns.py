"""The prompting-pattern library.

Each pattern is a function in the DSL; instantiating a pattern produces a
self-contained program holding the function definition, a data block with
the literal demonstrations (when any), and a call wiring the concrete
instruction, system prompt, and tool descriptions through as arguments.
The same builders, with default limits, are serialized into the shipped
library file (resources/patterns.pdl.yaml) that user programs can call
into directly.

Pattern shapes:

* zero_shot: instruction and question, one model call.
* cot: adds a reasoning-format line and worked question/answer examples
  before the question.  With zero demonstrations it degenerates to the
  literal zero_shot program.
* react: optional system prompt, tool descriptions, trajectory examples,
  then a bounded thought/action/observation loop; a Finish action (or a
  solution tag on coding tasks) exits the loop and yields the answer.
* rewoo: one planner call that lays out all tool actions, execution of the
  plan with #E placeholder substitution, then one solver call.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Any, Sequence

from .dsl import (
    Block,
    CallBlock,
    DataBlock,
    FunctionBlock,
    IfBlock,
    ModelBlock,
    Program,
    RepeatBlock,
    Role,
    TArray,
    TObject,
    TextBlock,
    TString,
    serialize_program,
)
from .errors import PatternDemoMismatchError, ReWOOUnsupportedError
from .tools import JSON_ACTIONS, XML_ACTIONS, ToolSpec, tool_primer
from .trajectories import (
    Demonstration,
    PatternKind,
    QAPair,
    Trajectory,
    demonstration_from_json,
    demonstration_to_json,
    render_qa_pair,
    render_trajectory,
)

SYSTEM_PROMPT_DIR_ENV = "PROMPTOPT_SYSTEM_PROMPT_DIR"

COT_FORMAT_LINE = (
    "Think step by step, then give the final answer on a line of the form "
    "'The answer is <answer>'."
)

REWOO_PLAN_HINT = (
    "First plan every tool call as alternating 'Tho:' and 'Act:' lines, referencing "
    "the result of earlier actions as #E1, #E2, and so on. Do not answer yet."
)

REWOO_SOLVE_HINT = "Now answer the question using the numbered results above."


class SystemPromptStyle(Enum):
    GRANITE_TOOLS = "GraniteTools"
    LLAMA3 = "Llama3"
    GRANITE_LLAMA = "GraniteLlama"


_STYLE_FILES = {
    SystemPromptStyle.GRANITE_TOOLS: "granite_tools.txt",
    SystemPromptStyle.LLAMA3: "llama3.txt",
    SystemPromptStyle.GRANITE_LLAMA: "granite_llama.txt",
}


def style_text(style: SystemPromptStyle) -> str:
    """Load a system-prompt text; a user directory overrides the packaged one."""
    filename = _STYLE_FILES[style]
    override_dir = os.environ.get(SYSTEM_PROMPT_DIR_ENV)
    if override_dir:
        path = os.path.join(override_dir, filename)
        if os.path.exists(path):
            with open(path, encoding="utf-8") as handle:
                return handle.read().strip()
    ref = resources.files("promptopt").joinpath("resources", "system_prompts", filename)
    return ref.read_text(encoding="utf-8").strip()


@dataclass(frozen=True)
class PatternLimits:
    max_tao_iterations: int = 7
    max_execute_attempts: int = 5


# --- Demonstration rendering -----------------------------------------------------

def render_demonstrations(demos: Sequence[Demonstration], kind: PatternKind | str) -> str:
    """Deterministic text form of a demo list, separated by blank lines."""
    kind = PatternKind(kind) if isinstance(kind, str) else kind
    rendered: list[str] = []
    for demo in demos:
        _check_demo(demo, kind)
        if isinstance(demo, QAPair):
            rendered.append(render_qa_pair(demo))
        else:
            rendered.append(render_trajectory(demo))
    return "\n\n".join(rendered)


def render_demonstration_values(demos: Sequence[dict[str, Any]], kind: str) -> str:
    """Rendering entry point for the ``render_demos`` interpreter builtin."""
    return render_demonstrations([demonstration_from_json(d) for d in demos], kind)


def _check_demo(demo: Demonstration, kind: PatternKind) -> None:
    if kind == PatternKind.ZERO_SHOT:
        raise PatternDemoMismatchError("zero-shot takes no demonstrations")
    if kind == PatternKind.COT and not isinstance(demo, QAPair):
        raise PatternDemoMismatchError("chain-of-thought demos must be question/answer pairs")
    if kind in (PatternKind.REACT, PatternKind.REWOO):
        if not isinstance(demo, Trajectory):
            raise PatternDemoMismatchError(f"{kind.value} demos must be trajectories")
        if demo.kind != kind:
            raise PatternDemoMismatchError(
                f"demo trajectory kind {demo.kind.value} does not match pattern {kind.value}"
            )


# --- Pattern function builders ------------------------------------------------------

STRING = TString()


def _demos_param() -> TArray:
    # Demo entries are open objects; their detailed shape is validated by the
    # demonstration loader, not the call signature.
    return TArray(TObject((), ()))


def zero_shot_function() -> FunctionBlock:
    return FunctionBlock(
        name="zero_shot",
        params=(
            ("question", STRING),
            ("instruction", STRING),
            ("model_id", STRING),
        ),
        body=TextBlock(
            (
                "${ instruction }\n\n",
                "Q: ${ question }\nA: ",
                ModelBlock("${ model_id }"),
            )
        ),
    )


def cot_function() -> FunctionBlock:
    return FunctionBlock(
        name="cot",
        params=(
            ("question", STRING),
            ("instruction", STRING),
            ("demonstrations", _demos_param()),
            ("model_id", STRING),
        ),
        body=TextBlock(
            (
                "${ instruction }\n",
                COT_FORMAT_LINE + "\n\n",
                CallBlock(
                    "render_demos",
                    (("demos", "${ demonstrations }"), ("kind", "CoT")),
                ),
                "Q: ${ question }\nA: ",
                ModelBlock("${ model_id }"),
            )
        ),
    )


def react_function(limits: PatternLimits | None = None, coding_task: bool = False) -> FunctionBlock:
    limits = limits or PatternLimits()
    max_iterations = limits.max_execute_attempts if coding_task else limits.max_tao_iterations
    return FunctionBlock(
        name="react",
        params=(
            ("question", STRING),
            ("instruction", STRING),
            ("demonstrations", _demos_param()),
            ("system_prompt", STRING),
            ("tool_primer", STRING),
            ("model_id", STRING),
        ),
        body=TextBlock(
            (
                IfBlock(
                    "${ system_prompt }",
                    then=TextBlock(("${ system_prompt }\n",), role=Role.SYSTEM),
                ),
                "${ instruction }\n\n",
                "${ tool_primer }\n\n",
                CallBlock(
                    "render_demos",
                    (("demos", "${ demonstrations }"), ("kind", "ReAct")),
                ),
                "Question: ${ question }\n",
                RepeatBlock(
                    body=TextBlock(
                        (
                            ModelBlock("${ model_id }", def_name="step_raw"),
                            CallBlock("act", (("raw", "${ step_raw }"),), def_name="step"),
                        )
                    ),
                    max_iterations=max_iterations,
                    until="${ step.finish }",
                ),
                "\n${ step.answer }",
            )
        ),
    )


def rewoo_function() -> FunctionBlock:
    return FunctionBlock(
        name="rewoo",
        params=(
            ("question", STRING),
            ("instruction", STRING),
            ("demonstrations", _demos_param()),
            ("tool_primer", STRING),
            ("model_id", STRING),
        ),
        body=TextBlock(
            (
                "${ instruction }\n\n",
                "${ tool_primer }\n",
                REWOO_PLAN_HINT + "\n\n",
                CallBlock(
                    "render_demos",
                    (("demos", "${ demonstrations }"), ("kind", "ReWOO")),
                ),
                "Question: ${ question }\n",
                ModelBlock("${ model_id }", def_name="plan"),
                CallBlock("execute_plan", (("raw", "${ plan }"),), def_name="plan_result"),
                "\n" + REWOO_SOLVE_HINT + "\n",
                ModelBlock("${ model_id }"),
            )
        ),
    )


_PATTERN_FN_NAMES = {
    PatternKind.ZERO_SHOT: "zero_shot",
    PatternKind.COT: "cot",
    PatternKind.REACT: "react",
    PatternKind.REWOO: "rewoo",
}


def library_program(limits: PatternLimits | None = None) -> Program:
    """All four pattern functions in one importable program."""
    return Program(
        TextBlock(
            (
                zero_shot_function(),
                cot_function(),
                react_function(limits),
                rewoo_function(),
            )
        )
    )


def load_library() -> Program:
    """Parse the shipped pattern-library file."""
    from .dsl import parse_program

    ref = resources.files("promptopt").joinpath("resources", "patterns.pdl.yaml")
    return parse_program(ref.read_text(encoding="utf-8"))


def write_library_file(path: str, limits: PatternLimits | None = None) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_program(library_program(limits)))


# --- Instantiation ---------------------------------------------------------------------

def _is_coding_toolset(tools: Sequence[ToolSpec]) -> bool:
    return any(spec.name == "Execute" for spec in tools)


def instantiate_pattern(
    kind: PatternKind,
    instruction: str,
    demos: Sequence[Demonstration],
    tools: Sequence[ToolSpec] = (),
    style: SystemPromptStyle | None = None,
    limits: PatternLimits | None = None,
) -> Program:
    """Build a self-contained, executable program for one pattern choice.

    The emitted program defines the pattern function, binds the literal
    demonstrations (if any) in a data block, and calls the function by name.
    ``question`` and ``model_id`` remain template variables supplied by the
    executor's initial scope.
    """
    limits = limits or PatternLimits()
    coding = _is_coding_toolset(tools)
    if kind == PatternKind.REWOO and coding:
        raise ReWOOUnsupportedError("plan-then-solve needs execution feedback; not available here")
    for demo in demos:
        _check_demo(demo, kind)
    if kind == PatternKind.ZERO_SHOT and demos:
        raise PatternDemoMismatchError("zero-shot takes no demonstrations")
    if kind == PatternKind.COT and not demos:
        # Zero demonstrations degenerate to the zero-shot baseline program.
        kind = PatternKind.ZERO_SHOT

    items: list[Block | str] = []
    args: list[tuple[str, Any]] = [
        ("question", "${ question }"),
        ("instruction", instruction),
    ]
    if kind == PatternKind.ZERO_SHOT:
        items.append(zero_shot_function())
    elif kind == PatternKind.COT:
        items.append(cot_function())
    elif kind == PatternKind.REACT:
        items.append(react_function(limits, coding_task=coding))
    else:
        items.append(rewoo_function())

    if kind in (PatternKind.COT, PatternKind.REACT, PatternKind.REWOO):
        items.append(
            DataBlock(
                value=[demonstration_to_json(demo) for demo in demos],
                def_name="demonstrations",
            )
        )
        args.append(("demonstrations", "${ demonstrations }"))
    if kind == PatternKind.REACT:
        args.append(("system_prompt", style_text(style) if style is not None else ""))
    if kind in (PatternKind.REACT, PatternKind.REWOO):
        fmt = XML_ACTIONS if coding else JSON_ACTIONS
        args.append(("tool_primer", tool_primer(tools, fmt)))
    args.append(("model_id", "${ model_id }"))

    items.append(CallBlock(_PATTERN_FN_NAMES[kind], tuple(args)))
    return Program(TextBlock(tuple(items)))
