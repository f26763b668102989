"""Program execution: implicit chat context, scopes, budgets, and builtins.

Execution walks the block tree in order.  Every block's textual output is
appended both to the flat output string and to the message context, so each
model call sees everything produced so far as its conversation.  Default
roles: text and data contribute as user, model responses as assistant, tool
observations and code results as tool.  Consecutive messages with the same
role are merged so a prompt assembled from several text items reaches the
backend as one message.

Three builtins are callable from ``call:`` blocks without a ``function:``
definition in scope:

    act           parse one action from raw model text, run the tool,
                  contribute the observation; finishing sets ``finish``
    execute_plan  extract every action from a planner response, run them in
                  order with #E1..#En placeholder substitution
    render_demos  render a list of demonstrations as prompt text

User-defined functions shadow builtins.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass
from typing import Any, Callable, Mapping

from . import patterns as _patterns_mod
from .backends import Backend, ChatRequest, ChatResponse, Message
from .dsl import (
    Block,
    CallBlock,
    CodeBlock,
    DataBlock,
    FunctionBlock,
    IfBlock,
    ModelBlock,
    Program,
    RepeatBlock,
    Role,
    TextBlock,
    TypeSpec,
    is_truthy,
    render_template,
    template_value,
    validate_value,
)
from .errors import (
    AuthenticationError,
    BackendUnavailableError,
    BlockExecutionError,
    LimitExceededError,
    PromptOptError,
    SandboxUnavailableError,
    SchemaViolationError,
    UnboundFunctionError,
)
from .jsonrepair import iter_balanced_objects, loads_with_repair, strip_trailing_commas
from .sandbox import SandboxRequest
from .tools import FinishValue, ToolCall, ToolRegistry, parse_action

logger = logging.getLogger(__name__)

CODE_TIMEOUT_S = 30.0


@dataclass
class ExecutionLimits:
    max_model_calls: int = 25
    max_wall_seconds: float = 300.0


class Context:
    """Append-only message log; same-role neighbors merge on append."""

    def __init__(self) -> None:
        self.messages: list[Message] = []

    def append(self, role: Role, content: str) -> None:
        if not content:
            return
        if self.messages and self.messages[-1].role == role:
            last = self.messages[-1]
            self.messages[-1] = Message(role, last.content + content)
        else:
            self.messages.append(Message(role, content))

    def snapshot(self) -> tuple[Message, ...]:
        return tuple(self.messages)


class Scope:
    """Chained bindings; lookup is innermost-first, writes hit the own frame."""

    def __init__(self, bindings: Mapping[str, Any] | None = None, parent: "Scope | None" = None) -> None:
        self.bindings: dict[str, Any] = dict(bindings or {})
        self.parent = parent

    def lookup(self, name: str) -> Any:
        frame: Scope | None = self
        while frame is not None:
            if name in frame.bindings:
                return frame.bindings[name]
            frame = frame.parent
        raise KeyError(name)

    def define(self, name: str, value: Any) -> None:
        self.bindings[name] = value

    def child(self, bindings: Mapping[str, Any] | None = None) -> "Scope":
        return Scope(bindings, parent=self)


@dataclass(frozen=True)
class ExecutionResult:
    output: str
    context: Context
    bindings: dict[str, Any]
    model_calls: int
    tool_calls: int


@dataclass(frozen=True)
class _Closure:
    block: FunctionBlock
    scope: Scope


def parse_model_output(raw: str, parser: str = "json", spec: TypeSpec | None = None) -> Any:
    """Parse model text as JSON via the repair pipeline; optionally type-check."""
    if parser != "json":
        raise ValueError(f"unsupported parser {parser!r}")
    value = loads_with_repair(raw)
    if spec is not None:
        violations = validate_value(value, spec)
        if violations:
            raise SchemaViolationError(violations[0].path, violations[0].message)
    return value


class _Execution:
    def __init__(
        self,
        backend: Backend,
        tools: ToolRegistry,
        limits: ExecutionLimits,
    ) -> None:
        self.backend = backend
        self.tools = tools
        self.limits = limits
        self.context = Context()
        self.output_parts: list[str] = []
        self.model_calls = 0
        self.tool_calls = 0
        self.deadline = time.monotonic() + limits.max_wall_seconds

    # -- bookkeeping ----------------------------------------------------------

    def emit(self, role: Role, content: str) -> None:
        self.output_parts.append(content)
        self.context.append(role, content)

    def check_clock(self, path: str) -> None:
        if time.monotonic() > self.deadline:
            raise LimitExceededError(f"{path}: wall-clock budget exhausted")

    # -- block dispatch ---------------------------------------------------------

    def run_block(self, block: Block, scope: Scope, path: str) -> None:
        self.check_clock(path)
        try:
            if isinstance(block, TextBlock):
                self._run_text(block, scope, path)
            elif isinstance(block, ModelBlock):
                self._run_model(block, scope, path)
            elif isinstance(block, CodeBlock):
                self._run_code(block, scope, path)
            elif isinstance(block, IfBlock):
                self._run_if(block, scope, path)
            elif isinstance(block, RepeatBlock):
                self._run_repeat(block, scope, path)
            elif isinstance(block, FunctionBlock):
                scope.define(block.name, _Closure(block, scope))
            elif isinstance(block, CallBlock):
                self._run_call(block, scope, path)
            elif isinstance(block, DataBlock):
                self._run_data(block, scope, path)
            else:
                raise PromptOptError(f"unknown block type {type(block).__name__}")
        except (BackendUnavailableError, AuthenticationError, LimitExceededError):
            raise
        except BlockExecutionError:
            raise
        except PromptOptError as exc:
            raise BlockExecutionError(path, exc) from exc

    def _run_text(self, block: TextBlock, scope: Scope, path: str) -> None:
        role = block.role or Role.USER
        for i, item in enumerate(block.items):
            if isinstance(item, str):
                self.emit(role, render_template(item, scope.lookup))
            else:
                self.run_block(item, scope, f"{path}.text[{i}]")

    def _run_model(self, block: ModelBlock, scope: Scope, path: str) -> None:
        if self.model_calls >= self.limits.max_model_calls:
            raise LimitExceededError(
                f"{path}: model-call budget ({self.limits.max_model_calls}) exhausted"
            )
        model_id = render_template(block.model_id, scope.lookup)
        request = ChatRequest(model_id=model_id, messages=self.context.snapshot())
        self.model_calls += 1
        response: ChatResponse = self.backend.complete(request)
        if response.finish_reason == "length":
            logger.warning("%s: response truncated at max_tokens", path)
        self.emit(block.role or Role.ASSISTANT, response.text)
        if block.def_name:
            value: Any = response.text
            if block.parser:
                value = parse_model_output(response.text, block.parser, block.spec)
            scope.define(block.def_name, value)
        elif block.parser:
            parse_model_output(response.text, block.parser, block.spec)

    def _run_code(self, block: CodeBlock, scope: Scope, path: str) -> None:
        if self.tools.sandbox is None:
            raise SandboxUnavailableError(f"{path}: no sandbox client configured for code blocks")
        source = render_template(block.source, scope.lookup)
        response = self.tools.sandbox.run(
            SandboxRequest(code=source, timeout_s=CODE_TIMEOUT_S, mode="final_expression")
        )
        self.tool_calls += 1
        if response.status == "timeout":
            text = "[Execution Timed Out]"
        elif response.status == "exception":
            text = response.traceback or "Execution failed."
        else:
            text = response.output
        self.emit(Role.TOOL, text)
        if block.def_name:
            scope.define(block.def_name, text)

    def _condition(self, source: str, scope: Scope) -> bool:
        return is_truthy(template_value(source, scope.lookup))

    def _run_if(self, block: IfBlock, scope: Scope, path: str) -> None:
        if self._condition(block.condition, scope):
            self.run_block(block.then, scope, f"{path}.then")
        elif block.orelse is not None:
            self.run_block(block.orelse, scope, f"{path}.else")

    def _run_repeat(self, block: RepeatBlock, scope: Scope, path: str) -> None:
        for i in range(block.max_iterations):
            self.run_block(block.body, scope, f"{path}.repeat#{i}")
            if self._condition(block.until, scope):
                break

    def _run_data(self, block: DataBlock, scope: Scope, path: str) -> None:
        if block.def_name:
            # Bound data is a silent definition; it does not enter the prompt.
            scope.define(block.def_name, block.value)
            return
        role = block.role or Role.USER
        if isinstance(block.value, str):
            self.emit(role, block.value)
        else:
            self.emit(role, json.dumps(block.value, separators=(",", ":"), sort_keys=True, ensure_ascii=False))

    def _run_call(self, block: CallBlock, scope: Scope, path: str) -> None:
        args = {name: template_value(value, scope.lookup) if isinstance(value, str) else value
                for name, value in block.args}
        try:
            target = scope.lookup(block.function)
        except KeyError:
            target = None
        if target is not None:
            if not isinstance(target, _Closure):
                raise UnboundFunctionError(block.function)
            value = self._call_closure(target, args, path)
        elif block.function in _BUILTINS:
            value = _BUILTINS[block.function](self, args, path)
        else:
            raise UnboundFunctionError(block.function)
        if block.def_name:
            scope.define(block.def_name, value)

    def _call_closure(self, closure: _Closure, args: dict[str, Any], path: str) -> str:
        declared = [name for name, _ in closure.block.params]
        missing = [name for name in declared if name not in args]
        extra = [name for name in args if name not in declared]
        if missing or extra:
            raise PromptOptError(
                f"call to {closure.block.name!r}: missing args {missing!r}, unexpected {extra!r}"
            )
        for name, spec in closure.block.params:
            violations = validate_value(args[name], spec)
            if violations:
                worst = violations[0]
                raise SchemaViolationError(
                    f"{closure.block.name}.{name}{worst.path[1:]}", worst.message
                )
        frame = closure.scope.child(args)
        before = len(self.output_parts)
        self.run_block(closure.block.body, frame, f"{path}->{closure.block.name}")
        return "".join(self.output_parts[before:])


# --- builtins ---------------------------------------------------------------------

def _builtin_act(execution: _Execution, args: dict[str, Any], path: str) -> dict[str, Any]:
    raw = args.get("raw")
    if not isinstance(raw, str):
        raise PromptOptError(f"{path}: act needs a string 'raw' argument")
    outcome = parse_action(raw, execution.tools)
    if isinstance(outcome, FinishValue):
        return {"finish": True, "answer": outcome.answer, "observation": ""}
    if isinstance(outcome, ToolCall):
        execution.tool_calls += 1
        observation = execution.tools.invoke(outcome)
    else:
        observation = outcome
    execution.emit(Role.TOOL, f"\nObs: {observation.text}\n")
    return {"finish": False, "answer": "", "observation": observation.text}


_PLACEHOLDER_RE = re.compile(r"#E(\d+)")


def _builtin_execute_plan(execution: _Execution, args: dict[str, Any], path: str) -> dict[str, Any]:
    raw = args.get("raw")
    if not isinstance(raw, str):
        raise PromptOptError(f"{path}: execute_plan needs a string 'raw' argument")
    observations: list[str] = []

    def substitute(text: str) -> str:
        def repl(match: re.Match[str]) -> str:
            index = int(match.group(1))
            if 1 <= index <= len(observations):
                return observations[index - 1]
            return match.group(0)

        return _PLACEHOLDER_RE.sub(repl, text)

    for chunk in iter_balanced_objects(raw):
        try:
            value = json.loads(strip_trailing_commas(chunk))
        except json.JSONDecodeError:
            continue
        if not isinstance(value, dict) or "action" not in value:
            continue
        name = value.get("action")
        arguments = value.get("arguments", {})
        if not isinstance(name, str) or not isinstance(arguments, dict):
            observations.append("Invalid action object.")
            continue
        if name == "Finish":
            observations.append("Finish is not available during planning.")
            continue
        arguments = {
            key: substitute(val) if isinstance(val, str) else val
            for key, val in arguments.items()
        }
        spec = execution.tools.spec(name)
        if spec is None:
            observations.append(f"Unknown action {name!r}.")
            continue
        execution.tool_calls += 1
        observation = execution.tools.invoke(ToolCall(name, arguments))
        observations.append(observation.text)
    if observations:
        listing = "".join(
            f"\n#E{i} = {text}" for i, text in enumerate(observations, start=1)
        )
        execution.emit(Role.TOOL, listing + "\n")
    return {"observations": observations}


def _builtin_render_demos(execution: _Execution, args: dict[str, Any], path: str) -> str:
    demos = args.get("demos")
    kind = args.get("kind")
    if not isinstance(kind, str):
        raise PromptOptError(f"{path}: render_demos needs a string 'kind' argument")
    if demos is None:
        demos = []
    if not isinstance(demos, list):
        raise PromptOptError(f"{path}: render_demos needs a list 'demos' argument")
    text = _patterns_mod.render_demonstration_values(demos, kind)
    if text:
        execution.emit(Role.USER, text + "\n\n")
    return text


_BUILTINS: dict[str, Callable[[_Execution, dict[str, Any], str], Any]] = {
    "act": _builtin_act,
    "execute_plan": _builtin_execute_plan,
    "render_demos": _builtin_render_demos,
}


def library_scope(program: Program, parent: Scope | None = None) -> Scope:
    """Bind the function definitions of a library program into a new scope.

    Non-function top-level items are ignored; use the result as the parent
    of an execution's initial scope to make the library callable.
    """
    scope = Scope(parent=parent)
    for item in program.top_level_items:
        if isinstance(item, FunctionBlock):
            scope.define(item.name, _Closure(item, scope))
    return scope


def execute_program(
    program: Program,
    initial_scope: Scope | Mapping[str, Any] | None,
    backend: Backend,
    tools: ToolRegistry,
    limits: ExecutionLimits | None = None,
) -> ExecutionResult:
    """Run a program to completion against a backend and tool registry.

    The initial scope provides template bindings such as ``question`` and
    ``model_id``.  Execution is strictly sequential; the returned result
    owns its context and bindings.
    """
    limits = limits or ExecutionLimits()
    if limits.max_model_calls <= 0 or limits.max_wall_seconds <= 0:
        raise ValueError("limits must be positive")
    if isinstance(initial_scope, Scope):
        root = initial_scope
    else:
        root = Scope(initial_scope or {})
    execution = _Execution(backend, tools, limits)
    execution.run_block(program.root, root, "$")
    return ExecutionResult(
        output="".join(execution.output_parts),
        context=execution.context,
        bindings=dict(root.bindings),
        model_calls=execution.model_calls,
        tool_calls=execution.tool_calls,
    )
