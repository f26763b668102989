"""Agent tools and the action grammar.

An action is a JSON object with an action name and an arguments mapping,
e.g. ``{"action": "Calc", "arguments": {"expr": "48/4"}}``.  Coding tasks
use XML-style ``<execute>`` / ``<solution>`` tags instead.  Parsing an
action never raises on arbitrary model text: the result is a ToolCall, a
FinishValue, or an error-hint Observation the agent can recover from.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import sympy
from sympy.parsing.sympy_parser import (
    parse_expr,
    rationalize,
    standard_transformations,
)

from .dsl import TObject, TString, TypeSpec, validate_value
from .errors import UnparseableError
from .jsonrepair import loads_with_repair
from .sandbox import (
    EXEC_OK_SENTINEL,
    EXEC_TIMEOUT_TEXT,
    SandboxClient,
    SandboxRequest,
)
from .wiki import SearchClient, SearchResult

FINISH_NAME = "Finish"

INVALID_EXPR_WARNING = (
    "Warning: the expression was invalid. Please provide a valid arithmetic expression."
)
NO_RESULTS_HINT = "No results found. Please try a different search query."
AMBIGUOUS_HINT_HEADER = "The query is ambiguous. Possible matches:"

JSON_ACTIONS = "json"
XML_ACTIONS = "xml"

_EXECUTE_TAG_RE = re.compile(r"<execute>(.*?)</execute>", re.DOTALL)
_SOLUTION_TAG_RE = re.compile(r"<solution>(.*?)</solution>", re.DOTALL)


@dataclass(frozen=True)
class ToolSpec:
    name: str
    schema: TypeSpec
    description: str


@dataclass(frozen=True)
class ToolCall:
    action: str
    arguments: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class FinishValue:
    answer: str


@dataclass(frozen=True)
class Observation:
    text: str
    is_error_hint: bool = False

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("observations are never empty")


ToolFn = Callable[[dict[str, Any]], Observation]


def _finish_spec() -> ToolSpec:
    return ToolSpec(
        name=FINISH_NAME,
        schema=TObject((("answer", TString()),), ("answer",)),
        description="End the episode and return the answer.",
    )


class ToolRegistry:
    """Immutable-after-construction name -> tool table.

    ``action_format`` selects the action surface grammar: JSON objects or
    XML-style execute/solution tags.  Finish is always registered.  Lookup
    is case-sensitive exact match.
    """

    def __init__(
        self,
        tools: Iterable[tuple[ToolSpec, ToolFn | None]] = (),
        action_format: str = JSON_ACTIONS,
        sandbox: SandboxClient | None = None,
    ) -> None:
        if action_format not in (JSON_ACTIONS, XML_ACTIONS):
            raise ValueError(f"unknown action format {action_format!r}")
        self.action_format = action_format
        self.sandbox = sandbox
        self._specs: dict[str, ToolSpec] = {}
        self._fns: dict[str, ToolFn | None] = {}
        for spec, fn in tools:
            if spec.name in self._specs:
                raise ValueError(f"duplicate tool name {spec.name!r}")
            self._specs[spec.name] = spec
            self._fns[spec.name] = fn
        if FINISH_NAME not in self._specs:
            self._specs[FINISH_NAME] = _finish_spec()
            self._fns[FINISH_NAME] = None

    @property
    def specs(self) -> list[ToolSpec]:
        return list(self._specs.values())

    def spec(self, name: str) -> ToolSpec | None:
        return self._specs.get(name)

    def invoke(self, call: ToolCall) -> Observation:
        fn = self._fns.get(call.action)
        if fn is None:
            return Observation(f"Tool {call.action!r} cannot be invoked.", is_error_hint=True)
        return fn(call.arguments)

    def primer(self) -> str:
        return tool_primer(self.specs, self.action_format)


def tool_primer(specs: Sequence[ToolSpec], action_format: str = JSON_ACTIONS) -> str:
    """Model-readable description of the available tools and the action grammar."""
    from .dsl import typespec_to_node

    lines = ["You can use the following tools:"]
    for spec in specs:
        schema = json.dumps(typespec_to_node(spec.schema), separators=(",", ":"))
        lines.append(f"- {spec.name}: {spec.description} Arguments schema: {schema}")
    if action_format == JSON_ACTIONS:
        lines.append(
            'Express each action as a JSON object of the form '
            '{"action": <tool name>, "arguments": {...}}.'
        )
    else:
        lines.append(
            "Wrap code to run in <execute>...</execute> tags and submit your final "
            "solution in <solution>...</solution> tags."
        )
    return "\n".join(lines)


def _answer_text(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, separators=(",", ":"), sort_keys=True, ensure_ascii=False)


def parse_action(raw_model_text: str, registry: ToolRegistry) -> ToolCall | FinishValue | Observation:
    """Interpret raw model text as a tool call or a finish.

    Never raises on arbitrary input: unparseable text, unknown actions, and
    schema violations all come back as error-hint observations so the agent
    loop can surface them and continue.
    """
    if registry.action_format == XML_ACTIONS:
        return _parse_xml_action(raw_model_text)
    try:
        value = loads_with_repair(raw_model_text)
    except UnparseableError:
        return Observation(
            "Could not parse an action. Respond with a JSON object "
            'like {"action": ..., "arguments": {...}}.',
            is_error_hint=True,
        )
    if not isinstance(value, dict) or "action" not in value:
        return Observation(
            'The action must be a JSON object with "action" and "arguments" fields.',
            is_error_hint=True,
        )
    name = value.get("action")
    arguments = value.get("arguments", {})
    if not isinstance(name, str):
        return Observation("The action name must be a string.", is_error_hint=True)
    if not isinstance(arguments, dict):
        return Observation("The arguments field must be an object.", is_error_hint=True)
    spec = registry.spec(name)
    if spec is None:
        known = ", ".join(s.name for s in registry.specs)
        return Observation(
            f"Unknown action {name!r}. Available actions: {known}.", is_error_hint=True
        )
    violations = validate_value(arguments, spec.schema)
    if violations:
        worst = violations[0]
        return Observation(
            f"Invalid arguments for {name}: {worst.path}: {worst.message}.",
            is_error_hint=True,
        )
    if name == FINISH_NAME:
        return FinishValue(_answer_text(arguments.get("answer", "")))
    return ToolCall(name, dict(arguments))


def _parse_xml_action(raw: str) -> ToolCall | FinishValue | Observation:
    solution = _SOLUTION_TAG_RE.search(raw)
    execute = _EXECUTE_TAG_RE.search(raw)
    if solution and (not execute or solution.start() < execute.start()):
        return FinishValue(solution.group(1).strip("\n"))
    if execute:
        return ToolCall("Execute", {"code": execute.group(1).strip("\n")})
    return Observation(
        "Could not find an action. Wrap code in <execute>...</execute> tags or "
        "submit with <solution>...</solution> tags.",
        is_error_hint=True,
    )


# --- Calc ---------------------------------------------------------------------

# Rationalizing float literals keeps decimal arithmetic exact (0.1+0.2 -> 0.3).
_CALC_TRANSFORMATIONS = standard_transformations + (rationalize,)

_THOUSANDS_RE = re.compile(r"(?<=\d),(?=\d{3}(?:\D|$))")
_TRAILING_PERCENT_RE = re.compile(r"%(?!\s*[\d(])")
_WS_RE = re.compile(r"\s+")


def clean_expression(expr: str) -> str:
    """Normalize a calculator expression; idempotent by construction.

    Ordered rules: ``^`` becomes ``**``; thousands separators inside numbers
    are dropped; ``$`` is dropped; trailing percent signs are dropped (``%``
    followed by a number is kept as modulo); whitespace collapses to single
    spaces.
    """
    out = expr.replace("^", "**")
    out = _THOUSANDS_RE.sub("", out)
    out = out.replace("$", "")
    out = _TRAILING_PERCENT_RE.sub("", out)
    out = _WS_RE.sub(" ", out).strip()
    return out


_MAX_EXPR_LEN = 2000
_MAX_RESULT_DIGITS = 10_000


class _UnsafeExpression(Exception):
    pass


_ALLOWED_ATOMS = (sympy.Integer, sympy.Rational, sympy.Float, sympy.NumberSymbol)
_ALLOWED_OPS = (sympy.Add, sympy.Mul, sympy.Pow, sympy.Mod)


def _guard_size(node: sympy.Expr) -> float:
    """Upper estimate of the result's decimal digits; rejects unsafe shapes.

    Only plain arithmetic is accepted (no symbols, no function calls), and
    exponentiations whose results would run to more than a few thousand
    digits are refused before evaluation can blow up.
    """
    if isinstance(node, sympy.Integer):
        return float(len(str(abs(int(node)))))
    if isinstance(node, sympy.Rational):
        return float(len(str(abs(node.p))) + len(str(node.q)))
    if isinstance(node, (sympy.Float, sympy.NumberSymbol)):
        return 20.0
    if isinstance(node, sympy.Pow):
        base_digits = _guard_size(node.args[0])
        exponent_digits = _guard_size(node.args[1])
        if exponent_digits > 8:
            raise _UnsafeExpression("exponent too large")
        try:
            exponent = abs(float(node.args[1].evalf(10)))
        except Exception as exc:
            raise _UnsafeExpression(f"exponent is not numeric: {exc}") from exc
        estimate = max(1.0, base_digits) * max(1.0, exponent)
        if estimate > _MAX_RESULT_DIGITS:
            raise _UnsafeExpression("result would be too large")
        return estimate
    if isinstance(node, _ALLOWED_OPS):
        digit_counts = [_guard_size(arg) for arg in node.args] or [1.0]
        total = sum(digit_counts) if isinstance(node, sympy.Mul) else max(digit_counts) + 1.0
        if total > _MAX_RESULT_DIGITS:
            raise _UnsafeExpression("result would be too large")
        return total
    raise _UnsafeExpression(f"unsupported node {type(node).__name__}")


def _render_number(value: sympy.Expr) -> str:
    if value.is_Integer:
        return str(int(value))
    if value.is_Rational:
        numerator, denominator = value.p, value.q
        exp2 = exp5 = 0
        den = denominator
        while den % 2 == 0:
            den //= 2
            exp2 += 1
        while den % 5 == 0:
            den //= 5
            exp5 += 1
        if den != 1:
            return f"{numerator}/{denominator}"
        # Denominator is 2^a * 5^b: the decimal expansion is exact.
        digits = max(exp2, exp5)
        scaled = numerator * 10**digits // denominator
        sign = "-" if scaled < 0 else ""
        whole, frac = divmod(abs(scaled), 10**digits)
        frac_text = str(frac).rjust(digits, "0").rstrip("0")
        return f"{sign}{whole}.{frac_text}" if frac_text else f"{sign}{whole}"
    approx = value.evalf(12)
    text = str(approx)
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def tool_calc(arguments: dict[str, Any]) -> Observation:
    """Evaluate an arithmetic expression exactly; never raises.

    Invalid input returns the fixed warning observation so the agent can
    try again.
    """
    expr = arguments.get("expr")
    if not isinstance(expr, str) or not expr.strip() or len(expr) > _MAX_EXPR_LEN:
        return Observation(INVALID_EXPR_WARNING, is_error_hint=True)
    cleaned = clean_expression(expr)
    try:
        parsed = parse_expr(
            cleaned, evaluate=False, transformations=_CALC_TRANSFORMATIONS
        )
        _guard_size(parsed)
        value = sympy.simplify(parsed)
        if not value.is_number:
            return Observation(INVALID_EXPR_WARNING, is_error_hint=True)
        return Observation(_render_number(value))
    except Exception:
        return Observation(INVALID_EXPR_WARNING, is_error_hint=True)


# --- Search ---------------------------------------------------------------------

def tool_search(query: str, client: SearchClient) -> Observation:
    """Direct form of the Search tool for one query."""
    return tool_search_with(client)({"query": query})


def tool_search_with(client: SearchClient) -> ToolFn:
    def run(arguments: dict[str, Any]) -> Observation:
        query = arguments.get("query", "")
        if not isinstance(query, str) or not query.strip():
            return Observation(NO_RESULTS_HINT, is_error_hint=True)
        try:
            result: SearchResult = client.search(query)
        except Exception as exc:
            return Observation(f"Search failed: {exc}", is_error_hint=True)
        if result.kind == "summary":
            return Observation(result.summary)
        if result.kind == "disambiguation":
            listing = "\n".join(result.options)
            return Observation(f"{AMBIGUOUS_HINT_HEADER}\n{listing}", is_error_hint=True)
        return Observation(NO_RESULTS_HINT, is_error_hint=True)

    return run


# --- Execute ---------------------------------------------------------------------

def tool_execute(code: str, sandbox: SandboxClient, timeout_s: float = 30.0) -> Observation:
    """Direct form of the Execute tool for one code payload."""
    return tool_execute_with(sandbox, timeout_s)({"code": code})


def tool_execute_with(sandbox: SandboxClient, timeout_s: float = 30.0) -> ToolFn:
    def run(arguments: dict[str, Any]) -> Observation:
        code = arguments.get("code", "")
        if not isinstance(code, str):
            return Observation("The code argument must be a string.", is_error_hint=True)
        response = sandbox.run(
            SandboxRequest(code=code, timeout_s=timeout_s, mode="final_expression")
        )
        if response.status == "timeout":
            return Observation(EXEC_TIMEOUT_TEXT, is_error_hint=True)
        if response.status == "exception":
            return Observation(response.traceback or "Execution failed.", is_error_hint=True)
        return Observation(response.output or EXEC_OK_SENTINEL)

    return run


# --- Registry assembly ---------------------------------------------------------

CALC_SPEC = ToolSpec(
    name="Calc",
    schema=TObject((("expr", TString()),), ("expr",)),
    description="Evaluate an arithmetic expression and return the result.",
)

SEARCH_SPEC = ToolSpec(
    name="Search",
    schema=TObject((("query", TString()),), ("query",)),
    description="Search an encyclopedia and return the first result's summary.",
)

EXECUTE_SPEC = ToolSpec(
    name="Execute",
    schema=TObject((("code", TString()),), ("code",)),
    description="Run code in a sandboxed interpreter and return the result of the final expression.",
)


def calc_registry() -> ToolRegistry:
    return ToolRegistry([(CALC_SPEC, tool_calc)])


def search_registry(client: SearchClient) -> ToolRegistry:
    return ToolRegistry([(SEARCH_SPEC, tool_search_with(client))])


def execute_registry(sandbox: SandboxClient, timeout_s: float = 30.0) -> ToolRegistry:
    return ToolRegistry(
        [(EXECUTE_SPEC, tool_execute_with(sandbox, timeout_s))],
        action_format=XML_ACTIONS,
        sandbox=sandbox,
    )
