"""Declarative prompt-program DSL: AST, YAML round-trip, templates, value schemas.

A program is a YAML document built from a small, closed set of block kinds:

    text      literal prompt text and nested blocks
    model     an LLM call; the accumulated context is sent as chat messages
    code      a snippet executed by the out-of-process sandbox runner
    if        conditional on a template expression's truthiness
    repeat    bounded loop with an exit condition
    function  a named, parameterized sub-program
    call      invocation of a function (or an interpreter builtin)
    data      a literal JSON value, usually bound to a name via ``def:``

Parsing is strict: any key outside the documented grammar is rejected, so
programs emitted by the optimizer are guaranteed to re-parse exactly.  The
grammar is documented in docs/dsl.md; program files use the ``.pdl.yaml``
extension.

Template strings interpolate scope values with ``${ path }`` where a path is
an identifier followed by ``.field`` / ``[index]`` accessors.  There are no
filters or operators; a template whose entire content is one interpolation
resolves to the bound value itself when used as a call argument or a
condition.

All AST values are immutable after construction and safe to share across
concurrent executions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterator, Mapping, Union

import yaml

from .errors import (
    DuplicateDefError,
    TemplateSyntaxError,
    UnboundPathError,
    UnknownBlockError,
    YamlError,
)

MAX_DEPTH = 64

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class Role(Enum):
    USER = "user"
    ASSISTANT = "assistant"
    SYSTEM = "system"
    TOOL = "tool"


# --- Value schemas (JSON-schema subset) ---------------------------------------

class TypeSpec:
    """Base of the schema AST. Subclasses are frozen dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class TString(TypeSpec):
    pass


@dataclass(frozen=True)
class TInteger(TypeSpec):
    pass


@dataclass(frozen=True)
class TNumber(TypeSpec):
    pass


@dataclass(frozen=True)
class TBoolean(TypeSpec):
    pass


@dataclass(frozen=True)
class TEnum(TypeSpec):
    values: tuple[Any, ...]


@dataclass(frozen=True)
class TArray(TypeSpec):
    item: TypeSpec


@dataclass(frozen=True)
class TObject(TypeSpec):
    fields: tuple[tuple[str, TypeSpec], ...]
    required: tuple[str, ...] = ()

    def field_map(self) -> dict[str, TypeSpec]:
        return dict(self.fields)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str


def parse_typespec(node: Any, path: str = "spec") -> TypeSpec:
    """Parse the JSON-schema subset used by ``spec:`` keys and tool schemas."""
    if not isinstance(node, dict):
        raise UnknownBlockError(path, f"type spec must be a mapping, got {type(node).__name__}")
    if "enum" in node:
        _reject_unknown_keys(node, {"enum"}, path)
        values = node["enum"]
        if not isinstance(values, list) or not values:
            raise UnknownBlockError(path, "enum must be a nonempty list")
        return TEnum(tuple(values))
    kind = node.get("type")
    if kind == "object":
        _reject_unknown_keys(node, {"type", "properties", "required"}, path)
        props = node.get("properties", {})
        if not isinstance(props, dict):
            raise UnknownBlockError(path, "properties must be a mapping")
        fields = tuple(
            (str(name), parse_typespec(sub, f"{path}.properties.{name}"))
            for name, sub in props.items()
        )
        required = node.get("required", [])
        if not isinstance(required, list):
            raise UnknownBlockError(path, "required must be a list")
        known = {name for name, _ in fields}
        for name in required:
            if name not in known:
                raise UnknownBlockError(path, f"required field {name!r} not in properties")
        return TObject(fields, tuple(str(n) for n in required))
    if kind == "array":
        _reject_unknown_keys(node, {"type", "items"}, path)
        if "items" not in node:
            raise UnknownBlockError(path, "array spec needs items")
        return TArray(parse_typespec(node["items"], f"{path}.items"))
    if kind == "string":
        _reject_unknown_keys(node, {"type"}, path)
        return TString()
    if kind == "integer":
        _reject_unknown_keys(node, {"type"}, path)
        return TInteger()
    if kind == "number":
        _reject_unknown_keys(node, {"type"}, path)
        return TNumber()
    if kind == "boolean":
        _reject_unknown_keys(node, {"type"}, path)
        return TBoolean()
    raise UnknownBlockError(path, f"unknown type spec kind {kind!r}")


def typespec_to_node(spec: TypeSpec) -> Any:
    if isinstance(spec, TString):
        return {"type": "string"}
    if isinstance(spec, TInteger):
        return {"type": "integer"}
    if isinstance(spec, TNumber):
        return {"type": "number"}
    if isinstance(spec, TBoolean):
        return {"type": "boolean"}
    if isinstance(spec, TEnum):
        return {"enum": list(spec.values)}
    if isinstance(spec, TArray):
        return {"type": "array", "items": typespec_to_node(spec.item)}
    if isinstance(spec, TObject):
        node: dict[str, Any] = {
            "type": "object",
            "properties": {name: typespec_to_node(sub) for name, sub in spec.fields},
        }
        if spec.required:
            node["required"] = list(spec.required)
        return node
    raise TypeError(f"not a TypeSpec: {spec!r}")


def validate_value(value: Any, spec: TypeSpec, path: str = "$", _depth: int = 0) -> list[Violation]:
    """Check ``value`` against ``spec``; an empty result means it conforms.

    Total on arbitrary JSON values up to the nesting cap: violations are
    returned, never raised, and name the deepest failing path.
    """
    if _depth > MAX_DEPTH:
        return [Violation(path, "nesting depth exceeds limit")]
    if isinstance(spec, TString):
        if not isinstance(value, str):
            return [Violation(path, f"expected string, got {_json_kind(value)}")]
        return []
    if isinstance(spec, TBoolean):
        if not isinstance(value, bool):
            return [Violation(path, f"expected boolean, got {_json_kind(value)}")]
        return []
    if isinstance(spec, TInteger):
        if isinstance(value, bool) or not isinstance(value, int):
            return [Violation(path, f"expected integer, got {_json_kind(value)}")]
        return []
    if isinstance(spec, TNumber):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return [Violation(path, f"expected number, got {_json_kind(value)}")]
        return []
    if isinstance(spec, TEnum):
        if value not in spec.values:
            return [Violation(path, f"value not one of {list(spec.values)!r}")]
        return []
    if isinstance(spec, TArray):
        if not isinstance(value, list):
            return [Violation(path, f"expected array, got {_json_kind(value)}")]
        out: list[Violation] = []
        for i, item in enumerate(value):
            out.extend(validate_value(item, spec.item, f"{path}[{i}]", _depth + 1))
        return out
    if isinstance(spec, TObject):
        if not isinstance(value, dict):
            return [Violation(path, f"expected object, got {_json_kind(value)}")]
        out = []
        for name in spec.required:
            if name not in value:
                out.append(Violation(f"{path}.{name}", "missing required field"))
        fields = spec.field_map()
        for name, item in value.items():
            sub = fields.get(name)
            if sub is not None:
                out.extend(validate_value(item, sub, f"{path}.{name}", _depth + 1))
        return out
    return [Violation(path, f"unsupported spec {type(spec).__name__}")]


def _json_kind(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    if isinstance(value, dict):
        return "object"
    return type(value).__name__


# --- Templates ----------------------------------------------------------------

_PATH_RE = re.compile(
    r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*|\[[0-9]+\])*"
)

# A parsed template is a sequence of literal strings and path strings.
_TemplatePart = Union[str, "PathRef"]


@dataclass(frozen=True)
class PathRef:
    path: str

    def segments(self) -> list[str | int]:
        segs: list[str | int] = []
        for match in re.finditer(r"\.?([A-Za-z_][A-Za-z0-9_]*)|\[([0-9]+)\]", self.path):
            if match.group(1) is not None:
                segs.append(match.group(1))
            else:
                segs.append(int(match.group(2)))
        return segs


def parse_template(source: str) -> list[_TemplatePart]:
    """Split a template string into literal and ``${ path }`` parts."""
    parts: list[_TemplatePart] = []
    pos = 0
    while True:
        start = source.find("${", pos)
        if start < 0:
            if pos < len(source):
                parts.append(source[pos:])
            return parts
        if start > pos:
            parts.append(source[pos:start])
        end = source.find("}", start + 2)
        if end < 0:
            raise TemplateSyntaxError(start, "unterminated interpolation")
        inner = source[start + 2 : end].strip()
        if not _PATH_RE.fullmatch(inner):
            raise TemplateSyntaxError(start, f"invalid path expression {inner!r}")
        parts.append(PathRef(inner))
        pos = end + 1


def template_paths(source: str) -> list[str]:
    return [part.path for part in parse_template(source) if isinstance(part, PathRef)]


def resolve_path(ref: PathRef, lookup: Callable[[str], Any]) -> Any:
    """Walk a dotted/indexed path from a root binding; missing steps raise."""
    segments = ref.segments()
    root = segments[0]
    try:
        value = lookup(root)  # type: ignore[arg-type]
    except KeyError:
        raise UnboundPathError(ref.path) from None
    for seg in segments[1:]:
        if isinstance(seg, int):
            if not isinstance(value, (list, tuple)) or not (0 <= seg < len(value)):
                raise UnboundPathError(ref.path)
            value = value[seg]
        else:
            if not isinstance(value, dict) or seg not in value:
                raise UnboundPathError(ref.path)
            value = value[seg]
    return value


def _value_to_text(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, separators=(",", ":"), sort_keys=True, ensure_ascii=False)


def render_template(source: str, scope: Mapping[str, Any] | Callable[[str], Any]) -> str:
    """Replace each ``${ path }`` with its bound value.

    Literal text passes through byte-exact; non-string values are serialized
    as compact JSON.  Unbound paths always raise, never render empty.
    """
    lookup = scope if callable(scope) else scope.__getitem__
    out: list[str] = []
    for part in parse_template(source):
        if isinstance(part, PathRef):
            out.append(_value_to_text(resolve_path(part, lookup)))
        else:
            out.append(part)
    return "".join(out)


def template_value(source: str, scope: Mapping[str, Any] | Callable[[str], Any]) -> Any:
    """Like render_template, but a lone interpolation yields the raw value.

    ``"${ demos }"`` returns the bound list itself; anything with surrounding
    text renders to a string.  Used for call arguments and conditions.
    """
    lookup = scope if callable(scope) else scope.__getitem__
    parts = parse_template(source)
    if len(parts) == 1 and isinstance(parts[0], PathRef):
        stripped = source.strip()
        if stripped.startswith("${") and stripped.endswith("}"):
            return resolve_path(parts[0], lookup)
    return render_template(source, lookup)


def is_truthy(value: Any) -> bool:
    """JSON truthiness: null, false, 0, "", "false", [] and {} are false."""
    if isinstance(value, str):
        return value not in ("", "false")
    return bool(value)


# --- Blocks --------------------------------------------------------------------

class Block:
    """Base class of AST nodes. Concrete nodes are frozen dataclasses."""

    __slots__ = ()


Item = Union[str, Block]


@dataclass(frozen=True)
class TextBlock(Block):
    items: tuple[Item, ...]
    role: Role | None = None


@dataclass(frozen=True)
class ModelBlock(Block):
    model_id: str
    def_name: str | None = None
    parser: str | None = None
    spec: TypeSpec | None = None
    role: Role | None = None


@dataclass(frozen=True)
class CodeBlock(Block):
    source: str
    runtime: str = "sandbox"
    def_name: str | None = None


@dataclass(frozen=True)
class IfBlock(Block):
    condition: str
    then: Block
    orelse: Block | None = None


@dataclass(frozen=True)
class RepeatBlock(Block):
    body: Block
    max_iterations: int
    until: str


@dataclass(frozen=True)
class FunctionBlock(Block):
    name: str
    params: tuple[tuple[str, TypeSpec], ...]
    body: Block


@dataclass(frozen=True)
class CallBlock(Block):
    function: str
    args: tuple[tuple[str, Any], ...] = ()
    def_name: str | None = None

    def arg_map(self) -> dict[str, Any]:
        return dict(self.args)


@dataclass(frozen=True)
class DataBlock(Block):
    value: Any
    def_name: str | None = None
    role: Role | None = None


@dataclass(frozen=True)
class Program:
    root: Block

    @property
    def top_level_items(self) -> tuple[Item, ...]:
        if isinstance(self.root, TextBlock):
            return self.root.items
        return (self.root,)

    def walk(self) -> Iterator[Block]:
        yield from walk_block(self.root)


def walk_block(block: Block) -> Iterator[Block]:
    yield block
    if isinstance(block, TextBlock):
        for item in block.items:
            if isinstance(item, Block):
                yield from walk_block(item)
    elif isinstance(block, IfBlock):
        yield from walk_block(block.then)
        if block.orelse is not None:
            yield from walk_block(block.orelse)
    elif isinstance(block, RepeatBlock):
        yield from walk_block(block.body)
    elif isinstance(block, FunctionBlock):
        yield from walk_block(block.body)


# --- Parsing --------------------------------------------------------------------

_BLOCK_KEYS = {
    "text": {"text", "role"},
    "model": {"model", "def", "parser", "spec", "role"},
    "code": {"code", "runtime", "def"},
    "if": {"if", "then", "else"},
    "repeat": {"repeat", "until", "max_iterations"},
    "function": {"function", "params", "return"},
    "call": {"call", "args", "def"},
    "data": {"data", "def", "role"},
}

_KIND_KEYS = set(_BLOCK_KEYS)


class _DefScope:
    """Tracks names bound by ``def:`` / ``function:`` per lexical scope."""

    def __init__(self) -> None:
        self.names: set[str] = set()

    def bind(self, name: str, path: str) -> None:
        if name in self.names:
            raise DuplicateDefError(name, path)
        self.names.add(name)


def parse_program(yaml_text: str) -> Program:
    """Parse a YAML document into a Program AST (strict mode).

    The document may be a block mapping, a list of items (an implicit text
    block), or a bare string.  Unknown keys and ``read:`` blocks are errors.
    """
    try:
        doc = yaml.safe_load(yaml_text)
    except yaml.YAMLError as exc:
        raise YamlError(f"malformed YAML: {exc}") from exc
    _check_depth(doc, "$", 0)
    scope = _DefScope()
    if isinstance(doc, list):
        root: Block = TextBlock(tuple(_parse_item(node, f"$.text[{i}]", scope) for i, node in enumerate(doc)))
    elif isinstance(doc, str):
        root = TextBlock((doc,))
    elif isinstance(doc, dict):
        root = _parse_block(doc, "$", scope)
    else:
        raise YamlError(f"program document must be a mapping, list, or string, got {_json_kind(doc)}")
    return Program(root)


def _check_depth(node: Any, path: str, depth: int) -> None:
    if depth > MAX_DEPTH:
        raise YamlError(f"{path}: nesting deeper than {MAX_DEPTH} levels")
    if isinstance(node, dict):
        for key, value in node.items():
            _check_depth(value, f"{path}.{key}", depth + 1)
    elif isinstance(node, list):
        for i, value in enumerate(node):
            _check_depth(value, f"{path}[{i}]", depth + 1)


def _parse_item(node: Any, path: str, scope: _DefScope) -> Item:
    if isinstance(node, str):
        return node
    if isinstance(node, dict):
        return _parse_block(node, path, scope)
    raise UnknownBlockError(path, f"text items must be strings or blocks, got {_json_kind(node)}")


def _parse_block(node: dict, path: str, scope: _DefScope) -> Block:
    if "read" in node:
        raise UnknownBlockError(path, "read blocks are not supported")
    kinds = sorted(_KIND_KEYS & set(node))
    if len(kinds) != 1:
        if not kinds:
            raise UnknownBlockError(path, f"no block kind among keys {sorted(node)!r}")
        raise UnknownBlockError(path, f"ambiguous block: multiple kinds {kinds!r}")
    kind = kinds[0]
    allowed = _BLOCK_KEYS[kind]
    extra = set(node) - allowed
    if extra:
        raise UnknownBlockError(path, f"unknown keys {sorted(extra)!r} for {kind} block")
    parser = {
        "text": _parse_text,
        "model": _parse_model,
        "code": _parse_code,
        "if": _parse_if,
        "repeat": _parse_repeat,
        "function": _parse_function,
        "call": _parse_call,
        "data": _parse_data,
    }[kind]
    return parser(node, path, scope)


def _parse_role(node: dict, path: str) -> Role | None:
    if "role" not in node:
        return None
    raw = node["role"]
    try:
        return Role(raw)
    except ValueError:
        raise UnknownBlockError(path, f"unknown role {raw!r}") from None


def _parse_def(node: dict, path: str, scope: _DefScope) -> str | None:
    if "def" not in node:
        return None
    name = node["def"]
    if not isinstance(name, str) or not _IDENT_RE.match(name):
        raise UnknownBlockError(path, f"def must be an identifier, got {name!r}")
    scope.bind(name, path)
    return name


def _parse_text(node: dict, path: str, scope: _DefScope) -> TextBlock:
    body = node["text"]
    role = _parse_role(node, path)
    if isinstance(body, str):
        return TextBlock((body,), role)
    if isinstance(body, list):
        items = tuple(_parse_item(sub, f"{path}.text[{i}]", scope) for i, sub in enumerate(body))
        return TextBlock(items, role)
    if isinstance(body, dict):
        return TextBlock((_parse_block(body, f"{path}.text", scope),), role)
    raise UnknownBlockError(path, f"text body must be a string, list, or block, got {_json_kind(body)}")


def _parse_model(node: dict, path: str, scope: _DefScope) -> ModelBlock:
    model_id = node["model"]
    if not isinstance(model_id, str) or not model_id:
        raise UnknownBlockError(path, "model must be a nonempty string")
    parser = node.get("parser")
    if parser is not None and parser != "json":
        raise UnknownBlockError(path, f"unsupported parser {parser!r} (only json)")
    spec = parse_typespec(node["spec"], f"{path}.spec") if "spec" in node else None
    return ModelBlock(
        model_id=model_id,
        def_name=_parse_def(node, path, scope),
        parser=parser,
        spec=spec,
        role=_parse_role(node, path),
    )


def _parse_code(node: dict, path: str, scope: _DefScope) -> CodeBlock:
    source = node["code"]
    if not isinstance(source, str):
        raise UnknownBlockError(path, "code must be a string")
    runtime = node.get("runtime", "sandbox")
    if runtime != "sandbox":
        raise UnknownBlockError(path, f"unsupported runtime {runtime!r} (only sandbox)")
    return CodeBlock(source=source, runtime=runtime, def_name=_parse_def(node, path, scope))


def _parse_condition(raw: Any, path: str) -> str:
    if not isinstance(raw, str):
        raise UnknownBlockError(path, "condition must be a template string")
    try:
        parse_template(raw)
    except TemplateSyntaxError as exc:
        raise UnknownBlockError(path, f"bad condition template: {exc}") from exc
    return raw


def _parse_if(node: dict, path: str, scope: _DefScope) -> IfBlock:
    condition = _parse_condition(node["if"], path)
    if "then" not in node:
        raise UnknownBlockError(path, "if block needs a then branch")
    then = _parse_branch(node["then"], f"{path}.then", scope)
    orelse = _parse_branch(node["else"], f"{path}.else", scope) if "else" in node else None
    return IfBlock(condition, then, orelse)


def _parse_branch(node: Any, path: str, scope: _DefScope) -> Block:
    if isinstance(node, str):
        return TextBlock((node,))
    if isinstance(node, list):
        return TextBlock(tuple(_parse_item(sub, f"{path}[{i}]", scope) for i, sub in enumerate(node)))
    if isinstance(node, dict):
        return _parse_block(node, path, scope)
    raise UnknownBlockError(path, f"branch must be a string, list, or block, got {_json_kind(node)}")


def _parse_repeat(node: dict, path: str, scope: _DefScope) -> RepeatBlock:
    body = _parse_branch(node["repeat"], f"{path}.repeat", scope)
    if "until" not in node:
        raise UnknownBlockError(path, "repeat block needs until")
    until = _parse_condition(node["until"], path)
    max_iterations = node.get("max_iterations")
    if not isinstance(max_iterations, int) or isinstance(max_iterations, bool) or max_iterations < 1:
        raise UnknownBlockError(path, "max_iterations must be an integer >= 1")
    return RepeatBlock(body, max_iterations, until)


def _parse_function(node: dict, path: str, scope: _DefScope) -> FunctionBlock:
    name = node["function"]
    if not isinstance(name, str) or not _IDENT_RE.match(name):
        raise UnknownBlockError(path, f"function name must be an identifier, got {name!r}")
    scope.bind(name, path)
    params_node = node.get("params", {})
    if not isinstance(params_node, dict):
        raise UnknownBlockError(path, "params must be a mapping of name to type spec")
    inner = _DefScope()
    params = []
    for pname, pspec in params_node.items():
        if not isinstance(pname, str) or not _IDENT_RE.match(pname):
            raise UnknownBlockError(path, f"parameter name must be an identifier, got {pname!r}")
        inner.bind(pname, f"{path}.params.{pname}")
        params.append((pname, parse_typespec(pspec, f"{path}.params.{pname}")))
    if "return" not in node:
        raise UnknownBlockError(path, "function block needs a return body")
    body = _parse_branch(node["return"], f"{path}.return", inner)
    return FunctionBlock(name, tuple(params), body)


def _parse_call(node: dict, path: str, scope: _DefScope) -> CallBlock:
    name = node["call"]
    if not isinstance(name, str) or not _IDENT_RE.match(name):
        raise UnknownBlockError(path, f"call target must be an identifier, got {name!r}")
    args_node = node.get("args", {})
    if not isinstance(args_node, dict):
        raise UnknownBlockError(path, "args must be a mapping")
    args = []
    for aname, avalue in args_node.items():
        if not isinstance(aname, str) or not _IDENT_RE.match(aname):
            raise UnknownBlockError(path, f"argument name must be an identifier, got {aname!r}")
        _require_json_value(avalue, f"{path}.args.{aname}")
        args.append((aname, _freeze_json(avalue)))
    return CallBlock(name, tuple(args), _parse_def(node, path, scope))


def _parse_data(node: dict, path: str, scope: _DefScope) -> DataBlock:
    value = node["data"]
    _require_json_value(value, f"{path}.data")
    return DataBlock(
        value=_freeze_json(value),
        def_name=_parse_def(node, path, scope),
        role=_parse_role(node, path),
    )


def _require_json_value(value: Any, path: str) -> None:
    if value is None or isinstance(value, (bool, int, float, str)):
        return
    if isinstance(value, list):
        for i, item in enumerate(value):
            _require_json_value(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise YamlError(f"{path}: object keys must be strings, got {key!r}")
            _require_json_value(item, f"{path}.{key}")
        return
    raise YamlError(f"{path}: value is not JSON ({type(value).__name__})")


def _freeze_json(value: Any) -> Any:
    # Deep copy so AST values never alias the YAML loader's mutables.
    if isinstance(value, list):
        return [_freeze_json(v) for v in value]
    if isinstance(value, dict):
        return {k: _freeze_json(v) for k, v in value.items()}
    return value


def _reject_unknown_keys(node: dict, allowed: set[str], path: str) -> None:
    extra = set(node) - allowed
    if extra:
        raise UnknownBlockError(path, f"unknown keys {sorted(extra)!r}")


# --- Serialization ----------------------------------------------------------------

class _Dumper(yaml.SafeDumper):
    pass


def _str_representer(dumper: yaml.SafeDumper, data: str):
    # Prefer readable literal blocks for multiline strings; the emitter falls
    # back to a quoted style when block style cannot represent the content.
    style = "|" if "\n" in data else None
    return dumper.represent_scalar("tag:yaml.org,2002:str", data, style=style)


_Dumper.add_representer(str, _str_representer)


def serialize_program(program: Program) -> str:
    """Render a Program back to YAML; the output re-parses to an equal AST."""
    node = _block_to_node(program.root)
    return yaml.dump(node, Dumper=_Dumper, sort_keys=False, allow_unicode=True, width=100000)


def _item_to_node(item: Item) -> Any:
    if isinstance(item, str):
        return item
    return _block_to_node(item)


def _block_to_node(block: Block) -> dict:
    if isinstance(block, TextBlock):
        node: dict[str, Any] = {}
        if block.role is not None:
            node["role"] = block.role.value
        node["text"] = [_item_to_node(item) for item in block.items]
        return node
    if isinstance(block, ModelBlock):
        node = {}
        if block.def_name:
            node["def"] = block.def_name
        node["model"] = block.model_id
        if block.parser:
            node["parser"] = block.parser
        if block.spec is not None:
            node["spec"] = typespec_to_node(block.spec)
        if block.role is not None:
            node["role"] = block.role.value
        return node
    if isinstance(block, CodeBlock):
        node = {}
        if block.def_name:
            node["def"] = block.def_name
        node["runtime"] = block.runtime
        node["code"] = block.source
        return node
    if isinstance(block, IfBlock):
        node = {"if": block.condition, "then": _block_to_node(block.then)}
        if block.orelse is not None:
            node["else"] = _block_to_node(block.orelse)
        return node
    if isinstance(block, RepeatBlock):
        return {
            "repeat": _block_to_node(block.body),
            "until": block.until,
            "max_iterations": block.max_iterations,
        }
    if isinstance(block, FunctionBlock):
        return {
            "function": block.name,
            "params": {name: typespec_to_node(spec) for name, spec in block.params},
            "return": _block_to_node(block.body),
        }
    if isinstance(block, CallBlock):
        node = {}
        if block.def_name:
            node["def"] = block.def_name
        node["call"] = block.function
        if block.args:
            node["args"] = {name: value for name, value in block.args}
        return node
    if isinstance(block, DataBlock):
        node = {}
        if block.def_name:
            node["def"] = block.def_name
        if block.role is not None:
            node["role"] = block.role.value
        node["data"] = block.value
        return node
    raise TypeError(f"not a block: {block!r}")
