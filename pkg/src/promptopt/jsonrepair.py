"""Deterministic repair pipeline for JSON embedded in model output.

Applied in a fixed order, trying to parse after each stage:

    R1  strip Markdown code fences
    R2  take the first balanced ``{...}`` substring
    R3  strip trailing commas before closing brackets

No other heuristics; the pipeline is a small, testable stand-in for
external repair packages.
"""

from __future__ import annotations

import json
import re
from typing import Any

from .errors import UnparseableError

_FENCE_RE = re.compile(r"^\s*```[A-Za-z0-9_-]*\s*\n(.*?)\n?\s*```\s*$", re.DOTALL)
_TRAILING_COMMA_RE = re.compile(r",(\s*[}\]])")


def strip_fences(text: str) -> str:
    match = _FENCE_RE.match(text)
    if match:
        return match.group(1)
    # Also handle a fenced section embedded in surrounding prose.
    inner = re.search(r"```[A-Za-z0-9_-]*\s*\n(.*?)\n?\s*```", text, re.DOTALL)
    if inner:
        return inner.group(1)
    return text


def first_balanced_object(text: str) -> str | None:
    """Return the first balanced brace-delimited substring, honoring strings."""
    start = text.find("{")
    while start >= 0:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        start = text.find("{", start + 1)
    return None


def strip_trailing_commas(text: str) -> str:
    return _TRAILING_COMMA_RE.sub(r"\1", text)


def repair_stages(raw: str) -> list[str]:
    """Candidate texts in repair order; earlier entries are less transformed."""
    stages = [raw]
    defenced = strip_fences(raw)
    if defenced != raw:
        stages.append(defenced)
    balanced = first_balanced_object(defenced)
    if balanced is not None and balanced != defenced:
        stages.append(balanced)
    decommaed = strip_trailing_commas(stages[-1])
    if decommaed != stages[-1]:
        stages.append(decommaed)
    return stages


def loads_with_repair(raw: str) -> Any:
    """Parse JSON, falling back through the repair pipeline stage by stage.

    Total on arbitrary text: pathological nesting that would exhaust the
    recursion limit is reported as unparseable rather than raised.
    """
    last_error: Exception | None = None
    for candidate in repair_stages(raw):
        try:
            return json.loads(candidate)
        except json.JSONDecodeError as exc:
            last_error = exc
        except RecursionError:
            last_error = ValueError("nesting too deep")
    raise UnparseableError(f"not JSON even after repair: {last_error}")


def iter_balanced_objects(text: str) -> list[str]:
    """All non-overlapping balanced ``{...}`` substrings, in order."""
    found: list[str] = []
    pos = 0
    while True:
        chunk = first_balanced_object(text[pos:])
        if chunk is None:
            return found
        found.append(chunk)
        pos = text.find(chunk, pos) + len(chunk)
