"""Child process that actually executes the submitted code.

Reads the request JSON from stdin, runs the code with stdout redirected
into a buffer (the real stdout is reserved for the protocol), and prints
the response JSON.  The parent enforces the wall-clock timeout by killing
this process, so nothing here needs to be interruptible.
"""

from __future__ import annotations

import ast
import io
import json
import sys
import traceback
from contextlib import redirect_stdout

SUCCESS_SENTINEL = "[Executed Successfully with No Output]"

_USER_FILES = ("<code>", "<test>")


def _user_traceback() -> str:
    """Format the active exception without the harness's own frames."""
    etype, value, tb = sys.exc_info()
    trimmed = tb
    while trimmed is not None and trimmed.tb_frame.f_code.co_filename not in _USER_FILES:
        trimmed = trimmed.tb_next
    if trimmed is None:
        # No user frame (e.g. a syntax error at compile time).
        return "".join(traceback.format_exception_only(etype, value))
    return "".join(traceback.format_exception(etype, value, trimmed))


def _split_final_expression(code: str) -> tuple[ast.Module, ast.Expression | None]:
    tree = ast.parse(code)
    final: ast.Expression | None = None
    if tree.body and isinstance(tree.body[-1], ast.Expr):
        last = tree.body.pop()
        final = ast.Expression(last.value)
        ast.copy_location(final, last)
    return tree, final


def run_final_expression(code: str) -> dict:
    buffer = io.StringIO()
    try:
        module, final = _split_final_expression(code)
        env: dict = {"__name__": "__main__"}
        with redirect_stdout(buffer):
            exec(compile(module, "<code>", "exec"), env)
            value = eval(compile(final, "<code>", "eval"), env) if final is not None else None
    except BaseException:
        return {
            "status": "exception",
            "output": buffer.getvalue(),
            "traceback": _user_traceback(),
            "per_test": None,
        }
    printed = buffer.getvalue()
    parts = []
    if printed:
        parts.append(printed if printed.endswith("\n") else printed + "\n")
    if value is not None:
        parts.append(str(value))
    output = "".join(parts).strip("\n")
    if not output:
        output = SUCCESS_SENTINEL
    return {"status": "ok", "output": output, "traceback": None, "per_test": None}


def run_test_suite(code: str, tests: list[str]) -> dict:
    buffer = io.StringIO()
    env: dict = {"__name__": "__main__"}
    try:
        with redirect_stdout(buffer):
            exec(compile(code, "<code>", "exec"), env)
    except BaseException:
        return {
            "status": "exception",
            "output": buffer.getvalue(),
            "traceback": _user_traceback(),
            "per_test": None,
        }
    per_test: list[bool] = []
    for test in tests:
        try:
            with redirect_stdout(buffer):
                exec(compile(test, "<test>", "exec"), env)
            per_test.append(True)
        except BaseException:
            per_test.append(False)
    return {
        "status": "ok",
        "output": buffer.getvalue().strip("\n"),
        "traceback": None,
        "per_test": per_test,
    }


def main() -> int:
    request = json.loads(sys.stdin.read())
    if request["mode"] == "test_suite":
        response = run_test_suite(request["code"], request["tests"])
    else:
        response = run_final_expression(request["code"])
    json.dump(response, sys.__stdout__)
    sys.__stdout__.write("\n")
    sys.__stdout__.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
