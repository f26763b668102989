"""Protocol front end: validate one request, run it in a killable child.

The runner itself never executes user code; it spawns a fresh interpreter
(_driver) per request with a temporary working directory and kills it when
the wall clock runs out.  Every protocol-level failure is reported as a
response with a synthetic traceback, and the exit code stays 0.
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from typing import Any

MAX_TIMEOUT_S = 120.0

_REQUIRED_FIELDS = ("code", "timeout_s", "mode")


def _protocol_error(message: str) -> dict:
    return {
        "status": "exception",
        "output": "",
        "traceback": f"ProtocolError: {message}",
        "per_test": None,
    }


def _validate(request: Any) -> str | None:
    if not isinstance(request, dict):
        return "request must be a JSON object"
    for fieldname in _REQUIRED_FIELDS:
        if fieldname not in request:
            return f"missing field {fieldname!r}"
    if not isinstance(request["code"], str):
        return "code must be a string"
    timeout = request["timeout_s"]
    if not isinstance(timeout, (int, float)) or isinstance(timeout, bool):
        return "timeout_s must be a number"
    if not (0 < timeout <= MAX_TIMEOUT_S):
        return f"timeout_s must be in (0, {MAX_TIMEOUT_S:g}]"
    mode = request["mode"]
    if mode not in ("final_expression", "test_suite"):
        return f"unknown mode {mode!r}"
    tests = request.get("tests")
    if mode == "test_suite":
        if not isinstance(tests, list) or not all(isinstance(t, str) for t in tests):
            return "test_suite mode needs a list of test strings"
    elif tests is not None:
        return "tests are only valid in test_suite mode"
    return None


def run_code(request: Any) -> dict:
    problem = _validate(request)
    if problem is not None:
        return _protocol_error(problem)
    payload = json.dumps(request)
    with tempfile.TemporaryDirectory(prefix="sandbox-") as workdir:
        try:
            completed = subprocess.run(
                [sys.executable, "-m", "sandbox_runner._driver"],
                input=payload,
                capture_output=True,
                text=True,
                timeout=request["timeout_s"],
                cwd=workdir,
            )
        except subprocess.TimeoutExpired:
            return {"status": "timeout", "output": "", "traceback": None, "per_test": None}
        except OSError as exc:
            return _protocol_error(f"could not spawn executor: {exc}")
    for line in reversed(completed.stdout.splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            response = json.loads(line)
        except json.JSONDecodeError:
            continue
        if isinstance(response, dict) and "status" in response:
            return response
    return _protocol_error(
        f"executor produced no response (exit {completed.returncode}): "
        f"{completed.stderr[:500]}"
    )


def main() -> int:
    try:
        raw = sys.stdin.readline()
        request = json.loads(raw) if raw.strip() else None
    except json.JSONDecodeError as exc:
        response = _protocol_error(f"request is not JSON: {exc}")
    else:
        if request is None:
            response = _protocol_error("empty request")
        else:
            response = run_code(request)
    json.dump(response, sys.stdout)
    sys.stdout.write("\n")
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
