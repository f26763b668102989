"""One-shot code execution harness.

Protocol: a single JSON request object on stdin, a single JSON response
line on stdout, exit code 0 whenever the protocol was served (regardless
of what the executed code did).  The caller spawns one runner process per
request.

Request:  {"code": str, "timeout_s": number, "mode": "final_expression" |
           "test_suite", "tests": [str, ...]?}
Response: {"status": "ok" | "exception" | "timeout", "output": str,
           "traceback": str | null, "per_test": [bool, ...] | null}

This is an isolation harness for trusted benchmark code, not a security
boundary: the child process gets a fresh interpreter and a temporary
working directory, nothing more.
"""

from .runner import main, run_code

__all__ = ["main", "run_code"]
