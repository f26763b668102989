"""Client side of the out-of-process code-execution protocol.

The runner is a separate installable package (``sandbox_runner``); this
module only knows the wire contract: one JSON request on the child's stdin,
one JSON response line on its stdout, one process per request.  The runner
command resolves from the PROMPTOPT_SANDBOX_CMD environment variable, or
falls back to ``python -m sandbox_runner`` when that package is importable.
"""

from __future__ import annotations

import importlib.util
import json
import os
import shlex
import subprocess
import sys
from dataclasses import dataclass
from typing import Protocol, Sequence

from .errors import SandboxUnavailableError

SANDBOX_CMD_ENV = "PROMPTOPT_SANDBOX_CMD"

MAX_TIMEOUT_S = 120.0
SPAWN_GRACE_S = 10.0

EXEC_OK_SENTINEL = "[Executed Successfully with No Output]"
EXEC_TIMEOUT_TEXT = "[Execution Timed Out]"


@dataclass(frozen=True)
class SandboxRequest:
    code: str
    timeout_s: float = 30.0
    mode: str = "final_expression"  # final_expression | test_suite
    tests: tuple[str, ...] | None = None

    def validate(self) -> None:
        if not (0 < self.timeout_s <= MAX_TIMEOUT_S):
            raise ValueError(f"timeout_s must be in (0, {MAX_TIMEOUT_S}]")
        if self.mode not in ("final_expression", "test_suite"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if (self.tests is not None) != (self.mode == "test_suite"):
            raise ValueError("tests must be present exactly when mode is test_suite")

    def to_wire(self) -> dict:
        wire: dict = {"code": self.code, "timeout_s": self.timeout_s, "mode": self.mode}
        if self.tests is not None:
            wire["tests"] = list(self.tests)
        return wire


@dataclass(frozen=True)
class SandboxResponse:
    status: str  # ok | exception | timeout
    output: str = ""
    traceback: str | None = None
    per_test: tuple[bool, ...] | None = None

    @classmethod
    def from_wire(cls, wire: dict) -> "SandboxResponse":
        status = wire.get("status")
        if status not in ("ok", "exception", "timeout"):
            raise SandboxUnavailableError(f"protocol violation: bad status {status!r}")
        per_test = wire.get("per_test")
        return cls(
            status=status,
            output=wire.get("output", "") or "",
            traceback=wire.get("traceback"),
            per_test=tuple(bool(x) for x in per_test) if per_test is not None else None,
        )


class SandboxClient(Protocol):
    def run(self, request: SandboxRequest) -> SandboxResponse: ...


def default_runner_command() -> list[str] | None:
    env_cmd = os.environ.get(SANDBOX_CMD_ENV)
    if env_cmd:
        return shlex.split(env_cmd)
    try:
        spec = importlib.util.find_spec("sandbox_runner")
    except (ImportError, ValueError):
        spec = None
    # A bare namespace directory (spec without an origin) is not an install.
    if spec is not None and spec.origin is not None:
        return [sys.executable, "-m", "sandbox_runner"]
    return None


def sandbox_available() -> bool:
    return default_runner_command() is not None


class SubprocessSandboxClient:
    """Spawns one runner process per request and exchanges JSON lines."""

    def __init__(self, command: Sequence[str] | None = None) -> None:
        self._command = list(command) if command is not None else None

    def _resolve(self) -> list[str]:
        cmd = self._command or default_runner_command()
        if cmd is None:
            raise SandboxUnavailableError(
                f"no runner configured: install sandbox_runner or set {SANDBOX_CMD_ENV}"
            )
        return cmd

    def run(self, request: SandboxRequest) -> SandboxResponse:
        request.validate()
        cmd = self._resolve()
        payload = json.dumps(request.to_wire()) + "\n"
        try:
            completed = subprocess.run(
                cmd,
                input=payload,
                capture_output=True,
                text=True,
                timeout=request.timeout_s + SPAWN_GRACE_S,
            )
        except FileNotFoundError as exc:
            raise SandboxUnavailableError(f"runner command not found: {cmd[0]!r}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SandboxUnavailableError(
                f"runner did not respond within {request.timeout_s + SPAWN_GRACE_S:.0f}s"
            ) from exc
        if completed.returncode != 0:
            raise SandboxUnavailableError(
                f"runner exited with {completed.returncode}: {completed.stderr[:500]}"
            )
        line = completed.stdout.strip().splitlines()
        if not line:
            raise SandboxUnavailableError("runner produced no response")
        try:
            wire = json.loads(line[-1])
        except json.JSONDecodeError as exc:
            raise SandboxUnavailableError(f"runner response is not JSON: {exc}") from exc
        return SandboxResponse.from_wire(wire)
