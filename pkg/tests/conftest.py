from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from promptopt.sandbox import SandboxRequest, SandboxResponse, sandbox_available

FIXTURES = Path(__file__).parent / "fixtures"
PROGRAMS = FIXTURES / "programs"

requires_sandbox = pytest.mark.skipif(
    not sandbox_available(), reason="sandbox runner package not installed"
)


class FakeSandbox:
    """In-process stand-in for the external runner; enough for simple code.

    Evaluates the payload with eval/exec in a throwaway namespace.  Tests
    that exercise the real stdio protocol use the installed runner instead.
    """

    def run(self, request: SandboxRequest) -> SandboxResponse:
        namespace: dict = {}
        if request.mode == "test_suite":
            try:
                exec(request.code, namespace)
            except BaseException as exc:
                return SandboxResponse(status="exception", traceback=f"{type(exc).__name__}: {exc}")
            per_test = []
            for test in request.tests or ():
                try:
                    exec(test, namespace)
                    per_test.append(True)
                except BaseException:
                    per_test.append(False)
            return SandboxResponse(status="ok", output="", per_test=tuple(per_test))
        try:
            lines = request.code.rstrip().rsplit("\n", 1)
            if len(lines) == 2:
                exec(lines[0], namespace)
                trailing = lines[1]
            else:
                trailing = request.code
            value = eval(trailing, namespace)
        except BaseException:
            try:
                exec(request.code, namespace)
                value = None
            except BaseException as exc:
                return SandboxResponse(
                    status="exception", traceback=f"{type(exc).__name__}: {exc}"
                )
        if value is None:
            return SandboxResponse(status="ok", output="[Executed Successfully with No Output]")
        return SandboxResponse(status="ok", output=str(value))


@pytest.fixture
def fake_sandbox() -> FakeSandbox:
    return FakeSandbox()


@pytest.fixture
def gsm8k_instances():
    from promptopt.tasks import load_dataset

    return load_dataset(str(FIXTURES / "gsm8k.jsonl"), "gsm8k")


@pytest.fixture
def fever_instances():
    from promptopt.tasks import load_dataset

    return load_dataset(str(FIXTURES / "fever.jsonl"), "fever")


@pytest.fixture
def mbpp_instances():
    from promptopt.tasks import load_dataset

    return load_dataset(str(FIXTURES / "mbpp.jsonl"), "mbpp")


def fixture_program_paths() -> list[Path]:
    return sorted(PROGRAMS.glob("*.pdl.yaml"))


def run_cli(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "promptopt.cli", *args],
        capture_output=True,
        text=True,
    )


def write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
