import time

import pytest

from promptopt.errors import SandboxUnavailableError
from promptopt.sandbox import (
    SandboxRequest,
    SubprocessSandboxClient,
    default_runner_command,
)

from .conftest import requires_sandbox

pytestmark = requires_sandbox


def client() -> SubprocessSandboxClient:
    return SubprocessSandboxClient()


def test_final_expression_value():
    response = client().run(SandboxRequest(code="1+1", timeout_s=10))
    assert response.status == "ok"
    assert response.output == "2"


def test_success_sentinel_exact():
    code = "def add(a, b):\n    return a + b\nassert add(1, 2) == 3"
    response = client().run(SandboxRequest(code=code, timeout_s=10))
    assert response.status == "ok"
    assert response.output == "[Executed Successfully with No Output]"


def test_exception_carries_traceback():
    response = client().run(SandboxRequest(code="assert 1 == 2", timeout_s=10))
    assert response.status == "exception"
    assert "AssertionError" in (response.traceback or "")


def test_stdout_captured():
    response = client().run(SandboxRequest(code="print('hi')\n40 + 2", timeout_s=10))
    assert response.status == "ok"
    assert response.output == "hi\n42"


def test_statelessness_between_requests():
    sandbox = client()
    first = sandbox.run(SandboxRequest(code="x = 41", timeout_s=10))
    assert first.status == "ok"
    second = sandbox.run(SandboxRequest(code="x + 1", timeout_s=10))
    assert second.status == "exception"
    assert "NameError" in (second.traceback or "")


def test_test_suite_per_assertion():
    request = SandboxRequest(
        code="def add(a, b):\n    return a + b",
        timeout_s=10,
        mode="test_suite",
        tests=("assert add(1, 2) == 3", "assert add(1, 1) == 3", "assert add(0, 0) == 0"),
    )
    response = client().run(request)
    assert response.status == "ok"
    assert response.per_test == (True, False, True)


def test_timeout_enforced_within_slack():
    start = time.monotonic()
    response = client().run(SandboxRequest(code="while True: pass", timeout_s=2))
    elapsed = time.monotonic() - start
    assert response.status == "timeout"
    assert elapsed <= 3.0


def test_fresh_sessions_are_deterministic():
    code = "values = [i * i for i in range(5)]\nsum(values)"
    outputs = {client().run(SandboxRequest(code=code, timeout_s=10)).output for _ in range(3)}
    assert outputs == {"30"}


def test_request_validation():
    with pytest.raises(ValueError):
        SandboxRequest(code="1", timeout_s=0).validate()
    with pytest.raises(ValueError):
        SandboxRequest(code="1", timeout_s=10, mode="test_suite").validate()
    with pytest.raises(ValueError):
        SandboxRequest(code="1", timeout_s=10, tests=("assert True",)).validate()


def test_unavailable_runner():
    broken = SubprocessSandboxClient(command=["/no/such/runner"])
    with pytest.raises(SandboxUnavailableError):
        broken.run(SandboxRequest(code="1", timeout_s=5))


def test_default_command_resolves():
    assert default_runner_command() is not None
