"""Contract tests for the stdio JSON protocol, spoken against a real process."""

import json
import subprocess
import sys
import time

import pytest

from sandbox_runner.runner import run_code


def call_process(request: dict) -> tuple[dict, int]:
    completed = subprocess.run(
        [sys.executable, "-m", "sandbox_runner"],
        input=json.dumps(request) + "\n",
        capture_output=True,
        text=True,
        timeout=60,
    )
    return json.loads(completed.stdout.strip().splitlines()[-1]), completed.returncode


def test_final_expression_over_stdio():
    response, exit_code = call_process(
        {"code": "1+1", "timeout_s": 5, "mode": "final_expression"}
    )
    assert exit_code == 0
    assert response == {"status": "ok", "output": "2", "traceback": None, "per_test": None}


def test_success_sentinel_verbatim():
    response, exit_code = call_process(
        {
            "code": "def add(a, b):\n    return a + b\nassert add(1, 2) == 3",
            "timeout_s": 5,
            "mode": "final_expression",
        }
    )
    assert exit_code == 0
    assert response["status"] == "ok"
    assert response["output"] == "[Executed Successfully with No Output]"


def test_assertion_error_traceback_surfaced():
    response, exit_code = call_process(
        {
            "code": 'res = 1 + 1; assert res == 3, "Expected 3 but got {}".format(res)',
            "timeout_s": 5,
            "mode": "final_expression",
        }
    )
    assert exit_code == 0
    assert response["status"] == "exception"
    assert "AssertionError" in response["traceback"]
    assert "Expected 3 but got 2" in response["traceback"]


def test_infinite_loop_killed_within_slack():
    start = time.monotonic()
    response, exit_code = call_process(
        {"code": "while True: pass", "timeout_s": 2, "mode": "final_expression"}
    )
    elapsed = time.monotonic() - start
    assert exit_code == 0
    assert response["status"] == "timeout"
    assert elapsed <= 3.0  # timeout + 1 s of slack


def test_statelessness_across_requests():
    first, _ = call_process({"code": "x = 1", "timeout_s": 5, "mode": "final_expression"})
    assert first["status"] == "ok"
    second, _ = call_process({"code": "x", "timeout_s": 5, "mode": "final_expression"})
    assert second["status"] == "exception"
    assert "NameError" in second["traceback"]


def test_test_suite_reports_per_assertion():
    response, exit_code = call_process(
        {
            "code": "def double(x):\n    return 2 * x",
            "timeout_s": 5,
            "mode": "test_suite",
            "tests": ["assert double(2) == 4", "assert double(2) == 5"],
        }
    )
    assert exit_code == 0
    assert response["status"] == "ok"
    assert response["per_test"] == [True, False]


def test_test_suite_body_exception():
    response, _ = call_process(
        {
            "code": "raise RuntimeError('setup failed')",
            "timeout_s": 5,
            "mode": "test_suite",
            "tests": ["assert True"],
        }
    )
    assert response["status"] == "exception"
    assert "RuntimeError" in response["traceback"]
    assert response["per_test"] is None


def test_protocol_error_still_exits_zero():
    response, exit_code = call_process({"mode": "final_expression"})
    assert exit_code == 0
    assert response["status"] == "exception"
    assert "ProtocolError" in response["traceback"]


def test_non_json_request():
    completed = subprocess.run(
        [sys.executable, "-m", "sandbox_runner"],
        input="this is not json\n",
        capture_output=True,
        text=True,
        timeout=30,
    )
    assert completed.returncode == 0
    response = json.loads(completed.stdout.strip())
    assert response["status"] == "exception"


@pytest.mark.parametrize(
    "request_patch,needle",
    [
        ({"timeout_s": 0}, "timeout_s"),
        ({"timeout_s": 500}, "timeout_s"),
        ({"mode": "shell"}, "mode"),
        ({"mode": "final_expression", "tests": ["assert True"]}, "tests"),
        ({"code": 42}, "code"),
    ],
)
def test_invalid_requests_rejected(request_patch, needle):
    request = {"code": "1", "timeout_s": 5, "mode": "final_expression"}
    request.update(request_patch)
    response = run_code(request)
    assert response["status"] == "exception"
    assert needle in response["traceback"]


def test_stdout_goes_to_output_not_protocol():
    response, _ = call_process(
        {"code": "print('{\"fake\": 1}')", "timeout_s": 5, "mode": "final_expression"}
    )
    assert response["status"] == "ok"
    assert response["output"] == '{"fake": 1}'


def test_syntax_error_reported():
    response, _ = call_process(
        {"code": "def broken(:", "timeout_s": 5, "mode": "final_expression"}
    )
    assert response["status"] == "exception"
    assert "SyntaxError" in response["traceback"]


def test_fresh_working_directory():
    response, _ = call_process(
        {
            "code": "import os\nsorted(os.listdir('.'))",
            "timeout_s": 5,
            "mode": "final_expression",
        }
    )
    assert response["status"] == "ok"
    assert response["output"] == "[]"
