#!/usr/bin/env python3
"""Convert raw basic-Python-problems dumps into canonical coding instances.

Accepts the original problem list (JSON array or JSONL) with fields
{"task_id", "text" or "prompt", "code", "test_list", ...}.  An optional
extended-tests file maps task_id to a fuller assertion list used for
evaluation; without it, the original test_list doubles as the hidden suite.
The question presented to models includes the first (prompt) test case.

Usage: convert_mbpp.py --input mbpp.json --output mbpp.jsonl
       [--plus-tests plus.json] [--only-task-ids ids.txt]
"""

from __future__ import annotations

import argparse
import json
import sys


def load_problems(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        text = handle.read().strip()
    if text.startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--input", required=True)
    parser.add_argument("--output", required=True)
    parser.add_argument("--plus-tests", default=None, help="JSON mapping task_id -> [assertions]")
    parser.add_argument("--only-task-ids", default=None, help="file with one task_id per line")
    args = parser.parse_args(argv)
    plus: dict[str, list[str]] = {}
    if args.plus_tests:
        with open(args.plus_tests, encoding="utf-8") as handle:
            plus = {str(key): value for key, value in json.load(handle).items()}
    allowed: set[str] | None = None
    if args.only_task_ids:
        with open(args.only_task_ids, encoding="utf-8") as handle:
            allowed = {line.strip() for line in handle if line.strip()}
    kept = 0
    skipped = 0
    with open(args.output, "w", encoding="utf-8") as dst:
        for problem in load_problems(args.input):
            task_id = str(problem["task_id"])
            if allowed is not None and task_id not in allowed:
                skipped += 1
                continue
            tests = problem.get("test_list", [])
            if not tests:
                skipped += 1
                continue
            prompt_test = tests[0]
            spec_text = (problem.get("text") or problem.get("prompt") or "").strip()
            hidden = plus.get(task_id, tests)
            instance = {
                "id": f"mbpp-{task_id}",
                "question": f"{spec_text}\nYour solution should pass: {prompt_test}",
                "answer": problem["code"],
                "metadata": {
                    "solution": problem["code"],
                    "test": prompt_test,
                    "tests": hidden,
                },
            }
            dst.write(json.dumps(instance, ensure_ascii=False) + "\n")
            kept += 1
    print(f"converted: {kept}")
    print(f"skipped: {skipped}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
