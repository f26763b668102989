#!/usr/bin/env python3
"""Convert the large-number math derivative into canonical instances.

Raw records: {"input": question, "code": ..., "target": number}.  Records
whose zero-based index appears in the exclusion file (known-bad ground
truth) are dropped.  The emitted instances carry no reasoning steps; the
demonstration bank for this task is usually borrowed from the base math
dataset (cross transfer).

Usage: convert_gsmhard.py --input raw.jsonl --output gsmhard.jsonl
       [--exclude-ids bad_lines.txt]
"""

from __future__ import annotations

import argparse
import json
import sys


def format_target(target) -> str:
    if isinstance(target, float) and target.is_integer():
        return str(int(target))
    return str(target)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--input", required=True)
    parser.add_argument("--output", required=True)
    parser.add_argument("--exclude-ids", default=None, help="file with one raw line index per line")
    args = parser.parse_args(argv)
    excluded: set[int] = set()
    if args.exclude_ids:
        with open(args.exclude_ids, encoding="utf-8") as handle:
            excluded = {int(line) for line in handle if line.strip()}
    kept = 0
    dropped = 0
    with open(args.input, encoding="utf-8") as src, open(args.output, "w", encoding="utf-8") as dst:
        for index, line in enumerate(src):
            if not line.strip():
                continue
            if index in excluded:
                dropped += 1
                continue
            record = json.loads(line)
            instance = {
                "id": f"gsmhard-{index:05d}",
                "question": record["input"].strip(),
                "answer": format_target(record["target"]),
                "metadata": {},
            }
            dst.write(json.dumps(instance, ensure_ascii=False) + "\n")
            kept += 1
    print(f"converted: {kept}")
    print(f"excluded: {dropped}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
