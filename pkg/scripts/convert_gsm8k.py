#!/usr/bin/env python3
"""Convert raw grade-school-math JSONL into the canonical instance format.

Raw records look like {"question": ..., "answer": "step\nstep\n#### 27"}:
reasoning lines with inline <<expr=result>> calculator annotations, then the
final answer after a #### delimiter.  Canonical records carry the numeric
answer and keep the annotated reasoning lines under metadata.steps.

Usage: convert_gsm8k.py --input raw.jsonl --output gsm8k.jsonl [--prefix gsm8k]
"""

from __future__ import annotations

import argparse
import json
import sys


def convert_record(record: dict, index: int, prefix: str) -> dict:
    answer_text = record["answer"]
    if "####" in answer_text:
        reasoning, _, final = answer_text.rpartition("####")
    else:
        reasoning, final = answer_text, answer_text.strip().splitlines()[-1]
    steps = [line.strip() for line in reasoning.strip().splitlines() if line.strip()]
    return {
        "id": f"{prefix}-{index:05d}",
        "question": record["question"].strip(),
        "answer": final.strip().replace(",", ""),
        "metadata": {"steps": steps},
    }


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--input", required=True)
    parser.add_argument("--output", required=True)
    parser.add_argument("--prefix", default="gsm8k")
    args = parser.parse_args(argv)
    count = 0
    with open(args.input, encoding="utf-8") as src, open(args.output, "w", encoding="utf-8") as dst:
        for index, line in enumerate(src):
            if not line.strip():
                continue
            record = convert_record(json.loads(line), index, args.prefix)
            dst.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    print(f"converted: {count}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
