#!/usr/bin/env python3
"""Build canonical claim-verification instances by joining three sources.

The true/false task formulation ships claims without their evidence, so we
recover evidence by joining back onto the original fact-checking dump:

  --claims    JSON with {"examples": [{"input": claim, "target_scores":
              {"true": 0|1, "false": 0|1}}, ...]} (the reformulated task)
  --source    JSONL of original records {"id", "claim", "label",
              "evidence": [[[ann_id, ev_id, "Article title", sent_idx], ...], ...]}
  --wiki      JSONL of {"title", "summary", "sentences": {"3": "text", ...}}

Claims are joined on exact claim text; evidence titles/sentence indexes are
resolved against the wiki dump.  Claims with no resolvable evidence are
still emitted (with empty evidence) unless --require-evidence is given.

Usage: convert_fever.py --claims bb.json --source fever.jsonl --wiki wiki.jsonl
       --output fever_canonical.jsonl
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import defaultdict


def load_source(path: str) -> dict[str, dict]:
    by_claim: dict[str, dict] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                by_claim.setdefault(record["claim"].strip(), record)
    return by_claim


def load_wiki(path: str) -> dict[str, dict]:
    pages: dict[str, dict] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                pages[record["title"]] = record
    return pages


def evidence_for(source_record: dict, pages: dict[str, dict]) -> list[dict]:
    # Gather sentence indexes per article across all annotation sets, in
    # first-mention order (the dump has no canonical article order).
    per_title: dict[str, list[int]] = defaultdict(list)
    order: list[str] = []
    for annotation_set in source_record.get("evidence", []):
        for item in annotation_set:
            title, sent_idx = item[2], item[3]
            if title is None:
                continue
            title = title.replace("_", " ")
            if title not in per_title:
                order.append(title)
            if sent_idx is not None and sent_idx not in per_title[title]:
                per_title[title].append(sent_idx)
    articles = []
    for title in order:
        page = pages.get(title)
        if page is None:
            continue
        sentence_map = page.get("sentences", {})
        sentences = [
            sentence_map[str(i)] for i in sorted(per_title[title]) if str(i) in sentence_map
        ]
        articles.append(
            {"title": title, "summary": page.get("summary", ""), "sentences": sentences}
        )
    return articles


def label_of(example: dict) -> str | None:
    scores = example.get("target_scores", {})
    truthy = [name for name, score in scores.items() if score]
    if truthy == ["true"]:
        return "true"
    if truthy == ["false"]:
        return "false"
    return None


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--claims", required=True)
    parser.add_argument("--source", required=True)
    parser.add_argument("--wiki", required=True)
    parser.add_argument("--output", required=True)
    parser.add_argument("--require-evidence", action="store_true")
    args = parser.parse_args(argv)
    with open(args.claims, encoding="utf-8") as handle:
        claims = json.load(handle)["examples"]
    source = load_source(args.source)
    pages = load_wiki(args.wiki)
    kept = 0
    skipped = 0
    with open(args.output, "w", encoding="utf-8") as dst:
        for index, example in enumerate(claims):
            claim = example["input"].strip()
            label = label_of(example)
            if label is None:
                skipped += 1
                continue
            source_record = source.get(claim)
            articles = evidence_for(source_record, pages) if source_record else []
            if args.require_evidence and not articles:
                skipped += 1
                continue
            instance = {
                "id": f"fever-{index:05d}",
                "question": claim,
                "answer": label,
                "metadata": {"evidence": articles},
            }
            dst.write(json.dumps(instance, ensure_ascii=False) + "\n")
            kept += 1
    print(f"converted: {kept}")
    print(f"skipped: {skipped}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
