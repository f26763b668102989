"""A complete mock optimization run: sample, race, emit, evaluate.

Everything is driven by a scripted backend, so the run is deterministic and
finishes in well under a second.  One planted three-shot chain-of-thought
candidate answers correctly; the race must find it.

Run with: python3 demos/05_optimization.py
"""

from promptopt import (
    CandidateEvaluator,
    PatternKind,
    ScriptRule,
    ScriptedBackend,
    SearchSpace,
    run_optimization,
    sample_candidates,
    serialize_program,
)
from promptopt.optimizer import experiment_log_lines
from promptopt.patterns import render_demonstrations
from promptopt.tasks import SplitSizes, TaskInstance, make_evaluator, make_splits
from promptopt.tools import calc_registry
from promptopt.trajectories import build_demonstration

# A toy task: every answer is 42, questions vary. Forty instances split into
# a demo bank, a validation split (racing order), and a held-out test split.
instances = [
    TaskInstance(
        f"toy-{i:03d}",
        f"Toy problem {i}: what is the count?",
        "42",
        {"steps": [f"Adding up gives 40+2 = <<40+2=42>>42 in case {i}."]},
    )
    for i in range(40)
]
splits = make_splits(instances, SplitSizes(train=20, valid=12, test=8), seed=13)

space = SearchSpace(
    patterns=(PatternKind.ZERO_SHOT, PatternKind.COT),
    num_demonstrations=(0, 3),
    instructions=("Solve the problem.",),
)

# Find the planted winner ahead of time: the first sampled three-shot CoT
# candidate. Its rendered demonstrations are a unique fingerprint we can
# script the backend against.
candidates = sample_candidates(space, k=8, train_bank_size=20, seed=13)
target = next(c for c in candidates if c.pattern == PatternKind.COT and c.n == 3)
demos = [build_demonstration("gsm8k", splits.train[i], PatternKind.COT) for i in target.demo_ids]
marker = render_demonstrations(demos, PatternKind.COT)

backend = ScriptedBackend(
    [ScriptRule(substring=marker, response="The answer is 42")],
    default="The answer is 0",
)

harness = CandidateEvaluator(
    task="gsm8k",
    bank=splits.train,
    backend=backend,
    tools=calc_registry(),
    evaluator=make_evaluator("gsm8k"),
    model_id="mock",
)
result = run_optimization(
    space, harness, splits.valid, splits.test, k=8, v_min=4, v_max=12, seed=13
)

print("winner:", result.winner.pattern.value, f"n={result.winner.n}",
      f"(candidate #{result.winner.candidate_index}, planted #{target.candidate_index})")
print("held-out accuracy:", result.test_accuracy)
print("\nround-by-round log:")
for line in experiment_log_lines(result):
    print(" ", line)
print("\nthe emitted program is ordinary source; its first lines:")
print("\n".join(serialize_program(result.emitted_program).splitlines()[:14]))
