"""Rule-based demonstration trajectories, one template per task family.

Run with: python3 demos/04_trajectories.py
"""

from promptopt import PatternKind, build_fever_trajectory, build_gsm8k_trajectory
from promptopt.tasks import TaskInstance
from promptopt.trajectories import build_mbpp_trajectory, refinement_examples, render_trajectory

# Math instances carry reasoning steps annotated with <<expr=result>> markers;
# each marker becomes one calculator round in the trajectory.
math_instance = TaskInstance(
    "gsm8k-0001",
    "What is fifteen more than a quarter of 48?",
    "27",
    {"steps": ["A quarter of 48 is <<48/4=12>>12.", "Fifteen more than 12 is <<12+15=27>>27."]},
)
print("== reactive (thought / action / observation) ==")
print(render_trajectory(build_gsm8k_trajectory(math_instance, PatternKind.REACT)))

# The plan-style variant rewords the thoughts, drops observations and the
# finish, and refers to earlier results as #E1, #E2, ...
print("\n== plan-style (no observations) ==")
print(render_trajectory(build_gsm8k_trajectory(math_instance, PatternKind.REWOO)))

# Claim verification: one search per evidence article, then the verdict.
claim = TaskInstance(
    "fever-0001",
    "The Eiffel Tower is located in Paris.",
    "true",
    {
        "evidence": [
            {
                "title": "Eiffel Tower",
                "summary": "The Eiffel Tower is a lattice tower in Paris, France.",
                "sentences": ["The Eiffel Tower is on the Champ de Mars in Paris."],
            }
        ]
    },
)
print("\n== claim verification ==")
print(render_trajectory(build_fever_trajectory(claim, PatternKind.REACT)))

# Coding: run the reference solution against the prompt test, then submit.
coding = TaskInstance(
    "mbpp-0001",
    "Write a function add(a, b).\nYour solution should pass: assert add(1, 2) == 3",
    "def add(a, b):\n    return a + b",
    {
        "solution": "def add(a, b):\n    return a + b",
        "test": "assert add(1, 2) == 3",
        "tests": ["assert add(1, 2) == 3"],
    },
)
print("\n== coding ==")
print(render_trajectory(build_mbpp_trajectory(coding)))

# Two fixed fail-then-fix examples are always prepended to coding demos so
# agents see iterative refinement in context.
print("\nrefinement examples shipped:", len(refinement_examples()))
