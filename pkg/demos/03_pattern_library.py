"""The four prompting patterns as program builders.

Run with: python3 demos/03_pattern_library.py
"""

from promptopt import (
    PatternKind,
    QAPair,
    ScriptedBackend,
    SystemPromptStyle,
    execute_program,
    instantiate_pattern,
    serialize_program,
)
from promptopt.backends import QueueBackend
from promptopt.tasks import TaskInstance
from promptopt.tools import calc_registry
from promptopt.trajectories import build_gsm8k_trajectory

QUESTION = "What is fifteen more than a quarter of 48?"

# -- zero-shot: instruction + question + one model call ---------------------------
zero = instantiate_pattern(PatternKind.ZERO_SHOT, "Solve the problem.", [], [])
print(serialize_program(zero))

# -- chain of thought: worked examples before the question -------------------------
demos = [QAPair("What is two plus two?", "4", reasoning="Two plus two is four.")]
cot = instantiate_pattern(PatternKind.COT, "Solve the problem.", demos)
backend = ScriptedBackend(default="A quarter of 48 is 12. The answer is 27")
result = execute_program(
    cot, {"question": QUESTION, "model_id": "demo"}, backend, calc_registry()
)
print("CoT prompt starts with:", result.context.messages[0].content[:60], "...")
print("CoT answer line:", result.output.splitlines()[-1])

# -- reactive tool loop: demos are trajectories, a Finish action exits ---------------
instance = TaskInstance(
    "demo-1",
    QUESTION,
    "27",
    {"steps": ["A quarter of 48 is <<48/4=12>>12.", "Fifteen more than 12 is <<12+15=27>>27."]},
)
trajectory = build_gsm8k_trajectory(instance, PatternKind.REACT)
react = instantiate_pattern(
    PatternKind.REACT,
    "Solve the problem with the calculator.",
    [trajectory],
    calc_registry().specs,
    SystemPromptStyle.GRANITE_TOOLS,
)
scripted_turns = QueueBackend(
    [
        'Tho: I need to calculate 48/4\nAct: {"action":"Calc","arguments":{"expr":"48/4"}}',
        'Tho: I need to calculate 12+15\nAct: {"action":"Calc","arguments":{"expr":"12+15"}}',
        'Tho: The answer is 27\nAct: {"action":"Finish","arguments":{"answer":"27"}}',
    ]
)
result = execute_program(
    react, {"question": QUESTION, "model_id": "demo"}, scripted_turns, calc_registry()
)
print("ReAct model calls:", result.model_calls, "| tool calls:", result.tool_calls)
print("ReAct transcript tail:", result.output.rstrip().splitlines()[-1])

# -- plan-then-solve: one planner call, tools, one solver call ------------------------
plan_demo = build_gsm8k_trajectory(instance, PatternKind.REWOO)
rewoo = instantiate_pattern(
    PatternKind.REWOO, "Solve the problem.", [plan_demo], calc_registry().specs
)
planner_then_solver = QueueBackend(
    [
        'Tho: Calculate 48/4\nAct: {"action":"Calc","arguments":{"expr":"48/4"}}\n'
        'Tho: Calculate #E1+15\nAct: {"action":"Calc","arguments":{"expr":"#E1+15"}}',
        "The answer is 27",
    ]
)
result = execute_program(
    rewoo, {"question": QUESTION, "model_id": "demo"}, planner_then_solver, calc_registry()
)
print("plan placeholders resolved:", "#E1 = 12" in result.output and "#E2 = 27" in result.output)
