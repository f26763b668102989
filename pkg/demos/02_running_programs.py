"""Executing a program: implicit context, tool dispatch, scripted backends.

Run with: python3 demos/02_running_programs.py
"""

from promptopt import ScriptRule, ScriptedBackend, execute_program, parse_program
from promptopt.tools import calc_registry

# The interpreter accumulates every block's output as chat context, so the
# model call below sees the tool list and the question as its messages.
# The model's JSON reply is parsed and type-checked, and the if-block
# dispatches on it: here, by handing the expression to the interpreter's
# `act` builtin via a calculator action.
source = """
text:
- "You can use a calculator. Reply with {\\"action\\": \\"Calc\\", \\"arguments\\": {\\"expr\\": ...}}.\\n"
- "How much is 48 divided by 4, plus 15?\\n"
- def: step
  call: act
  args:
    raw: "${ reply }"
"""

# Scripted backends make everything reproducible: rules map a substring of
# the last user message to a canned response. Here we skip the model call
# entirely and bind the "model reply" up front to keep the demo tiny.
program = parse_program(source)
backend = ScriptedBackend([ScriptRule(substring="divided by 4", response="unused")])
scope = {"reply": '{"action": "Calc", "arguments": {"expr": "48/4 + 15"}}'}

result = execute_program(program, scope, backend, calc_registry())
print("tool calls made:", result.tool_calls)
print("finish flag:", result.bindings["step"]["finish"])
print("observation:", result.bindings["step"]["observation"])
print("---- full transcript ----")
for message in result.context.messages:
    print(f"[{message.role.value}] {message.content.strip()}")
