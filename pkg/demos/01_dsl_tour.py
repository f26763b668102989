"""A tour of the prompt-program DSL: parsing, templates, schemas, round-trip.

Run with: python3 demos/01_dsl_tour.py
"""

from promptopt import parse_program, render_template, serialize_program, validate_value
from promptopt.dsl import parse_typespec

# A program is a YAML document made of a small set of block kinds.
# This one greets whoever is bound to ${ name } and then calls a model.
source = """
text:
- "You are a terse assistant.\\n"
- "Say hello to ${ name }.\\n"
- def: reply
  model: ${ model_id }
"""

program = parse_program(source)
print("block kinds:", [type(item).__name__ for item in program.top_level_items])

# Serialization is source-to-source: the output re-parses to an equal tree.
round_tripped = parse_program(serialize_program(program))
print("round-trip equal:", round_tripped == program)

# Templates are a tiny language: ${ path } with dots and [indexes], nothing else.
scope = {"name": "Ada", "tools": [{"name": "Calc"}]}
print(render_template("Hello ${ name }, first tool: ${ tools[0].name }", scope))

# Unknown keys are rejected outright, so emitted programs cannot drift.
try:
    parse_program("text: []\ntypo_key: true")
except Exception as err:
    print("strict parser said:", err)

# Values can be checked against a JSON-schema subset; violations carry paths.
action_spec = parse_typespec(
    {
        "type": "object",
        "properties": {
            "action": {"type": "string"},
            "arguments": {"type": "object", "properties": {"expr": {"type": "string"}}},
        },
        "required": ["action", "arguments"],
    }
)
good = {"action": "Calc", "arguments": {"expr": "48/4"}}
bad = {"action": 7}
print("good value violations:", validate_value(good, action_spec))
for violation in validate_value(bad, action_spec):
    print("bad value:", violation.path, "-", violation.message)
