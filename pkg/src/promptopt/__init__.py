"""Joint optimization of prompting pattern and prompt content.

The package searches over declarative prompt programs: a small YAML DSL
expresses the four prompting patterns (zero-shot, chain-of-thought,
plan-then-solve, and the reactive tool loop), and a successive-halving
race over sampled candidates picks the pattern, demonstrations, and
system prompt that minimize validation loss.  The winning candidate is
emitted as an executable program in the same DSL.
"""

from .backends import ChatRequest, ChatResponse, Message, ScriptedBackend, ScriptRule
from .dsl import Program, parse_program, render_template, serialize_program, validate_value
from .errors import PromptOptError
from .interpreter import ExecutionLimits, ExecutionResult, Scope, execute_program
from .optimizer import (
    Candidate,
    CandidateEvaluator,
    OptimizationResult,
    RoundRecord,
    SearchSpace,
    candidate_loss,
    emit_optimized_program,
    evaluate_final,
    run_optimization,
    sample_candidates,
    successive_halving,
)
from .patterns import (
    PatternKind,
    PatternLimits,
    SystemPromptStyle,
    instantiate_pattern,
    render_demonstrations,
)
from .tasks import (
    SplitSizes,
    Splits,
    TaskInstance,
    Verdict,
    eval_fever,
    eval_gsm8k,
    eval_mbpp,
    load_dataset,
    make_splits,
)
from .tools import (
    FinishValue,
    Observation,
    ToolCall,
    ToolRegistry,
    ToolSpec,
    parse_action,
    tool_calc,
    tool_execute,
    tool_search,
)
from .trajectories import (
    Demonstration,
    QAPair,
    Trajectory,
    build_fever_trajectory,
    build_gsm8k_trajectory,
    build_mbpp_trajectory,
    refinement_examples,
)

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "CandidateEvaluator",
    "ChatRequest",
    "ChatResponse",
    "Demonstration",
    "ExecutionLimits",
    "ExecutionResult",
    "FinishValue",
    "Message",
    "Observation",
    "OptimizationResult",
    "PatternKind",
    "PatternLimits",
    "Program",
    "PromptOptError",
    "QAPair",
    "RoundRecord",
    "Scope",
    "ScriptRule",
    "ScriptedBackend",
    "SearchSpace",
    "SplitSizes",
    "Splits",
    "SystemPromptStyle",
    "TaskInstance",
    "ToolCall",
    "ToolRegistry",
    "ToolSpec",
    "Trajectory",
    "Verdict",
    "build_fever_trajectory",
    "build_gsm8k_trajectory",
    "build_mbpp_trajectory",
    "candidate_loss",
    "emit_optimized_program",
    "eval_fever",
    "eval_gsm8k",
    "eval_mbpp",
    "evaluate_final",
    "execute_program",
    "instantiate_pattern",
    "load_dataset",
    "make_splits",
    "parse_action",
    "parse_program",
    "refinement_examples",
    "render_demonstrations",
    "render_template",
    "run_optimization",
    "sample_candidates",
    "serialize_program",
    "successive_halving",
    "tool_calc",
    "tool_execute",
    "tool_search",
    "validate_value",
]
