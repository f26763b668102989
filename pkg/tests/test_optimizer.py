import random

import pytest

from promptopt.backends import ScriptedBackend
from promptopt.dsl import DataBlock, parse_program, serialize_program
from promptopt.errors import (
    BackendUnavailableError,
    EmptySpaceError,
    InsufficientDataError,
    ReWOOUnsupportedError,
)
from promptopt.interpreter import execute_program
from promptopt.optimizer import (
    Candidate,
    CandidateEvaluator,
    SearchSpace,
    candidate_loss,
    candidate_program,
    emit_optimized_program,
    evaluate_final,
    sample_candidates,
    successive_halving,
)
from promptopt.patterns import PatternKind, SystemPromptStyle
from promptopt.tasks import TaskInstance, eval_gsm8k, make_evaluator
from promptopt.tools import calc_registry
from promptopt.trajectories import QAPair, build_gsm8k_trajectory

SPACE_ZC = SearchSpace(
    patterns=(PatternKind.ZERO_SHOT, PatternKind.COT),
    num_demonstrations=(0, 3),
    instructions=("solve it",),
)


def _candidates(count):
    return [
        Candidate(PatternKind.ZERO_SHOT, 0, (), None, "i", index) for index in range(count)
    ]


def _valid(n):
    return [TaskInstance(f"v{i:04d}", f"q{i}", str(i)) for i in range(n)]


def _evaluator(output, instance):
    return eval_gsm8k(output, instance.answer)


# --- sampling -------------------------------------------------------------------------

def test_sampling_contains_zero_shot_bias():
    candidates = sample_candidates(SPACE_ZC, k=4, train_bank_size=10, seed=7)
    assert len(candidates) == 4
    assert any(c.pattern == PatternKind.ZERO_SHOT and c.n == 0 for c in candidates)


def test_single_candidate_is_zero_shot():
    candidates = sample_candidates(SPACE_ZC, k=1, train_bank_size=10, seed=3)
    assert candidates[0].pattern == PatternKind.ZERO_SHOT
    assert candidates[0].n == 0
    assert candidates[0].demo_ids == ()


def test_sampling_deterministic_per_seed():
    a = sample_candidates(SPACE_ZC, k=20, train_bank_size=10, seed=11)
    b = sample_candidates(SPACE_ZC, k=20, train_bank_size=10, seed=11)
    assert a == b
    c = sample_candidates(SPACE_ZC, k=20, train_bank_size=10, seed=12)
    assert c != a


def test_sampling_demo_ids_within_bank():
    candidates = sample_candidates(SPACE_ZC, k=50, train_bank_size=5, seed=2)
    for candidate in candidates:
        assert len(candidate.demo_ids) == candidate.n
        assert all(0 <= i < 5 for i in candidate.demo_ids)


def test_sampling_style_only_for_react_on_json_tasks():
    space = SearchSpace(
        patterns=(PatternKind.COT, PatternKind.REACT),
        num_demonstrations=(3,),
        instructions=("i",),
    )
    candidates = sample_candidates(space, k=40, train_bank_size=10, seed=5)
    for candidate in candidates:
        if candidate.pattern == PatternKind.REACT:
            assert candidate.system_prompt is not None
        else:
            assert candidate.system_prompt is None


def test_sampling_no_style_on_reactive_only_task():
    space = SearchSpace(
        patterns=(PatternKind.REACT,),
        num_demonstrations=(3,),
        instructions=("i",),
        reactive_only=True,
    )
    candidates = sample_candidates(space, k=10, train_bank_size=10, seed=5)
    assert all(c.system_prompt is None for c in candidates)


def test_sampling_eligible_pool_respected():
    eligible = {PatternKind.COT: [2, 4]}
    candidates = sample_candidates(SPACE_ZC, k=30, train_bank_size=10, seed=9, eligible=eligible)
    for candidate in candidates:
        if candidate.pattern == PatternKind.COT and candidate.n:
            assert set(candidate.demo_ids) <= {2, 4}


def test_space_invariants():
    with pytest.raises(EmptySpaceError):
        SearchSpace(patterns=())
    with pytest.raises(ReWOOUnsupportedError):
        SearchSpace(patterns=(PatternKind.REWOO,), reactive_only=True)
    with pytest.raises(InsufficientDataError):
        sample_candidates(SPACE_ZC, k=2, train_bank_size=1, seed=0)


# --- loss -----------------------------------------------------------------------------

def _loss_for_backend(backend, subset):
    candidate = Candidate(PatternKind.ZERO_SHOT, 0, (), None, "solve", 0)
    return candidate_loss(candidate, subset, backend, calc_registry(), _evaluator)


def test_loss_all_correct():
    subset = [TaskInstance(f"i{k}", f"question {k}", "7") for k in range(16)]
    backend = ScriptedBackend(default="The answer is 7")
    assert _loss_for_backend(backend, subset) == -1.0


def test_loss_half_correct():
    subset = [
        TaskInstance(f"i{k}", f"question {k}", "7" if k % 2 else "8") for k in range(16)
    ]
    backend = ScriptedBackend(default="The answer is 7")
    assert _loss_for_backend(backend, subset) == -0.5


def test_loss_all_failures_scores_zero():
    subset = [TaskInstance(f"i{k}", f"question {k}", "7") for k in range(16)]
    backend = ScriptedBackend()  # no rules, no default: every execution fails
    assert _loss_for_backend(backend, subset) == 0.0


def test_loss_backend_unavailable_aborts():
    class DownBackend:
        def complete(self, request):
            raise BackendUnavailableError("down")

    subset = [TaskInstance("i", "q", "7")]
    with pytest.raises(BackendUnavailableError):
        _loss_for_backend(DownBackend(), subset)


def test_loss_bounds():
    rng = random.Random(0)
    for trial in range(10):
        answers = [str(rng.randrange(3)) for _ in range(8)]
        subset = [TaskInstance(f"i{k}", f"q{k}", answers[k]) for k in range(8)]
        backend = ScriptedBackend(default="The answer is 1")
        loss = _loss_for_backend(backend, subset)
        assert -1.0 <= loss <= 0.0


# --- successive halving ---------------------------------------------------------------------

def test_halving_schedule_100_candidates():
    candidates = _candidates(100)
    losses = {c.candidate_index: -(c.candidate_index / 100) for c in candidates}
    winner, rounds = successive_halving(
        candidates, _valid(1024), v_min=16, v_max=1024, loss_fn=lambda c, s: losses[c.candidate_index]
    )
    assert [len(r.survivors) for r in rounds] == [50, 25, 12, 6, 3, 1]
    assert [r.subset_size for r in rounds] == [16, 32, 64, 128, 256, 512]
    assert winner.candidate_index == 99


def test_single_candidate_returned_immediately():
    calls = []
    winner, rounds = successive_halving(
        _candidates(1), _valid(4), 1, 4, lambda c, s: calls.append(1) or 0.0
    )
    assert rounds == []
    assert winner.candidate_index == 0
    assert calls == []


def test_two_candidates_one_round():
    scripted = {0: -0.1, 1: -0.9}
    winner, rounds = successive_halving(
        _candidates(2), _valid(16), 4, 16, lambda c, s: scripted[c.candidate_index]
    )
    assert len(rounds) == 1
    assert rounds[0].subset_size == 4
    assert winner.candidate_index == 1


def test_subset_growth_is_prefix_nested():
    seen = []

    def loss(candidate, subset):
        seen.append(tuple(inst.id for inst in subset))
        return -(candidate.candidate_index / 10)

    successive_halving(_candidates(8), _valid(64), 4, 64, loss)
    sizes = sorted({len(s) for s in seen})
    by_size = {len(s): s for s in seen}
    for small, large in zip(sizes, sizes[1:]):
        assert by_size[large][:small] == by_size[small]


def test_tie_break_lowest_index():
    winner, rounds = successive_halving(
        _candidates(4), _valid(8), 2, 8, lambda c, s: -0.5
    )
    assert winner.candidate_index == 0
    assert rounds[0].survivors == (0, 1)


def test_tie_break_stable_under_input_permutation():
    candidates = _candidates(4)
    shuffled = [candidates[2], candidates[0], candidates[3], candidates[1]]
    winner, _ = successive_halving(shuffled, _valid(8), 2, 8, lambda c, s: -0.5)
    assert winner.candidate_index == 0


@pytest.mark.parametrize("count", [2, 3, 5, 8, 17, 33, 64, 100, 128])
def test_round_count_matches_halving_rule(count):
    _, rounds = successive_halving(
        _candidates(count), _valid(8), 1, 8, lambda c, s: -c.candidate_index / count
    )
    # keep floor(n/2) each round until one survivor remains
    expected = 0
    n = count
    while n > 1:
        n //= 2
        expected += 1
    assert len(rounds) == expected


def test_halving_validations():
    with pytest.raises(ValueError):
        successive_halving([], _valid(4), 1, 4, lambda c, s: 0.0)
    with pytest.raises(ValueError):
        successive_halving(_candidates(2), _valid(4), 0, 4, lambda c, s: 0.0)
    with pytest.raises(InsufficientDataError):
        successive_halving(_candidates(2), _valid(4), 1, 10, lambda c, s: 0.0)


def test_monotone_oracle_matches_exhaustive_argmin():
    rng = random.Random(42)
    for trial in range(50):
        count = rng.randrange(2, 9)
        candidates = _candidates(count)
        losses = {c.candidate_index: round(rng.uniform(-1, 0), 3) for c in candidates}
        valid = _valid(32)
        winner, _ = successive_halving(
            candidates, valid, 4, 32, lambda c, s: losses[c.candidate_index]
        )
        best = min(candidates, key=lambda c: (losses[c.candidate_index], c.candidate_index))
        assert winner.candidate_index == best.candidate_index


def test_parallel_rounds_identical_records():
    candidates = _candidates(16)
    losses = {c.candidate_index: -(c.candidate_index / 16) for c in candidates}

    def loss(candidate, subset):
        return losses[candidate.candidate_index]

    w1, r1 = successive_halving(candidates, _valid(32), 4, 32, loss, parallelism=1)
    w2, r2 = successive_halving(candidates, _valid(32), 4, 32, loss, parallelism=4)
    assert w1 == w2
    assert r1 == r2


# --- emission --------------------------------------------------------------------------------

QUARTER = TaskInstance(
    "g1",
    "What is fifteen more than a quarter of 48?",
    "27",
    {"steps": ["A quarter of 48 is <<48/4=12>>12.", "Fifteen more than 12 is <<12+15=27>>27."]},
)

TWO_PAIRS = [
    QAPair("What is two plus two?", "4", reasoning="Two plus two is four."),
    QAPair("What is ten minus one?", "9", reasoning="Ten minus one is nine."),
]


def test_emit_cot_contains_demo_texts():
    winner = Candidate(PatternKind.COT, 2, (0, 1), None, "solve", 3)
    program = emit_optimized_program(winner, TWO_PAIRS, calc_registry())
    text = serialize_program(program)
    assert "What is two plus two?" in text
    assert "Ten minus one is nine." in text
    assert parse_program(text) == program


def test_emit_zero_shot_has_no_demonstrations_block():
    winner = Candidate(PatternKind.ZERO_SHOT, 0, (), None, "solve", 0)
    program = emit_optimized_program(winner, [], calc_registry())
    assert not any(isinstance(b, DataBlock) for b in program.walk())
    assert "demonstrations" not in serialize_program(program)


def test_emit_react_references_pattern_function_by_name():
    traj = build_gsm8k_trajectory(QUARTER, PatternKind.REACT)
    winner = Candidate(PatternKind.REACT, 1, (0,), SystemPromptStyle.LLAMA3, "solve", 5)
    program = emit_optimized_program(winner, [traj], calc_registry())
    text = serialize_program(program)
    assert "call: react" in text


def test_emitted_program_reproduces_behavior_after_round_trip():
    winner = Candidate(PatternKind.COT, 2, (0, 1), None, "solve", 3)
    program = emit_optimized_program(winner, TWO_PAIRS, calc_registry())
    reparsed = parse_program(serialize_program(program))

    def run(prog):
        backend = ScriptedBackend(default="The answer is 27")
        return execute_program(
            prog, {"question": QUARTER.question, "model_id": "m"}, backend, calc_registry()
        ).output

    assert run(program) == run(reparsed)


# --- final evaluation -----------------------------------------------------------------------------

def test_evaluate_final_all_correct():
    program = candidate_program(
        Candidate(PatternKind.ZERO_SHOT, 0, (), None, "solve", 0), [], calc_registry()
    )
    split = [TaskInstance(f"t{k}", f"q{k}", "7") for k in range(4)]
    backend = ScriptedBackend(default="The answer is 7")
    report = evaluate_final(program, split, backend, calc_registry(), _evaluator)
    assert report.accuracy == 1.0
    assert len(report.verdicts) == 4


def test_evaluate_final_three_of_four():
    program = candidate_program(
        Candidate(PatternKind.ZERO_SHOT, 0, (), None, "solve", 0), [], calc_registry()
    )
    split = [TaskInstance(f"t{k}", f"q{k}", "7" if k else "9") for k in range(4)]
    backend = ScriptedBackend(default="The answer is 7")
    report = evaluate_final(program, split, backend, calc_registry(), _evaluator)
    assert report.accuracy == 0.75


def test_evaluate_final_empty_split_rejected():
    program = candidate_program(
        Candidate(PatternKind.ZERO_SHOT, 0, (), None, "solve", 0), [], calc_registry()
    )
    with pytest.raises(InsufficientDataError):
        evaluate_final(program, [], ScriptedBackend(default="x"), calc_registry(), _evaluator)


# --- harness caching -------------------------------------------------------------------------------

def test_prefix_cache_avoids_recomputation(gsm8k_instances):
    backend = ScriptedBackend(default="The answer is 27")
    harness = CandidateEvaluator(
        task="gsm8k",
        bank=gsm8k_instances[:6],
        backend=backend,
        tools=calc_registry(),
        evaluator=make_evaluator("gsm8k"),
    )
    candidate = Candidate(PatternKind.ZERO_SHOT, 0, (), None, "solve", 0)
    subset4 = gsm8k_instances[6:10]
    subset6 = gsm8k_instances[6:12]
    harness.loss(candidate, subset4)
    calls_after_first = len(backend.requests)
    assert calls_after_first == 4
    harness.loss(candidate, subset6)
    assert len(backend.requests) == 6  # only the two new instances hit the backend


def test_harness_eligibility(gsm8k_instances):
    harness = CandidateEvaluator(
        task="gsm8k",
        bank=gsm8k_instances,
        backend=ScriptedBackend(default=""),
        tools=calc_registry(),
        evaluator=make_evaluator("gsm8k"),
    )
    space = SearchSpace(
        patterns=(PatternKind.COT, PatternKind.REACT, PatternKind.REWOO),
        num_demonstrations=(3,),
        instructions=("i",),
    )
    eligible = harness.eligible_demo_ids(space)
    # The annotation-free instance cannot seed agent trajectories.
    assert len(eligible[PatternKind.REACT]) == len(gsm8k_instances) - 1
    assert len(eligible[PatternKind.COT]) == len(gsm8k_instances)


def test_full_mock_run_uses_greedy_decoding(gsm8k_instances):
    from promptopt.optimizer import run_optimization

    backend = ScriptedBackend(default="The answer is 27")
    harness = CandidateEvaluator(
        task="gsm8k",
        bank=gsm8k_instances[:6],
        backend=backend,
        tools=calc_registry(),
        evaluator=make_evaluator("gsm8k"),
    )
    space = SearchSpace(
        patterns=(PatternKind.ZERO_SHOT, PatternKind.COT),
        num_demonstrations=(0, 2),
        instructions=("solve",),
    )
    run_optimization(space, harness, gsm8k_instances[6:10], gsm8k_instances[10:12], k=4, v_min=2, v_max=4, seed=1)
    assert backend.requests, "the mock run must issue model calls"
    assert all(request.temperature == 0 for request in backend.requests)


def test_mbpp_react_demos_prepend_refinement(fake_sandbox, mbpp_instances):
    harness = CandidateEvaluator(
        task="mbpp",
        bank=mbpp_instances,
        backend=ScriptedBackend(default=""),
        tools=calc_registry(),
        evaluator=lambda output, instance: None,
    )
    candidate = Candidate(PatternKind.REACT, 1, (0,), None, "i", 0)
    demos = harness.demonstrations(candidate)
    assert len(demos) == 3  # two fixed refinement examples + the sampled one
    executes = [
        s for s in demos[0].steps if type(s).__name__ == "Action" and s.call.action == "Execute"
    ]
    assert len(executes) >= 2
