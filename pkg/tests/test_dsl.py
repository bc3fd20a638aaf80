import math
import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rewardsmith.dsl import (
    Verdict,
    check_source,
    dynamic_check,
    evaluate,
    extract_program,
    parse,
    pretty_print,
    typecheck,
)
from rewardsmith.envs import make_env, probe_sampler
from rewardsmith.errors import ExtractError, ParseError, RewardRuntimeError, TypeCheckError
from rewardsmith.trajectory import Box, Discrete, FeatureSchema

from conftest import RANDOM_BOX, RANDOM_DISCRETE, RANDOM_SCHEMA, ProgramGenerator
from reference_eval import ReferenceError_, ref_program

GRID = FeatureSchema.of(agent_pos=2, goal_pos=2)


def strip_source(program):
    # source_text does not take part in equality; this only documents intent.
    return (program.subs, program.total)


def run_round_trips(n=1000, seed=7):
    gen = ProgramGenerator(seed)
    for _ in range(n):
        program = gen.program()
        typecheck(program, RANDOM_SCHEMA, RANDOM_BOX)
        text = pretty_print(program)
        again = parse(text)
        assert strip_source(again) == strip_source(program), text
        assert pretty_print(again) == text


def run_oracle_equivalence(n=1000, seed=11):
    outcomes = {"ok": 0, "error": 0}
    for space, offset in ((RANDOM_BOX, 0), (RANDOM_DISCRETE, 1)):
        gen = ProgramGenerator(seed + offset, RANDOM_SCHEMA, space)
        for _ in range(n // 2):
            program = gen.program()
            typecheck(program, RANDOM_SCHEMA, space)
            obs, action = gen.observation(), gen.action()
            try:
                expected = ref_program(program, obs, action)
            except ReferenceError_:
                expected = None
            try:
                out = evaluate(program, obs, action)
                got = (out.total, dict(out.components))
            except RewardRuntimeError:
                got = None
            assert got == expected, pretty_print(program)
            if got is not None:
                # exact float equality, including the sign of zero
                signs = lambda r: [math.copysign(1.0, x) for x in (r[0], *r[1].values())]
                assert signs(got) == signs(expected)
            outcomes["ok" if got is not None else "error"] += 1
    return outcomes


class TestParse:
    def test_two_subs_implicit_total(self):
        p = parse("sub d = dist(agent_pos, goal_pos)\nsub bonus = if(d < 0.05, 10, 0)")
        assert p.sub_names == ["d", "bonus"] and p.total is None

    def test_unclosed_paren(self):
        with pytest.raises(ParseError) as exc:
            parse("sub x = norm(agent_pos")
        assert exc.value.line == 1
        assert exc.value.column == 13

    def test_duplicate_sub(self):
        with pytest.raises(ParseError, match="duplicate"):
            parse("sub a = 1\nsub a = 2")

    def test_error_position_and_expected(self):
        with pytest.raises(ParseError) as exc:
            parse("sub a = 1\nsub b = * 2")
        err = exc.value
        assert (err.line, err.column) == (2, 9)
        assert "NUMBER" in err.expected

    @pytest.mark.parametrize(
        "text",
        ["", "total = 1", "sub = 1", "sub a 1", "sub a = 1 < 2 < 3", "sub a = 1e999", "sub a = 1 +", "sub a = (1))"],
    )
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            parse(text)

    def test_comments_and_multiline_brackets(self):
        p = parse("# shaping\nsub a = max(1,\n  2)  # trailing\ntotal = a * 2\n")
        assert evaluate(p, {}, 0).total == 4.0

    def test_precedence(self):
        p = parse("sub a = 2 - 3 - 4\nsub b = 2 * 3 + 4 * 5\nsub c = -2 * -3\nsub d = 1 + 2 < 4")
        assert dict(evaluate(p, {}, 0).components) == {"a": -5.0, "b": 26.0, "c": 6.0, "d": 1.0}

    def test_round_trip_minimal_parens(self):
        p = parse("sub a = (1 - (2 - 3)) / (4 * (5 / 6))")
        assert pretty_print(p) == "sub a = (1.0 - (2.0 - 3.0)) / (4.0 * (5.0 / 6.0))\n"


class TestTypecheck:
    def test_undefined_feature(self):
        with pytest.raises(TypeCheckError, match="undefined feature obj_pos"):
            typecheck(parse("sub r = norm(obj_pos)"), GRID)

    def test_vector_in_scalar_position(self):
        with pytest.raises(TypeCheckError, match="agent_pos"):
            typecheck(parse("sub r = norm(goal_pos) + agent_pos"), GRID)

    def test_dist_ok(self):
        typecheck(parse("sub r = dist(agent_pos, goal_pos)"), GRID)

    def test_dist_dimension_mismatch(self):
        schema = FeatureSchema.of(a=2, b=3)
        with pytest.raises(TypeCheckError, match="dist"):
            typecheck(parse("sub r = dist(a, b)"), schema)

    def test_scalar_in_vector_position(self):
        schema = FeatureSchema.of(a=2, s=None)
        with pytest.raises(TypeCheckError):
            typecheck(parse("sub r = norm(s)"), schema)

    def test_index_out_of_range(self):
        with pytest.raises(TypeCheckError, match="agent_pos"):
            typecheck(parse("sub r = agent_pos[2]"), GRID)

    def test_undefined_function(self):
        with pytest.raises(TypeCheckError, match="undefined function log"):
            typecheck(parse("sub r = log(1)"), GRID)

    def test_wrong_arity(self):
        with pytest.raises(TypeCheckError):
            typecheck(parse("sub r = clip(1, 2)"), GRID)

    def test_forward_sub_reference(self):
        with pytest.raises(TypeCheckError):
            typecheck(parse("sub a = b\nsub b = 1"), GRID)

    def test_action_exposure(self):
        typecheck(parse("sub r = action * 2"), GRID, Discrete(4))
        typecheck(parse("sub r = norm(action) + action[1]"), GRID, Box(2, -1, 1))
        with pytest.raises(TypeCheckError):
            typecheck(parse("sub r = action"), GRID, Box(2, -1, 1))
        with pytest.raises(TypeCheckError):
            typecheck(parse("sub r = norm(action)"), GRID, Discrete(4))


class TestEvaluate:
    def test_three_four_five(self):
        out = evaluate(parse("sub d = dist(a, g)"), {"a": (0.0, 0.0), "g": (3.0, 4.0)}, 0)
        assert out.total == 5.0 and dict(out.components) == {"d": 5.0}

    def test_division_by_zero(self):
        with pytest.raises(RewardRuntimeError, match="division by zero"):
            evaluate(parse("sub p = 1/x"), {"x": 0.0}, 0)

    def test_implicit_total(self):
        out = evaluate(parse("sub a = 2\nsub b = a*3"), {}, 0)
        assert out.total == 8.0 and dict(out.components) == {"a": 2.0, "b": 6.0}

    def test_explicit_total(self):
        out = evaluate(parse("sub a = 2\nsub b = 3\ntotal = a * b"), {}, 0)
        assert out.total == 6.0

    @pytest.mark.parametrize("text", ["sub r = sqrt(-1)", "sub r = exp(1000)", "sub r = clip(1, 2, 0)", "sub r = 1e308 * 10"])
    def test_runtime_errors(self, text):
        with pytest.raises(RewardRuntimeError):
            evaluate(parse(text), {}, 0)

    def test_if_is_lazy(self):
        assert evaluate(parse("sub r = if(1, 5, 1/0)"), {}, 0).total == 5.0

    def test_comparison_values(self):
        out = evaluate(parse("sub a = 1 == 1\nsub b = 2 < 1"), {}, 0)
        assert dict(out.components) == {"a": 1.0, "b": 0.0}

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=6))
    def test_implicit_total_is_left_to_right_sum(self, values):
        text = "\n".join(f"sub s{i} = v{i}" for i in range(len(values)))
        obs = {f"v{i}": v for i, v in enumerate(values)}
        out = evaluate(parse(text), obs, 0)
        expected = 0.0
        for v in values:
            expected += v
        assert out.total == expected

    def test_determinism(self):
        gen = ProgramGenerator(3)
        for _ in range(50):
            p = gen.program()
            obs, act = gen.observation(), gen.action()
            try:
                a = evaluate(p, obs, act)
            except RewardRuntimeError:
                continue
            b = evaluate(parse(pretty_print(p)), obs, act)
            assert a == b


class TestExtract:
    def test_fenced(self):
        assert extract_program("Here is the reward:\n```reward\nsub d = 1\n```done") == "sub d = 1"

    def test_bare(self):
        assert extract_program("sub d = 1") == "sub d = 1"

    def test_prose(self):
        with pytest.raises(ExtractError):
            extract_program("I cannot help.")

    def test_first_fence_wins(self):
        assert extract_program("```\nsub a = 1\n```\n```\nsub b = 2\n```") == "sub a = 1"


class TestDynamicCheck:
    def test_grid_ok(self):
        env = make_env("grid-goal")
        report = dynamic_check(parse("sub r = -dist(agent_pos, goal_pos)"), probe_sampler(env, 0), 64)
        assert report.verdict is Verdict.OK and report.failing_probe is None

    def test_always_divides_by_zero(self):
        env = make_env("grid-goal")
        report = dynamic_check(parse("sub r = 1/(agent_pos[0] - agent_pos[0])"), probe_sampler(env, 0))
        assert report.verdict is Verdict.RUNTIME_ERROR
        assert report.message.startswith("probe 1:")
        assert report.failing_probe is not None

    def test_overflow(self):
        env = make_env("grid-goal")
        report = dynamic_check(parse("sub r = exp(1000)"), probe_sampler(env, 0))
        assert report.verdict is Verdict.RUNTIME_ERROR

    def test_check_source_verdicts(self):
        env = make_env("grid-goal")
        probes = lambda: probe_sampler(env, 0)
        assert check_source("sub r = (", env.spec.schema, env.spec.action_space, probes())[1].verdict is Verdict.PARSE_ERROR
        assert check_source("sub r = obj", env.spec.schema, env.spec.action_space, probes())[1].verdict is Verdict.TYPE_ERROR
        program, report = check_source("sub r = 1", env.spec.schema, env.spec.action_space, probes())
        assert report.ok and program is not None


def test_round_trip_1000():
    start = time.perf_counter()
    run_round_trips()
    assert time.perf_counter() - start < 10


def test_oracle_equivalence_1000():
    start = time.perf_counter()
    outcomes = run_oracle_equivalence()
    assert time.perf_counter() - start < 10
    # the generator must exercise both the success and the error path
    assert outcomes["ok"] > 300 and outcomes["error"] > 10
