import pytest

from rewardsmith.dsl import GRAMMAR
from rewardsmith.envs import make_env
from rewardsmith.prompts import build_instruction_prompt, build_system_prompt, render_environment


@pytest.mark.parametrize("name", ["grid-goal", "point-push"])
def test_system_prompt_contents(name):
    spec = make_env(name).spec
    text = build_system_prompt(spec)
    assert GRAMMAR in text
    assert f"I want it to fulfill the following task: {spec.task_instruction}\n" in text
    assert "```reward" in text
    assert "Do not invent any variable or attribute that is not given." in text
    for feat in spec.schema.names:
        assert feat in text


def test_custom_instruction():
    text = build_system_prompt(make_env("grid-goal").spec, "Reach the corner.")
    assert "following task: Reach the corner.\n" in text


def test_action_rendering():
    assert "action : scalar" in render_environment(make_env("grid-goal").spec)
    assert "action : vector[2]" in render_environment(make_env("point-push").spec)


def test_instruction_prompt_prefix():
    assert build_instruction_prompt("Do it.").startswith("Write the reward program for the task: Do it.\n")


def test_instructions_differ_only_at_slot():
    spec = make_env("grid-goal").spec
    a = build_system_prompt(spec, "AAAA")
    b = build_system_prompt(spec, "BBBB")
    assert a != b and a.replace("AAAA", "BBBB") == b
    assert build_system_prompt(spec) == build_system_prompt(spec)
