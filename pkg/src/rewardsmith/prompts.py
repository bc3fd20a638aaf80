"""Prompt templates for reward generation."""

from __future__ import annotations

from .dsl import GRAMMAR
from .envs import EnvSpec
from .trajectory import Box


def render_environment(spec: EnvSpec) -> str:
    docs = dict(spec.feature_docs)
    lines = ["Observation features (read-only):"]
    for feat in spec.schema.entries:
        kind = "scalar" if feat.dim is None else f"vector[{feat.dim}]"
        doc = docs.get(feat.name, "")
        lines.append(f"    {feat.name} : {kind}" + (f"  # {doc}" if doc else ""))
    if isinstance(spec.action_space, Box):
        lines.append(
            f"    action : vector[{spec.action_space.dim}]  # components action[0]..action[{spec.action_space.dim - 1}]"
        )
    else:
        lines.append("    action : scalar  # the chosen action index as a number")
    lines.append(f"Action space: {spec.action_space.describe()}; {spec.action_doc}")
    lines.append(
        f"Episodes end when the task is solved or after {spec.horizon} steps. "
        "The reward is computed after every step, from the observation reached by the step and the action taken."
    )
    return "\n".join(lines)


def build_system_prompt(spec: EnvSpec, instruction: str | None = None) -> str:
    instruction = spec.task_instruction if instruction is None else instruction
    return (
        "You are an expert in robotics, reinforcement learning and code generation.\n"
        f"We are going to train an agent in the `{spec.name}` environment. "
        f"The action space of the agent is `{spec.action_space.describe()}`.\n"
        "\n"
        "Now I want you to help me write a reward function of reinforcement learning.\n"
        "Typically, the reward function of a goal-reaching task is consisted of these following parts "
        "(some part is optional, so only include it if really necessary):\n"
        "1. the distance between the agent and the object it must reach or move\n"
        "2. difference between current state of object and its goal state\n"
        "3. a bonus for solving the task\n"
        "4. regularization of the agent's action\n"
        "\n"
        f"{render_environment(spec)}\n"
        "\n"
        "The reward is written in a small expression language, not Python. Grammar:\n"
        f"{GRAMMAR}"
        "Vector features may only appear inside norm(v) or dist(u, v), or as components such as agent_pos[0]. "
        "Each `sub` line defines one named reward component; a component may use the components defined above it. "
        "An optional `total = ...` line defines the total reward; without it the total is the sum of all components. "
        "Lines starting with # are comments.\n"
        "\n"
        f"I want it to fulfill the following task: {instruction}\n"
        "1. Please think step by step and tell me what does this task mean;\n"
        "2. Then write the reward program. The output of the reward program consists of two items:\n"
        "    (1) the total reward,\n"
        "    (2) each individual reward component (one `sub` line each).\n"
        "The program should be formatted as a single fenced code block: \"```reward ... ```\".\n"
        "3. Do not invent any variable or attribute that is not given.\n"
        "4. When you writing the program, you can also add some comments as your thought.\n"
    )


def build_instruction_prompt(instruction: str) -> str:
    return (
        f"Write the reward program for the task: {instruction}\n"
        "Reply with your reasoning followed by exactly one fenced code block containing the program.\n"
    )
