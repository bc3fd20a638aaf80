"""Goal-conditioned toy environments.

``grid-goal``
    8x8 grid, discrete moves (0 up, 1 down, 2 left, 3 right). Off-grid
    moves are no-ops. Success when the agent stands on the goal cell.
``point-push``
    Unit square. The agent moves by a clipped 2-D action; when it ends a move
    within 0.05 of the box, the box is displaced by the same action. Success
    when the box is within 0.05 of the hole.

Both terminate on success or at the horizon. Dynamics are deterministic;
randomness only enters through ``reset(seed)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .dsl import RewardProgram, compile_program
from .errors import ConfigError
from .trajectory import Box, Discrete, FeatureSchema, Step, Trajectory

__all__ = [
    "EnvSpec",
    "GridGoal",
    "PointPush",
    "ENVIRONMENTS",
    "make_env",
    "rollout",
    "oracle_reward",
    "probe_sampler",
    "RandomPolicy",
    "greedy_grid_policy",
]


@dataclass(frozen=True)
class EnvSpec:
    name: str
    schema: FeatureSchema
    action_space: Discrete | Box
    horizon: int
    task_instruction: str
    feature_docs: tuple[tuple[str, str], ...] = ()
    action_doc: str = ""
    terminate_on_success: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not self.task_instruction:
            raise ConfigError("task instruction must be nonempty")


def _dist(a, b) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)


class GridGoal:
    size = 8
    MOVES = {0: (0, 1), 1: (0, -1), 2: (-1, 0), 3: (1, 0)}

    spec = EnvSpec(
        name="grid-goal",
        schema=FeatureSchema.of(agent_pos=2, goal_pos=2),
        action_space=Discrete(4),
        horizon=64,
        task_instruction="Move the agent onto the goal cell of the grid.",
        feature_docs=(
            ("agent_pos", "integer (x, y) cell of the agent, each coordinate in 0..7"),
            ("goal_pos", "integer (x, y) cell of the goal, each coordinate in 0..7"),
        ),
        action_doc="index 0 = up (y+1), 1 = down (y-1), 2 = left (x-1), 3 = right (x+1); moves off the grid leave the agent in place",
    )

    def __init__(self):
        self.agent = (0, 0)
        self.goal = (0, 0)
        self.t = 0
        self.success = False

    def reset(self, seed: int) -> dict:
        rng = np.random.default_rng(seed)
        cells = self.size * self.size
        a = int(rng.integers(cells))
        g = int(rng.integers(cells - 1))
        if g >= a:
            g += 1
        self.agent = (a % self.size, a // self.size)
        self.goal = (g % self.size, g // self.size)
        self.t = 0
        self.success = False
        return self.observe()

    def set_state(self, agent, goal) -> dict:
        self.agent, self.goal = tuple(agent), tuple(goal)
        self.t = 0
        self.success = self.agent == self.goal
        return self.observe()

    def observe(self) -> dict:
        return {
            "agent_pos": (float(self.agent[0]), float(self.agent[1])),
            "goal_pos": (float(self.goal[0]), float(self.goal[1])),
        }

    def step(self, action) -> tuple[dict, bool, bool]:
        action = self.spec.action_space.validate(action)
        dx, dy = self.MOVES[action]
        x, y = self.agent[0] + dx, self.agent[1] + dy
        if 0 <= x < self.size and 0 <= y < self.size:
            self.agent = (x, y)
        self.t += 1
        self.success = self.success or self.agent == self.goal
        done = self.success or self.t >= self.spec.horizon
        return self.observe(), self.success, done

    @staticmethod
    def is_success(obs: dict) -> bool:
        return obs["agent_pos"] == obs["goal_pos"]

    @staticmethod
    def oracle(obs: dict, action) -> float:
        a, g = obs["agent_pos"], obs["goal_pos"]
        l1 = abs(a[0] - g[0]) + abs(a[1] - g[1])
        return 10.0 * (a == g) - l1 / 14.0


class PointPush:
    radius = 0.05

    spec = EnvSpec(
        name="point-push",
        schema=FeatureSchema.of(agent_pos=2, box_pos=2, hole_pos=2),
        action_space=Box(2, -0.1, 0.1),
        horizon=100,
        task_instruction="Push the box into the hole.",
        feature_docs=(
            ("agent_pos", "2-D position of the agent in the unit square"),
            ("box_pos", "2-D position of the box in the unit square"),
            ("hole_pos", "2-D position of the hole in the unit square"),
        ),
        action_doc=(
            "2-D displacement of the agent, each component clipped to [-0.1, 0.1]; "
            "if the agent ends a move within 0.05 of the box, the box moves by the same displacement"
        ),
    )

    def __init__(self):
        self.agent = (0.0, 0.0)
        self.box = (0.0, 0.0)
        self.hole = (0.0, 0.0)
        self.t = 0
        self.success = False

    def reset(self, seed: int) -> dict:
        rng = np.random.default_rng(seed)
        self.agent = tuple(float(v) for v in rng.uniform(0.0, 1.0, 2))
        self.hole = tuple(float(v) for v in rng.uniform(0.1, 0.9, 2))
        while True:
            self.box = tuple(float(v) for v in rng.uniform(0.1, 0.9, 2))
            if _dist(self.box, self.hole) >= 2 * self.radius:
                break
        self.t = 0
        self.success = False
        return self.observe()

    def set_state(self, agent, box, hole) -> dict:
        self.agent, self.box, self.hole = tuple(agent), tuple(box), tuple(hole)
        self.t = 0
        self.success = _dist(self.box, self.hole) < self.radius
        return self.observe()

    def observe(self) -> dict:
        return {"agent_pos": self.agent, "box_pos": self.box, "hole_pos": self.hole}

    def step(self, action) -> tuple[dict, bool, bool]:
        dx, dy = self.spec.action_space.clip(action)
        self.agent = (min(max(self.agent[0] + dx, 0.0), 1.0), min(max(self.agent[1] + dy, 0.0), 1.0))
        if _dist(self.agent, self.box) < self.radius:
            self.box = (min(max(self.box[0] + dx, 0.0), 1.0), min(max(self.box[1] + dy, 0.0), 1.0))
        self.t += 1
        self.success = self.success or _dist(self.box, self.hole) < self.radius
        done = self.success or self.t >= self.spec.horizon
        return self.observe(), self.success, done

    @classmethod
    def is_success(cls, obs: dict) -> bool:
        return _dist(obs["box_pos"], obs["hole_pos"]) < cls.radius

    @classmethod
    def oracle(cls, obs: dict, action) -> float:
        a, b, h = obs["agent_pos"], obs["box_pos"], obs["hole_pos"]
        return 10.0 * cls.is_success(obs) - _dist(a, b) - 2.0 * _dist(b, h)


ENVIRONMENTS = {"grid-goal": GridGoal, "point-push": PointPush}


def make_env(name: str):
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise ConfigError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None


def oracle_reward(env, obs: dict, action) -> float:
    """Hand-designed reference reward, evaluated on the post-step observation."""
    return type(env).oracle(obs, action)


Policy = Callable[[dict], object]


class RandomPolicy:
    """Uniformly random valid actions from a seeded stream."""

    def __init__(self, action_space, seed: int = 0):
        self.action_space = action_space
        self.rng = np.random.default_rng(seed)

    def __call__(self, obs: dict):
        space = self.action_space
        if isinstance(space, Discrete):
            return int(self.rng.integers(space.n))
        return tuple(float(v) for v in self.rng.uniform(space.low, space.high, space.dim))


def greedy_grid_policy(obs: dict) -> int:
    """Scripted policy for grid-goal: close the x gap first, then y."""
    (ax, ay), (gx, gy) = obs["agent_pos"], obs["goal_pos"]
    if ax < gx:
        return 3
    if ax > gx:
        return 2
    return 0 if ay < gy else 1


def rollout(env, policy: Policy, reward_program: RewardProgram | None, seed: int, traj_id: int | None = None):
    """Run one episode; returns ``(Trajectory, rewards)``.

    Each step records the post-transition observation with the action that
    led to it. Rewards are the program's totals on those pairs (an empty
    list when ``reward_program`` is None).
    """
    compiled = compile_program(reward_program) if reward_program is not None else None
    obs = env.reset(seed)
    steps, rewards = [], []
    done = False
    while not done:
        action = policy(obs)
        obs, success, done = env.step(action)
        if isinstance(env.spec.action_space, Box):
            action = env.spec.action_space.clip(action)
        steps.append(Step(obs, action, success))
        if compiled is not None:
            rewards.append(compiled(obs, action).total)
    traj = Trajectory(tuple(steps), steps[-1].success_after, seed if traj_id is None else traj_id)
    return traj, rewards


def probe_sampler(env, seed: int = 0) -> Iterator[tuple[dict, object]]:
    """Endless seeded stream of (reset observation, random valid action) pairs."""
    actions = RandomPolicy(env.spec.action_space, seed)
    rng = np.random.default_rng(seed)
    while True:
        obs = env.reset(int(rng.integers(2**31)))
        yield obs, actions(obs)
