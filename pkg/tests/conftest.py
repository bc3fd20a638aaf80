import random
import sys
from pathlib import Path

import pytest

from rewardsmith.dsl.ast import BinOp, Call, Compare, Index, Neg, Num, Ref, RewardProgram
from rewardsmith.trajectory import Box, Discrete, FeatureSchema, Step, Trajectory, TrajectoryBatch

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

RANDOM_SCHEMA = FeatureSchema.of(speed=None, height=None, agent_pos=2, goal_pos=2, joint=3)
RANDOM_BOX = Box(2, -1.0, 1.0)
RANDOM_DISCRETE = Discrete(4)


class ProgramGenerator:
    """Seeded generator of random well-typed reward programs."""

    literals = [0.0, 0.5, 1.0, 2.0, 3.0, 10.0, 0.05, 1e-3, 1e20, 1e-300]

    def __init__(self, seed, schema=RANDOM_SCHEMA, action_space=RANDOM_BOX):
        self.rng = random.Random(seed)
        self.schema = schema
        self.action_space = action_space
        self.scalars = [f.name for f in schema.entries if not f.is_vector]
        self.vectors = {f.name: f.dim for f in schema.entries if f.is_vector}
        if isinstance(action_space, Box):
            self.vectors["action"] = action_space.dim
        else:
            self.scalars.append("action")

    def literal(self):
        rng = self.rng
        if rng.random() < 0.5:
            return Num(rng.choice(self.literals))
        return Num(round(rng.uniform(0, 5), rng.randint(0, 6)))

    def leaf(self, subs):
        rng = self.rng
        kind = rng.randrange(4)
        if kind == 0:
            return self.literal()
        if kind == 1 and subs:
            return Ref(rng.choice(subs))
        if kind == 2:
            name = rng.choice(sorted(self.vectors))
            return Index(name, rng.randrange(self.vectors[name]))
        return Ref(rng.choice(self.scalars))

    def vector_call(self):
        rng = self.rng
        names = sorted(self.vectors)
        if rng.random() < 0.5:
            return Call("norm", (Ref(rng.choice(names)),))
        u = rng.choice(names)
        same = [n for n in names if self.vectors[n] == self.vectors[u]]
        return Call("dist", (Ref(u), Ref(rng.choice(same))))

    def expr(self, depth, subs):
        rng = self.rng
        if depth <= 0 or rng.random() < 0.2:
            return self.leaf(subs) if rng.random() < 0.85 else self.vector_call()
        kind = rng.randrange(8)
        sub = lambda: self.expr(depth - 1, subs)
        if kind == 0:
            return Neg(sub())
        if kind in (1, 2):
            return BinOp(rng.choice("+-*/"), sub(), sub())
        if kind == 3:
            return Compare(rng.choice(["<", "<=", ">", ">=", "=="]), sub(), sub())
        if kind == 4:
            return Call(rng.choice(["abs", "exp", "sqrt", "tanh"]), (sub(),))
        if kind == 5:
            return Call(rng.choice(["min", "max"]), tuple(sub() for _ in range(rng.randint(2, 4))))
        if kind == 6:
            return Call(rng.choice(["clip", "if"]), (sub(), sub(), sub()))
        return self.vector_call()

    def program(self, max_subs=4, depth=4):
        subs = []
        bindings = []
        for i in range(self.rng.randint(1, max_subs)):
            name = f"r{i}"
            bindings.append((name, self.expr(depth, list(subs))))
            subs.append(name)
        total = self.expr(depth, subs) if self.rng.random() < 0.4 else None
        return RewardProgram(tuple(bindings), total)

    def observation(self):
        rng = self.rng
        obs = {}
        for f in self.schema.entries:
            draw = lambda: rng.choice([0.0, 1.0, -1.0, 0.5]) if rng.random() < 0.3 else rng.uniform(-3, 3)
            obs[f.name] = tuple(draw() for _ in range(f.dim)) if f.is_vector else draw()
        return obs

    def action(self):
        space = self.action_space
        if isinstance(space, Box):
            return tuple(self.rng.uniform(space.low, space.high) for _ in range(space.dim))
        return self.rng.randrange(space.n)


def scored_trajectory(values, success, traj_id=0):
    """A trajectory over schema ``{v: scalar}`` whose per-step rewards under
    ``sub r = v`` are exactly ``values``."""
    steps = tuple(
        Step({"v": float(v)}, 0, success and i == len(values) - 1) for i, v in enumerate(values)
    )
    return Trajectory(steps, success, traj_id)


SCALAR_SCHEMA = FeatureSchema.of(v=None)


def scored_store(successes, failures, gamma=0.99):
    trajs = [scored_trajectory(v, True, i) for i, v in enumerate(successes)]
    trajs += [scored_trajectory(v, False, len(trajs) + i) for i, v in enumerate(failures)]
    return TrajectoryBatch(SCALAR_SCHEMA, gamma, tuple(trajs))


@pytest.fixture
def identity_program():
    from rewardsmith.dsl import parse

    return parse("sub r = v")


SHAPED_GRID_REWARD = "sub near = -dist(agent_pos, goal_pos)\nsub win = if(near > -0.5, 10, 0)"

E2E_TRANSCRIPT = FIXTURES / "e2e_transcript.json"
REPLAY_FIXTURES = sorted(FIXTURES.glob("*.json"))
REPLAY_FIXTURES = [p for p in REPLAY_FIXTURES if p.name != "feedback_fixture.json"]


def fixture_iterations(fixture):
    """Iterations a replay fixture was recorded for: the end-to-end
    transcript covers N=2, the retry fixtures a single generation phase."""
    return 2 if Path(fixture) == E2E_TRANSCRIPT else 0


def e2e_config(output_dir, replay_file=E2E_TRANSCRIPT, **overrides):
    from rewardsmith.orchestrator import RunConfig
    from rewardsmith.trainers import TrainConfig

    kwargs = dict(
        env_name="grid-goal",
        iterations=2,
        delta=0.8,
        replay_file=str(replay_file),
        output_dir=None if output_dir is None else str(output_dir),
        train=TrainConfig(total_env_steps=4000),
    )
    kwargs.update(overrides)
    return RunConfig(**kwargs)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
