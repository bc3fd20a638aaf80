"""Desk-scale RL trainers driven by a reward program.

Two algorithms are provided: tabular Q-learning for discrete-action
environments and a cross-entropy method over linear policies for
continuous ones. Both log periodic evaluation checkpoints and finish with
a batch of evaluation trajectories rolled out by the final policy.

Seed streams are derived from ``TrainConfig.seed``::

    training episodes      seed * SEED_STRIDE + k
    checkpoint evaluation  seed * SEED_STRIDE + CHECKPOINT_SEED_OFFSET + i
    final evaluation       seed * SEED_STRIDE + FINAL_SEED_OFFSET + i
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .dsl import RewardProgram, compile_program
from .errors import ConfigError
from .trajectory import Box, Discrete, TrajectoryBatch, discounted_return, batch_to_dict, batch_from_dict
from .envs import rollout

SEED_STRIDE = 10_000_000
CHECKPOINT_SEED_OFFSET = 5_000_000
FINAL_SEED_OFFSET = 9_000_000

TABULAR_Q = "tabular_q"
CEM = "cem"


@dataclass(frozen=True)
class TrainConfig:
    algo: str = TABULAR_Q
    total_env_steps: int = 50_000
    eval_interval: int | None = None  # defaults to total_env_steps // 10
    eval_episodes_per_checkpoint: int = 20
    final_eval_episodes: int = 100
    gamma: float = 0.99
    seed: int = 0
    # tabular Q
    learning_rate: float = 0.1
    epsilon_start: float = 0.2
    epsilon_end: float = 0.01
    epsilon_anneal_fraction: float = 0.8
    # cross-entropy method
    population: int = 64
    elite_fraction: float = 0.125
    sigma_init: float = 0.5
    sigma_decay: float = 0.99
    episodes_per_candidate: int = 5

    def __post_init__(self):
        if self.eval_interval is None:
            object.__setattr__(self, "eval_interval", max(self.total_env_steps // 10, 1))
        if self.algo not in (TABULAR_Q, CEM):
            raise ConfigError(f"unknown algorithm {self.algo!r}")
        if not self.total_env_steps >= self.eval_interval >= 1:
            raise ConfigError("need total_env_steps >= eval_interval >= 1")
        if self.final_eval_episodes < 2:
            raise ConfigError("final_eval_episodes must be >= 2")
        if self.eval_episodes_per_checkpoint < 1:
            raise ConfigError("eval_episodes_per_checkpoint must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Checkpoint:
    env_step: int
    mean_return: float
    std_return: float
    mean_length: float
    std_length: float
    success_rate: float
    sub_reward_means: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TrainLog:
    checkpoints: list[Checkpoint]
    final_batch: TrajectoryBatch
    wall_time: float = field(default=0.0, compare=False)

    @property
    def final_success_rate(self) -> float:
        trajs = self.final_batch.trajectories
        return sum(t.success for t in trajs) / len(trajs)

    def to_dict(self) -> dict:
        return {
            "checkpoints": [c.to_dict() for c in self.checkpoints],
            "final_batch": batch_to_dict(self.final_batch),
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainLog":
        return cls(
            [Checkpoint(**c) for c in data["checkpoints"]],
            batch_from_dict(data["final_batch"]),
            data.get("wall_time", 0.0),
        )


# -- policies ----------------------------------------------------------------


def _flatten(obs: dict) -> list[float]:
    out = []
    for v in obs.values():
        if isinstance(v, tuple):
            out.extend(v)
        else:
            out.append(v)
    return out


class TabularPolicy:
    """Greedy policy over a Q-table keyed by the flattened observation."""

    def __init__(self, q: dict, n_actions: int):
        self.q = q
        self.n_actions = n_actions

    def __call__(self, obs: dict) -> int:
        values = self.q.get(tuple(_flatten(obs)))
        if values is None:
            return 0
        return int(np.argmax(values))


class LinearPolicy:
    """``a = clip(W @ [features; 1])``."""

    def __init__(self, weights: np.ndarray, space: Box):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.space = space

    def __call__(self, obs: dict) -> tuple:
        x = np.append(np.asarray(_flatten(obs), dtype=np.float64), 1.0)
        return self.space.clip(self.weights @ x)


# -- evaluation --------------------------------------------------------------


def _stats(values: list[float]) -> tuple[float, float]:
    mean = math.fsum(values) / len(values)
    return mean, statistics.pstdev(values, mean)


def evaluate(env, policy, n_episodes: int, seed_base: int, program: RewardProgram, gamma: float = 0.99, env_step: int = 0):
    """Roll out ``n_episodes`` episodes (seeds ``seed_base .. seed_base+n-1``)
    and summarise them under ``program``.

    Returns ``(TrajectoryBatch, Checkpoint)``. Returns are discounted with
    ``gamma``; sub-reward means are per-episode undiscounted sums averaged
    over episodes.
    """
    compiled = compile_program(program)
    trajs, returns, lengths = [], [], []
    sub_sums = {name: [] for name in program.sub_names}
    for i in range(n_episodes):
        traj, _ = rollout(env, policy, None, seed_base + i, traj_id=i)
        outputs = [compiled(s.obs, s.action) for s in traj.steps]
        returns.append(discounted_return([o.total for o in outputs], gamma))
        lengths.append(float(len(traj)))
        for name in sub_sums:
            acc = 0.0
            for o in outputs:
                acc += o.components[name]
            sub_sums[name].append(acc)
        trajs.append(traj)
    mean_r, std_r = _stats(returns)
    mean_l, std_l = _stats(lengths)
    checkpoint = Checkpoint(
        env_step=env_step,
        mean_return=mean_r,
        std_return=std_r,
        mean_length=mean_l,
        std_length=std_l,
        success_rate=sum(t.success for t in trajs) / n_episodes,
        sub_reward_means={name: math.fsum(v) / n_episodes for name, v in sub_sums.items()},
    )
    return TrajectoryBatch(env.spec.schema, gamma, tuple(trajs)), checkpoint


# -- training ----------------------------------------------------------------


def train(env, program: RewardProgram, config: TrainConfig):
    """Train a policy under ``program``; returns ``(policy, TrainLog)``.

    Raises :class:`~rewardsmith.errors.RewardRuntimeError` if the program
    fails on a state visited during training.
    """
    start = time.perf_counter()
    space = env.spec.action_space
    if config.algo == TABULAR_Q:
        if not isinstance(space, Discrete):
            raise ConfigError("tabular Q-learning needs a discrete action space")
        policy, checkpoints = _train_tabular_q(env, program, config)
    else:
        if not isinstance(space, Box):
            raise ConfigError("the cross-entropy trainer needs a continuous action space")
        policy, checkpoints = _train_cem(env, program, config)
    base = config.seed * SEED_STRIDE
    final_batch, _ = evaluate(
        env, policy, config.final_eval_episodes, base + FINAL_SEED_OFFSET, program, config.gamma
    )
    return policy, TrainLog(checkpoints, final_batch, time.perf_counter() - start)


def default_algo(env) -> str:
    return TABULAR_Q if isinstance(env.spec.action_space, Discrete) else CEM


def _checkpoint(env, policy, program, config, step):
    seed_base = config.seed * SEED_STRIDE + CHECKPOINT_SEED_OFFSET
    _, cp = evaluate(env, policy, config.eval_episodes_per_checkpoint, seed_base, program, config.gamma, step)
    return cp


def _train_tabular_q(env, program, config):
    compiled = compile_program(program)
    n_actions = env.spec.action_space.n
    rng = np.random.default_rng(config.seed)
    q: dict[tuple, np.ndarray] = {}
    policy = TabularPolicy(q, n_actions)
    anneal_steps = max(int(config.epsilon_anneal_fraction * config.total_env_steps), 1)
    checkpoints = []
    base = config.seed * SEED_STRIDE

    counts: dict[tuple, np.ndarray] = {}
    h = env.spec.horizon
    scale = float(h) if config.gamma == 1.0 else (1.0 - config.gamma**h) / (1.0 - config.gamma)

    def row(key, obs):
        values = q.get(key)
        if values is None:
            best = max(compiled(obs, a).total for a in range(n_actions))
            values = q[key] = np.full(n_actions, best * scale)
            counts[key] = np.zeros(n_actions)
        return values

    steps, episode = 0, 0
    while steps < config.total_env_steps:
        obs = env.reset(base + episode)
        episode += 1
        state, state_obs = tuple(_flatten(obs)), obs
        done = False
        while not done and steps < config.total_env_steps:
            frac = min(steps / anneal_steps, 1.0)
            eps = config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)
            values = row(state, state_obs)
            if rng.random() < eps:
                action = int(rng.integers(n_actions))
            else:
                best = np.flatnonzero(values == values.max())
                action = int(best[0] if len(best) == 1 else rng.choice(best))
            obs, success, done = env.step(action)
            reward = compiled(obs, action).total
            next_state = tuple(_flatten(obs))
            target = reward if success else reward + config.gamma * row(next_state, obs).max()
            n = counts[state]
            n[action] += 1
            values[action] += max(config.learning_rate, 1.0 / n[action]) * (target - values[action])
            state, state_obs = next_state, obs
            steps += 1
            if steps % config.eval_interval == 0:
                checkpoints.append(_checkpoint(env, policy, program, config, steps))
    if not checkpoints or checkpoints[-1].env_step != steps:
        checkpoints.append(_checkpoint(env, policy, program, config, steps))
    return policy, checkpoints


def _train_cem(env, program, config):
    space = env.spec.action_space
    n_in = sum(f.dim or 1 for f in env.spec.schema.entries) + 1
    shape = (space.dim, n_in)
    rng = np.random.default_rng(config.seed)
    mean = np.zeros(shape[0] * shape[1])
    sigma = config.sigma_init
    n_elite = max(int(round(config.elite_fraction * config.population)), 1)
    base = config.seed * SEED_STRIDE
    checkpoints = []
    steps, generation = 0, 0
    next_checkpoint = config.eval_interval
    while steps < config.total_env_steps:
        noise = rng.standard_normal((config.population, mean.size))
        candidates = mean + sigma * noise
        seeds = [base + generation * config.episodes_per_candidate + j for j in range(config.episodes_per_candidate)]
        fitness = []
        for theta in candidates:
            policy = LinearPolicy(theta.reshape(shape), space)
            total = 0.0
            for s in seeds:
                traj, rewards = rollout(env, policy, program, s)
                steps += len(traj)
                total += discounted_return(rewards, config.gamma)
            fitness.append(total / len(seeds))
        # stable sort keeps candidate-index order among equal fitness
        order = sorted(range(config.population), key=lambda i: -fitness[i])
        mean = candidates[order[:n_elite]].mean(axis=0)
        sigma *= config.sigma_decay
        generation += 1
        if steps >= next_checkpoint:
            policy = LinearPolicy(mean.reshape(shape), space)
            checkpoints.append(_checkpoint(env, policy, program, config, steps))
            while next_checkpoint <= steps:
                next_checkpoint += config.eval_interval
    policy = LinearPolicy(mean.reshape(shape), space)
    if not checkpoints or checkpoints[-1].env_step != steps:
        checkpoints.append(_checkpoint(env, policy, program, config, steps))
    return policy, checkpoints

