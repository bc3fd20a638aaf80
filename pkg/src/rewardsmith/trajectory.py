"""Trajectories, feature schemas and return arithmetic.

Everything here is immutable and pure. A :class:`Trajectory` keeps raw
observations and actions only (no rewards), so any reward program can
re-score it later.

Each stored :class:`Step` holds the observation *after* the transition
together with the action that produced it; rewards are computed on that
pair, which is how goal-reaching bonuses become visible on the final step.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from .errors import DomainError, InvalidAction

__all__ = [
    "Feature",
    "FeatureSchema",
    "Discrete",
    "Box",
    "Step",
    "Trajectory",
    "TrajectoryBatch",
    "discounted_return",
    "avg_per_step_return",
    "partition",
    "batch_to_dict",
    "batch_from_dict",
    "save_batch",
    "load_batch",
]

NAME_RE = re.compile(r"[a-z][a-z0-9_]*\Z")

Value = Union[float, tuple]
Observation = dict  # name -> float | tuple[float, ...]
ActionValue = Union[int, tuple]


@dataclass(frozen=True)
class Feature:
    name: str
    dim: int | None = None  # None for scalars

    @property
    def is_vector(self) -> bool:
        return self.dim is not None


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, named observation features (scalars or fixed-size vectors)."""

    entries: tuple[Feature, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for feat in self.entries:
            if not NAME_RE.match(feat.name):
                raise ValueError(f"invalid feature name {feat.name!r}")
            if feat.name in seen:
                raise ValueError(f"duplicate feature name {feat.name!r}")
            if feat.dim is not None and feat.dim < 1:
                raise ValueError(f"feature {feat.name!r} needs dimension >= 1")
            seen.add(feat.name)

    @classmethod
    def of(cls, **dims: int | None) -> "FeatureSchema":
        """``FeatureSchema.of(agent_pos=2, speed=None)``; keyword order is kept."""
        return cls(tuple(Feature(k, v) for k, v in dims.items()))

    def __getitem__(self, name: str) -> Feature:
        for feat in self.entries:
            if feat.name == name:
                return feat
        raise KeyError(name)

    def __contains__(self, name: object) -> bool:
        return any(f.name == name for f in self.entries)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.entries]

    def validate(self, obs: Observation) -> None:
        if set(obs) != set(self.names):
            raise DomainError(
                f"observation keys {sorted(obs)} do not match schema {self.names}"
            )
        for feat in self.entries:
            value = obs[feat.name]
            if feat.is_vector:
                if not isinstance(value, tuple) or len(value) != feat.dim:
                    raise DomainError(f"feature {feat.name} must have {feat.dim} components")
                items = value
            else:
                if isinstance(value, tuple):
                    raise DomainError(f"feature {feat.name} must be scalar")
                items = (value,)
            if not all(math.isfinite(v) for v in items):
                raise DomainError(f"feature {feat.name} is not finite")

    def to_dict(self) -> list[dict]:
        return [
            {"name": f.name, "kind": "scalar"}
            if f.dim is None
            else {"name": f.name, "kind": "vector", "dim": f.dim}
            for f in self.entries
        ]

    @classmethod
    def from_dict(cls, data: list[dict]) -> "FeatureSchema":
        return cls(
            tuple(Feature(d["name"], d["dim"] if d["kind"] == "vector" else None) for d in data)
        )


@dataclass(frozen=True)
class Discrete:
    n: int

    def validate(self, action) -> int:
        if isinstance(action, bool) or not isinstance(action, int) or not 0 <= action < self.n:
            raise InvalidAction(f"discrete action must be an integer in [0, {self.n}), got {action!r}")
        return action

    def describe(self) -> str:
        return f"Discrete({self.n})"

    def to_dict(self) -> dict:
        return {"type": "discrete", "n": self.n}


@dataclass(frozen=True)
class Box:
    dim: int
    low: float
    high: float

    def clip(self, action: Sequence[float]) -> tuple:
        if len(action) != self.dim:
            raise InvalidAction(f"continuous action must have {self.dim} components")
        return tuple(min(max(float(a), self.low), self.high) for a in action)

    def validate(self, action) -> tuple:
        if not isinstance(action, tuple) or len(action) != self.dim:
            raise InvalidAction(f"continuous action must be a {self.dim}-tuple")
        if not all(self.low <= a <= self.high for a in action):
            raise InvalidAction("continuous action outside its bounds")
        return action

    def describe(self) -> str:
        return f"Box({self.low}, {self.high}, ({self.dim},), float64)"

    def to_dict(self) -> dict:
        return {"type": "box", "dim": self.dim, "low": self.low, "high": self.high}


ActionSpace = Union[Discrete, Box]


def action_space_from_dict(data: dict) -> ActionSpace:
    if data["type"] == "discrete":
        return Discrete(data["n"])
    return Box(data["dim"], data["low"], data["high"])


@dataclass(frozen=True)
class Step:
    obs: Observation
    action: ActionValue
    success_after: bool


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    success: bool
    id: int

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("a trajectory needs at least one step")
        if self.success != self.steps[-1].success_after:
            raise ValueError("trajectory success flag must equal the last step's success_after")

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class TrajectoryBatch:
    schema: FeatureSchema
    gamma: float
    trajectories: tuple[Trajectory, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in [0, 1], got {self.gamma}")

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def extend(self, other: Iterable[Trajectory]) -> "TrajectoryBatch":
        return TrajectoryBatch(self.schema, self.gamma, self.trajectories + tuple(other))


def _check(rewards: Sequence[float], gamma: float) -> None:
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    if len(rewards) == 0:
        raise DomainError("rewards must be nonempty")
    for r in rewards:
        if not math.isfinite(r):
            raise DomainError(f"non-finite reward {r!r}")


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """Sum of ``gamma**t * r_t``, accumulated left to right.

    The discount factor is built up by repeated multiplication and the sum
    is accumulated in step order; both are part of the contract so results
    are bitwise reproducible.
    """
    _check(rewards, gamma)
    total = 0.0
    discount = 1.0
    for r in rewards:
        total += discount * r
        discount *= gamma
    return total


def avg_per_step_return(traj_rewards: Sequence[float], gamma: float) -> float:
    return discounted_return(traj_rewards, gamma) / len(traj_rewards)


def partition(batch: Iterable[Trajectory]) -> tuple[list[Trajectory], list[Trajectory]]:
    successes, failures = [], []
    for traj in batch:
        (successes if traj.success else failures).append(traj)
    return successes, failures


# -- serialization -----------------------------------------------------------


def _value_to_json(v):
    return list(v) if isinstance(v, tuple) else v


def _value_from_json(v):
    return tuple(float(x) for x in v) if isinstance(v, list) else float(v)


def _action_from_json(a):
    return tuple(float(x) for x in a) if isinstance(a, list) else int(a)


def batch_to_dict(batch: TrajectoryBatch) -> dict:
    return {
        "schema": batch.schema.to_dict(),
        "gamma": batch.gamma,
        "trajectories": [
            {
                "id": t.id,
                "success": t.success,
                "steps": [
                    {
                        "obs": {k: _value_to_json(v) for k, v in s.obs.items()},
                        "action": _value_to_json(s.action),
                        "success_after": s.success_after,
                    }
                    for s in t.steps
                ],
            }
            for t in batch.trajectories
        ],
    }


def batch_from_dict(data: dict) -> TrajectoryBatch:
    schema = FeatureSchema.from_dict(data["schema"])
    trajs = []
    for t in data["trajectories"]:
        steps = tuple(
            Step(
                obs={k: _value_from_json(v) for k, v in s["obs"].items()},
                action=_action_from_json(s["action"]),
                success_after=bool(s["success_after"]),
            )
            for s in t["steps"]
        )
        trajs.append(Trajectory(steps, bool(t["success"]), int(t["id"])))
    return TrajectoryBatch(schema, float(data["gamma"]), tuple(trajs))


def save_batch(batch: TrajectoryBatch, path: str | Path) -> None:
    # json emits floats via repr(), which round-trips exactly.
    Path(path).write_text(json.dumps(batch_to_dict(batch), indent=1) + "\n")


def load_batch(path: str | Path) -> TrajectoryBatch:
    return batch_from_dict(json.loads(Path(path).read_text()))
