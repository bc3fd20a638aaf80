"""Trajectory preference evaluation.

A candidate reward program is tested on stored trajectories before any
training happens: successful trajectories should have a strictly higher
average per-step discounted return than failed ones. The fraction of
(success, failure) pairs that are ordered correctly is compared with a
threshold to decide whether the candidate is worth training.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass

from .dsl import RewardProgram, compile_program
from .errors import ConfigError, EmptyPartition
from .trajectory import Trajectory, avg_per_step_return, partition

DEFAULT_DELTA = 0.8


class TPEVerdict(str, enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INSUFFICIENT = "Insufficient"


class Decision(str, enum.Enum):
    TRAIN = "Train"
    SKIP = "SkipAndPreferenceFeedback"


@dataclass(frozen=True)
class TPEConfig:
    delta: float = DEFAULT_DELTA
    gamma: float = 0.99

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class TPEResult:
    accuracy: float | None
    n_success: int
    n_fail: int
    n_pairs: int
    verdict: TPEVerdict

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "n_success": self.n_success,
            "n_fail": self.n_fail,
            "n_pairs": self.n_pairs,
            "verdict": self.verdict.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TPEResult":
        return cls(data["accuracy"], data["n_success"], data["n_fail"], data["n_pairs"], TPEVerdict(data["verdict"]))


def trajectory_rewards(traj: Trajectory, program: RewardProgram) -> list[float]:
    """Per-step totals of ``program`` recomputed from the stored raw steps."""
    compiled = compile_program(program)
    return [compiled(s.obs, s.action).total for s in traj.steps]


def score(traj: Trajectory, program: RewardProgram, gamma: float) -> float:
    return avg_per_step_return(trajectory_rewards(traj, program), gamma)


def count_ordered_pairs(success_scores: list[float], fail_scores: list[float]) -> int:
    """Number of pairs with success score strictly above failure score.

    Sort the failure scores once and binary-search each success score, so
    the count is exact integer arithmetic in O((n+m) log m).
    """
    ordered = sorted(fail_scores)
    return sum(bisect.bisect_left(ordered, s) for s in success_scores)


def preference_accuracy(store, program: RewardProgram, config: TPEConfig = TPEConfig()) -> TPEResult:
    """Score every stored trajectory under ``program`` and measure pairwise
    order preservation.

    Ties count as violations. With successes but no failures the accuracy is
    1.0; with no successes the verdict is ``Insufficient``.
    """
    successes, failures = partition(store)
    n_s, n_f = len(successes), len(failures)
    if n_s == 0:
        return TPEResult(None, 0, n_f, 0, TPEVerdict.INSUFFICIENT)
    s_scores = [score(t, program, config.gamma) for t in successes]
    f_scores = [score(t, program, config.gamma) for t in failures]
    if n_f == 0:
        accuracy = 1.0
    else:
        accuracy = count_ordered_pairs(s_scores, f_scores) / (n_s * n_f)
    verdict = TPEVerdict.PASS if accuracy >= config.delta else TPEVerdict.FAIL
    return TPEResult(accuracy, n_s, n_f, n_s * n_f, verdict)


def is_order_preserving(store, program: RewardProgram, gamma: float) -> bool:
    """True when the worst success strictly beats the best failure."""
    successes, failures = partition(store)
    if not successes or not failures:
        raise EmptyPartition("need at least one successful and one failed trajectory")
    worst_success = min(score(t, program, gamma) for t in successes)
    best_failure = max(score(t, program, gamma) for t in failures)
    return worst_success > best_failure


def gate(result: TPEResult) -> Decision:
    if result.verdict is TPEVerdict.FAIL:
        return Decision.SKIP
    return Decision.TRAIN
