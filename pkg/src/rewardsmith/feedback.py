"""Plain-text feedback messages built from training logs and trajectory stores.

Formats are fixed: step-level numbers use two decimals, trajectory returns
and per-step averages use ``repr`` (shortest round-trip form).
"""

from __future__ import annotations

from .dsl import RewardProgram, compile_program
from .tpe import TPEResult, score, trajectory_rewards
from .trajectory import Trajectory, TrajectoryBatch, discounted_return, partition

DEFAULT_K_POINTS = 10

PROCESS_HEADER = (
    "1.Evaluation is performed after a certain number of training steps, "
    "and the average results of the episodes are as follows:\n"
)
TRAJECTORY_HEADER = (
    "2.After training, we evaluated the model and the two trajectories "
    "with the highest and lowest return are as follows:\n"
)
PREFERENCE_BELIEF = (
    "We believe that the average reward for each step of most successful "
    "trajectories should be higher than that of failed trajectories.\n"
)
INTROSPECTION_PROLOGUE = "I use the reward function you wrote to train the RL agent. The feedback is as follows:\n"
INTROSPECTION_INSTRUCTIONS = (
    '1.Please carefully analyze the above feedback step by step, tell me your analysis results.' "\n"
    '2.Consider how to enhance the reward function in order to increase the sample efficiency of RL and improve the task success rate. Provide a new, improved reward function that can better solve the task. Some helpful tips for analyzing the feedback:' "\n"
    '    (1) If the success rates are always near zero, then you must rewrite the entire reward function' "\n"
    '    (2) If the values for a certain reward component are near identical throughout, then this means RL is not able to optimize this component as it is written. You may consider' "\n"
    '        (a) Changing its scale or the value of its temperature parameter' "\n"
    '        (b) Re-writing the reward component ' "\n"
    '        (c) Discarding the reward component' "\n"
    "    (3) If some reward components' magnitude is significantly larger, then you must re-scale its value to a proper range" "\n"
    '3. Give the content and reason of the modification in the form of comments before the modified position.' "\n"
    "4. Do not invent any variable or attribute that is not given. Don't assume you can use other information." "\n"
)


def _vec(value) -> str:
    if isinstance(value, tuple):
        return "[" + ", ".join(f"{v:.2f}" for v in value) + "]"
    return f"{value:.2f}"


def sample_indices(length: int, k_points: int) -> list[int]:
    """``round(i * (L-1) / (k-1))`` for ``i = 0..k-1``, halves rounded up,
    deduplicated. Indices are 0-based."""
    if k_points < 2:
        raise ValueError("k_points must be >= 2")
    denom = 2 * (k_points - 1)
    seen = []
    for i in range(k_points):
        idx = (2 * i * (length - 1) + (k_points - 1)) // denom
        if not seen or seen[-1] != idx:
            seen.append(idx)
    return seen


def format_process(log) -> str:
    if not log.checkpoints:
        raise ValueError("training log has no checkpoints")
    return PROCESS_HEADER + "".join(checkpoint_line(cp) for cp in log.checkpoints)


def checkpoint_line(cp) -> str:
    line = (
        f"When step is {cp.env_step}, reward is {cp.mean_return:.2f} (+-{cp.std_return:.2f}), "
        f"episode length is {cp.mean_length:.2f} (+-{cp.std_length:.2f}), "
        f"success rate is {cp.success_rate:.2f}"
    )
    for name, value in cp.sub_reward_means.items():
        line += f", {name} is {value:.2f}"
    return line + "\n"


def format_steps(traj: Trajectory, program: RewardProgram, k_points: int = DEFAULT_K_POINTS) -> str:
    compiled = compile_program(program)
    lines = []
    for idx in sample_indices(len(traj), k_points):
        step = traj.steps[idx]
        out = compiled(step.obs, step.action)
        parts = [f"When step is {idx + 1}", f"reward is {out.total:.2f}"]
        parts += [f"{name} is {value:.2f}" for name, value in out.components.items()]
        parts += [f"{name} is {_vec(value)}" for name, value in step.obs.items()]
        lines.append(", ".join(parts) + "\n")
    return "".join(lines)


def format_trajectory(
    batch: TrajectoryBatch, program: RewardProgram, gamma: float, k_points: int = DEFAULT_K_POINTS
) -> str:
    """Step-sampled detail of the highest- and lowest-return trajectories.

    A single-trajectory batch is reported as both.
    """
    trajs = list(batch)
    if not trajs:
        raise ValueError("cannot format an empty batch")
    returns = [discounted_return(trajectory_rewards(t, program), gamma) for t in trajs]
    hi = max(range(len(trajs)), key=lambda i: returns[i])
    lo = min(range(len(trajs)), key=lambda i: returns[i])
    return (
        TRAJECTORY_HEADER
        + f"trajectories with the highest return {returns[hi]!r} is:\n"
        + format_steps(trajs[hi], program, k_points)
        + f"trajectories with the lowest return {returns[lo]!r} is:\n"
        + format_steps(trajs[lo], program, k_points)
    )


def format_process_and_trajectory(log, program, gamma, k_points: int = DEFAULT_K_POINTS) -> str:
    return format_process(log) + format_trajectory(log.final_batch, program, gamma, k_points)


def exemplar_header(ret: float, length: int, avg: float) -> str:
    return f"with a return of {ret!r}, a length of {length}, a average reward per step of {avg!r}:\n"


def _exemplar_header(traj: Trajectory, program: RewardProgram, gamma: float) -> str:
    rewards = trajectory_rewards(traj, program)
    ret = discounted_return(rewards, gamma)
    return exemplar_header(ret, len(rewards), ret / len(rewards))


def select_exemplars(store, program: RewardProgram, gamma: float) -> tuple[Trajectory, Trajectory]:
    """The lowest-scoring success and the highest-scoring failure."""
    successes, failures = partition(store)
    if not successes or not failures:
        raise ValueError("exemplars need both successful and failed trajectories")
    s_scores = [score(t, program, gamma) for t in successes]
    f_scores = [score(t, program, gamma) for t in failures]
    worst = min(range(len(successes)), key=lambda i: s_scores[i])
    best = max(range(len(failures)), key=lambda i: f_scores[i])
    return successes[worst], failures[best]


def format_preference(
    result: TPEResult,
    success_exemplar: Trajectory,
    fail_exemplar: Trajectory,
    program: RewardProgram,
    gamma: float,
    k_points: int = DEFAULT_K_POINTS,
) -> str:
    accuracy = result.accuracy if result.accuracy is not None else 0.0
    return (
        PREFERENCE_BELIEF
        + f"Currently, {accuracy * 100:.1f}% of successful trajectories have a higher "
        "average per-step reward than failed trajectories.\n"
        + "For example, this is a trajectory where the agent successfully solved the task, "
        + _exemplar_header(success_exemplar, program, gamma)
        + format_steps(success_exemplar, program, k_points)
        + "However, the following is a trajectory that the agent failed to solve the task, "
        + _exemplar_header(fail_exemplar, program, gamma)
        + format_steps(fail_exemplar, program, k_points)
    )


def wrap_introspection(feedback_body: str) -> str:
    return INTROSPECTION_PROLOGUE + feedback_body.rstrip("\n") + "\n" + INTROSPECTION_INSTRUCTIONS
