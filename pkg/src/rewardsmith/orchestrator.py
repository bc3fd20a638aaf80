"""The generate / train / introspect / improve loop and its run directory.

Record ``k`` of a run owns reward program ``R_k``:

1. ``R_k`` is generated (with retries) from the current dialogue;
2. for ``k >= 1`` it is first tested against every stored trajectory and
   only trained if the preference test does not fail;
3. the resulting feedback is appended to the dialogue as a user message.

A run with ``iterations = N`` therefore has ``N + 1`` records and at most
``N + 1`` trainings. Run directory layout::

    config.json  session.json  ledger.json  report.json  transcript.json
    iterations/{k}/record.json  iterations/{k}/trainlog.json  iterations/{k}/batch.json
"""

from __future__ import annotations

import dataclasses
import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from .dsl import check_source, extract_program
from .dsl.interp import CheckReport, Verdict
from .envs import make_env, probe_sampler
from .errors import ConfigError, ExtractError, GenerationExhausted, RewardRuntimeError
from .feedback import (
    DEFAULT_K_POINTS,
    format_preference,
    format_process_and_trajectory,
    select_exemplars,
    wrap_introspection,
)
from .llm import (
    DEFAULT_TEMPERATURE,
    ChatMessage,
    ChatSession,
    LiveBackend,
    ReplayBackend,
    TokenLedger,
    ledger_total,
    send,
)
from .prompts import build_instruction_prompt, build_system_prompt
from .tpe import DEFAULT_DELTA, Decision, TPEConfig, TPEResult, gate, preference_accuracy, trajectory_rewards
from .trainers import TrainConfig, default_algo, train
from .trajectory import Trajectory, TrajectoryBatch, batch_to_dict

log = logging.getLogger(__name__)

PROCESS_TRAJECTORY = "Process+Trajectory"
PREFERENCE = "Preference"
DEFAULT_MAX_TRY_NUM = 10
DEFAULT_ITERATIONS = 2
EXCERPT_CHARS = 400


@dataclass(frozen=True)
class RunConfig:
    env_name: str
    task_instruction: str | None = None
    iterations: int = DEFAULT_ITERATIONS
    delta: float = DEFAULT_DELTA
    gamma: float = 0.99
    max_try_num: int = DEFAULT_MAX_TRY_NUM
    temperature: float = DEFAULT_TEMPERATURE
    backend: str = "replay"
    replay_file: str | None = None
    model: str = "gpt-4o-mini"
    base_url: str = "https://api.openai.com/v1"
    seed: int = 0
    output_dir: str | None = None
    train: TrainConfig | None = None
    n_probes: int = 64
    k_points: int = DEFAULT_K_POINTS

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.max_try_num < 1:
            raise ConfigError("max_try_num must be >= 1")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError("delta must lie in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if self.backend not in ("live", "replay"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "replay" and not self.replay_file:
            raise ConfigError("the replay backend needs a replay file")
        if self.k_points < 2:
            raise ConfigError("k_points must be >= 2")

    def train_config(self, env) -> TrainConfig:
        """The trainer configuration, with gamma and seed taken from this run."""
        base = self.train or TrainConfig(algo=default_algo(env))
        return dataclasses.replace(base, gamma=self.gamma, seed=self.seed)

    def to_dict(self, *, include_paths: bool = True) -> dict:
        data = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        data["train"] = self.train.to_dict() if self.train is not None else None
        if not include_paths:
            data.pop("output_dir")
            data.pop("replay_file")
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if data.get("train") is not None:
            data["train"] = TrainConfig(**data["train"])
        return cls(**data)


@dataclass(frozen=True)
class Attempt:
    raw_reply_excerpt: str
    report: CheckReport
    usage: tuple[int, int] = (0, 0)

    def to_dict(self) -> dict:
        return {
            "raw_reply_excerpt": self.raw_reply_excerpt,
            "verdict": self.report.verdict.value,
            "message": self.report.message,
            "prompt_tokens": self.usage[0],
            "completion_tokens": self.usage[1],
        }


@dataclass
class IterationRecord:
    index: int
    attempts: list[Attempt] = field(default_factory=list)
    accepted_program_text: str | None = None
    tpe: TPEResult | None = None
    trained: bool = False
    feedback_kind: str | None = None
    feedback_text: str | None = None
    checkpoints: list | None = None
    training_error: str | None = None
    final_success_rate: float | None = None

    @property
    def tokens_this_iteration(self) -> tuple[int, int]:
        return (sum(a.usage[0] for a in self.attempts), sum(a.usage[1] for a in self.attempts))

    def to_dict(self) -> dict:
        prompt, completion = self.tokens_this_iteration
        return {
            "index": self.index,
            "attempts": [a.to_dict() for a in self.attempts],
            "accepted_program_text": self.accepted_program_text,
            "tpe": self.tpe.to_dict() if self.tpe is not None else None,
            "trained": self.trained,
            "training_error": self.training_error,
            "final_success_rate": self.final_success_rate,
            "feedback_kind": self.feedback_kind,
            "feedback_text": self.feedback_text,
            "checkpoints": [c.to_dict() for c in self.checkpoints] if self.checkpoints is not None else None,
            "tokens_this_iteration": {"prompt": prompt, "completion": completion},
        }


@dataclass
class RunReport:
    config: RunConfig
    records: list[IterationRecord]
    status: str
    final_program_text: str | None
    final_trained_program_text: str | None
    final_success_rate: float | None
    final_program_trained: bool
    token_totals: tuple[int, int, int]
    execution_error_rate: float

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "config": self.config.to_dict(include_paths=False),
            "iterations": [
                {
                    "index": r.index,
                    "attempts": len(r.attempts),
                    "failed_attempts": sum(not a.report.ok for a in r.attempts),
                    "tpe": r.tpe.to_dict() if r.tpe is not None else None,
                    "trained": r.trained,
                    "training_error": r.training_error,
                    "feedback_kind": r.feedback_kind,
                    "final_success_rate": r.final_success_rate,
                    "tokens": dict(zip(("prompt", "completion"), r.tokens_this_iteration)),
                }
                for r in self.records
            ],
            "final_program_text": self.final_program_text,
            "final_trained_program_text": self.final_trained_program_text,
            "final_success_rate": self.final_success_rate,
            "final_program_trained": self.final_program_trained,
            "tokens": dict(zip(("prompt", "completion", "total"), self.token_totals)),
            "execution_error_rate": self.execution_error_rate,
        }


def compute_metrics(records) -> tuple[float, tuple[int, int, int]]:
    """Execution error rate (failed attempts / all attempts) and token totals."""
    attempts = [a for r in records for a in r.attempts]
    failed = sum(not a.report.ok for a in attempts)
    rate = failed / len(attempts) if attempts else 0.0
    prompt = sum(a.usage[0] for a in attempts)
    completion = sum(a.usage[1] for a in attempts)
    return rate, (prompt, completion, prompt + completion)


def _store_check(store: TrajectoryBatch | None):
    """A candidate must also score every stored trajectory without error."""

    def check(program) -> CheckReport:
        if store is None:
            return CheckReport(Verdict.OK)
        for traj in store:
            try:
                trajectory_rewards(traj, program)
            except RewardRuntimeError as exc:
                return CheckReport(Verdict.RUNTIME_ERROR, f"stored trajectory {traj.id}: {exc}")
        return CheckReport(Verdict.OK)

    return check


def generate_with_retries(
    session: ChatSession,
    backend,
    env,
    config: RunConfig,
    ledger: TokenLedger,
    store: TrajectoryBatch | None = None,
):
    """Query until a reply yields a program that parses, typechecks and
    survives the dynamic probes; at most ``config.max_try_num`` queries.

    Rejected replies are discarded (never appended to the session). Returns
    ``(program, attempts)``; raises :class:`GenerationExhausted` otherwise.
    """
    spec = env.spec
    attempts: list[Attempt] = []
    extra_check = _store_check(store)
    for _ in range(config.max_try_num):
        reply, usage = send(session, backend, config.temperature)
        ledger.record(usage)
        excerpt = reply.content[:EXCERPT_CHARS]
        program = None
        try:
            text = extract_program(reply.content)
        except ExtractError as exc:
            report = CheckReport(Verdict.PARSE_ERROR, str(exc))
        else:
            probes = probe_sampler(env, config.seed)
            program, report = check_source(text, spec.schema, spec.action_space, probes, config.n_probes)
            if report.ok:
                report = extra_check(program)
        attempts.append(Attempt(excerpt, report, (usage.prompt_tokens, usage.completion_tokens)))
        if report.ok:
            session.append(reply)
            return program, attempts
        log.info("candidate rejected (%s): %s", report.verdict.value, report.message)
    raise GenerationExhausted(f"no valid reward program after {config.max_try_num} attempts", attempts)


def make_backend(config: RunConfig):
    if config.backend == "replay":
        return ReplayBackend.from_file(config.replay_file)
    return LiveBackend(config.base_url, config.model)


def _renumber(batch: TrajectoryBatch, start: int) -> TrajectoryBatch:
    trajs = tuple(Trajectory(t.steps, t.success, start + i) for i, t in enumerate(batch))
    return TrajectoryBatch(batch.schema, batch.gamma, trajs)


def _dump(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n")


def _training_error_note(message: str) -> str:
    return (
        "Training was aborted because the reward program failed while the agent was exploring: "
        f"{message}.\n"
        "Make sure every expression stays finite for all reachable observations "
        "(no division by zero, no square root of a negative value, no overflowing exp).\n"
    )


def run_card(config: RunConfig, backend=None) -> RunReport:
    """Execute a full run; writes the run directory when ``output_dir`` is set."""
    env = make_env(config.env_name)
    instruction = config.task_instruction or env.spec.task_instruction
    train_config = config.train_config(env)
    backend = backend if backend is not None else make_backend(config)
    out = Path(config.output_dir) if config.output_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _dump(out / "config.json", config.to_dict())
        if config.backend == "replay" and config.replay_file:
            src = Path(config.replay_file).resolve()
            if src != (out / "transcript.json").resolve():
                shutil.copyfile(src, out / "transcript.json")

    session = ChatSession(
        [
            ChatMessage("system", build_system_prompt(env.spec, instruction)),
            ChatMessage("user", build_instruction_prompt(instruction)),
        ]
    )
    ledger = TokenLedger()
    tpe_config = TPEConfig(config.delta, config.gamma)
    store: TrajectoryBatch | None = None
    records: list[IterationRecord] = []
    last_trained_text = None
    last_success_rate = None
    status = "completed"

    def persist():
        if out is None:
            return
        _dump(out / "session.json", session.to_list())
        _dump(out / "ledger.json", ledger.to_list())

    try:
        for k in range(config.iterations + 1):
            record = IterationRecord(k)
            records.append(record)
            try:
                program, attempts = generate_with_retries(session, backend, env, config, ledger, store)
            except GenerationExhausted as exc:
                record.attempts = exc.attempts
                raise
            record.attempts = attempts
            record.accepted_program_text = program.source_text
            decision = Decision.TRAIN
            if k > 0:
                record.tpe = preference_accuracy(store, program, tpe_config)
                decision = gate(record.tpe)
            trainlog = None
            if decision is Decision.TRAIN:
                try:
                    _, trainlog = train(env, program, train_config)
                except RewardRuntimeError as exc:
                    record.training_error = str(exc)
                    record.feedback_kind = PREFERENCE
                    record.feedback_text = _training_error_note(str(exc))
                else:
                    record.trained = True
                    record.checkpoints = trainlog.checkpoints
                    record.final_success_rate = trainlog.final_success_rate
                    batch = _renumber(trainlog.final_batch, len(store) if store is not None else 0)
                    store = batch if store is None else store.extend(batch)
                    last_trained_text = program.source_text
                    last_success_rate = trainlog.final_success_rate
                    record.feedback_kind = PROCESS_TRAJECTORY
                    record.feedback_text = format_process_and_trajectory(
                        trainlog, program, config.gamma, config.k_points
                    )
                    if out is not None:
                        _dump(out / "iterations" / str(k) / "trainlog.json", trainlog.to_dict())
                        _dump(out / "iterations" / str(k) / "batch.json", batch_to_dict(batch))
            else:
                success_ex, fail_ex = select_exemplars(store, program, config.gamma)
                record.feedback_kind = PREFERENCE
                record.feedback_text = format_preference(
                    record.tpe, success_ex, fail_ex, program, config.gamma, config.k_points
                )
            session.append(ChatMessage("user", wrap_introspection(record.feedback_text)))
            if out is not None:
                _dump(out / "iterations" / str(k) / "record.json", record.to_dict())
            persist()
    except GenerationExhausted:
        status = "generation_exhausted"
        report = _report(config, records, status, last_trained_text, last_success_rate)
        _write_report(out, report, records)
        persist()
        raise
    report = _report(config, records, status, last_trained_text, last_success_rate)
    _write_report(out, report, records)
    return report


def _report(config, records, status, last_trained_text, last_success_rate) -> RunReport:
    rate, totals = compute_metrics(records)
    accepted = [r for r in records if r.accepted_program_text is not None]
    final_text = accepted[-1].accepted_program_text if accepted else None
    return RunReport(
        config=config,
        records=records,
        status=status,
        final_program_text=final_text,
        final_trained_program_text=last_trained_text,
        final_success_rate=last_success_rate,
        final_program_trained=bool(accepted) and accepted[-1].trained,
        token_totals=totals,
        execution_error_rate=rate,
    )


def _write_report(out: Path | None, report: RunReport, records) -> None:
    if out is None:
        return
    for r in records:
        path = out / "iterations" / str(r.index) / "record.json"
        if not path.exists():
            _dump(path, r.to_dict())
    _dump(out / "report.json", report.to_dict())
