"""Command-line entry point.

Exit codes: 0 success, 2 generation exhausted, 3 configuration error,
4 transport error (network, HTTP, replay mismatch).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

from .errors import ConfigError, GenerationExhausted, MalformedResponse, TransportError
from .orchestrator import DEFAULT_ITERATIONS, DEFAULT_MAX_TRY_NUM, RunConfig, run_card
from .trainers import TrainConfig, default_algo
from .envs import make_env

EXIT_OK = 0
EXIT_EXHAUSTED = 2
EXIT_CONFIG = 3
EXIT_TRANSPORT = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rewardsmith", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="generate, train and refine a reward program")
    run.add_argument("--env", required=True, help="grid-goal or point-push")
    run.add_argument("--task", default=None, help="task instruction (defaults to the environment's)")
    run.add_argument("--iters", type=int, default=DEFAULT_ITERATIONS)
    run.add_argument("--delta", type=float, default=0.8)
    run.add_argument("--gamma", type=float, default=0.99)
    run.add_argument("--max-try-num", type=int, default=DEFAULT_MAX_TRY_NUM)
    run.add_argument("--backend", choices=("live", "replay"), default="live")
    run.add_argument("--replay-file", default=None)
    run.add_argument("--model", default="gpt-4o-mini")
    run.add_argument("--base-url", default="https://api.openai.com/v1")
    run.add_argument("--temperature", type=float, default=0.7)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--train-steps", type=int, default=None, help="environment steps per training")
    run.add_argument("--final-episodes", type=int, default=100)
    run.add_argument("--out", required=True, help="run directory")

    report = sub.add_parser("report", help="summarise a finished run")
    report.add_argument("dir")

    verify = sub.add_parser("verify-replay", help="re-run a replay run and compare report.json")
    verify.add_argument("dir")
    return parser


def _run_config(args) -> RunConfig:
    env = make_env(args.env)
    train = None
    if args.train_steps is not None or args.final_episodes != 100:
        kwargs = {"algo": default_algo(env), "final_eval_episodes": args.final_episodes}
        if args.train_steps is not None:
            kwargs["total_env_steps"] = args.train_steps
        train = TrainConfig(**kwargs)
    return RunConfig(
        env_name=args.env,
        task_instruction=args.task,
        iterations=args.iters,
        delta=args.delta,
        gamma=args.gamma,
        max_try_num=args.max_try_num,
        temperature=args.temperature,
        backend=args.backend,
        replay_file=args.replay_file,
        model=args.model,
        base_url=args.base_url,
        seed=args.seed,
        output_dir=args.out,
        train=train,
    )


def cmd_report(directory: str) -> int:
    path = Path(directory) / "report.json"
    if not path.exists():
        raise ConfigError(f"no report.json in {directory}")
    data = json.loads(path.read_text())
    tokens = data["tokens"]
    print(f"status: {data['status']}")
    print(f"tokens: prompt={tokens['prompt']} completion={tokens['completion']} total={tokens['total']}")
    print(f"execution error rate: {data['execution_error_rate']:.4f}")
    for it in data["iterations"]:
        tpe = it["tpe"]
        verdict = "-" if tpe is None else f"{tpe['verdict']} (accuracy {tpe['accuracy']})"
        rate = it["final_success_rate"]
        rate_text = "-" if rate is None else f"{rate:.2f}"
        print(
            f"iteration {it['index']}: attempts={it['attempts']} tpe={verdict} "
            f"trained={it['trained']} feedback={it['feedback_kind']} success_rate={rate_text}"
        )
    print(f"final success rate: {data['final_success_rate']}")
    if not data["final_program_trained"]:
        print("note: the last accepted program was never trained")
    return EXIT_OK


def cmd_verify_replay(directory: str) -> int:
    run_dir = Path(directory)
    config = RunConfig.from_dict(json.loads((run_dir / "config.json").read_text()))
    if config.backend != "replay":
        raise ConfigError("verify-replay needs a run recorded with the replay backend")
    transcript = run_dir / "transcript.json"
    replay_file = str(transcript) if transcript.exists() else config.replay_file
    expected = (run_dir / "report.json").read_bytes()
    with tempfile.TemporaryDirectory() as tmp:
        rerun = RunConfig.from_dict({**config.to_dict(), "output_dir": tmp, "replay_file": replay_file})
        try:
            run_card(rerun)
        except GenerationExhausted:
            pass
        actual = (Path(tmp) / "report.json").read_bytes()
    if actual == expected:
        print("report.json identical")
        return EXIT_OK
    print("report.json differs from the recorded run")
    return 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            report = run_card(_run_config(args))
            print(json.dumps(report.to_dict()["tokens"]))
            print(f"final success rate: {report.final_success_rate}")
            return EXIT_OK
        if args.command == "report":
            return cmd_report(args.dir)
        return cmd_verify_replay(args.dir)
    except GenerationExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TransportError, MalformedResponse) as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
