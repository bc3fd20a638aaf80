"""Evaluation of reward programs.

Programs are compiled once into nested closures and cached on the program
object. Arithmetic semantics:

* ``/`` by zero, ``sqrt`` of a negative and any non-finite intermediate
  raise :class:`RewardRuntimeError`;
* comparisons yield ``1.0`` or ``0.0``; ``==`` is exact float equality;
* ``if(c, a, b)`` evaluates only the branch selected by ``c != 0``;
* ``min``/``max`` keep the first of equal arguments;
* ``norm``/``dist`` accumulate squared components left to right, then
  take ``math.sqrt``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable

from ..errors import ParseError, RewardRuntimeError, TypeCheckError
from .ast import BinOp, Call, Compare, Index, Neg, Num, Ref, RewardProgram
from .parser import parse
from .typecheck import typecheck

__all__ = ["RewardOutput", "Verdict", "CheckReport", "evaluate", "compile_program", "dynamic_check", "check_source"]

DEFAULT_PROBES = 64


@dataclass(frozen=True)
class RewardOutput:
    total: float
    components: dict  # sub name -> value, in binding order


class Verdict(str, enum.Enum):
    OK = "Ok"
    PARSE_ERROR = "ParseError"
    TYPE_ERROR = "TypeError"
    RUNTIME_ERROR = "RuntimeError"


@dataclass(frozen=True)
class CheckReport:
    verdict: Verdict
    message: str = ""
    failing_probe: tuple | None = None

    def __post_init__(self):
        if self.verdict is not Verdict.OK and not self.message:
            raise ValueError("a failing check needs a message")

    @property
    def ok(self) -> bool:
        return self.verdict is Verdict.OK


def _finite(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise RewardRuntimeError(f"non-finite value from {what}")
    return x


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise RewardRuntimeError("division by zero")
    return _finite(a / b, "division")


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise RewardRuntimeError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _exp(x: float) -> float:
    try:
        return _finite(math.exp(x), "exp")
    except OverflowError:
        raise RewardRuntimeError("non-finite value from exp (overflow)") from None


def _clip(x: float, lo: float, hi: float) -> float:
    if lo > hi:
        raise RewardRuntimeError(f"clip bounds reversed: lo={lo!r} > hi={hi!r}")
    return lo if x < lo else hi if x > hi else x


def _sumsq(values) -> float:
    acc = 0.0
    for v in values:
        acc += v * v
    return acc


def _norm(v) -> float:
    return _finite(math.sqrt(_finite(_sumsq(v), "norm")), "norm")


def _dist(u, v) -> float:
    return _finite(math.sqrt(_finite(_sumsq([a - b for a, b in zip(u, v)]), "dist")), "dist")


_ARITH = {
    "+": lambda a, b: _finite(a + b, "addition"),
    "-": lambda a, b: _finite(a - b, "subtraction"),
    "*": lambda a, b: _finite(a * b, "multiplication"),
    "/": _div,
}

_CMP = {
    "<": lambda a, b: 1.0 if a < b else 0.0,
    "<=": lambda a, b: 1.0 if a <= b else 0.0,
    ">": lambda a, b: 1.0 if a > b else 0.0,
    ">=": lambda a, b: 1.0 if a >= b else 0.0,
    "==": lambda a, b: 1.0 if a == b else 0.0,
}

_UNARY = {"abs": abs, "exp": _exp, "sqrt": _sqrt, "tanh": math.tanh}


def _min(values):
    best = values[0]
    for v in values[1:]:
        if v < best:
            best = v
    return best


def _max(values):
    best = values[0]
    for v in values[1:]:
        if v > best:
            best = v
    return best


Compiled = Callable[[dict, object, dict], float]


def _vector_getter(name: str):
    if name == "action":
        return lambda obs, action, subs: action
    return lambda obs, action, subs: obs[name]


def _compile(node, sub_names: frozenset) -> Compiled:
    if isinstance(node, Num):
        value = float(node.value)
        return lambda obs, action, subs: value
    if isinstance(node, Ref):
        name = node.name
        if name in sub_names:
            return lambda obs, action, subs: subs[name]
        if name == "action":
            return lambda obs, action, subs: float(action)
        return lambda obs, action, subs: float(obs[name])
    if isinstance(node, Index):
        name, i = node.name, node.index
        if name == "action":
            return lambda obs, action, subs: float(action[i])
        return lambda obs, action, subs: float(obs[name][i])
    if isinstance(node, Neg):
        inner = _compile(node.operand, sub_names)
        return lambda obs, action, subs: -inner(obs, action, subs)
    if isinstance(node, BinOp):
        fn = _ARITH[node.op]
        left, right = _compile(node.left, sub_names), _compile(node.right, sub_names)
        return lambda obs, action, subs: fn(left(obs, action, subs), right(obs, action, subs))
    if isinstance(node, Compare):
        fn = _CMP[node.op]
        left, right = _compile(node.left, sub_names), _compile(node.right, sub_names)
        return lambda obs, action, subs: fn(left(obs, action, subs), right(obs, action, subs))
    if isinstance(node, Call):
        f = node.func
        if f == "norm":
            get = _vector_getter(node.args[0].name)
            return lambda obs, action, subs: _norm(get(obs, action, subs))
        if f == "dist":
            gu = _vector_getter(node.args[0].name)
            gv = _vector_getter(node.args[1].name)
            return lambda obs, action, subs: _dist(gu(obs, action, subs), gv(obs, action, subs))
        args = [_compile(a, sub_names) for a in node.args]
        if f == "if":
            cond, then, other = args
            return lambda obs, action, subs: (
                then(obs, action, subs) if cond(obs, action, subs) != 0.0 else other(obs, action, subs)
            )
        if f == "clip":
            x, lo, hi = args
            return lambda obs, action, subs: _clip(x(obs, action, subs), lo(obs, action, subs), hi(obs, action, subs))
        if f in ("min", "max"):
            red = _min if f == "min" else _max
            return lambda obs, action, subs: red([a(obs, action, subs) for a in args])
        fn = _UNARY[f]
        (arg,) = args
        return lambda obs, action, subs: fn(arg(obs, action, subs))
    raise TypeError(f"unknown node {node!r}")


class CompiledProgram:
    def __init__(self, program: RewardProgram):
        names: set[str] = set()
        self.subs = []
        for name, expr in program.subs:
            self.subs.append((name, _compile(expr, frozenset(names))))
            names.add(name)
        self.total = _compile(program.total, frozenset(names)) if program.total is not None else None

    def __call__(self, obs: dict, action) -> RewardOutput:
        values: dict[str, float] = {}
        for name, fn in self.subs:
            values[name] = fn(obs, action, values)
        if self.total is None:
            total = 0.0
            for v in values.values():
                total += v
            total = _finite(total, "implicit total")
        else:
            total = self.total(obs, action, values)
        return RewardOutput(total, values)


def compile_program(program: RewardProgram) -> CompiledProgram:
    compiled = program.__dict__.get("_compiled")
    if compiled is None:
        compiled = CompiledProgram(program)
        object.__setattr__(program, "_compiled", compiled)
    return compiled


def evaluate(program: RewardProgram, obs: dict, action) -> RewardOutput:
    """Evaluate ``program`` on one (observation, action) pair."""
    return compile_program(program)(obs, action)


def dynamic_check(
    program: RewardProgram,
    probes: Iterable[tuple[dict, object]],
    n_probes: int = DEFAULT_PROBES,
) -> CheckReport:
    """Run ``program`` on up to ``n_probes`` sampled (obs, action) pairs."""
    for i, (obs, action) in enumerate(probes, start=1):
        if i > n_probes:
            break
        try:
            evaluate(program, obs, action)
        except RewardRuntimeError as exc:
            return CheckReport(Verdict.RUNTIME_ERROR, f"probe {i}: {exc}", (obs, action))
    return CheckReport(Verdict.OK)


def check_source(text: str, schema, action_space, probes, n_probes: int = DEFAULT_PROBES):
    """Parse, typecheck and probe ``text``; returns ``(program | None, CheckReport)``."""
    try:
        program = parse(text, schema, action_space)
    except ParseError as exc:
        return None, CheckReport(Verdict.PARSE_ERROR, str(exc))
    try:
        typecheck(program, schema, action_space)
    except TypeCheckError as exc:
        return None, CheckReport(Verdict.TYPE_ERROR, str(exc))
    report = dynamic_check(program, probes, n_probes)
    return (program if report.ok else None), report
