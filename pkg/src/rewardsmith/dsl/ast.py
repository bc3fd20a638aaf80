"""AST node types for reward programs and the canonical pretty-printer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Ref:
    """A bare name: scalar feature, vector feature, sub-reward or ``action``."""

    name: str


@dataclass(frozen=True)
class Index:
    """``name[i]``: one component of a vector feature or of ``action``."""

    name: str
    index: int


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # < <= > >= ==
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Ref, Index, Neg, BinOp, Compare, Call]

ARITHMETIC_OPS = ("+", "-", "*", "/")
COMPARISON_OPS = ("<", "<=", ">", ">=", "==")

# name -> (min arity, max arity); None means unbounded
FUNCTIONS = {
    "abs": (1, 1),
    "exp": (1, 1),
    "sqrt": (1, 1),
    "tanh": (1, 1),
    "min": (2, None),
    "max": (2, None),
    "clip": (3, 3),
    "if": (3, 3),
    "norm": (1, 1),
    "dist": (2, 2),
}
VECTOR_FUNCTIONS = ("norm", "dist")
KEYWORDS = ("sub", "total")


@dataclass(frozen=True)
class RewardProgram:
    """Named sub-reward bindings plus an optional explicit total.

    Equality is structural: ``source_text`` is carried along for reports but
    ignored when comparing programs.
    """

    subs: tuple[tuple[str, Expr], ...]
    total: Expr | None = None
    source_text: str = field(default="", compare=False)

    @property
    def sub_names(self) -> list[str]:
        return [name for name, _ in self.subs]


_PREC = {Compare: 1, BinOp: 2, Neg: 4}


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return 2 if node.op in "+-" else 3
    return _PREC.get(type(node), 5)


def format_expr(node: Expr) -> str:
    """Render an expression with the minimum parentheses needed to re-parse it
    into the same tree (binary operators are left-associative, comparisons do
    not chain)."""
    if isinstance(node, Num):
        if node.value < 0:
            # negative literals only arise through Neg; keep the tree shape
            raise ValueError("negative literal cannot be printed; use Neg")
        return repr(float(node.value))
    if isinstance(node, Ref):
        return node.name
    if isinstance(node, Index):
        return f"{node.name}[{node.index}]"
    if isinstance(node, Neg):
        inner = format_expr(node.operand)
        if _prec(node.operand) < 4:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(format_expr(a) for a in node.args)})"
    if isinstance(node, (BinOp, Compare)):
        p = _prec(node)
        left = format_expr(node.left)
        right = format_expr(node.right)
        # comparisons are non-associative, so both sides need parens
        if _prec(node.left) < p or (p == 1 and _prec(node.left) == 1):
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"unknown node {node!r}")


def pretty_print(program: RewardProgram) -> str:
    lines = [f"sub {name} = {format_expr(expr)}" for name, expr in program.subs]
    if program.total is not None:
        lines.append(f"total = {format_expr(program.total)}")
    return "\n".join(lines) + "\n"
