"""A small, total expression language for reward programs."""

from .ast import (
    BinOp,
    Call,
    Compare,
    Index,
    Neg,
    Num,
    Ref,
    RewardProgram,
    format_expr,
    pretty_print,
)
from .interp import (
    CheckReport,
    RewardOutput,
    Verdict,
    check_source,
    compile_program,
    dynamic_check,
    evaluate,
)
from .parser import extract_program, parse, tokenize
from .typecheck import typecheck

GRAMMAR = """\
program := line+
line    := "sub" NAME "=" expr | "total" "=" expr
expr    := sum [("<" | "<=" | ">" | ">=" | "==") sum]      comparisons give 1.0 or 0.0
sum     := product (("+" | "-") product)*
product := unary (("*" | "/") unary)*
unary   := "-" unary | atom
atom    := NUMBER | NAME | NAME "[" INDEX "]" | "(" expr ")"
         | abs(x) | exp(x) | sqrt(x) | tanh(x) | min(x, y, ...) | max(x, y, ...)
         | clip(x, lo, hi) | if(cond, a, b) | norm(v) | dist(u, v)
"""

__all__ = [
    "BinOp", "Call", "Compare", "Index", "Neg", "Num", "Ref", "RewardProgram",
    "format_expr", "pretty_print", "CheckReport", "RewardOutput", "Verdict",
    "check_source", "compile_program", "dynamic_check", "evaluate",
    "extract_program", "parse", "tokenize", "typecheck", "GRAMMAR",
]
