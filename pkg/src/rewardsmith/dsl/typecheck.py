"""Static checks: name resolution, arity, and scalar/vector placement."""

from __future__ import annotations

from ..errors import TypeCheckError
from ..trajectory import Box, FeatureSchema
from .ast import FUNCTIONS, VECTOR_FUNCTIONS, BinOp, Call, Compare, Index, Neg, Num, Ref, RewardProgram


def _vector_dims(schema: FeatureSchema, action_space) -> dict[str, int]:
    dims = {f.name: f.dim for f in schema.entries if f.is_vector}
    if isinstance(action_space, Box):
        dims["action"] = action_space.dim
    return dims


def _scalars(schema: FeatureSchema, action_space) -> set[str]:
    names = {f.name for f in schema.entries if not f.is_vector}
    if action_space is not None and not isinstance(action_space, Box):
        names.add("action")
    return names


class _Checker:
    def __init__(self, schema, action_space):
        self.vectors = _vector_dims(schema, action_space)
        self.scalars = _scalars(schema, action_space)
        self.subs: set[str] = set()

    def scalar(self, node, where: str):
        """Check ``node`` in a scalar position."""
        if isinstance(node, Num):
            return
        if isinstance(node, Ref):
            if node.name in self.scalars or node.name in self.subs:
                return
            if node.name in self.vectors:
                raise TypeCheckError(
                    f"vector {node.name} used in scalar position ({where}); "
                    "vectors may only appear inside norm() or dist()"
                )
            raise TypeCheckError(f"undefined feature {node.name}")
        if isinstance(node, Index):
            if node.name not in self.vectors:
                if node.name in self.scalars or node.name in self.subs:
                    raise TypeCheckError(f"cannot index scalar {node.name}")
                raise TypeCheckError(f"undefined feature {node.name}")
            dim = self.vectors[node.name]
            if node.index >= dim:
                raise TypeCheckError(
                    f"index {node.index} out of range for {node.name} of dimension {dim}"
                )
            return
        if isinstance(node, Neg):
            self.scalar(node.operand, where)
            return
        if isinstance(node, (BinOp, Compare)):
            self.scalar(node.left, where)
            self.scalar(node.right, where)
            return
        if isinstance(node, Call):
            self.call(node)
            return
        raise TypeCheckError(f"unknown expression node {type(node).__name__}")

    def vector(self, node, func: str) -> int:
        if isinstance(node, Ref) and node.name in self.vectors:
            return self.vectors[node.name]
        if isinstance(node, Ref) and node.name not in self.scalars | self.subs:
            raise TypeCheckError(f"undefined feature {node.name}")
        raise TypeCheckError(f"{func}() expects a vector feature argument")

    def call(self, node: Call):
        if node.func not in FUNCTIONS:
            raise TypeCheckError(f"undefined function {node.func}")
        lo, hi = FUNCTIONS[node.func]
        n = len(node.args)
        if n < lo or (hi is not None and n > hi):
            want = str(lo) if lo == hi else f"at least {lo}"
            raise TypeCheckError(f"{node.func}() takes {want} arguments, got {n}")
        if node.func in VECTOR_FUNCTIONS:
            dims = [self.vector(a, node.func) for a in node.args]
            if node.func == "dist" and dims[0] != dims[1]:
                raise TypeCheckError(
                    f"dist() dimension mismatch: {dims[0]} vs {dims[1]}"
                )
            return
        for arg in node.args:
            self.scalar(arg, f"argument of {node.func}()")


def typecheck(program: RewardProgram, schema: FeatureSchema, action_space=None) -> None:
    """Raise :class:`TypeCheckError` unless every name resolves and every
    vector sits inside ``norm``/``dist``. Returns ``None`` when the program is
    well typed."""
    checker = _Checker(schema, action_space)
    reserved = set(schema.names) | {"action"}
    for name, expr in program.subs:
        if name in reserved:
            raise TypeCheckError(f"sub-reward {name} shadows an observation feature")
        checker.scalar(expr, f"sub {name}")
        checker.subs.add(name)
    if program.total is not None:
        checker.scalar(program.total, "total")
