"""A small, safe expression language for symbols in configuration files.

Grammar (Python syntax subset)::

    expr   := number | name | expr op expr | -expr | +expr | func(expr, ...)
    op     := + - * / **
    func   := sin cos tan exp log sqrt abs sign tanh arctan step real imag conj
              min max where

Names are the caller-declared variables plus the constants ``pi``, ``e``
and ``i`` (the imaginary unit); complex literals such as ``2j`` work too.
``absxi`` is conventionally bound to the Euclidean norm of the covector.
Comparisons (``<``, ``<=``, ``>``, ``>=``) evaluate to 0/1 and may be
combined with ``where(cond, a, b)``.  Nothing else (attribute access,
subscripts, lambdas, ...) is accepted.
"""
from __future__ import annotations

import ast
import operator
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

__all__ = ["Expression", "ExpressionError", "FUNCTIONS", "CONSTANTS"]


class ExpressionError(ValueError):
    """Raised for expressions outside the grammar or with unknown names."""


FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sign": np.sign,
    "tanh": np.tanh,
    "arctan": np.arctan,
    "step": lambda z: np.asarray(np.real(z) > 0, dtype=float),
    "real": np.real,
    "imag": np.imag,
    "conj": np.conj,
    "min": np.minimum,
    "max": np.maximum,
    "where": lambda c, a, b: np.where(np.real(c) != 0, a, b),
}

CONSTANTS = {"pi": np.pi, "e": np.e, "i": 1j}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_CMPOPS = {ast.Lt: operator.lt, ast.LtE: operator.le, ast.Gt: operator.gt, ast.GtE: operator.ge}


@dataclass(frozen=True)
class Expression:
    """A parsed expression over a fixed set of variable names.

    Examples
    --------
    >>> f = Expression.parse("xi**2 / absxi**2", ["xi", "tau", "absxi"])
    >>> float(f(xi=1.0, tau=1.0, absxi=2 ** 0.5))
    0.5
    """

    source: str
    variables: tuple[str, ...]
    tree: ast.Expression

    @classmethod
    def parse(cls, source: str | float | int | complex, variables: Sequence[str]) -> "Expression":
        text = str(source)
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        allowed = set(variables) | set(CONSTANTS)
        for node in ast.walk(tree):
            _validate(node, allowed, text)
        return cls(text, tuple(variables), tree)

    @property
    def names(self) -> set[str]:
        return {n.id for n in ast.walk(self.tree) if isinstance(n, ast.Name) and n.id not in FUNCTIONS}

    def depends_on(self, *names: str) -> bool:
        return bool(self.names & set(names))

    def __call__(self, **values):
        return _eval(self.tree.body, values)

    def evaluate(self, values: Mapping[str, object]):
        return _eval(self.tree.body, values)


def _validate(node: ast.AST, allowed: set[str], text: str) -> None:
    ok = (
        ast.Expression,
        ast.BinOp,
        ast.UnaryOp,
        ast.Call,
        ast.Name,
        ast.Constant,
        ast.Load,
        ast.Compare,
        *_BINOPS,
        *_UNOPS,
        *_CMPOPS,
    )
    if not isinstance(node, ok):
        raise ExpressionError(f"{type(node).__name__} is not allowed in {text!r}")
    if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float, complex)):
        raise ExpressionError(f"only numeric literals are allowed in {text!r}")
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError(f"unknown function in {text!r}")
        if node.keywords:
            raise ExpressionError(f"keyword arguments are not allowed in {text!r}")
    if isinstance(node, ast.Name) and node.id not in allowed and node.id not in FUNCTIONS:
        raise ExpressionError(f"unknown name {node.id!r} in {text!r}; allowed: {sorted(allowed)}")


def _eval(node: ast.AST, env: Mapping[str, object]):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        return CONSTANTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Compare):
        left = _eval(node.left, env)
        result = True
        for op, right_node in zip(node.ops, node.comparators):
            right = _eval(right_node, env)
            result = np.logical_and(result, _CMPOPS[type(op)](np.real(left), np.real(right)))
            left = right
        return np.asarray(result, dtype=float)
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](*(_eval(a, env) for a in node.args))
    raise ExpressionError(f"unsupported node {type(node).__name__}")  # pragma: no cover
