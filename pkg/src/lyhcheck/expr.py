"""Tiny arithmetic expression language over x, y, t.

Grammar: numeric literals, the names ``x``, ``y``, ``t`` and ``pi``,
``+ - * / ^`` (``**`` also accepted), unary minus, parentheses and the
one-argument functions ``sin``, ``cos``, ``exp``, ``log``.  Parsing goes
through :mod:`ast`; anything outside that whitelist is rejected.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log}
VARIABLES = ("x", "y", "t")
CONSTANTS = {"pi": np.pi}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


def _check(node: ast.AST, names: set[str]) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, names)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left, names)
        _check(node.right, names)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ExpressionError(f"unary operator {type(node.op).__name__} not allowed")
        _check(node.operand, names)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError(f"unknown function in {ast.unparse(node)!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        _check(node.args[0], names)
    elif isinstance(node, ast.Name):
        if node.id not in VARIABLES and node.id not in CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r}")
        names.add(node.id)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"only numeric literals allowed, got {node.value!r}")
    else:
        raise ExpressionError(f"syntax {type(node).__name__} not allowed")


def _eval(node: ast.AST, env: dict):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](_eval(node.args[0], env))
    if isinstance(node, ast.Name):
        return CONSTANTS.get(node.id, env.get(node.id))
    return float(node.value)


@dataclass(frozen=True)
class Expr:
    source: str
    _tree: ast.Expression = field(repr=False, compare=False, hash=False)
    names: frozenset = field(compare=False, hash=False)

    @classmethod
    def parse(cls, source) -> "Expr":
        if isinstance(source, Expr):
            return source
        text = str(source).strip()
        if not text:
            raise ExpressionError("empty expression")
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        names: set[str] = set()
        _check(tree, names)
        return cls(text, tree, frozenset(names))

    @property
    def depends_on_t(self) -> bool:
        return "t" in self.names

    @property
    def is_constant(self) -> bool:
        return not (self.names & set(VARIABLES))

    def normalized(self) -> str:
        return ast.unparse(self._tree)

    def __call__(self, x, y=None, t: float = 0.0) -> np.ndarray:
        if y is None and "y" in self.names:
            raise ExpressionError(f"{self.source!r} uses y on a one-dimensional torus")
        env = {"x": x, "y": y if y is not None else 0.0, "t": t}
        with np.errstate(all="ignore"):
            out = _eval(self._tree.body, env)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(x)).copy()

    def on_grid(self, grid, t: float = 0.0) -> np.ndarray:
        coords = grid.coords()
        out = self(coords[0], coords[1] if grid.dim == 2 else None, t)
        if not np.all(np.isfinite(out)):
            raise ExpressionError(f"{self.source!r} is not finite on the grid at t={t}")
        return out
