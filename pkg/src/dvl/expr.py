"""Small row-expression language shared by ``select`` and expression encodings.

Expressions use Python syntax restricted to arithmetic, comparisons, boolean
operators, conditionals, f-strings and a handful of scalar functions. Nulls
propagate through arithmetic and comparisons.
"""

from __future__ import annotations

import ast
import math
from collections.abc import Callable, Mapping
from typing import Any

from .errors import ExprError
from .relcore import AttributeType

INT, REAL, TEXT, BOOL = (AttributeType.INTEGER, AttributeType.REAL,
                         AttributeType.TEXT, AttributeType.BOOLEAN)

_BINOPS: dict[type, Callable[[Any, Any], Any]] = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.FloorDiv: lambda a, b: a // b,
    ast.Mod: lambda a, b: a % b,
    ast.Pow: lambda a, b: a ** b,
}
_SQL_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.Mod: "%"}

_CMPOPS: dict[type, Callable[[Any, Any], bool]] = {
    ast.Eq: lambda a, b: a == b,
    ast.NotEq: lambda a, b: a != b,
    ast.Lt: lambda a, b: a < b,
    ast.LtE: lambda a, b: a <= b,
    ast.Gt: lambda a, b: a > b,
    ast.GtE: lambda a, b: a >= b,
}
_SQL_CMPOPS = {ast.Eq: "=", ast.NotEq: "<>", ast.Lt: "<", ast.LtE: "<=", ast.Gt: ">", ast.GtE: ">="}

# named comparison helpers take a column name as a string: gt("chol", 230)
_NAMED_CMP = {"gt": ast.Gt, "lt": ast.Lt, "ge": ast.GtE, "le": ast.LtE, "eq": ast.Eq, "ne": ast.NotEq}

_FUNCS: dict[str, Callable[..., Any]] = {
    "abs": abs,
    "min": min,
    "max": max,
    "round": round,
    "len": len,
    "str": str,
    "int": int,
    "float": float,
    "sqrt": math.sqrt,
    "floor": math.floor,
    "ceil": math.ceil,
}


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


class Expr:
    """A parsed, validated expression. ``names`` lists referenced columns."""

    def __init__(self, source: str):
        if not isinstance(source, str) or not source.strip():
            raise ExprError("empty expression")
        self.source = source
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as e:
            raise ExprError(f"cannot parse {source!r}: {e.msg}") from None
        self._root = tree.body
        names: list[str] = []
        self._check(self._root, names)
        self.names: tuple[str, ...] = tuple(dict.fromkeys(names))

    def __repr__(self) -> str:
        return f"Expr({self.source!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Expr) and other.source == self.source

    def __hash__(self) -> int:
        return hash(self.source)

    # -- validation -----------------------------------------------------------

    def _check(self, node: ast.AST, names: list[str]) -> None:
        if isinstance(node, ast.Name):
            names.append(node.id)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float, str, bool)) and node.value is not None:
                raise ExprError(f"unsupported literal {node.value!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExprError(f"unsupported operator in {self.source!r}")
            self._check(node.left, names)
            self._check(node.right, names)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd, ast.Not)):
                raise ExprError(f"unsupported unary operator in {self.source!r}")
            self._check(node.operand, names)
        elif isinstance(node, ast.BoolOp):
            for v in node.values:
                self._check(v, names)
        elif isinstance(node, ast.Compare):
            for op in node.ops:
                if type(op) not in _CMPOPS:
                    raise ExprError(f"unsupported comparison in {self.source!r}")
            self._check(node.left, names)
            for c in node.comparators:
                self._check(c, names)
        elif isinstance(node, ast.IfExp):
            for part in (node.test, node.body, node.orelse):
                self._check(part, names)
        elif isinstance(node, ast.JoinedStr):
            for v in node.values:
                self._check(v, names)
        elif isinstance(node, ast.FormattedValue):
            if node.format_spec is not None or node.conversion != -1:
                raise ExprError(f"format specs are not supported in {self.source!r}")
            self._check(node.value, names)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.keywords:
                raise ExprError(f"unsupported call in {self.source!r}")
            fn = node.func.id
            if fn in _NAMED_CMP:
                if (len(node.args) != 2 or not isinstance(node.args[0], ast.Constant)
                        or not isinstance(node.args[0].value, str)):
                    raise ExprError(f"{fn}() takes a column name and a value")
                names.append(node.args[0].value)
                self._check(node.args[1], names)
            elif fn in _FUNCS:
                for a in node.args:
                    self._check(a, names)
            else:
                raise ExprError(f"unknown function {fn!r} in {self.source!r}")
        else:
            raise ExprError(f"unsupported syntax {type(node).__name__} in {self.source!r}")

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, row: Mapping[str, Any]) -> Any:
        try:
            return self._eval(self._root, row)
        except ExprError:
            raise
        except KeyError as e:
            raise ExprError(f"unknown column {e.args[0]!r} in {self.source!r}") from None
        except (TypeError, ValueError, ZeroDivisionError, OverflowError) as e:
            raise ExprError(f"cannot evaluate {self.source!r}: {e}") from None

    def _eval(self, node: ast.AST, row: Mapping[str, Any]) -> Any:
        if isinstance(node, ast.Name):
            return row[node.id]
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.BinOp):
            a, b = self._eval(node.left, row), self._eval(node.right, row)
            if a is None or b is None:
                return None
            return _BINOPS[type(node.op)](a, b)
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, row)
            if v is None:
                return None
            if isinstance(node.op, ast.Not):
                return not v
            return -v if isinstance(node.op, ast.USub) else +v
        if isinstance(node, ast.BoolOp):
            vals = [self._eval(v, row) for v in node.values]
            if isinstance(node.op, ast.And):
                if any(v is False for v in vals):
                    return False
                return None if any(v is None for v in vals) else all(vals)
            if any(v is True for v in vals):
                return True
            return None if any(v is None for v in vals) else any(vals)
        if isinstance(node, ast.Compare):
            left = self._eval(node.left, row)
            for op, comp in zip(node.ops, node.comparators):
                right = self._eval(comp, row)
                if left is None or right is None:
                    return None
                if not _CMPOPS[type(op)](left, right):
                    return False
                left = right
            return True
        if isinstance(node, ast.IfExp):
            return self._eval(node.body if self._eval(node.test, row) else node.orelse, row)
        if isinstance(node, ast.JoinedStr):
            parts = []
            for v in node.values:
                if isinstance(v, ast.Constant):
                    parts.append(v.value)
                else:
                    val = self._eval(v.value, row)
                    if val is None:
                        return None
                    parts.append(_fmt(val))
            return "".join(parts)
        if isinstance(node, ast.Call):
            fn = node.func.id
            if fn in _NAMED_CMP:
                left = row[node.args[0].value]
                right = self._eval(node.args[1], row)
                if left is None or right is None:
                    return None
                return _CMPOPS[_NAMED_CMP[fn]](left, right)
            args = [self._eval(a, row) for a in node.args]
            if any(a is None for a in args):
                return None
            if fn == "str":
                return _fmt(args[0])
            return _FUNCS[fn](*args)
        raise ExprError(f"unsupported syntax in {self.source!r}")  # pragma: no cover

    # -- typing -----------------------------------------------------------------

    def infer_type(self, types: Mapping[str, AttributeType]) -> AttributeType:
        """Static result type given column types; raises on type errors."""
        return self._type(self._root, types)

    def _type(self, node: ast.AST, types: Mapping[str, AttributeType]) -> AttributeType:
        if isinstance(node, ast.Name):
            if node.id not in types:
                raise ExprError(f"unknown column {node.id!r} in {self.source!r}")
            return types[node.id]
        if isinstance(node, ast.Constant):
            return AttributeType.of_value(node.value) or TEXT
        if isinstance(node, ast.BinOp):
            a, b = self._type(node.left, types), self._type(node.right, types)
            if isinstance(node.op, ast.Add) and a is TEXT and b is TEXT:
                return TEXT
            if not (a.numeric and b.numeric):
                raise ExprError(f"arithmetic on {a.value} and {b.value} in {self.source!r}")
            if isinstance(node.op, ast.Div):
                return REAL
            return INT if a is INT and b is INT else REAL
        if isinstance(node, ast.UnaryOp):
            t = self._type(node.operand, types)
            if isinstance(node.op, ast.Not):
                return BOOL
            if not t.numeric:
                raise ExprError(f"negation of {t.value} in {self.source!r}")
            return t
        if isinstance(node, ast.BoolOp):
            for v in node.values:
                self._type(v, types)
            return BOOL
        if isinstance(node, ast.Compare):
            ts = [self._type(node.left, types)] + [self._type(c, types) for c in node.comparators]
            for a, b in zip(ts, ts[1:]):
                if a != b and not (a.numeric and b.numeric):
                    raise ExprError(f"cannot compare {a.value} with {b.value} in {self.source!r}")
            return BOOL
        if isinstance(node, ast.IfExp):
            self._type(node.test, types)
            a, b = self._type(node.body, types), self._type(node.orelse, types)
            if a == b:
                return a
            if a.numeric and b.numeric:
                return REAL
            raise ExprError(f"branches disagree ({a.value} vs {b.value}) in {self.source!r}")
        if isinstance(node, ast.JoinedStr):
            for v in node.values:
                if isinstance(v, ast.FormattedValue):
                    self._type(v.value, types)
            return TEXT
        if isinstance(node, ast.Call):
            fn = node.func.id
            if fn in _NAMED_CMP:
                col = node.args[0].value
                if col not in types:
                    raise ExprError(f"unknown column {col!r} in {self.source!r}")
                return BOOL
            ts = [self._type(a, types) for a in node.args]
            if fn in ("str",):
                return TEXT
            if fn in ("len", "int", "floor", "ceil"):
                return INT
            if fn in ("float", "sqrt"):
                return REAL
            if fn == "round":
                return INT if len(ts) == 1 else REAL
            if not ts or not all(t.numeric for t in ts):
                raise ExprError(f"{fn}() needs numeric arguments in {self.source!r}")
            return INT if all(t is INT for t in ts) else REAL
        raise ExprError(f"unsupported syntax in {self.source!r}")  # pragma: no cover

    # -- SQL --------------------------------------------------------------------

    def to_sql(self, quote: Callable[[str], str]) -> str:
        return self._sql(self._root, quote)

    def _sql(self, node: ast.AST, q: Callable[[str], str]) -> str:
        if isinstance(node, ast.Name):
            return q(node.id)
        if isinstance(node, ast.Constant):
            v = node.value
            if v is None:
                return "NULL"
            if isinstance(v, bool):
                return "1" if v else "0"
            if isinstance(v, str):
                return "'" + v.replace("'", "''") + "'"
            return repr(v)
        if isinstance(node, ast.BinOp):
            op = type(node.op)
            left, right = self._sql(node.left, q), self._sql(node.right, q)
            if op is ast.Div:
                return f"(CAST({left} AS REAL) / {right})"
            if op not in _SQL_BINOPS:
                raise ExprError(f"operator has no SQL translation in {self.source!r}")
            return f"({left} {_SQL_BINOPS[op]} {right})"
        if isinstance(node, ast.UnaryOp):
            inner = self._sql(node.operand, q)
            if isinstance(node.op, ast.Not):
                return f"(NOT {inner})"
            return f"(-{inner})" if isinstance(node.op, ast.USub) else inner
        if isinstance(node, ast.BoolOp):
            joiner = " AND " if isinstance(node.op, ast.And) else " OR "
            return "(" + joiner.join(self._sql(v, q) for v in node.values) + ")"
        if isinstance(node, ast.Compare):
            parts = []
            left = self._sql(node.left, q)
            for op, comp in zip(node.ops, node.comparators):
                right = self._sql(comp, q)
                parts.append(f"({left} {_SQL_CMPOPS[type(op)]} {right})")
                left = right
            return parts[0] if len(parts) == 1 else "(" + " AND ".join(parts) + ")"
        if isinstance(node, ast.IfExp):
            return (f"(CASE WHEN {self._sql(node.test, q)} THEN {self._sql(node.body, q)} "
                    f"ELSE {self._sql(node.orelse, q)} END)")
        if isinstance(node, ast.JoinedStr):
            parts = []
            for v in node.values:
                if isinstance(v, ast.Constant):
                    parts.append(self._sql(v, q))
                else:
                    parts.append(f"CAST({self._sql(v.value, q)} AS TEXT)")
            return "(" + " || ".join(parts) + ")" if parts else "''"
        if isinstance(node, ast.Call):
            fn = node.func.id
            if fn in _NAMED_CMP:
                op = _SQL_CMPOPS[_NAMED_CMP[fn]]
                return f"({q(node.args[0].value)} {op} {self._sql(node.args[1], q)})"
            args = [self._sql(a, q) for a in node.args]
            if fn == "abs":
                return f"ABS({args[0]})"
            if fn in ("min", "max") and len(args) > 1:
                return f"{fn.upper()}({', '.join(args)})"
            if fn == "len":
                return f"LENGTH({args[0]})"
            if fn == "str":
                return f"CAST({args[0]} AS TEXT)"
            if fn == "int":
                return f"CAST({args[0]} AS INTEGER)"
            if fn == "float":
                return f"CAST({args[0]} AS REAL)"
            raise ExprError(f"{fn}() has no SQL translation")
        raise ExprError(f"unsupported syntax in {self.source!r}")  # pragma: no cover
