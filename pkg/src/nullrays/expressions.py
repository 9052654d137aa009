"""Tiny closed expression language for scalar fields on chart coordinates.

A field is built from five primitives:

    number literal      (floats, scientific notation, and the name ``pi``)
    coordinate          x0, x1, ... (index bounded by the chart dimension)
    addition            a + b       (with ``a - b`` and unary ``-`` as sugar)
    multiplication      a * b
    sine                sin(a)

This is deliberately small: every expression has an exact symbolic
derivative inside the same language (``cos u`` is expressed as
``sin(u + pi/2)``), so metric coefficients built from these fields have
machine-exact first and second derivatives with no finite differencing.

Evaluation is numpy-vectorized: ``evaluate(points)`` accepts any array of
shape (..., dim) and returns shape (...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParseError

__all__ = ["Expr", "Const", "Coord", "Add", "Mul", "Sin", "parse_expr", "const", "coord"]


class Expr:
    """Base class for expression nodes."""

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, index: int) -> "Expr":
        """Exact partial derivative with respect to coordinate ``index``."""
        raise NotImplementedError

    def is_const(self, value: float | None = None) -> bool:
        return False

    # Operator sugar so tests and model builders can compose fields
    # without going through the parser.
    def __add__(self, other: "Expr | float") -> "Expr":
        return add(self, _as_expr(other))

    def __radd__(self, other: "Expr | float") -> "Expr":
        return add(_as_expr(other), self)

    def __mul__(self, other: "Expr | float") -> "Expr":
        return mul(self, _as_expr(other))

    def __rmul__(self, other: "Expr | float") -> "Expr":
        return mul(_as_expr(other), self)

    def __sub__(self, other: "Expr | float") -> "Expr":
        return add(self, mul(Const(-1.0), _as_expr(other)))

    def __rsub__(self, other: "Expr | float") -> "Expr":
        return add(_as_expr(other), mul(Const(-1.0), self))

    def __neg__(self) -> "Expr":
        return mul(Const(-1.0), self)


def _as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.full(points.shape[:-1], self.value)

    def grad(self, index: int) -> Expr:
        return Const(0.0)

    def is_const(self, value: float | None = None) -> bool:
        return value is None or self.value == value

    def __str__(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class Coord(Expr):
    index: int

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points[..., self.index]

    def grad(self, index: int) -> Expr:
        return Const(1.0 if index == self.index else 0.0)

    def __str__(self) -> str:
        return f"x{self.index}"


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.left.evaluate(points) + self.right.evaluate(points)

    def grad(self, index: int) -> Expr:
        return add(self.left.grad(index), self.right.grad(index))

    def __str__(self) -> str:
        return f"({self.left} + {self.right})"


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.left.evaluate(points) * self.right.evaluate(points)

    def grad(self, index: int) -> Expr:
        return add(
            mul(self.left.grad(index), self.right),
            mul(self.left, self.right.grad(index)),
        )

    def __str__(self) -> str:
        return f"({self.left} * {self.right})"


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.sin(self.arg.evaluate(points))

    def grad(self, index: int) -> Expr:
        # cos u == sin(u + pi/2), keeping the derivative inside the language
        cos_arg = Sin(add(self.arg, Const(math.pi / 2.0)))
        return mul(cos_arg, self.arg.grad(index))

    def __str__(self) -> str:
        return f"sin({self.arg})"


def add(a: Expr, b: Expr) -> Expr:
    """Addition with constant folding (keeps derivative trees small)."""
    if a.is_const() and b.is_const():
        return Const(a.value + b.value)
    if a.is_const(0.0):
        return b
    if b.is_const(0.0):
        return a
    return Add(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    """Multiplication with constant folding."""
    if a.is_const() and b.is_const():
        return Const(a.value * b.value)
    if a.is_const(0.0) or b.is_const(0.0):
        return Const(0.0)
    if a.is_const(1.0):
        return b
    if b.is_const(1.0):
        return a
    return Mul(a, b)


def const(value: float) -> Const:
    return Const(float(value))


def coord(index: int) -> Coord:
    return Coord(int(index))


# ---------------------------------------------------------------------------
# Parser: standard recursive descent over +- / * / unary- / atoms.
# ---------------------------------------------------------------------------

_SYMBOLS = "+-*(),"


def _tokenize(text: str) -> list[tuple[str, object]]:
    tokens: list[tuple[str, object]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _SYMBOLS:
            tokens.append(("sym", ch))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            # optional exponent part
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            try:
                value = float(text[i:j])
            except ValueError:
                raise ParseError(f"bad number literal {text[i:j]!r}")
            tokens.append(("num", value))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j]))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r} in expression")
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, object]], dim: int):
        self.tokens = tokens
        self.pos = 0
        self.dim = dim

    def peek(self) -> tuple[str, object]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, object]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_sym(self, symbol: str) -> None:
        kind, value = self.next()
        if kind != "sym" or value != symbol:
            raise ParseError(f"expected {symbol!r}, got {value!r}")

    def parse_sum(self) -> Expr:
        node = self.parse_product()
        while True:
            kind, value = self.peek()
            if kind == "sym" and value == "+":
                self.next()
                node = add(node, self.parse_product())
            elif kind == "sym" and value == "-":
                self.next()
                node = add(node, mul(Const(-1.0), self.parse_product()))
            else:
                return node

    def parse_product(self) -> Expr:
        node = self.parse_unary()
        while True:
            kind, value = self.peek()
            if kind == "sym" and value == "*":
                self.next()
                node = mul(node, self.parse_unary())
            else:
                return node

    def parse_unary(self) -> Expr:
        kind, value = self.peek()
        if kind == "sym" and value == "-":
            self.next()
            return mul(Const(-1.0), self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        kind, value = self.next()
        if kind == "num":
            return Const(float(value))
        if kind == "sym" and value == "(":
            node = self.parse_sum()
            self.expect_sym(")")
            return node
        if kind == "name":
            name = str(value)
            if name == "pi":
                return Const(math.pi)
            if name == "sin":
                self.expect_sym("(")
                arg = self.parse_sum()
                self.expect_sym(")")
                return Sin(arg)
            if name.startswith("x") and name[1:].isdigit():
                index = int(name[1:])
                if index >= self.dim:
                    raise ParseError(
                        f"coordinate {name} out of range for dimension {self.dim}"
                    )
                return Coord(index)
            raise ParseError(f"unknown name {name!r} (expected x<i>, sin, or pi)")
        raise ParseError(f"unexpected token {value!r}")


def parse_expr(text: str, dim: int) -> Expr:
    """Parse ``text`` into an expression over coordinates x0..x{dim-1}."""
    parser = _Parser(_tokenize(text), dim)
    node = parser.parse_sum()
    kind, value = parser.peek()
    if kind != "end":
        raise ParseError(f"trailing input starting at {value!r}")
    return node
