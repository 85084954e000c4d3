"""Scalar function descriptors: parsing, evaluation, and numerical profiling.

Drift and diffusion coefficients are supplied as expression strings in a
small grammar (see README for the EBNF), so measurable functions like
``sgn(x)*indicator[-1,1]`` can be configured without writing code.  A parsed
expression is held as an immutable AST inside a :class:`FunctionDescriptor`;
evaluation is pure and works elementwise on numpy arrays.

Conventions baked into evaluation:

* ``sgn(0) = 0``
* ``indicator[a,b](x) = 1`` iff ``a <= x <= b``
* ``piecewise_linear`` is constant-extended beyond its first/last knot
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "ExpressionError",
    "DomainError",
    "FunctionDescriptor",
    "DeclaredMeta",
    "FunctionProfile",
    "parse",
    "evaluate",
    "evaluate_array",
    "format_expression",
    "profile",
    "breakpoints",
    "proved_support_radius",
    "is_bounded",
    "tail_l1_mass",
    "default_grid_radius",
    "DEFAULT_GRID_STEP",
]

DEFAULT_GRID_STEP = 1e-3
SUPPORT_EPS = 1e-12


class ExpressionError(ValueError):
    """Parse failure; carries the byte offset of the offending token."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class DomainError(ArithmeticError):
    """Evaluation hit a point outside the expression's domain (division by zero)."""


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Func:
    name: str  # abs, sgn, exp, sin, cos
    arg: "Node"


@dataclass(frozen=True)
class Func2:
    name: str  # min, max
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Compose:
    outer: "Node"
    inner: "Node"


@dataclass(frozen=True)
class Polynomial:
    coeffs: tuple[float, ...]  # c0 + c1*x + c2*x^2 + ...


@dataclass(frozen=True)
class Indicator:
    lo: float
    hi: float


@dataclass(frozen=True)
class PiecewiseLinear:
    xs: tuple[float, ...]
    ys: tuple[float, ...]


Node = Union[
    Const, Var, BinOp, Neg, Func, Func2, Compose, Polynomial, Indicator, PiecewiseLinear
]

_FUNCS_1 = ("abs", "sgn", "exp", "sin", "cos", "neg")
_FUNCS_2 = ("min", "max", "compose")


# ---------------------------------------------------------------------------
# Descriptor and declared metadata
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeclaredMeta:
    """Optional user-asserted bounds; they take precedence over grid estimates."""

    sup_norm: float | None = None
    lipschitz: float | None = None
    support_radius: float | None = None
    l1_norm: float | None = None

    def __post_init__(self):
        for name in ("sup_norm", "lipschitz", "support_radius", "l1_norm"):
            v = getattr(self, name)
            if v is not None and (not math.isfinite(v) or v < 0):
                raise ValueError(f"declared {name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class FunctionDescriptor:
    """Immutable, evaluable description of a scalar function of one variable."""

    ast: Node
    declared: DeclaredMeta = field(default_factory=DeclaredMeta)
    source: str | None = field(default=None, compare=False)

    def __call__(self, x):
        if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
            return evaluate(self, float(x))
        return evaluate_array(self, np.asarray(x, dtype=float))

    def text(self) -> str:
        return format_expression(self)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Tokens:
    """Cursor over the raw text; every token carries its byte offset for errors."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> tuple[str, str, int]:
        """Return (kind, value, offset) without consuming."""
        self._skip_ws()
        if self.pos >= len(self.text):
            return ("end", "", self.pos)
        ch = self.text[self.pos]
        if ch in "+-*/()[],":
            return ("sym", ch, self.pos)
        m = _NUMBER_RE.match(self.text, self.pos)
        if m:
            return ("number", m.group(0), self.pos)
        m = _NAME_RE.match(self.text, self.pos)
        if m:
            return ("name", m.group(0), self.pos)
        raise ExpressionError(f"unexpected character {ch!r}", self.pos)

    def next(self) -> tuple[str, str, int]:
        kind, value, offset = self.peek()
        self.pos = offset + len(value) if kind != "end" else offset
        return kind, value, offset

    def expect(self, sym: str) -> int:
        kind, value, offset = self.next()
        if kind != "sym" or value != sym:
            raise ExpressionError(f"expected {sym!r}, found {value or 'end of input'!r}", offset)
        return offset


def parse(text: str) -> FunctionDescriptor:
    """Parse an expression string into a :class:`FunctionDescriptor`.

    Raises :class:`ExpressionError` with a byte offset on malformed input,
    unknown identifiers, or invalid literal lists.
    """
    toks = _Tokens(text)
    node = _parse_expr(toks)
    kind, value, offset = toks.peek()
    if kind != "end":
        raise ExpressionError(f"trailing input {value!r}", offset)
    return FunctionDescriptor(ast=node, source=text)


def _parse_expr(toks: _Tokens) -> Node:
    node = _parse_term(toks)
    while True:
        kind, value, _ = toks.peek()
        if kind == "sym" and value in "+-":
            toks.next()
            node = BinOp(value, node, _parse_term(toks))
        else:
            return node


def _parse_term(toks: _Tokens) -> Node:
    node = _parse_factor(toks)
    while True:
        kind, value, _ = toks.peek()
        if kind == "sym" and value in "*/":
            toks.next()
            node = BinOp(value, node, _parse_factor(toks))
        else:
            return node


def _parse_factor(toks: _Tokens) -> Node:
    kind, value, _ = toks.peek()
    if kind == "sym" and value == "-":
        toks.next()
        return Neg(_parse_factor(toks))
    return _parse_atom(toks)


def _parse_atom(toks: _Tokens) -> Node:
    kind, value, offset = toks.next()
    if kind == "number":
        return Const(float(value))
    if kind == "sym" and value == "(":
        node = _parse_expr(toks)
        toks.expect(")")
        return node
    if kind == "name":
        return _parse_named(toks, value, offset)
    raise ExpressionError(f"expected expression, found {value or 'end of input'!r}", offset)


def _parse_named(toks: _Tokens, name: str, offset: int) -> Node:
    if name == "x":
        return Var()
    if name in _FUNCS_1:
        toks.expect("(")
        arg = _parse_expr(toks)
        toks.expect(")")
        return Neg(arg) if name == "neg" else Func(name, arg)
    if name in _FUNCS_2:
        toks.expect("(")
        left = _parse_expr(toks)
        toks.expect(",")
        right = _parse_expr(toks)
        toks.expect(")")
        if name == "compose":
            return Compose(left, right)
        return Func2(name, left, right)
    if name == "indicator":
        lo, hi = _parse_number_list(toks, exactly=2)
        if not lo < hi:
            raise ExpressionError(f"indicator requires a < b, got [{lo}, {hi}]", offset)
        return Indicator(lo, hi)
    if name == "polynomial":
        coeffs = _parse_number_list(toks)
        return Polynomial(tuple(coeffs))
    if name == "piecewise_linear":
        knots = _parse_knot_list(toks, offset)
        xs = tuple(k[0] for k in knots)
        ys = tuple(k[1] for k in knots)
        return PiecewiseLinear(xs, ys)
    raise ExpressionError(f"unknown identifier {name!r}", offset)


def _parse_signed_number(toks: _Tokens) -> float:
    kind, value, offset = toks.next()
    sign = 1.0
    if kind == "sym" and value == "-":
        sign = -1.0
        kind, value, offset = toks.next()
    if kind != "number":
        raise ExpressionError(f"expected number literal, found {value!r}", offset)
    return sign * float(value)


def _parse_number_list(toks: _Tokens, exactly: int | None = None) -> list[float]:
    toks.expect("[")
    values = [_parse_signed_number(toks)]
    while True:
        kind, value, offset = toks.next()
        if kind == "sym" and value == "]":
            break
        if not (kind == "sym" and value == ","):
            raise ExpressionError(f"expected ',' or ']', found {value!r}", offset)
        values.append(_parse_signed_number(toks))
    if exactly is not None and len(values) != exactly:
        raise ExpressionError(f"expected {exactly} numbers, got {len(values)}")
    return values


def _parse_knot_list(toks: _Tokens, offset: int) -> list[tuple[float, float]]:
    toks.expect("[")
    knots = []
    while True:
        toks.expect("(")
        x = _parse_signed_number(toks)
        toks.expect(",")
        y = _parse_signed_number(toks)
        toks.expect(")")
        knots.append((x, y))
        kind, value, o = toks.next()
        if kind == "sym" and value == "]":
            break
        if not (kind == "sym" and value == ","):
            raise ExpressionError(f"expected ',' or ']', found {value!r}", o)
    if len(knots) < 2:
        raise ExpressionError("piecewise_linear needs at least 2 knots", offset)
    xs = [k[0] for k in knots]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ExpressionError("piecewise_linear knots must be strictly increasing in x", offset)
    return knots


# ---------------------------------------------------------------------------
# Printing (canonical, re-parseable)
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_expression(f: FunctionDescriptor | Node) -> str:
    """Render a descriptor back to grammar text; parse(format(f)) evaluates identically."""
    node = f.ast if isinstance(f, FunctionDescriptor) else f
    return _format(node, 0)


def _fmt_num(v: float) -> str:
    return repr(float(v))


def _format(node: Node, min_prec: int) -> str:
    if isinstance(node, Const):
        s = _fmt_num(node.value)
        # negative literals act like unary minus under precedence
        return f"({s})" if node.value < 0 and min_prec > 2 else s
    if isinstance(node, Var):
        return "x"
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        s = f"{_format(node.left, prec)} {node.op} {_format(node.right, prec + 1)}"
        return f"({s})" if prec < min_prec else s
    if isinstance(node, Neg):
        s = f"-{_format(node.arg, 3)}"
        return f"({s})" if min_prec > 2 else s
    if isinstance(node, Func):
        return f"{node.name}({_format(node.arg, 0)})"
    if isinstance(node, Func2):
        return f"{node.name}({_format(node.left, 0)}, {_format(node.right, 0)})"
    if isinstance(node, Compose):
        return f"compose({_format(node.outer, 0)}, {_format(node.inner, 0)})"
    if isinstance(node, Polynomial):
        return "polynomial[" + ", ".join(_fmt_num(c) for c in node.coeffs) + "]"
    if isinstance(node, Indicator):
        return f"indicator[{_fmt_num(node.lo)}, {_fmt_num(node.hi)}]"
    if isinstance(node, PiecewiseLinear):
        pairs = ", ".join(f"({_fmt_num(x)}, {_fmt_num(y)})" for x, y in zip(node.xs, node.ys))
        return f"piecewise_linear[{pairs}]"
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(f: FunctionDescriptor, x: float) -> float:
    """Pointwise value at a single real x."""
    out = _eval(f.ast, np.asarray([float(x)]))
    return float(out[0])


def evaluate_array(f: FunctionDescriptor, x: np.ndarray) -> np.ndarray:
    """Elementwise evaluation on a float array (pure, no state)."""
    x = np.asarray(x, dtype=float)
    out = _eval(f.ast, x)
    return out.copy() if out is x else out


def _eval(node: Node, x: np.ndarray) -> np.ndarray:
    if isinstance(node, Const):
        return np.full(x.shape, node.value)
    if isinstance(node, Var):
        return x
    if isinstance(node, BinOp):
        left = _eval(node.left, x)
        right = _eval(node.right, x)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        zero = right == 0.0
        if np.any(zero):
            at = x[np.nonzero(zero)[0][0]] if zero.shape == x.shape else float("nan")
            raise DomainError(f"division by zero at x = {at}")
        return left / right
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, Func):
        arg = _eval(node.arg, x)
        if node.name == "abs":
            return np.abs(arg)
        if node.name == "sgn":
            return np.sign(arg)
        if node.name == "exp":
            return np.exp(arg)
        if node.name == "sin":
            return np.sin(arg)
        return np.cos(arg)
    if isinstance(node, Func2):
        left = _eval(node.left, x)
        right = _eval(node.right, x)
        return np.minimum(left, right) if node.name == "min" else np.maximum(left, right)
    if isinstance(node, Compose):
        return _eval(node.outer, _eval(node.inner, x))
    if isinstance(node, Polynomial):
        out = np.zeros(x.shape)
        for c in reversed(node.coeffs):
            out = out * x + c
        return out
    if isinstance(node, Indicator):
        return ((x >= node.lo) & (x <= node.hi)).astype(float)
    if isinstance(node, PiecewiseLinear):
        return np.interp(x, node.xs, node.ys)
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# Static analysis: breakpoints, support, boundedness, tails
# ---------------------------------------------------------------------------


def _as_affine(node: Node) -> tuple[float, float] | None:
    """Return (a, b) when node is exactly a*x + b, else None."""
    if isinstance(node, Var):
        return (1.0, 0.0)
    if isinstance(node, Const):
        return (0.0, node.value)
    if isinstance(node, Neg):
        sub = _as_affine(node.arg)
        return None if sub is None else (-sub[0], -sub[1])
    if isinstance(node, BinOp):
        l = _as_affine(node.left)
        r = _as_affine(node.right)
        if l is None or r is None:
            return None
        if node.op == "+":
            return (l[0] + r[0], l[1] + r[1])
        if node.op == "-":
            return (l[0] - r[0], l[1] - r[1])
        if node.op == "*":
            if l[0] == 0.0:
                return (l[1] * r[0], l[1] * r[1])
            if r[0] == 0.0:
                return (r[1] * l[0], r[1] * l[1])
            return None
        if node.op == "/" and r[0] == 0.0 and r[1] != 0.0:
            return (l[0] / r[1], l[1] / r[1])
    return None


def breakpoints(f: FunctionDescriptor | Node) -> tuple[float, ...]:
    """Potential kink/jump locations extractable from the AST, sorted unique.

    Only structurally evident points are reported (indicator edges, knots,
    zeros of affine arguments of sgn/abs); smooth primitives contribute none.
    """
    node = f.ast if isinstance(f, FunctionDescriptor) else f
    pts: set[float] = set()
    _collect_breakpoints(node, pts)
    return tuple(sorted(pts))


def _collect_breakpoints(node: Node, pts: set[float]) -> None:
    if isinstance(node, (Const, Var, Polynomial)):
        return
    if isinstance(node, BinOp):
        _collect_breakpoints(node.left, pts)
        _collect_breakpoints(node.right, pts)
        return
    if isinstance(node, Neg):
        _collect_breakpoints(node.arg, pts)
        return
    if isinstance(node, Func):
        _collect_breakpoints(node.arg, pts)
        if node.name in ("sgn", "abs"):
            aff = _as_affine(node.arg)
            if aff is not None and aff[0] != 0.0:
                pts.add(-aff[1] / aff[0])
        return
    if isinstance(node, Func2):
        _collect_breakpoints(node.left, pts)
        _collect_breakpoints(node.right, pts)
        return
    if isinstance(node, Compose):
        _collect_breakpoints(node.inner, pts)
        outer_pts: set[float] = set()
        _collect_breakpoints(node.outer, outer_pts)
        if outer_pts:
            aff = _as_affine(node.inner)
            if aff is not None and aff[0] != 0.0:
                pts.update((b - aff[1]) / aff[0] for b in outer_pts)
            elif node.inner == Func("abs", Var()):
                for b in outer_pts:
                    if b > 0:
                        pts.update((b, -b))
                    elif b == 0:
                        pts.add(0.0)
        return
    if isinstance(node, Indicator):
        pts.update((node.lo, node.hi))
        return
    if isinstance(node, PiecewiseLinear):
        pts.update(node.xs)
        return
    raise TypeError(f"not an AST node: {node!r}")


# Unary primitives that map 0 to 0, so they preserve compact support.
_VANISH_AT_0 = ("abs", "sgn", "sin")


def proved_support_radius(f: FunctionDescriptor | Node) -> float | None:
    """Radius r with f(x) = 0 for all |x| > r, when the AST proves one; else None.

    The proof is structural (indicator bounds, zero-tailed piecewise_linear,
    products, compositions through 0-fixing primitives); numerical decay is
    never taken as evidence.
    """
    node = f.ast if isinstance(f, FunctionDescriptor) else f
    return _support_radius(node)


def _support_radius(node: Node) -> float | None:
    if isinstance(node, Const):
        return 0.0 if node.value == 0.0 else None
    if isinstance(node, Var):
        return None
    if isinstance(node, BinOp):
        l = _support_radius(node.left)
        r = _support_radius(node.right)
        if node.op in "+-":
            return max(l, r) if l is not None and r is not None else None
        if node.op == "*":
            known = [v for v in (l, r) if v is not None]
            return min(known) if known else None
        return l  # f/g vanishes wherever f does (g must be nonzero to evaluate)
    if isinstance(node, Neg):
        return _support_radius(node.arg)
    if isinstance(node, Func):
        sub = _support_radius(node.arg)
        return sub if sub is not None and node.name in _VANISH_AT_0 else None
    if isinstance(node, Func2):
        l = _support_radius(node.left)
        r = _support_radius(node.right)
        return max(l, r) if l is not None and r is not None else None
    if isinstance(node, Compose):
        inner = _support_radius(node.inner)
        if inner is not None and float(_eval(node.outer, np.asarray([0.0]))[0]) == 0.0:
            return inner
        return None
    if isinstance(node, Polynomial):
        return 0.0 if all(c == 0.0 for c in node.coeffs) else None
    if isinstance(node, Indicator):
        return max(abs(node.lo), abs(node.hi))
    if isinstance(node, PiecewiseLinear):
        if node.ys[0] == 0.0 and node.ys[-1] == 0.0:
            return max(abs(node.xs[0]), abs(node.xs[-1]))
        return None
    raise TypeError(f"not an AST node: {node!r}")


def is_bounded(f: FunctionDescriptor | Node) -> bool:
    """Conservative structural check that sup |f| < infinity over all of R."""
    node = f.ast if isinstance(f, FunctionDescriptor) else f
    return _bounded_above(node) and _bounded_below(node)


def _bounded_above(node: Node) -> bool:
    if isinstance(node, Const):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, BinOp):
        if node.op == "+":
            return _bounded_above(node.left) and _bounded_above(node.right)
        if node.op == "-":
            return _bounded_above(node.left) and _bounded_below(node.right)
        if node.op == "*":
            return (
                _bounded_above(node.left)
                and _bounded_below(node.left)
                and _bounded_above(node.right)
                and _bounded_below(node.right)
            )
        return False  # no certifiable lower bound on a denominator
    if isinstance(node, Neg):
        return _bounded_below(node.arg)
    if isinstance(node, Func):
        if node.name in ("sgn", "sin", "cos"):
            return True
        if node.name == "abs":
            return _bounded_above(node.arg) and _bounded_below(node.arg)
        return _bounded_above(node.arg)  # exp is monotone
    if isinstance(node, Func2):
        if node.name == "min":
            return _bounded_above(node.left) or _bounded_above(node.right)
        return _bounded_above(node.left) and _bounded_above(node.right)
    if isinstance(node, Compose):
        if _bounded_above(node.outer):
            return True
        # exp is monotone: exp(inner) is bounded above iff inner is
        if node.outer == Func("exp", Var()):
            return _bounded_above(node.inner)
        return False
    if isinstance(node, Polynomial):
        return len(node.coeffs) <= 1 or all(c == 0.0 for c in node.coeffs[1:])
    if isinstance(node, (Indicator, PiecewiseLinear)):
        return True
    raise TypeError(f"not an AST node: {node!r}")


def _bounded_below(node: Node) -> bool:
    if isinstance(node, Const):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, BinOp):
        if node.op == "+":
            return _bounded_below(node.left) and _bounded_below(node.right)
        if node.op == "-":
            return _bounded_below(node.left) and _bounded_above(node.right)
        if node.op == "*":
            return (
                _bounded_above(node.left)
                and _bounded_below(node.left)
                and _bounded_above(node.right)
                and _bounded_below(node.right)
            )
        return False
    if isinstance(node, Neg):
        return _bounded_above(node.arg)
    if isinstance(node, Func):
        if node.name in ("sgn", "sin", "cos", "exp", "abs"):
            return True  # all bounded below globally (exp, abs by 0)
        return False
    if isinstance(node, Func2):
        if node.name == "max":
            return _bounded_below(node.left) or _bounded_below(node.right)
        return _bounded_below(node.left) and _bounded_below(node.right)
    if isinstance(node, Compose):
        if _bounded_below(node.outer):
            return True
        if node.outer == Func("exp", Var()):
            return True  # exp >= 0
        return False
    if isinstance(node, Polynomial):
        return len(node.coeffs) <= 1 or all(c == 0.0 for c in node.coeffs[1:])
    if isinstance(node, (Indicator, PiecewiseLinear)):
        return True
    raise TypeError(f"not an AST node: {node!r}")


def _match_abs_linear(node: Node) -> tuple[float, float] | None:
    """Match k*abs(x) + c structurally; returns (k, c)."""
    if isinstance(node, Func) and node.name == "abs" and isinstance(node.arg, Var):
        return (1.0, 0.0)
    if isinstance(node, Neg):
        sub = _match_abs_linear(node.arg)
        return None if sub is None else (-sub[0], -sub[1])
    if isinstance(node, Const):
        return (0.0, node.value)
    if isinstance(node, BinOp):
        l = _match_abs_linear(node.left)
        r = _match_abs_linear(node.right)
        if l is None or r is None:
            return None
        if node.op == "+":
            return (l[0] + r[0], l[1] + r[1]) if l[0] == 0.0 or r[0] == 0.0 else None
        if node.op == "-":
            return (l[0] - r[0], l[1] - r[1]) if l[0] == 0.0 or r[0] == 0.0 else None
        if node.op == "*":
            if l[0] == 0.0:
                return (l[1] * r[0], l[1] * r[1])
            if r[0] == 0.0:
                return (r[1] * l[0], r[1] * l[1])
    return None


def _match_scaled_exp(node: Node) -> tuple[float, float, float] | None:
    """Match coef * exp(k*abs(x) + c); returns (coef, k, c)."""
    if isinstance(node, Func) and node.name == "exp":
        lin = _match_abs_linear(node.arg)
        return None if lin is None else (1.0, lin[0], lin[1])
    if isinstance(node, Compose) and isinstance(node.outer, Func) and node.outer.name == "exp":
        if isinstance(node.outer.arg, Var):
            lin = _match_abs_linear(node.inner)
            return None if lin is None else (1.0, lin[0], lin[1])
        return None
    if isinstance(node, Neg):
        sub = _match_scaled_exp(node.arg)
        return None if sub is None else (-sub[0], sub[1], sub[2])
    if isinstance(node, BinOp) and node.op == "*":
        for const_side, other in ((node.left, node.right), (node.right, node.left)):
            if isinstance(const_side, Const):
                sub = _match_scaled_exp(other)
                if sub is not None:
                    return (const_side.value * sub[0], sub[1], sub[2])
    return None


def tail_l1_mass(f: FunctionDescriptor | Node, radius: float) -> float | None:
    """Closed-form integral of |f| over {|x| > radius}, when one is available.

    Returns 0 for AST-proved compact support inside the radius, the exact
    exponential tail for coef*exp(k*abs(x)+c) envelopes with k < 0, and None
    otherwise (tail mass not certifiable).
    """
    node = f.ast if isinstance(f, FunctionDescriptor) else f
    r = _support_radius(node)
    if r is not None and r <= radius:
        return 0.0
    m = _match_scaled_exp(node)
    if m is not None:
        coef, k, c = m
        if coef == 0.0:
            return 0.0
        if k < 0.0:
            return 2.0 * abs(coef) * math.exp(c) * math.exp(k * radius) / (-k)
    return None


# ---------------------------------------------------------------------------
# Profiling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionProfile:
    """Grid estimates of the norms and constants a hypothesis check needs.

    ``*_est`` fields are raw grid quantities; the plain-named properties
    resolve against declared metadata, which always wins when present.
    ``None`` means "unbounded / not certifiable".
    """

    sup_norm_est: float
    lipschitz_est: float
    support_radius_est: float | None
    l1_norm_est: float | None
    inf_sq_est: float
    grid_radius: float
    grid_step: float
    declared: DeclaredMeta = field(default_factory=DeclaredMeta)

    @property
    def sup_norm(self) -> float:
        return self.sup_norm_est if self.declared.sup_norm is None else self.declared.sup_norm

    @property
    def lipschitz(self) -> float:
        return self.lipschitz_est if self.declared.lipschitz is None else self.declared.lipschitz

    @property
    def support_radius(self) -> float | None:
        if self.declared.support_radius is not None:
            return self.declared.support_radius
        return self.support_radius_est

    @property
    def l1_norm(self) -> float | None:
        return self.l1_norm_est if self.declared.l1_norm is None else self.declared.l1_norm


def default_grid_radius(f: FunctionDescriptor) -> float:
    r = proved_support_radius(f)
    if r is None:
        return 10.0
    return max(10.0, 2.0 * (r + 1.0))


def _uniform_grid(radius: float, step: float) -> np.ndarray:
    n = max(2, int(round(2.0 * radius / step)) + 1)
    return np.linspace(-radius, radius, n)


def profile(
    f: FunctionDescriptor, radius: float | None = None, step: float | None = None
) -> FunctionProfile:
    """Profile f on a uniform grid over [-R, R] with spacing h.

    Estimates are deterministic functions of (f, R, h).  The sup and
    Lipschitz estimates are lower estimates that are monotone non-decreasing
    under grid refinement; the support radius is only reported when the AST
    proves compact support; the L1 estimate is composite trapezoid plus an
    analytic tail where one exists, else None (unbounded).
    """
    if radius is None:
        radius = default_grid_radius(f)
    if step is None:
        step = DEFAULT_GRID_STEP
    if radius <= 0 or step <= 0:
        raise ValueError("profile needs radius > 0 and step > 0")

    grid = _uniform_grid(radius, step)
    vals = evaluate_array(f, grid)
    absvals = np.abs(vals)

    sup_est = float(absvals.max())
    lip_est = float((np.abs(np.diff(vals)) / np.diff(grid)).max())
    inf_sq = float((vals * vals).min())

    proved = proved_support_radius(f)
    if proved is not None:
        nonzero = absvals > SUPPORT_EPS
        support_est = float(np.abs(grid[nonzero]).max()) if nonzero.any() else 0.0
    else:
        support_est = None

    # L1: cover the proved support even when it extends past the profiling grid.
    if proved is not None and proved > radius:
        l1_grid = _uniform_grid(proved, step)
        l1_vals = np.abs(evaluate_array(f, l1_grid))
        l1_est = float(np.trapezoid(l1_vals, l1_grid))
    else:
        tail = tail_l1_mass(f, radius)
        if tail is None:
            l1_est = None
        else:
            l1_est = float(np.trapezoid(absvals, grid)) + tail

    return FunctionProfile(
        sup_norm_est=sup_est,
        lipschitz_est=lip_est,
        support_radius_est=support_est,
        l1_norm_est=l1_est,
        inf_sq_est=inf_sq,
        grid_radius=float(radius),
        grid_step=float(step),
        declared=f.declared,
    )
