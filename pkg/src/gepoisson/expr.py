"""Expression trees: evaluation, symbolic differentiation, parsing.

An expression is an immutable tree of Constant / Variable / Binary / Unary
nodes over the operators + - * / and nine unary functions (sin, cos, exp,
log, sqrt and four radial basis kernels).  Evaluation is unprotected:
division by zero, log of a non-positive value, sqrt of a negative value and
overflow all mark the outcome as non-finite instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Union

import numpy as np

__all__ = [
    "FuncKind",
    "Constant",
    "Variable",
    "Binary",
    "Unary",
    "Expression",
    "EvalOutcome",
    "ExpressionError",
    "ParseError",
    "UnboundVariableError",
    "PI",
    "evaluate",
    "evaluate_on_arrays",
    "differentiate",
    "parse",
    "serialize",
    "variables",
    "substitute",
]


class ExpressionError(Exception):
    """Base class for expression usage errors."""


class ParseError(ExpressionError):
    """Raised on malformed expression text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnboundVariableError(ExpressionError):
    """Raised when evaluation meets a variable missing from the binding."""


class FuncKind(Enum):
    SIN = "sin"
    COS = "cos"
    EXP = "exp"
    LOG = "log"
    SQRT = "sqrt"
    BRF1 = "BRF1"  # Gaussian           exp(-c r^2)
    BRF2 = "BRF2"  # Hardy multiquadric sqrt(c^2 + r^2)
    BRF3 = "BRF3"  # inverse multiquadric 1/sqrt(c^2 + r^2)
    BRF4 = "BRF4"  # inverse quadratic  1/(c^2 + r^2)


RBF_KINDS = frozenset({FuncKind.BRF1, FuncKind.BRF2, FuncKind.BRF3, FuncKind.BRF4})

DEFAULT_RBF_SHAPE = 1.0


@dataclass(frozen=True)
class Constant:
    value: float
    symbol: str | None = None  # "pi" prints by name instead of its digits

    def __str__(self) -> str:
        return serialize(self)


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return serialize(self)


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * /
    left: "Expression"
    right: "Expression"

    def __str__(self) -> str:
        return serialize(self)


@dataclass(frozen=True)
class Unary:
    func: FuncKind
    arg: "Expression"
    shape: float = DEFAULT_RBF_SHAPE  # RBF shape parameter c; ignored otherwise

    def __post_init__(self):
        if self.func in RBF_KINDS and not self.shape > 0:
            raise ValueError(f"RBF shape parameter must be positive, got {self.shape}")

    def __str__(self) -> str:
        return serialize(self)


Expression = Union[Constant, Variable, Binary, Unary]

PI = Constant(math.pi, symbol="pi")


@dataclass(frozen=True)
class EvalOutcome:
    """Value of an expression at a point; finite is False when the value or
    any sub-evaluation was NaN or infinite."""

    value: float
    finite: bool


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(e: Expression, binding: Mapping[str, float]) -> EvalOutcome:
    """Evaluate ``e`` with every variable bound to a number.

    Pure and deterministic.  A missing variable raises UnboundVariableError;
    arithmetic trouble never raises, it yields ``finite=False``.
    """
    value, finite = _eval(e, binding)
    return EvalOutcome(value, finite)


def _eval(e: Expression, binding: Mapping[str, float]) -> tuple[float, bool]:
    if isinstance(e, Constant):
        return e.value, math.isfinite(e.value)
    if isinstance(e, Variable):
        try:
            v = binding[e.name]
        except KeyError:
            raise UnboundVariableError(f"variable '{e.name}' is not bound") from None
        return float(v), math.isfinite(v)
    if isinstance(e, Binary):
        lv, lf = _eval(e.left, binding)
        rv, rf = _eval(e.right, binding)
        try:
            if e.op == "+":
                v = lv + rv
            elif e.op == "-":
                v = lv - rv
            elif e.op == "*":
                v = lv * rv
            else:
                v = lv / rv
        except (ZeroDivisionError, OverflowError):
            return math.nan, False
        return v, lf and rf and math.isfinite(v)
    # Unary
    av, af = _eval(e.arg, binding)
    try:
        v = _apply_func(e.func, av, e.shape)
    except (ValueError, OverflowError, ZeroDivisionError):
        return math.nan, False
    return v, af and math.isfinite(v)


def _apply_func(kind: FuncKind, r: float, c: float) -> float:
    if kind is FuncKind.SIN:
        return math.sin(r)
    if kind is FuncKind.COS:
        return math.cos(r)
    if kind is FuncKind.EXP:
        return math.exp(r)
    if kind is FuncKind.LOG:
        return math.log(r)
    if kind is FuncKind.SQRT:
        return math.sqrt(r)
    if kind is FuncKind.BRF1:
        return math.exp(-c * r * r)
    if kind is FuncKind.BRF2:
        return math.sqrt(c * c + r * r)
    if kind is FuncKind.BRF3:
        return 1.0 / math.sqrt(c * c + r * r)
    if kind is FuncKind.BRF4:
        return 1.0 / (c * c + r * r)
    raise AssertionError(kind)


def evaluate_on_arrays(
    e: Expression, binding: Mapping[str, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised evaluation over per-variable numpy arrays.

    Returns ``(values, finite)`` where ``finite`` is a boolean mask that is
    False wherever the node value or any sub-evaluation was non-finite,
    matching the scalar semantics of :func:`evaluate` point by point.
    """
    with np.errstate(all="ignore"):
        # derivative trees share subtrees; memoise per call so each shared
        # node is evaluated once (trees are immutable, id-keying is safe)
        return _eval_arrays(e, binding, {})


def _eval_arrays(e, binding, seen):
    key = id(e)
    cached = seen.get(key)
    if cached is not None:
        return cached
    if isinstance(e, Constant):
        out = e.value, True  # scalars broadcast; masks combine below
    elif isinstance(e, Variable):
        try:
            v = binding[e.name]
        except KeyError:
            raise UnboundVariableError(f"variable '{e.name}' is not bound") from None
        out = v, np.isfinite(v)
    elif isinstance(e, Binary):
        lv, lf = _eval_arrays(e.left, binding, seen)
        rv, rf = _eval_arrays(e.right, binding, seen)
        if e.op == "+":
            v = lv + rv
        elif e.op == "-":
            v = lv - rv
        elif e.op == "*":
            v = lv * rv
        else:
            v = np.divide(lv, rv)
        out = v, lf & rf & np.isfinite(v)
    else:
        av, af = _eval_arrays(e.arg, binding, seen)
        c = e.shape
        k = e.func
        if k is FuncKind.SIN:
            v = np.sin(av)
        elif k is FuncKind.COS:
            v = np.cos(av)
        elif k is FuncKind.EXP:
            v = np.exp(av)
        elif k is FuncKind.LOG:
            v = np.log(av)
        elif k is FuncKind.SQRT:
            v = np.sqrt(av)
        elif k is FuncKind.BRF1:
            v = np.exp(-c * av * av)
        elif k is FuncKind.BRF2:
            v = np.sqrt(c * c + av * av)
        elif k is FuncKind.BRF3:
            v = 1.0 / np.sqrt(c * c + av * av)
        else:
            v = 1.0 / (c * c + av * av)
        out = v, af & np.isfinite(v)
    seen[key] = out
    return out


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def differentiate(e: Expression, v: str) -> Expression:
    """Exact symbolic ∂e/∂v.

    Total on the tree: domain issues (log, sqrt, division) only surface later
    as non-finite evaluation.  The result is not simplified beyond constant
    folding and dropping additive/multiplicative identities, which keeps
    second derivatives from ballooning.  Shared subtrees differentiate once
    and their derivatives are shared in the result.
    """
    return _diff(e, v, {})


def _diff(e: Expression, v: str, seen: dict) -> Expression:
    key = id(e)
    cached = seen.get(key)
    if cached is not None:
        return cached
    if isinstance(e, Constant):
        out = _ZERO
    elif isinstance(e, Variable):
        out = _ONE if e.name == v else _ZERO
    elif isinstance(e, Binary):
        dl = _diff(e.left, v, seen)
        dr = _diff(e.right, v, seen)
        if e.op == "+":
            out = _add(dl, dr)
        elif e.op == "-":
            out = _sub(dl, dr)
        elif e.op == "*":
            out = _add(_mul(dl, e.right), _mul(e.left, dr))
        else:
            # quotient rule: (l'r - l r') / r^2
            num = _sub(_mul(dl, e.right), _mul(e.left, dr))
            out = _div(num, _mul(e.right, e.right))
    else:
        out = _mul(_outer_derivative(e), _diff(e.arg, v, seen))
    seen[key] = out
    return out


def _outer_derivative(node: Unary) -> Expression:
    """Derivative of the unary function with respect to its argument."""
    u = node.arg
    c = node.shape
    k = node.func
    if k is FuncKind.SIN:
        return Unary(FuncKind.COS, u)
    if k is FuncKind.COS:
        return _mul(Constant(-1.0), Unary(FuncKind.SIN, u))
    if k is FuncKind.EXP:
        return node
    if k is FuncKind.LOG:
        return _div(_ONE, u)
    if k is FuncKind.SQRT:
        return _div(_ONE, _mul(Constant(2.0), node))
    if k is FuncKind.BRF1:  # -2c u exp(-c u^2)
        return _mul(_mul(Constant(-2.0 * c), u), node)
    if k is FuncKind.BRF2:  # u / sqrt(c^2+u^2)
        return _div(u, node)
    if k is FuncKind.BRF3:  # -u (c^2+u^2)^(-3/2)
        return _mul(_mul(_mul(Constant(-1.0), u), node), Unary(FuncKind.BRF4, u, c))
    # BRF4: -2u (c^2+u^2)^(-2)
    return _mul(_mul(Constant(-2.0), u), _mul(node, node))


_ZERO = Constant(0.0)
_ONE = Constant(1.0)


def _is_const(e: Expression, value: float) -> bool:
    return isinstance(e, Constant) and e.value == value


def _add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("+", a, b)


def _sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    return Binary("-", a, b)


def _mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Binary("*", a, b)


def _div(a: Expression, b: Expression) -> Expression:
    if _is_const(a, 0.0):
        return _ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("/", a, b)


# ---------------------------------------------------------------------------
# Tree utilities
# ---------------------------------------------------------------------------

def variables(e: Expression) -> set[str]:
    """Names of all variables occurring in the tree."""
    out: set[str] = set()
    _collect_vars(e, out)
    return out


def _collect_vars(e: Expression, out: set[str]) -> None:
    if isinstance(e, Variable):
        out.add(e.name)
    elif isinstance(e, Binary):
        _collect_vars(e.left, out)
        _collect_vars(e.right, out)
    elif isinstance(e, Unary):
        _collect_vars(e.arg, out)


def substitute(e: Expression, name: str, replacement: Expression) -> Expression:
    """New tree with every occurrence of the named variable replaced."""
    if isinstance(e, Variable):
        return replacement if e.name == name else e
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, name, replacement),
                      substitute(e.right, name, replacement))
    if isinstance(e, Unary):
        return Unary(e.func, substitute(e.arg, name, replacement), e.shape)
    return e


# ---------------------------------------------------------------------------
# Canonical infix text
# ---------------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def serialize(e: Expression) -> str:
    """Canonical infix form; serialize -> parse -> serialize is a fixed point."""
    if isinstance(e, Constant):
        if e.symbol is not None:
            return e.symbol
        if e.value == int(e.value) and abs(e.value) < 1e16:
            return str(int(e.value))
        return repr(e.value)
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Unary):
        return f"{e.func.value}({serialize(e.arg)})"
    prec = _PRECEDENCE[e.op]
    left = serialize(e.left)
    if isinstance(e.left, Binary) and _PRECEDENCE[e.left.op] < prec:
        left = f"({left})"
    right = serialize(e.right)
    # parenthesise equal precedence on the right to keep left association
    if isinstance(e.right, Binary) and _PRECEDENCE[e.right.op] <= prec:
        right = f"({right})"
    return f"{left}{e.op}{right}"


_FUNC_NAMES = {k.value: k for k in FuncKind}


def parse(text: str, rbf_shape: float = DEFAULT_RBF_SHAPE) -> Expression:
    """Parse canonical infix text into an expression tree.

    Grammar: + - * / with usual precedence (left associative), unary minus,
    function application ``name(expr)``, variables as identifiers, the named
    constant ``pi``, and decimal literals.  RBF nodes get ``rbf_shape`` as
    their shape parameter.
    """
    tokens = _tokenize(text)
    parser = _Parser(tokens, rbf_shape)
    tree = parser.parse_sum()
    tok = parser.peek()
    if tok.kind != "end":
        raise ParseError(f"unexpected '{tok.text}'", tok.pos)
    return tree


@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | lparen | rparen | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "+-*/":
            tokens.append(_Token("op", ch, i))
            i += 1
        elif ch == "(":
            tokens.append(_Token("lparen", ch, i))
            i += 1
        elif ch == ")":
            tokens.append(_Token("rparen", ch, i))
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] in ".eE" or
                             (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            tokens.append(_Token("num", text[i:j], i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], i))
            i = j
        else:
            raise ParseError(f"unexpected character '{ch}'", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], rbf_shape: float):
        self.tokens = tokens
        self.pos = 0
        self.rbf_shape = rbf_shape

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.advance()
        if tok.kind != kind:
            raise ParseError(f"expected {what}, found '{tok.text or 'end of input'}'", tok.pos)
        return tok

    def parse_sum(self) -> Expression:
        node = self.parse_product()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.parse_product())
        return node

    def parse_product(self) -> Expression:
        node = self.parse_factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Expression:
        tok = self.advance()
        if tok.kind == "op" and tok.text == "-":
            inner = self.parse_factor()
            if isinstance(inner, Constant) and inner.symbol is None:
                return Constant(-inner.value)
            return Binary("-", Constant(0.0), inner)
        if tok.kind == "op" and tok.text == "+":
            return self.parse_factor()
        if tok.kind == "num":
            try:
                value = float(tok.text)
            except ValueError:
                raise ParseError(f"bad number literal '{tok.text}'", tok.pos) from None
            if not math.isfinite(value):
                raise ParseError(f"number literal out of range '{tok.text}'", tok.pos)
            return Constant(value)
        if tok.kind == "lparen":
            node = self.parse_sum()
            self.expect("rparen", "')'")
            return node
        if tok.kind == "ident":
            if tok.text == "pi":
                return PI
            if tok.text in _FUNC_NAMES:
                self.expect("lparen", "'(' after function name")
                arg = self.parse_sum()
                self.expect("rparen", "')'")
                kind = _FUNC_NAMES[tok.text]
                if kind in RBF_KINDS:
                    return Unary(kind, arg, self.rbf_shape)
                return Unary(kind, arg)
            return Variable(tok.text)
        raise ParseError(f"expected an operand, found '{tok.text or 'end of input'}'", tok.pos)
