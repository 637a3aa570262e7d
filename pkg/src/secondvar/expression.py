"""Scalar expression parser and evaluator for integrands and extremals.

Expressions are written in the variables ``x``, ``y``, ``yp`` (the slope y')
with the constants ``pi`` and ``e`` plus any user-declared parameters, e.g.
``"y*sqrt(1+yp^2)"``.  Trees are immutable after parsing, evaluation is pure,
and partial derivatives up to second order come from central finite
differences with scale-aware step sizes.

Grammar::

    expr    := term (('+'|'-') term)*
    term    := factor (('*'|'/') factor)*
    factor  := unary ('^' factor)?          # '^' is right-associative
    unary   := '-'? primary
    primary := number | ident | ident '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ExprDomainError, ExprSyntaxError, UnknownIdentifierError

VARIABLES = ("x", "y", "yp")

_CONSTANTS = {"pi": math.pi, "e": math.e}

_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "exp": math.exp,
    "abs": abs,
}

_EPS = 2.220446049250313e-16  # IEEE double machine epsilon
_STEP1 = _EPS ** (1.0 / 3.0)  # first-derivative step scale
_STEP2 = _EPS ** 0.25         # second-derivative step scale


# --------------------------------------------------------------------------
# AST


class Expr:
    """Base node. Subclasses are frozen dataclasses; trees never mutate."""

    def eval(self, x: float, y: float, yp: float) -> float:
        raise NotImplementedError

    def to_source(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_source()


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def eval(self, x, y, yp):
        return self.value

    def to_source(self):
        return repr(self.value)


@dataclass(frozen=True)
class Const(Expr):
    """A named constant (pi, e, or a user parameter), resolved at parse time."""

    name: str
    value: float

    def eval(self, x, y, yp):
        return self.value

    def to_source(self):
        return self.name


@dataclass(frozen=True)
class Var(Expr):
    name: str  # one of VARIABLES

    def eval(self, x, y, yp):
        if self.name == "x":
            return x
        if self.name == "y":
            return y
        return yp

    def to_source(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def eval(self, x, y, yp):
        return -self.operand.eval(x, y, yp)

    def to_source(self):
        return f"(-{self.operand.to_source()})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # '+', '-', '*', '/', '^'
    left: Expr
    right: Expr

    def eval(self, x, y, yp):
        a = self.left.eval(x, y, yp)
        b = self.right.eval(x, y, yp)
        op = self.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise ExprDomainError("division by zero", self.to_source())
            return a / b
        return self._pow(a, b)

    def _pow(self, a: float, b: float) -> float:
        # Real semantics: 0^0 = 1; negative base requires an integer exponent.
        if a == 0.0 and b == 0.0:
            return 1.0
        try:
            return math.pow(a, b)
        except ValueError:
            raise ExprDomainError(
                f"invalid power {a!r} ^ {b!r}", self.to_source()
            ) from None
        except OverflowError:
            sign = -1.0 if (a < 0.0 and b == round(b) and int(b) % 2) else 1.0
            return sign * math.inf

    def to_source(self):
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr

    def eval(self, x, y, yp):
        v = self.arg.eval(x, y, yp)
        if self.func == "log":
            if v <= 0.0:
                raise ExprDomainError(f"log of non-positive value {v!r}", self.to_source())
            return math.log(v)
        if self.func == "sqrt":
            if v < 0.0:
                raise ExprDomainError(f"sqrt of negative value {v!r}", self.to_source())
            return math.sqrt(v)
        try:
            return _FUNCTIONS[self.func](v)
        except OverflowError:
            if self.func in ("sinh", "tan"):
                return math.copysign(math.inf, v)
            return math.inf
        except ValueError:
            raise ExprDomainError(f"{self.func} of {v!r} undefined", self.to_source()) from None

    def to_source(self):
        return f"{self.func}({self.arg.to_source()})"


# --------------------------------------------------------------------------
# Lexer / parser

_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num' | 'ident' | 'op' | 'end'
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        if source[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[i]!r}", i)
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(), i))
        i = m.end()
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], params: Mapping[str, float]):
        self.tokens = tokens
        self.i = 0
        self.params = params

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ExprSyntaxError(f"expected '{text}'", tok.pos)
        self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        node = self.unary()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            node = BinOp("^", node, self.factor())
        return node

    def unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.primary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if self.peek().kind == "op" and self.peek().text == "(":
                if name not in _FUNCTIONS and name not in ("log", "sqrt"):
                    raise UnknownIdentifierError(name, tok.pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(name, arg)
            if name in VARIABLES:
                return Var(name)
            if name in self.params:
                return Const(name, float(self.params[name]))
            if name in _CONSTANTS:
                return Const(name, _CONSTANTS[name])
            raise UnknownIdentifierError(name, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        if tok.kind == "end":
            raise ExprSyntaxError("unexpected end of input", tok.pos)
        raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.pos)


def parse(source: str, params: Mapping[str, float] | None = None) -> Expr:
    """Parse ``source`` into an immutable expression tree.

    ``params`` maps parameter names to values; they are folded into the tree
    as named constants.  Parameter names must not shadow the reserved
    variables x, y, yp.
    """
    params = dict(params or {})
    for name in params:
        if name in VARIABLES:
            raise ValueError(f"parameter name {name!r} shadows a reserved variable")
    return _Parser(_tokenize(source), params).parse()


def evaluate(expr: Expr, x: float, y: float = 0.0, yp: float = 0.0) -> float:
    """Evaluate ``expr`` at the point (x, y, yp)."""
    return expr.eval(float(x), float(y), float(yp))


# --------------------------------------------------------------------------
# Finite-difference partial derivatives


def _step(scale: float, value: float) -> float:
    return scale * max(1.0, abs(value))


def partial(expr: Expr, wrt: Sequence[str], x: float, y: float = 0.0, yp: float = 0.0) -> float:
    """Central finite-difference partial derivative of first or second order.

    ``wrt`` lists one or two of 'x', 'y', 'yp'.  First derivatives use step
    eps^(1/3)*max(1,|point|); second derivatives use eps^(1/4)*max(1,|point|).
    Raises ExprDomainError if a stencil point leaves the expression's domain.
    """
    if not 1 <= len(wrt) <= 2:
        raise ValueError("wrt must list one or two variables")
    for v in wrt:
        if v not in VARIABLES:
            raise ValueError(f"cannot differentiate with respect to {v!r}")

    point = {"x": float(x), "y": float(y), "yp": float(yp)}

    def f(**shift: float) -> float:
        p = dict(point)
        for k, dv in shift.items():
            p[k] += dv
        return expr.eval(p["x"], p["y"], p["yp"])

    if len(wrt) == 1:
        v = wrt[0]
        h = _step(_STEP1, point[v])
        return (f(**{v: +h}) - f(**{v: -h})) / (2.0 * h)

    u, v = wrt
    if u == v:
        h = _step(_STEP2, point[u])
        return (f(**{u: +h}) - 2.0 * f() + f(**{u: -h})) / (h * h)
    hu = _step(_STEP2, point[u])
    hv = _step(_STEP2, point[v])
    return (
        f(**{u: +hu, v: +hv})
        - f(**{u: +hu, v: -hv})
        - f(**{u: -hu, v: +hv})
        + f(**{u: -hu, v: -hv})
    ) / (4.0 * hu * hv)


def free_variables(expr: Expr) -> set[str]:
    """Names of the reserved variables that actually occur in the tree."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Neg):
            stack.append(node.operand)
        elif isinstance(node, BinOp):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Call):
            stack.append(node.arg)
    return out


def substitute(expr: Expr, replacements: Mapping[str, Expr]) -> Expr:
    """Return a copy of ``expr`` with variables replaced by subtrees."""
    if isinstance(expr, Var) and expr.name in replacements:
        return replacements[expr.name]
    if isinstance(expr, Neg):
        return Neg(substitute(expr.operand, replacements))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, substitute(expr.left, replacements),
                     substitute(expr.right, replacements))
    if isinstance(expr, Call):
        return Call(expr.func, substitute(expr.arg, replacements))
    return expr
