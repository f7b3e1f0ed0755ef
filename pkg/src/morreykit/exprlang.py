"""A small arithmetic expression language for coefficient and test functions.

Expressions are written in the variables ``x1 ... xn`` (components of a point
of the domain), the constants ``pi`` and ``e``, the binary operators
``+ - * / ^`` and unary minus, and the functions::

    sin cos exp log sqrt abs        (one argument)
    min max pow                     (two arguments)
    norm                            (norm(x) is the Euclidean norm of the point;
                                     norm(a, b, ...) the norm of its arguments)

``^`` binds tightest and is right-associative, then unary minus, then ``* /``,
then ``+ -``.  So ``-2^2 == -4`` and ``2^3^2 == 512``.

Evaluation is vectorised: the components of ``point`` may be numpy arrays of
any common shape.  Division by zero, ``log`` of a non-positive number,
``sqrt`` of a negative number and real powers that have no real value raise
:class:`EvaluationError` instead of producing NaN.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import MorreyKitError

__all__ = [
    "Expr", "Num", "Var", "Name", "Const", "PointVar", "Neg", "BinOp", "Call",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError", "ArityError",
    "EvaluationError", "NotDifferentiable", "parse", "evaluate", "to_source",
    "max_variable_index", "differentiate", "gradient",
]


class ExprError(MorreyKitError, ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at byte {offset}{detail}")


class UnknownIdentifierError(ExprError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at byte {offset}")


class ArityError(ExprError):
    def __init__(self, name, got, offset):
        self.name = name
        self.got = got
        self.offset = offset
        super().__init__(f"{name}() does not accept {got} argument(s) (at byte {offset})")


class EvaluationError(ExprError, ArithmeticError):
    """Raised when an operation leaves its real domain.

    ``node`` is the offending sub-expression; ``index`` is the position of the
    first bad element when evaluating on arrays (``None`` for scalars).
    """

    def __init__(self, message, node, index=None):
        self.node = node
        self.index = index
        where = f" at element {index}" if index is not None else ""
        super().__init__(f"{message} in '{to_source(node)}'{where}")


# ---------------------------------------------------------------------------
# tree

class Expr:
    __slots__ = ()

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class Name(Expr):
    """A caller-declared scalar variable such as ``t``."""
    name: str


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class PointVar(Expr):
    """The whole point ``x``; only valid as the argument of ``norm``."""


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple


CONSTANTS = {"pi": math.pi, "e": math.e}
UNARY_FUNCS = ("sin", "cos", "exp", "log", "sqrt", "abs")
ARITY = {**{f: (1, 1) for f in UNARY_FUNCS}, "min": (2, 2), "max": (2, 2),
         "pow": (2, 2), "norm": (1, None)}

# ---------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)
_VAR_RE = re.compile(r"x([1-9][0-9]*)$")


@dataclass(frozen=True)
class _Tok:
    kind: str   # num, ident, op, end
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos = 0
    byte = 0
    while True:
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            rest = source[pos:]
            stripped = rest.lstrip()
            byte += len(rest[: len(rest) - len(stripped)].encode())
            if not stripped:
                toks.append(_Tok("end", "", byte))
                return toks
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", byte,
                                  {"number", "identifier", "(", "-"})
        kind = m.lastgroup
        text = m.group(kind)
        start = m.start(kind)
        byte += len(source[pos:start].encode())
        toks.append(_Tok(kind, text, byte))
        byte += len(text.encode())
        pos = m.end()


# ---------------------------------------------------------------------------
# parser (recursive descent)
#
#   expr    := term (('+' | '-') term)*
#   term    := unary (('*' | '/') unary)*
#   unary   := '-' unary | power
#   power   := primary ('^' unary)?
#   primary := number | ident | ident '(' args ')' | '(' expr ')'

class _Parser:
    def __init__(self, source, names):
        self.toks = _tokenize(source)
        self.i = 0
        self.names = frozenset(names)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.peek()
        if tok.text != text or tok.kind == "end":
            raise ExprSyntaxError(f"unexpected {_describe(tok)}", tok.offset, {text})
        return self.take()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {_describe(tok)}", tok.offset,
                                  {"+", "-", "*", "/", "^", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek().kind == "op" and self.peek().text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.take()
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"literal {tok.text} overflows", tok.offset)
            return Num(value)
        if tok.kind == "ident":
            if self.peek().kind == "op" and self.peek().text == "(":
                return self.call(tok)
            return self.identifier(tok)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {_describe(tok)}", tok.offset,
                              {"number", "identifier", "(", "-"})

    def identifier(self, tok):
        name = tok.text
        m = _VAR_RE.match(name)
        if m:
            return Var(int(m.group(1)))
        if name in CONSTANTS:
            return Const(name)
        if name in self.names:
            return Name(name)
        if name == "x":
            raise ExprSyntaxError("bare 'x' is only allowed as the argument of norm",
                                  tok.offset, {"x1", "x2"})
        raise UnknownIdentifierError(name, tok.offset)

    def call(self, tok):
        name = tok.text
        if name not in ARITY:
            raise UnknownIdentifierError(name, tok.offset)
        self.expect("(")
        args = []
        if name == "norm" and self.peek().text == "x" and self.toks[self.i + 1].text == ")":
            self.take()
            args.append(PointVar())
        else:
            args.append(self.expr())
            while self.peek().kind == "op" and self.peek().text == ",":
                self.take()
                args.append(self.expr())
        self.expect(")")
        lo, hi = ARITY[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ArityError(name, len(args), tok.offset)
        return Call(name, tuple(args))


def _describe(tok):
    return "end of input" if tok.kind == "end" else repr(tok.text)


def parse(source: str, names: Sequence[str] = ()) -> Expr:
    """Parse ``source`` into an expression tree.

    ``names`` declares extra scalar variables (for example ``("t",)`` for a
    custom N-function ``A(x, t)``).
    """
    for nm in names:
        if nm in CONSTANTS or nm in ARITY or _VAR_RE.match(nm) or nm == "x":
            raise ValueError(f"cannot declare reserved name {nm!r}")
    return _Parser(source, names).parse()


# ---------------------------------------------------------------------------
# printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PREC = 3
_POW_PREC = 4
_ATOM_PREC = 5


def _prec(node):
    if isinstance(node, BinOp):
        return _POW_PREC if node.op == "^" else _PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def _wrap(node, parens):
    s = to_source(node)
    return f"({s})" if parens else s


def to_source(node: Expr) -> str:
    """Render ``node`` with the minimal parentheses needed to re-parse it."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, (Name, Const)):
        return node.name
    if isinstance(node, PointVar):
        return "x"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _prec(node.operand) < _NEG_PREC)
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, BinOp):
        if node.op == "^":
            left = _wrap(node.left, _prec(node.left) <= _POW_PREC)
            right = _wrap(node.right, _prec(node.right) < _NEG_PREC)
            return f"{left}^{right}"
        p = _PREC[node.op]
        left = _wrap(node.left, _prec(node.left) < p)
        right = _wrap(node.right, _prec(node.right) <= p)
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


def max_variable_index(node: Expr) -> int:
    """Largest ``k`` such that ``xk`` occurs in ``node`` (0 if none)."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return max_variable_index(node.operand)
    if isinstance(node, BinOp):
        return max(max_variable_index(node.left), max_variable_index(node.right))
    if isinstance(node, Call):
        return max((max_variable_index(a) for a in node.args), default=0)
    return 0


def uses_point(node: Expr) -> bool:
    """True when ``node`` depends on the point (any ``xk`` or ``norm(x)``)."""
    if isinstance(node, (Var, PointVar)):
        return True
    if isinstance(node, Neg):
        return uses_point(node.operand)
    if isinstance(node, BinOp):
        return uses_point(node.left) or uses_point(node.right)
    if isinstance(node, Call):
        return any(uses_point(a) for a in node.args)
    return False


# ---------------------------------------------------------------------------
# evaluation

def _check(bad, message, node):
    if np.any(bad):
        if np.ndim(bad) == 0:
            raise EvaluationError(message, node)
        idx = np.unravel_index(int(np.argmax(bad)), np.shape(bad))
        raise EvaluationError(message, node, tuple(int(i) for i in idx))


def _power(base, expo, node):
    with np.errstate(all="ignore"):
        out = np.power(base, expo)
    _check(np.isnan(out) & ~np.isnan(base) & ~np.isnan(expo),
           "power has no real value", node)
    _check((base == 0) & (expo < 0), "division by zero", node)
    return out


def _eval(node, comps, env):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        if node.index > len(comps):
            raise EvaluationError(f"point has dimension {len(comps)}", node)
        return comps[node.index - 1]
    if isinstance(node, Const):
        return np.float64(CONSTANTS[node.name])
    if isinstance(node, Name):
        try:
            return env[node.name]
        except KeyError:
            raise EvaluationError(f"no value bound for {node.name!r}", node) from None
    if isinstance(node, PointVar):
        raise EvaluationError("bare point outside norm()", node)
    if isinstance(node, Neg):
        return -_eval(node.operand, comps, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, comps, env)
        b = _eval(node.right, comps, env)
        with np.errstate(all="ignore"):
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if node.op == "/":
                _check(b == 0, "division by zero", node)
                return a / b
        return _power(a, b, node)
    if isinstance(node, Call):
        name = node.name
        if name == "norm":
            if isinstance(node.args[0], PointVar):
                parts = list(comps)
            else:
                parts = [_eval(a, comps, env) for a in node.args]
            return np.sqrt(sum(np.square(p) for p in parts))
        args = [_eval(a, comps, env) for a in node.args]
        with np.errstate(all="ignore"):
            if name == "sin":
                return np.sin(args[0])
            if name == "cos":
                return np.cos(args[0])
            if name == "exp":
                return np.exp(args[0])
            if name == "abs":
                return np.abs(args[0])
            if name == "log":
                _check(args[0] <= 0, "log of non-positive value", node)
                return np.log(args[0])
            if name == "sqrt":
                _check(args[0] < 0, "sqrt of negative value", node)
                return np.sqrt(args[0])
            if name == "min":
                return np.minimum(args[0], args[1])
            if name == "max":
                return np.maximum(args[0], args[1])
        if name == "pow":
            return _power(args[0], args[1], node)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(e: Expr, point, env: Mapping[str, object] | None = None):
    """Evaluate ``e`` at ``point``.

    ``point`` is a sequence of n reals, or an array whose last axis has length
    n (the result then has the shape of the leading axes).  ``env`` binds the
    extra names declared at parse time.  Returns a float for scalar input.
    """
    pt = np.asarray(point, dtype=float)
    if pt.ndim == 0:
        raise ValueError("point must have at least one coordinate")
    comps = [pt[..., i] for i in range(pt.shape[-1])]
    env = {k: np.asarray(v, dtype=float) for k, v in (env or {}).items()}
    out = _eval(e, comps, env)
    shape = np.broadcast_shapes(pt.shape[:-1], *(np.shape(v) for v in env.values()))
    out = np.broadcast_to(np.asarray(out, dtype=float), shape)
    if out.ndim == 0:
        return float(out)
    return np.array(out)


# ---------------------------------------------------------------------------
# symbolic derivative

class NotDifferentiable(ExprError):
    pass


_ZERO, _ONE = Num(0.0), Num(1.0)


def _add(a, b):
    if a == _ZERO:
        return b
    if b == _ZERO:
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if b == _ZERO:
        return a
    if a == _ZERO:
        return Neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if a == _ZERO or b == _ZERO:
        return _ZERO
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    return BinOp("*", a, b)


def _div(a, b):
    if a == _ZERO:
        return _ZERO
    return a if b == _ONE else BinOp("/", a, b)


def _depends(node, k):
    if isinstance(node, Var):
        return node.index == k
    if isinstance(node, PointVar):
        return True
    if isinstance(node, Neg):
        return _depends(node.operand, k)
    if isinstance(node, BinOp):
        return _depends(node.left, k) or _depends(node.right, k)
    if isinstance(node, Call):
        return any(_depends(a, k) for a in node.args)
    return False


def differentiate(node: Expr, k: int) -> Expr:
    """Partial derivative of ``node`` with respect to ``xk``.

    ``min``, ``max`` and ``abs`` of an argument that depends on ``xk`` have
    no derivative everywhere and raise :class:`NotDifferentiable`.
    """
    if not _depends(node, k):
        return _ZERO
    if isinstance(node, Var):
        return _ONE
    if isinstance(node, Neg):
        d = differentiate(node.operand, k)
        return _ZERO if d == _ZERO else Neg(d)
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = differentiate(u, k), differentiate(v, k)
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        if node.op == "/":
            return _div(_sub(_mul(du, v), _mul(u, dv)), BinOp("^", v, Num(2.0)))
        return _dpow(node, u, v, du, dv)
    if isinstance(node, Call):
        name, args = node.name, node.args
        if name == "pow":
            return _dpow(node, args[0], args[1], differentiate(args[0], k),
                         differentiate(args[1], k))
        if name == "norm":
            if isinstance(args[0], PointVar):
                return _div(Var(k), node)
            acc = _ZERO
            for a in args:
                acc = _add(acc, _mul(a, differentiate(a, k)))
            return _div(acc, node)
        if name in ("min", "max", "abs"):
            raise NotDifferentiable(f"{name}() has no derivative everywhere")
        u = args[0]
        du = differentiate(u, k)
        if name == "sin":
            return _mul(Call("cos", (u,)), du)
        if name == "cos":
            return Neg(_mul(Call("sin", (u,)), du))
        if name == "exp":
            return _mul(node, du)
        if name == "log":
            return _div(du, u)
        if name == "sqrt":
            return _div(du, _mul(Num(2.0), node))
    raise TypeError(f"not an expression node: {node!r}")


def _dpow(node, u, v, du, dv):
    if dv == _ZERO:
        # v u^(v-1) u'
        return _mul(_mul(v, BinOp("^", u, _sub(v, _ONE))), du)
    # u^v (v' log u + v u' / u)
    return _mul(node, _add(_mul(dv, Call("log", (u,))), _div(_mul(v, du), u)))


def gradient(node: Expr, n: int) -> list:
    """``[d node / d x1, ..., d node / d xn]`` as expression trees."""
    return [differentiate(node, k) for k in range(1, n + 1)]
