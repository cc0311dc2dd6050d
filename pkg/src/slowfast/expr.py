"""A small arithmetic expression language.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := power (('*' | '/') power)*
    power   := unary ('^' power)?            # right-associative
    unary   := '-' unary | primary
    primary := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Unary minus binds tighter than ``^``, so ``-x^2`` means ``(-x)^2``; write
``-(x^2)`` for the other reading. There is no implicit multiplication.

Supported functions: sin, cos, exp, log, sqrt, cbrt (real, signed), abs.

A constant exponent of exactly 1/3 is evaluated as the signed real cube
root, so ``x^(1/3)`` stays real for negative ``x``. ``cbrt(x)`` is the
preferred spelling; :func:`power_warnings` flags the literal form.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (ExprSyntaxError, NonFiniteResult, UnboundVariable,
                     UnknownFunction, UnknownVariable)

__all__ = [
    "Expr", "Num", "Var", "Neg", "BinOp", "Call",
    "parse_expr", "eval_expr", "to_text", "free_variables", "is_constant",
    "power_warnings", "compile_vector", "compile_scalar", "cbrt",
]


def cbrt(x: float) -> float:
    """Real cube root, sign preserving."""
    if x == 0.0 or not math.isfinite(x):
        return x
    r = math.copysign(abs(x) ** (1.0 / 3.0), x)
    # one Newton polish; brings r**3 to within a few ulp of x
    return r - (r * r * r - x) / (3.0 * r * r)


def _log(x):
    if x <= 0.0:
        raise NonFiniteResult(f"log of non-positive value {x!r}")
    return math.log(x)


def _sqrt(x):
    if x < 0.0:
        raise NonFiniteResult(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        raise NonFiniteResult(f"exp overflow at {x!r}") from None


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": _exp,
    "log": _log,
    "sqrt": _sqrt,
    "cbrt": cbrt,
    "abs": abs,
}

_ONE_THIRD = 1.0 / 3.0


# -- AST --------------------------------------------------------------------

class Expr:
    """Base class of expression nodes. Nodes are immutable and compare structurally."""

    __slots__ = ()

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


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
    func: str
    arg: Expr


# -- tokenizer / parser -----------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _byte_offset(text, pos):
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text, names):
        self.text = text
        self.names = names
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        where = "end of input" if tok[0] == "end" else repr(tok[1])
        return ExprSyntaxError(f"{message}, found {where}", _byte_offset(self.text, tok[2]))

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] != "op":
            raise self.error(f"expected {value!r}")
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error("unexpected token")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.power()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.power())
        return node

    def power(self):
        base = self.unary()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.advance()
            return BinOp("^", base, self.power())
        return base

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.advance()
            return Num(float(value))
        if kind == "name":
            self.advance()
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if value not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {value!r}")
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            if value in FUNCTIONS:
                raise self.error(f"function {value!r} needs an argument list")
            if self.names is not None and value not in self.names:
                raise UnknownVariable(f"undeclared variable {value!r}")
            return Var(value)
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise self.error("expected a number, name or '('")


def parse_expr(text: str, names: Iterable[str] | None = None) -> Expr:
    """Parse ``text`` into an expression tree.

    If ``names`` is given, every variable must be one of them.
    """
    return _Parser(text, None if names is None else frozenset(names)).parse()


# -- printing ---------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 4
    return 5


def _wrap(node, min_prec):
    s = to_text(node)
    return f"({s})" if _prec(node) < min_prec else s


def to_text(node: Expr) -> str:
    """Render with the minimal parentheses that re-parse to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, 4)
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        if node.op == "^":
            return f"{_wrap(node.left, 4)}^{_wrap(node.right, 3)}"
        return f"{_wrap(node.left, p)} {node.op} {_wrap(node.right, p + 1)}"
    raise TypeError(f"not an expression node: {node!r}")


# -- analysis ---------------------------------------------------------------

def free_variables(node: Expr) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, Call):
        return free_variables(node.arg)
    return free_variables(node.left) | free_variables(node.right)


def is_constant(node: Expr) -> bool:
    return not free_variables(node)


def power_warnings(node: Expr) -> list[str]:
    """Messages for fractional constant powers of non-constant bases."""
    out = []

    def visit(n):
        if isinstance(n, BinOp):
            if n.op == "^" and is_constant(n.right) and not is_constant(n.left):
                try:
                    p = eval_expr(n.right, {})
                except NonFiniteResult:
                    p = None
                if p is not None and p != int(p):
                    hint = "; write cbrt(...) instead" if p == _ONE_THIRD else ""
                    out.append(f"fractional power {to_text(n)} may see a negative base{hint}")
            visit(n.left)
            visit(n.right)
        elif isinstance(n, Neg):
            visit(n.operand)
        elif isinstance(n, Call):
            visit(n.arg)

    visit(node)
    return out


# -- evaluation -------------------------------------------------------------

def _power(base, p):
    """``base ** p`` for a constant exponent ``p``."""
    if p == int(p):
        try:
            return base ** int(p)
        except ZeroDivisionError:
            raise NonFiniteResult("zero raised to a negative power") from None
    if p == _ONE_THIRD:
        return cbrt(base)
    if base < 0.0:
        raise NonFiniteResult(f"negative base {base!r} to fractional power {p!r}")
    return base ** p


def _general_power(base, p):
    """``base ** p`` for a state-dependent exponent, via exp(p log base)."""
    return _exp(p * _log(base))


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return float(env[node.name])
        except KeyError:
            raise UnboundVariable(f"variable {node.name!r} is not bound") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, env))
    a = _eval(node.left, env)
    op = node.op
    if op == "^":
        if is_constant(node.right):
            return _power(a, _eval(node.right, env))
        return _general_power(a, _eval(node.right, env))
    b = _eval(node.right, env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0.0:
        raise NonFiniteResult("division by zero")
    return a / b


def eval_expr(node: Expr, env: Mapping[str, float]) -> float:
    """Evaluate ``node`` in IEEE double arithmetic.

    Raises :class:`NonFiniteResult` when the value is not a finite real.
    """
    try:
        value = _eval(node, env)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise NonFiniteResult(str(exc)) from None
    if not math.isfinite(value):
        raise NonFiniteResult(f"non-finite result {value!r}")
    return value


# -- compilation ------------------------------------------------------------

def _source(node):
    if isinstance(node, Num):
        v = float(node.value)
        return repr(v) if math.isfinite(v) else f"float('{v!r}')"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_source(node.operand)})"
    if isinstance(node, Call):
        return f"_F_{node.func}({_source(node.arg)})"
    op = node.op
    if op == "^":
        if is_constant(node.right):
            try:
                p = eval_expr(node.right, {})
            except NonFiniteResult:
                p = math.nan
            if not math.isfinite(p):
                # left to fail at call time, like the interpreter
                return f"_pow({_source(node.left)}, {_source(node.right)})"
            if p == int(p) and abs(p) < 64:
                return f"_pow({_source(node.left)}, {int(p)})"
            return f"_pow({_source(node.left)}, {p!r})"
        return f"_gpow({_source(node.left)}, {_source(node.right)})"
    if op == "/":
        return f"_div({_source(node.left)}, {_source(node.right)})"
    return f"({_source(node.left)} {op} {_source(node.right)})"


def _div(a, b):
    if b == 0.0:
        raise NonFiniteResult("division by zero")
    return a / b


_NAMESPACE = {f"_F_{k}": v for k, v in FUNCTIONS.items()}
_NAMESPACE.update(_pow=_power, _gpow=_general_power, _div=_div)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def _check_ident(name):
    if not _IDENT.match(name) or name.startswith("_") or name in FUNCTIONS:
        raise UnknownVariable(f"invalid variable name {name!r}")


def _build(source, name):
    ns = dict(_NAMESPACE)
    exec(compile(source, f"<slowfast:{name}>", "exec"), ns)
    return ns[name]


def compile_vector(exprs: Sequence[Expr], groups: Sequence[Sequence[str]],
                   scalars: Sequence[str] = ()) -> Callable:
    """Compile a list of expressions into one fast Python function.

    ``groups`` name the components of each vector argument, ``scalars`` the
    trailing scalar arguments. For ``groups=[("x1", "x2"), ("y1",)]`` and
    ``scalars=("t",)`` the result is ``fn(z, y, t) -> list[float]``.
    The function agrees with :func:`eval_expr` on every input.
    """
    params = [f"_a{k}" for k in range(len(groups))] + list(scalars)
    lines = [f"def _fn({', '.join(params)}):"]
    for k, names in enumerate(groups):
        for nm in names:
            _check_ident(nm)
        if names:
            target = ", ".join(names) + ("," if len(names) == 1 else "")
            lines.append(f"    {target} = _a{k}.tolist() if hasattr(_a{k}, 'tolist') else _a{k}")
    for nm in scalars:
        _check_ident(nm)
    body = ", ".join(_source(e) for e in exprs)
    lines.append(f"    return [{body}]")
    raw = _build("\n".join(lines), "_fn")

    def fn(*args):
        try:
            return raw(*args)
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise NonFiniteResult(str(exc)) from None

    fn.source = "\n".join(lines)
    return fn


def compile_scalar(expr: Expr, args: Sequence[str]) -> Callable[..., float]:
    """Compile ``expr`` into ``fn(*args) -> float``."""
    for nm in args:
        _check_ident(nm)
    src = f"def _fn({', '.join(args)}):\n    return {_source(expr)}"
    raw = _build(src, "_fn")

    def fn(*vals):
        try:
            return float(raw(*vals))
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise NonFiniteResult(str(exc)) from None

    return fn
