"""Expression language for the habitat profile m(x).

Grammar (see ``docs/grammar.md``)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | "x" | "pi" | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``, and it is
right-associative: ``2^3^2 == 512``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import HeteroHopfError

MAX_DEPTH = 64
MAX_NODES = 4096
H1_TOLERANCE = 1e-9
DEFAULT_SAMPLES = 256


class ExprError(HeteroHopfError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifier(ExprError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class ArityError(ExprError):
    def __init__(self, name, expected, got, offset):
        self.name = name
        self.offset = offset
        super().__init__(
            f"{name}() takes {expected} argument(s), got {got} (offset {offset})"
        )


class LimitExceeded(ExprError):
    pass


class DomainError(ExprError, ArithmeticError):
    pass


class H1Violation(ExprError):
    """Profile fails the nonnegative / non-constant requirement."""

    NEGATIVE = "NegativeValue"
    CONSTANT = "Constant"

    def __init__(self, kind, message):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Const, Var, Neg, BinOp, Call]

# name -> arity
FUNCTIONS = {
    "exp": 1,
    "log": 1,
    "sin": 1,
    "cos": 1,
    "tanh": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
}
CONSTANTS = {"pi": math.pi}


# --- parser ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    data = source.encode("utf-8")
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            offset = len(source[:pos].encode("utf-8"))
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", offset)
        kind = match.lastgroup
        if kind != "ws":
            offset = len(source[:pos].encode("utf-8"))
            tokens.append(_Token(kind, match.group(), offset))
        pos = match.end()
    tokens.append(_Token("end", "", len(data)))
    return tokens


class _Parser:
    def __init__(self, source, max_depth, max_nodes):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.depth = 0
        self.nodes = 0
        self.max_depth = max_depth
        self.max_nodes = max_nodes

    @property
    def tok(self):
        return self.tokens[self.pos]

    def advance(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, text):
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", self.tok.offset)
        return self.advance()

    def make(self, node):
        self.nodes += 1
        if self.nodes > self.max_nodes:
            raise LimitExceeded(f"expression exceeds {self.max_nodes} nodes")
        return node

    def enter(self):
        self.depth += 1
        if self.depth > self.max_depth:
            raise LimitExceeded(f"expression nesting exceeds depth {self.max_depth}")

    def leave(self):
        self.depth -= 1

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected token {self.tok.text!r}", self.tok.offset)
        return node

    def expr(self):
        self.enter()
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = self.make(BinOp(op, node, self.term()))
        self.leave()
        return node

    def term(self):
        self.enter()
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = self.make(BinOp(op, node, self.unary()))
        self.leave()
        return node

    def unary(self):
        self.enter()
        if self.tok.text == "-":
            self.advance()
            node = self.make(Neg(self.unary()))
        else:
            node = self.power()
        self.leave()
        return node

    def power(self):
        self.enter()
        node = self.atom()
        if self.tok.text == "^":
            self.advance()
            node = self.make(BinOp("^", node, self.unary()))
        self.leave()
        return node

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return self.make(Const(float(tok.text)))
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if self.tok.text == "(":
                if name not in FUNCTIONS:
                    raise UnknownIdentifier(name, tok.offset)
                self.advance()
                args = [self.expr()]
                while self.tok.text == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[name]:
                    raise ArityError(name, FUNCTIONS[name], len(args), tok.offset)
                return self.make(Call(name, tuple(args)))
            if name == "x":
                return self.make(Var())
            if name in CONSTANTS:
                return self.make(Const(CONSTANTS[name]))
            if name in FUNCTIONS:
                raise ArityError(name, FUNCTIONS[name], 0, tok.offset)
            raise UnknownIdentifier(name, tok.offset)
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", tok.offset)


def parse(source: str, max_depth: int = MAX_DEPTH, max_nodes: int = MAX_NODES) -> Node:
    """Parse ``source`` into an immutable AST.

    Raises ExprSyntaxError (with byte offset), UnknownIdentifier, ArityError or
    LimitExceeded.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source, max_depth, max_nodes).parse()


def to_source(node: Node) -> str:
    """Fully parenthesized text that reparses to an equivalent tree."""
    if isinstance(node, Const):
        return repr(node.value) if node.value >= 0 else f"(-{repr(-node.value)})"
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


# --- evaluation ------------------------------------------------------------


def _check(value, what):
    if not math.isfinite(value):
        raise DomainError(f"{what} produced a non-finite value")
    return value


def evaluate(node: Node, x: float) -> float:
    """Evaluate at a single point; raises DomainError instead of returning nan/inf."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(x)
    if isinstance(node, Neg):
        return -evaluate(node.operand, x)
    if isinstance(node, BinOp):
        a = evaluate(node.left, x)
        b = evaluate(node.right, x)
        op = node.op
        if op == "+":
            return _check(a + b, "addition")
        if op == "-":
            return _check(a - b, "subtraction")
        if op == "*":
            return _check(a * b, "multiplication")
        if op == "/":
            if b == 0.0:
                raise DomainError(f"division by zero at x={x}")
            return _check(a / b, "division")
        if a < 0 and not float(b).is_integer():
            raise DomainError(f"negative base {a} to non-integer power at x={x}")
        if a == 0 and b < 0:
            raise DomainError(f"zero to negative power at x={x}")
        try:
            return _check(math.pow(a, b), "power")
        except OverflowError:
            raise DomainError(f"power overflow at x={x}") from None
    if isinstance(node, Call):
        args = [evaluate(a, x) for a in node.args]
        name = node.name
        if name == "log":
            if args[0] <= 0:
                raise DomainError(f"log of nonpositive argument {args[0]} at x={x}")
            return math.log(args[0])
        if name == "exp":
            try:
                return _check(math.exp(args[0]), "exp")
            except OverflowError:
                raise DomainError(f"exp overflow at x={x}") from None
        if name == "min":
            return min(args)
        if name == "max":
            return max(args)
        return _check(_SCALAR_FUNCS[name](args[0]), name)
    raise TypeError(f"not an expression node: {node!r}")


_SCALAR_FUNCS = {"sin": math.sin, "cos": math.cos, "tanh": math.tanh, "abs": abs}


def evaluate_array(node: Node, xs) -> np.ndarray:
    """Vectorized evaluation over an array of points.

    Same semantics as :func:`evaluate`; any offending point raises DomainError.
    """
    xs = np.asarray(xs, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval_vec(node, xs)
    out = np.broadcast_to(out, xs.shape).astype(float, copy=True)
    if not np.all(np.isfinite(out)):
        bad = xs[~np.isfinite(out)]
        raise DomainError(f"non-finite value at x={bad.flat[0]}")
    return out


def _eval_vec(node, xs):
    if isinstance(node, Const):
        return np.full(xs.shape, node.value)
    if isinstance(node, Var):
        return xs
    if isinstance(node, Neg):
        return -_eval_vec(node.operand, xs)
    if isinstance(node, BinOp):
        a = _eval_vec(node.left, xs)
        b = _eval_vec(node.right, xs)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if np.any(b == 0.0):
                raise DomainError(f"division by zero at x={xs[b == 0.0].flat[0]}")
            return a / b
        bad = (a < 0) & (b != np.floor(b))
        if np.any(bad):
            raise DomainError("negative base to non-integer power")
        return np.power(a, b)
    if isinstance(node, Call):
        args = [_eval_vec(a, xs) for a in node.args]
        name = node.name
        if name == "log":
            if np.any(args[0] <= 0):
                raise DomainError("log of nonpositive argument")
            return np.log(args[0])
        if name == "min":
            return np.minimum(args[0], args[1])
        if name == "max":
            return np.maximum(args[0], args[1])
        return getattr(np, name)(args[0])
    raise TypeError(f"not an expression node: {node!r}")


# --- profiles --------------------------------------------------------------


def chebyshev_points(n: int) -> np.ndarray:
    """Chebyshev extrema mapped to [0, 1], endpoints included."""
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(np.pi * k / (n - 1)))


@dataclass(frozen=True)
class EnvProfile:
    """A validated heterogeneity profile m(x) on [0, 1].

    Positivity is only checked at sample points; this is a heuristic, not a proof.
    """

    source: str
    ast: Node = field(repr=False)
    min_sample: float
    max_sample: float
    variation: float
    constant: bool = False

    def __call__(self, x):
        if np.ndim(x) == 0:
            return evaluate(self.ast, float(x))
        return evaluate_array(self.ast, x)

    @property
    def key(self) -> str:
        """Canonical text used as a cache key."""
        return to_source(self.ast)


def validate_profile(
    ast: Node,
    n_samples: int = DEFAULT_SAMPLES,
    tolerance: float = H1_TOLERANCE,
    allow_constant: bool = False,
    source: str | None = None,
) -> EnvProfile:
    if n_samples < 64:
        raise ValueError("n_samples must be at least 64")
    xs = chebyshev_points(n_samples)
    values = evaluate_array(ast, xs)
    lo = float(values.min())
    hi = float(values.max())
    variation = hi - lo
    if lo < 0:
        where = float(xs[np.argmin(values)])
        raise H1Violation(H1Violation.NEGATIVE, f"m({where:.6g}) = {lo:.6g} < 0")
    constant = variation <= tolerance
    if constant and not allow_constant:
        raise H1Violation(
            H1Violation.CONSTANT, f"variation {variation:.3g} <= tolerance {tolerance:g}"
        )
    return EnvProfile(
        source=source if source is not None else to_source(ast),
        ast=ast,
        min_sample=lo,
        max_sample=hi,
        variation=variation,
        constant=constant,
    )


def load_profile(source: str, allow_constant: bool = False, n_samples: int = DEFAULT_SAMPLES) -> EnvProfile:
    """Parse and validate in one step."""
    return validate_profile(
        parse(source), n_samples=n_samples, allow_constant=allow_constant, source=source
    )
