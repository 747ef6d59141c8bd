"""Expression front end: parse rational functions of the die probabilities.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' uint)? | '-' factor
    atom   := number | 'sqrt' '(' number ')' | 'p' | 'p' uint | '(' expr ')'

In univariate mode `p` stands for p1 (the heads probability) and the
explicit names p0, p1 are also accepted. Constants, including sqrt of a
literal, are folded to doubles while parsing.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

from .errors import EvaluationError, ParseError, UnknownIdentifier
from .poly import Polynomial

KINDS = ("const", "var", "add", "sub", "mul", "div", "pow", "neg")
BINARY = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


@dataclass(frozen=True)
class ExprAst:
    kind: str
    value: float | int | None = None
    children: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown node kind {self.kind}")


def const(c):
    return ExprAst("const", float(c))


def var(i):
    return ExprAst("var", int(i))


_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Parser:
    def __init__(self, text: str, m: int, univariate: bool):
        self.text = text
        self.m = m
        self.univariate = univariate
        self.pos = 0

    def error(self, msg, pos=None, cls=ParseError):
        pos = self.pos if pos is None else pos
        offset = len(self.text[:pos].encode("utf-8"))
        return cls(msg, offset, self.text)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            raise self.error(f"expected {ch!r}, found {found}")
        self.pos += 1

    def number(self):
        self.skip()
        mt = _NUMBER.match(self.text, self.pos)
        if not mt:
            raise self.error("expected a number")
        self.pos = mt.end()
        return float(mt.group(0))

    def parse(self) -> ExprAst:
        node = self.expr()
        if self.peek():
            raise self.error(f"unexpected {self.peek()!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            node = ExprAst("add" if op == "+" else "sub", None, (node, self.term()))
        return node

    def term(self):
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            node = ExprAst("mul" if op == "*" else "div", None, (node, self.factor()))
        return node

    def factor(self):
        if self.peek() == "-":
            self.pos += 1
            return ExprAst("neg", None, (self.factor(),))
        node = self.atom()
        if self.peek() == "^":
            self.pos += 1
            node = ExprAst("pow", self.exponent(), (node,))
        return node

    def exponent(self):
        start = self.pos
        ch = self.peek()
        if ch == "-":
            raise self.error("negative exponents are not allowed")
        if not (ch.isdigit() or ch == "."):
            found = repr(ch) if ch else "end of input"
            raise self.error(f"expected an unsigned integer exponent, found {found}")
        mt = _NUMBER.match(self.text, self.pos)
        if not mt.group(0).isdigit():
            raise self.error("fractional exponents are not allowed", start)
        self.pos = mt.end()
        return int(mt.group(0))

    def atom(self):
        ch = self.peek()
        start = self.pos
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if ch.isdigit() or ch == ".":
            return const(self.number())
        mt = _IDENT.match(self.text, self.pos)
        if not mt:
            found = repr(ch) if ch else "end of input"
            raise self.error(f"unexpected {found}")
        name = mt.group(0)
        self.pos = mt.end()
        if name == "sqrt":
            self.expect("(")
            val = self.number()
            self.expect(")")
            return const(math.sqrt(val))
        if name == "p" and self.univariate:
            return var(1)
        if re.fullmatch(r"p\d+", name):
            idx = int(name[1:])
            if idx > self.m:
                raise self.error(f"variable {name} exceeds m={self.m}", start)
            return var(idx)
        raise self.error(f"unknown identifier {name!r}", start, UnknownIdentifier)


def parse(text: str, m: int = 1, univariate: bool | None = None) -> ExprAst:
    """Parse `text` into an ExprAst over variables p0..pm."""
    if univariate is None:
        univariate = m == 1
    if univariate and m != 1:
        raise ValueError("univariate mode implies m = 1")
    return _Parser(text, m, univariate).parse()


def pretty(node: ExprAst, univariate: bool = False) -> str:
    """Render an AST so that parsing the output gives the same tree."""
    k = node.kind
    if k == "const":
        return repr(node.value)
    if k == "var":
        return "p" if univariate and node.value == 1 else f"p{node.value}"
    if k in BINARY:
        a, b = (pretty(c, univariate) for c in node.children)
        return f"({a} {BINARY[k]} {b})"
    child = node.children[0]
    inner = pretty(child, univariate)
    if child.kind not in ("const", "var") and not inner.startswith("("):
        inner = f"({inner})"
    if k == "pow":
        return f"{inner}^{node.value}"
    return f"-{inner}"


def evaluate(node: ExprAst, point: Sequence[float] | float) -> float:
    if isinstance(point, (int, float)):
        point = (1.0 - point, float(point))
    k = node.kind
    if k == "const":
        return node.value
    if k == "var":
        return float(point[node.value])
    if k == "neg":
        return -evaluate(node.children[0], point)
    if k == "pow":
        return evaluate(node.children[0], point) ** node.value
    a = evaluate(node.children[0], point)
    b = evaluate(node.children[1], point)
    if k == "add":
        return a + b
    if k == "sub":
        return a - b
    if k == "mul":
        return a * b
    if b == 0.0:
        raise EvaluationError("division by zero")
    return a / b


def substitute(node: ExprAst, mapping: dict) -> ExprAst:
    """Replace variable nodes by the ASTs in `mapping` (missing ones are kept)."""
    if node.kind == "var":
        return mapping.get(node.value, node)
    if node.kind == "const":
        return node
    return ExprAst(node.kind, node.value, tuple(substitute(c, mapping) for c in node.children))


# rational arithmetic on (numerator, denominator) pairs

def _same(a: Polynomial, b: Polynomial) -> bool:
    return a.canonical_eq(b)


def _add(x, y):
    (a, b), (c, d) = x, y
    if _same(b, d):
        return a + c, b
    return a * d + c * b, b * d


def _neg(x):
    return -x[0], x[1]


def _mul(x, y):
    (a, b), (c, d) = x, y
    return a * c, b * d


def _div(x, y):
    (a, b), (c, d) = x, y
    if c.is_zero():
        raise EvaluationError("division by the zero polynomial")
    if _same(b, d):
        return a, c
    return a * d, b * c


def to_fraction(node: ExprAst, m: int) -> tuple[Polynomial, Polynomial]:
    """Fold an AST bottom-up into a numerator/denominator polynomial pair."""
    n = m + 1
    k = node.kind
    if k == "const":
        return Polynomial.const(node.value, n), Polynomial.const(1.0, n)
    if k == "var":
        return Polynomial.var(node.value, n), Polynomial.const(1.0, n)
    if k == "neg":
        return _neg(to_fraction(node.children[0], m))
    if k == "pow":
        a, b = to_fraction(node.children[0], m)
        return a ** node.value, b ** node.value
    x = to_fraction(node.children[0], m)
    y = to_fraction(node.children[1], m)
    if k == "add":
        return _add(x, y)
    if k == "sub":
        return _add(x, _neg(y))
    if k == "mul":
        return _mul(x, y)
    return _div(x, y)


@dataclass
class RationalTarget:
    """Target die law f = (D_0/E_0, ..., D_v/E_v) on the (m+1)-face simplex."""

    m: int
    entries: list
    sources: list | None = None

    @property
    def v(self):
        return len(self.entries) - 1

    def evaluate(self, point) -> list[float]:
        if isinstance(point, (int, float)):
            point = (1.0 - point, float(point))
        out = []
        for d, e in self.entries:
            den = e.eval(point)
            if den == 0.0:
                raise EvaluationError("denominator vanishes at the point")
            out.append(d.eval(point) / den)
        return out


def to_rational_target(asts, m: int, v: int | None = None, complement: str | None = None,
                       univariate: bool | None = None) -> RationalTarget:
    """Turn parsed entries into a RationalTarget.

    With complement='last' (or 'first') one entry fewer than v+1 is given
    and the missing one is synthesized as 1 minus the sum of the others.
    """
    if univariate is None:
        univariate = m == 1
    asts = list(asts)
    fracs = [to_fraction(a, m) for a in asts]
    sources = [pretty(a, univariate) for a in asts]
    if complement is not None:
        n = m + 1
        rest = (Polynomial.const(1.0, n), Polynomial.const(1.0, n))
        for fr in fracs:
            rest = _add(rest, _neg(fr))
        text = "1 - (" + " + ".join(sources) + ")"
        if complement == "last":
            fracs.append(rest)
            sources.append(text)
        elif complement == "first":
            fracs.insert(0, rest)
            sources.insert(0, text)
        else:
            raise ValueError("complement must be 'first', 'last' or None")
    if v is not None and len(fracs) != v + 1:
        raise ValueError(f"expected {v + 1} entries, got {len(fracs)}")
    if len(fracs) < 2:
        raise ValueError("a target needs at least two outcomes")
    return RationalTarget(m, fracs, sources)


def parse_target(texts, m: int = 1, v: int | None = None, complement: str | None = None,
                 univariate: bool | None = None) -> RationalTarget:
    if isinstance(texts, str):
        texts = [t for t in texts.split(";") if t.strip()]
    asts = [parse(t, m, univariate) for t in texts]
    return to_rational_target(asts, m, v, complement, univariate)
