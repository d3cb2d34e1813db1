"""A small operator-expression language evaluated on truncated Fock spaces.

Grammar (whitespace is insignificant)::

    expr    := term (('+' | '-') term)*
    term    := factor ('*' factor)*
    factor  := '-' factor | postfix
    postfix := primary ('^' INT)*
    primary := NUMBER | SYMBOL | 'dag' '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, which binds tighter than ``*``.
There is no implicit multiplication.  Numbers are decimal reals with an
optional trailing ``i`` marking them imaginary.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .fock import (
    FockConfig,
    OperatorMatrix,
    build_annihilation,
    build_com_rel,
    build_momentum,
    build_number,
    build_position,
    identity,
)

SYMBOLS = ("a1", "a2", "x1", "x2", "p1", "p2", "X", "P", "dx", "dp", "N1", "N2", "I")
_TWO_MODE_ONLY = {"a2", "x2", "p2", "N2", "X", "P", "dx", "dp"}


class OpExprError(ValueError):
    def __init__(self, message: str, column: int | None = None):
        self.column = column
        self.message = message
        where = f" at column {column}" if column is not None else ""
        super().__init__(f"{message}{where}")


class OpExprSyntaxError(OpExprError):
    pass


class UnknownSymbolError(OpExprError):
    pass


class ModeCountError(OpExprError):
    pass


@dataclass(frozen=True)
class Node:
    kind: str
    children: tuple = ()
    value: object = None
    span: tuple = field(default=(0, 0), compare=False)


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*^()])"
    r")"
)


@dataclass
class _Tok:
    kind: str
    text: str
    start: int
    end: int


def tokenize(text: str) -> list:
    toks, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos or m.lastgroup is None:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise OpExprSyntaxError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind), m.end()))
        pos = m.end()
    toks.append(_Tok("end", "", len(text), len(text)))
    return toks


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    @property
    def cur(self):
        return self.toks[self.i]

    def advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.cur
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise OpExprSyntaxError(f"{msg}, found {what}", tok.start + 1)

    def expect(self, text):
        if self.cur.text != text or self.cur.kind == "end":
            self.fail(f"expected {text!r}")
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.cur.kind != "end":
            self.fail("expected operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self.advance()
            rhs = self.term()
            kind = "add" if op.text == "+" else "sub"
            node = Node(kind, (node, rhs), None, (node.span[0], rhs.span[1]))
        return node

    def term(self):
        node = self.factor()
        while self.cur.kind == "op" and self.cur.text == "*":
            self.advance()
            rhs = self.factor()
            node = Node("mul", (node, rhs), None, (node.span[0], rhs.span[1]))
        return node

    def factor(self):
        if self.cur.kind == "op" and self.cur.text == "-":
            op = self.advance()
            inner = self.factor()
            return Node("neg", (inner,), None, (op.start, inner.span[1]))
        return self.postfix()

    def postfix(self):
        node = self.primary()
        while self.cur.kind == "op" and self.cur.text == "^":
            self.advance()
            tok = self.cur
            if tok.kind != "num" or not tok.text.isdigit():
                self.fail("exponent must be a nonnegative integer literal")
            self.advance()
            node = Node("pow", (node,), int(tok.text), (node.span[0], tok.end))
        return node

    def primary(self):
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            if tok.text.endswith("i"):
                value = complex(0.0, float(tok.text[:-1]))
            else:
                value = complex(float(tok.text), 0.0)
            return Node("scalar", (), value, (tok.start, tok.end))
        if tok.kind == "name":
            self.advance()
            if tok.text == "dag":
                self.expect("(")
                inner = self.expr()
                close = self.expect(")")
                return Node("dag", (inner,), None, (tok.start, close.end))
            if tok.text not in SYMBOLS:
                raise UnknownSymbolError(f"unknown symbol {tok.text!r}", tok.start + 1)
            return Node("symbol", (), tok.text, (tok.start, tok.end))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self.expr()
            close = self.expect(")")
            return Node(inner.kind, inner.children, inner.value, (tok.start, close.end))
        self.fail("expected a number, symbol, 'dag(' or '('")


def parse(text: str) -> Node:
    """Parse ``text`` into an AST; errors carry a 1-based column."""
    return _Parser(text).parse()


def _fmt_scalar(v: complex) -> str:
    if v.imag == 0:
        return repr(float(v.real))
    if v.real == 0:
        return repr(float(v.imag)) + "i"
    return f"({float(v.real)!r} + {float(v.imag)!r}i)"


def to_text(node: Node) -> str:
    """Fully parenthesised source text that reparses to the same tree."""
    k = node.kind
    if k == "scalar":
        return _fmt_scalar(node.value)
    if k == "symbol":
        return node.value
    if k in ("add", "sub", "mul"):
        op = {"add": "+", "sub": "-", "mul": "*"}[k]
        return f"({to_text(node.children[0])} {op} {to_text(node.children[1])})"
    if k == "pow":
        base = to_text(node.children[0])
        if node.children[0].kind == "neg":
            base = f"({base})"
        return f"{base}^{node.value}"
    if k == "dag":
        return f"dag({to_text(node.children[0])})"
    if k == "neg":
        return "-" + to_text(node.children[0])
    raise ValueError(f"unknown node kind {k!r}")


def sexpr(node: Node) -> str:
    """Compact prefix form used by the golden corpus, e.g. ``(sub (mul a1 a2) x1)``."""
    k = node.kind
    if k == "scalar":
        v = node.value
        return f"{v.imag:g}i" if v.imag else f"{v.real:g}"
    if k == "symbol":
        return node.value
    if k == "pow":
        return f"(pow {sexpr(node.children[0])} {node.value})"
    return "(" + " ".join([k] + [sexpr(c) for c in node.children]) + ")"


def _symbol_table(cfg: FockConfig):
    table = {"I": lambda: identity(cfg)}
    for m in range(cfg.mode_count):
        s = str(m + 1)
        table["a" + s] = lambda m=m: build_annihilation(cfg, m)
        table["x" + s] = lambda m=m: build_position(cfg, m)
        table["p" + s] = lambda m=m: build_momentum(cfg, m)
        table["N" + s] = lambda m=m: build_number(cfg, m)
    if cfg.mode_count == 2:
        names = ("X", "P", "dx", "dp")
        table.update({nm: (lambda i=i: build_com_rel(cfg)[i]) for i, nm in enumerate(names)})
    return table


def evaluate(ast: Node, cfg: FockConfig) -> OperatorMatrix:
    """Evaluate ``ast`` compositionally on the space described by ``cfg``."""
    table = _symbol_table(cfg)
    cache = {}

    def sym(node):
        name = node.value
        if name not in table:
            if name in _TWO_MODE_ONLY:
                raise ModeCountError(
                    f"symbol {name!r} needs two modes (mode_count={cfg.mode_count})",
                    node.span[0] + 1,
                )
            raise UnknownSymbolError(f"unknown symbol {name!r}", node.span[0] + 1)
        if name not in cache:
            cache[name] = table[name]()
        return cache[name]

    def ev(node) -> OperatorMatrix:
        k = node.kind
        if k == "scalar":
            return identity(cfg) * node.value
        if k == "symbol":
            return sym(node)
        if k == "add":
            return ev(node.children[0]) + ev(node.children[1])
        if k == "sub":
            return ev(node.children[0]) - ev(node.children[1])
        if k == "mul":
            return ev(node.children[0]) @ ev(node.children[1])
        if k == "pow":
            return ev(node.children[0]).power(node.value)
        if k == "dag":
            return ev(node.children[0]).dag
        if k == "neg":
            return -ev(node.children[0])
        raise ValueError(f"unknown node kind {k!r}")

    return ev(ast)


def eval_text(text: str, cfg: FockConfig) -> OperatorMatrix:
    return evaluate(parse(text), cfg)


# ``eval`` would shadow the builtin
eval_ast = evaluate
