"""Mini imperative language over integers: AST, parser, pretty-printer.

Program files (``.sx``) look like::

    // sum of absolute values
    sym int x;
    sym int y;
    if (x < 0) { x = 0 - x; }
    while (y > 0) { y = y - 1; }
    assert(x >= 0);
    print(x + y);

Statements are assignments, two-way ``if``/``else``, bounded ``while``,
``assert``, ``error("msg")`` and ``print``.  Expressions are linear apart
from integer division; multiplying two non-constant expressions is rejected
at parse time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

RELATIONS = ("<", "<=", ">", ">=", "==", "!=")

_NEGATED = {"<": ">=", ">=": "<", ">": "<=", "<=": ">", "==": "!=", "!=": "=="}


# -- expressions --------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "IntExpr"


@dataclass(frozen=True)
class Add:
    left: "IntExpr"
    right: "IntExpr"


@dataclass(frozen=True)
class Sub:
    left: "IntExpr"
    right: "IntExpr"


@dataclass(frozen=True)
class Mul:
    left: "IntExpr"
    right: "IntExpr"


@dataclass(frozen=True)
class Div:
    left: "IntExpr"
    right: "IntExpr"


IntExpr = Union[Num, Var, Neg, Add, Sub, Mul, Div]


@dataclass(frozen=True)
class Cond:
    left: IntExpr
    op: str
    right: IntExpr

    def __post_init__(self):
        if self.op not in RELATIONS:
            raise ValueError(f"unknown relation {self.op!r}")


def negate(c: Cond) -> Cond:
    """Complement of a comparison; always another comparison."""
    return Cond(c.left, _NEGATED[c.op], c.right)


# -- statements ---------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    target: str
    expr: IntExpr


@dataclass(frozen=True)
class If:
    cond: Cond
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class While:
    cond: Cond
    body: tuple


@dataclass(frozen=True)
class Assert:
    cond: Cond


@dataclass(frozen=True)
class Error:
    message: str


@dataclass(frozen=True)
class Print:
    expr: IntExpr


Stmt = Union[Assign, If, While, Assert, Error, Print]


@dataclass(frozen=True)
class Program:
    inputs: tuple
    body: tuple


# -- errors -------------------------------------------------------------------


class LangError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class ParseError(LangError):
    def __init__(self, message: str, line: int, col: int, expected=()):
        if expected:
            message = f"{message}; expected {' or '.join(expected)}"
        super().__init__(message, line, col)
        self.expected = tuple(expected)


class SemanticError(LangError):
    def __init__(self, message: str, line: int, col: int, name: str):
        super().__init__(message, line, col)
        self.name = name


# -- tokenizer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op><=|>=|==|!=|[-+*/<>=!(){};,])
    """,
    re.VERBOSE,
)

KEYWORDS = {"sym", "int", "if", "else", "while", "assert", "error", "print"}


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'ident', 'kw', 'string', 'op', 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident" and text in KEYWORDS:
            tokens.append(Token("kw", text, line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser -------------------------------------------------------------------


def _has_var(e) -> bool:
    if isinstance(e, Num):
        return False
    if isinstance(e, Var):
        return True
    if isinstance(e, Neg):
        return _has_var(e.operand)
    return _has_var(e.left) or _has_var(e.right)


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0
        # statement -> (line, col), used by the semantic pass
        self.where = {}

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, *expected):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"unexpected {found}", t.line, t.col, expected)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "kw"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.tok
        if not self.accept(text):
            self.fail(repr(text))
        return t

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ident":
            self.fail("identifier")
        self.i += 1
        return t

    def program(self):
        inputs = []
        while self.tok.text == "sym" and self.tok.kind == "kw":
            self.i += 1
            self.expect("int")
            while True:
                t = self.ident()
                inputs.append(t)
                if not self.accept(","):
                    break
            self.expect(";")
        body = self.block_items(top=True)
        if self.tok.kind != "eof":
            self.fail("statement")
        return inputs, body

    def block_items(self, top=False):
        items = []
        while True:
            t = self.tok
            if t.kind == "eof" or (t.kind == "op" and t.text == "}"):
                break
            items.append(self.statement())
        return tuple(items)

    def block(self):
        self.expect("{")
        items = self.block_items()
        self.expect("}")
        return items

    def statement(self):
        t = self.tok
        if t.kind == "kw":
            if t.text == "if":
                self.i += 1
                self.expect("(")
                c = self.cond()
                self.expect(")")
                then = self.block()
                orelse = ()
                if self.accept("else"):
                    orelse = self.block()
                stmt = If(c, then, orelse)
            elif t.text == "while":
                self.i += 1
                self.expect("(")
                c = self.cond()
                self.expect(")")
                stmt = While(c, self.block())
            elif t.text == "assert":
                self.i += 1
                self.expect("(")
                c = self.cond()
                self.expect(")")
                self.expect(";")
                stmt = Assert(c)
            elif t.text == "error":
                self.i += 1
                self.expect("(")
                s = self.tok
                if s.kind != "string":
                    self.fail("string literal")
                self.i += 1
                self.expect(")")
                self.expect(";")
                stmt = Error(_unquote(s.text))
            elif t.text == "print":
                self.i += 1
                self.expect("(")
                e = self.expr()
                self.expect(")")
                self.expect(";")
                stmt = Print(e)
            else:
                self.fail("statement")
        elif t.kind == "ident":
            self.i += 1
            self.expect("=")
            e = self.expr()
            self.expect(";")
            stmt = Assign(t.text, e)
        else:
            self.fail("statement")
        self.where.setdefault(id(stmt), (t.line, t.col))
        return stmt

    def cond(self) -> Cond:
        if self.accept("!"):
            self.expect("(")
            c = self.cond()
            self.expect(")")
            return negate(c)
        left = self.expr()
        t = self.tok
        if t.kind == "op" and t.text in RELATIONS:
            self.i += 1
            return Cond(left, t.text, self.expr())
        self.fail(*(repr(r) for r in RELATIONS))

    def expr(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            t = self.tok
            self.i += 1
            right = self.unary()
            if t.text == "*":
                if _has_var(left) and _has_var(right):
                    raise ParseError("product of two non-constant expressions", t.line, t.col)
                left = Mul(left, right)
            else:
                left = Div(left, right)
        return left

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(int(t.text))
        if t.kind == "ident":
            self.i += 1
            return Var(t.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.fail("expression")


def _unquote(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text[1:-1])


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _expr_vars(e):
    if isinstance(e, Var):
        yield e.name
    elif isinstance(e, Neg):
        yield from _expr_vars(e.operand)
    elif not isinstance(e, Num):
        yield from _expr_vars(e.left)
        yield from _expr_vars(e.right)


def _check_defined(stmts, defined: frozenset, where) -> frozenset:
    """Definite-assignment pass; returns the set defined after ``stmts``."""

    def use(expr, stmt):
        for name in _expr_vars(expr):
            if name not in defined:
                line, col = where.get(id(stmt), (0, 0))
                raise SemanticError(f"use of undeclared or unassigned variable {name!r}", line, col, name)

    for s in stmts:
        if isinstance(s, Assign):
            use(s.expr, s)
            defined = defined | {s.target}
        elif isinstance(s, (Assert,)):
            use(s.cond.left, s)
            use(s.cond.right, s)
        elif isinstance(s, Print):
            use(s.expr, s)
        elif isinstance(s, If):
            use(s.cond.left, s)
            use(s.cond.right, s)
            a = _check_defined(s.then, defined, where)
            b = _check_defined(s.orelse, defined, where)
            defined = a & b
        elif isinstance(s, While):
            use(s.cond.left, s)
            use(s.cond.right, s)
            _check_defined(s.body, defined, where)
    return defined


def parse_program(source: str) -> Program:
    """Parse and validate ``.sx`` source; raises ParseError or SemanticError."""
    p = _Parser(source)
    inputs, body = p.program()
    seen = set()
    for t in inputs:
        if t.text in seen:
            raise SemanticError(f"duplicate declaration of {t.text!r}", t.line, t.col, t.text)
        seen.add(t.text)
    _check_defined(body, frozenset(seen), p.where)
    return Program(tuple(t.text for t in inputs), body)


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


# -- pretty-printer -----------------------------------------------------------


def format_expr(e, prec: int = 0) -> str:
    # prec: 0 additive context, 1 right operand of +/-, 2 multiplicative, 3 unary
    if isinstance(e, Num):
        s = str(e.value)
        return s if e.value >= 0 else f"({s})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + format_expr(e.operand, 3)
    if isinstance(e, (Add, Sub)):
        op = "+" if isinstance(e, Add) else "-"
        s = f"{format_expr(e.left, 0)} {op} {format_expr(e.right, 1)}"
        return f"({s})" if prec >= 1 else s
    op = "*" if isinstance(e, Mul) else "/"
    s = f"{format_expr(e.left, 2)} {op} {format_expr(e.right, 3)}"
    return f"({s})" if prec >= 3 else s


def format_cond(c: Cond) -> str:
    return f"{format_expr(c.left)} {c.op} {format_expr(c.right)}"


def _format_block(stmts, indent: int, out: list):
    pad = "    " * indent
    for s in stmts:
        if isinstance(s, Assign):
            out.append(f"{pad}{s.target} = {format_expr(s.expr)};")
        elif isinstance(s, Print):
            out.append(f"{pad}print({format_expr(s.expr)});")
        elif isinstance(s, Assert):
            out.append(f"{pad}assert({format_cond(s.cond)});")
        elif isinstance(s, Error):
            out.append(f"{pad}error({_quote(s.message)});")
        elif isinstance(s, While):
            out.append(f"{pad}while ({format_cond(s.cond)}) {{")
            _format_block(s.body, indent + 1, out)
            out.append(pad + "}")
        else:
            out.append(f"{pad}if ({format_cond(s.cond)}) {{")
            _format_block(s.then, indent + 1, out)
            if s.orelse:
                out.append(pad + "} else {")
                _format_block(s.orelse, indent + 1, out)
            out.append(pad + "}")


def format_program(p: Program) -> str:
    out = [f"sym int {name};" for name in p.inputs]
    _format_block(p.body, 0, out)
    return "\n".join(out) + "\n"


# -- static measures ----------------------------------------------------------


def _symbolic_divisions(e) -> int:
    if isinstance(e, (Num, Var)):
        return 0
    if isinstance(e, Neg):
        return _symbolic_divisions(e.operand)
    n = _symbolic_divisions(e.left) + _symbolic_divisions(e.right)
    if isinstance(e, Div) and _has_var(e.right):
        n += 1
    return n


def _cond_divisions(c: Cond) -> int:
    return _symbolic_divisions(c.left) + _symbolic_divisions(c.right)


def _block_branches(stmts, loop_bound: int) -> int:
    total = 0
    for s in stmts:
        if isinstance(s, (Assign, Print)):
            total += _symbolic_divisions(s.expr)
        elif isinstance(s, Assert):
            total += 1 + _cond_divisions(s.cond)
        elif isinstance(s, If):
            total += 1 + _cond_divisions(s.cond) + max(
                _block_branches(s.then, loop_bound), _block_branches(s.orelse, loop_bound)
            )
        elif isinstance(s, While):
            per_iter = 1 + _cond_divisions(s.cond) + _block_branches(s.body, loop_bound)
            total += loop_bound * per_iter
    return total


def longest_path_branch_count(p: Program, loop_bound: int) -> int:
    """Upper bound on forks along one path once loops are unrolled ``loop_bound`` times.

    Conditionals, loop tests, asserts and divisions by non-constant divisors
    each count as one fork.
    """
    if loop_bound < 0:
        raise ValueError("loop_bound must be >= 0")
    return _block_branches(p.body, loop_bound)
