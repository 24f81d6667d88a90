"""Lexer and parser for the ASCII surface syntax of ``.qunity`` files.

The parser produces a sort-agnostic surface tree (:class:`SNode` subclasses).
Whether a node denotes a type, an expression, a program or a real constant is
decided later, during expansion (:mod:`qunity.expand`), from the position in
which it is used.  This keeps one grammar for all four syntactic categories.

Grammar summary (lowest to highest precedence)::

    term    := 'let' pipe ':' sum '=' term 'in' term
             | 'lambda' pipe ':' sum '->' term
             | 'try' term 'catch' term
             | pipe
    pipe    := sum ('|>' sum)*
    sum     := prod (('+' | '(+)' | '-') prod)*
    prod    := unary (('*' | '(x)' | '/') unary)*
    unary   := '-' unary | juxt
    juxt    := power juxt?                      (right nested: f g x = f (g x))
    power   := atom ('^' atom)*
    atom    := NAME ['[' args ']'] ['(' args ')']     (brackets adjacent to NAME)
             | NUMBER | '(' ')' | '(' term ')' | '(' term (',' term)+ ')'
             | 'ctrl' pipe ':' sum '{' branches '}' ':' sum
             | 'match' '[' args ']' '{' branches '}'
    branches:= [pipe '->' term ('|' pipe '->' term)*]

A file is a sequence of ``def`` items followed by ``main := term``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional


class QunitySyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Surface tree
# ---------------------------------------------------------------------------


class SNode:
    """Base class of surface nodes."""


@dataclass(frozen=True)
class SName(SNode):
    name: str
    targs: Optional[tuple] = None
    args: Optional[tuple] = None


@dataclass(frozen=True)
class SNum(SNode):
    n: int


@dataclass(frozen=True)
class SUnit(SNode):
    pass


@dataclass(frozen=True)
class SParen(SNode):
    inner: SNode


@dataclass(frozen=True)
class STuple(SNode):
    items: tuple


@dataclass(frozen=True)
class SApp(SNode):
    fn: SNode
    arg: SNode


@dataclass(frozen=True)
class SBin(SNode):
    op: str  # '+', '-', '*', '/', '(+)', '(x)', '|>'
    left: SNode
    right: SNode


@dataclass(frozen=True)
class SNeg(SNode):
    arg: SNode


@dataclass(frozen=True)
class SPow(SNode):
    base: SNode
    exp: SNode


@dataclass(frozen=True)
class SCtrl(SNode):
    scrutinee: SNode
    stype: SNode
    branches: tuple
    rtype: SNode


@dataclass(frozen=True)
class SMatch(SNode):
    targs: tuple
    branches: tuple


@dataclass(frozen=True)
class STry(SNode):
    body: SNode
    handler: SNode


@dataclass(frozen=True)
class SLambda(SNode):
    pattern: SNode
    dtype: SNode
    body: SNode


@dataclass(frozen=True)
class SLet(SNode):
    pattern: SNode
    dtype: SNode
    value: SNode
    body: SNode


@dataclass(frozen=True)
class ParamPattern:
    """A definition parameter: a name, a literal natural, or ``name + k``."""

    name: Optional[str]
    literal: Optional[int] = None
    offset: int = 0


@dataclass(frozen=True)
class Clause:
    params: tuple  # tuple[ParamPattern, ...]
    body: SNode


@dataclass
class Definition:
    name: str
    clauses: list = field(default_factory=list)

    @property
    def arity(self) -> int:
        return len(self.clauses[0].params) if self.clauses else 0


@dataclass
class SourceProgram:
    definitions: dict
    entry: Optional[SNode]
    entry_text: str = ""


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {"def", "main", "let", "in", "lambda", "try", "catch", "ctrl", "match"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<num>[0-9]+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>\(\+\)|\(x\)|:=|\|>|->|[-+*/^(),\[\]{}:=|])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'name', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int
    start: int
    end: int


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise QunitySyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            if kind == "name" and chunk in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, chunk, line, pos - line_start + 1, pos, m.end()))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1, pos, pos))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    # -- helpers --------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        shown = tok.text or "end of input"
        raise QunitySyntaxError(f"{msg} (found {shown!r})", tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def eat(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        tok = self.tok
        self.i += 1
        return tok

    def adjacent(self) -> bool:
        """True if the current token touches the previous one (no whitespace)."""
        return self.i > 0 and self.toks[self.i - 1].end == self.tok.start

    # -- top level ------------------------------------------------------
    def program(self) -> SourceProgram:
        defs: dict = {}
        entry = None
        entry_text = ""
        while self.tok.kind != "eof":
            if self.at("def"):
                self.definition(defs)
            elif self.at("main"):
                self.eat("main")
                self.eat(":=")
                start = self.tok.start
                entry = self.term()
                entry_text = self.text[start:self.toks[self.i - 1].end].strip()
                if self.tok.kind != "eof":
                    self.error("'main' must be the last item")
            else:
                self.error("expected 'def' or 'main'")
        return SourceProgram(defs, entry, entry_text)

    def definition(self, defs: dict) -> None:
        self.eat("def")
        if self.tok.kind != "name":
            self.error("expected definition name")
        name = self.tok.text
        self.i += 1
        params: list = []
        if self.at("(") and self.adjacent():
            self.eat("(")
            if not self.at(")"):
                params.append(self.param())
                while self.at(","):
                    self.eat(",")
                    params.append(self.param())
            self.eat(")")
        self.eat(":=")
        body = self.term()
        d = defs.setdefault(name, Definition(name))
        if d.clauses and len(d.clauses[0].params) != len(params):
            raise QunitySyntaxError(f"definition {name} has clauses of different arity")
        d.clauses.append(Clause(tuple(params), body))

    def param(self) -> ParamPattern:
        if self.tok.kind == "num":
            n = int(self.tok.text)
            self.i += 1
            return ParamPattern(None, literal=n)
        if self.tok.kind != "name":
            self.error("expected parameter")
        name = self.tok.text
        self.i += 1
        if self.at("+"):
            self.eat("+")
            if self.tok.kind != "num":
                self.error("expected natural offset")
            k = int(self.tok.text)
            self.i += 1
            return ParamPattern(name, offset=k)
        return ParamPattern(name)

    # -- terms ----------------------------------------------------------
    def term(self) -> SNode:
        if self.at("let"):
            self.eat("let")
            pat = self.pipe()
            self.eat(":")
            ty = self.sum_()
            self.eat("=")
            val = self.term()
            self.eat("in")
            body = self.term()
            return SLet(pat, ty, val, body)
        if self.at("lambda"):
            self.eat("lambda")
            pat = self.pipe()
            self.eat(":")
            ty = self.sum_()
            self.eat("->")
            return SLambda(pat, ty, self.term())
        if self.at("try"):
            self.eat("try")
            body = self.term()
            self.eat("catch")
            return STry(body, self.term())
        return self.pipe()

    def pipe(self) -> SNode:
        left = self.sum_()
        while self.at("|>"):
            self.eat("|>")
            left = SBin("|>", left, self.sum_operand_or_term())
        return left

    def sum_operand_or_term(self) -> SNode:
        # allow `e |> lambda p : T -> b` (lambda extends to the right)
        if self.at("lambda") or self.at("let") or self.at("try"):
            return self.term()
        return self.sum_()

    def sum_(self) -> SNode:
        left = self.prod()
        while self.at("+") or self.at("(+)") or self.at("-"):
            op = self.tok.text
            self.i += 1
            left = SBin(op, left, self.prod())
        return left

    def prod(self) -> SNode:
        left = self.unary()
        while self.at("*") or self.at("(x)") or self.at("/"):
            op = self.tok.text
            self.i += 1
            left = SBin(op, left, self.unary())
        return left

    def unary(self) -> SNode:
        if self.at("-"):
            self.eat("-")
            return SNeg(self.unary())
        return self.juxt()

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("num", "name"):
            return True
        if t.kind == "kw":
            return t.text in ("ctrl", "match", "lambda", "let", "try")
        return t.kind == "op" and t.text == "("

    def juxt(self) -> SNode:
        head = self.power()
        if self.starts_atom():
            if self.at("lambda") or self.at("let") or self.at("try"):
                return SApp(head, self.term())
            return SApp(head, self.juxt())
        return head

    def power(self) -> SNode:
        base = self.atom()
        while self.at("^"):
            self.eat("^")
            base = SPow(base, self.atom())
        return base

    def args(self, close: str) -> tuple:
        items = []
        if not self.at(close):
            items.append(self.term())
            while self.at(","):
                self.eat(",")
                items.append(self.term())
        self.eat(close)
        return tuple(items)

    def branches(self) -> tuple:
        self.eat("{")
        out = []
        if not self.at("}"):
            while True:
                pat = self.pipe()
                self.eat("->")
                body = self.term()
                out.append((pat, body))
                if self.at("|"):
                    self.eat("|")
                    continue
                break
        self.eat("}")
        return tuple(out)

    def atom(self) -> SNode:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return SNum(int(t.text))
        if t.kind == "name":
            self.i += 1
            targs = args = None
            if self.at("[") and self.adjacent():
                self.eat("[")
                targs = self.args("]")
            if self.at("(") and self.adjacent():
                self.eat("(")
                args = self.args(")")
            return SName(t.text, targs, args)
        if t.kind == "kw" and t.text == "ctrl":
            self.eat("ctrl")
            scrut = self.pipe()
            self.eat(":")
            stype = self.sum_()
            brs = self.branches()
            self.eat(":")
            rtype = self.sum_()
            return SCtrl(scrut, stype, brs, rtype)
        if t.kind == "kw" and t.text == "match":
            self.eat("match")
            if not (self.at("[") and self.adjacent()):
                self.error("match needs [T, T'] annotations")
            self.eat("[")
            targs = self.args("]")
            return SMatch(targs, self.branches())
        if t.kind == "kw" and t.text in ("lambda", "let", "try"):
            return self.term()
        if self.at("("):
            self.eat("(")
            if self.at(")"):
                self.eat(")")
                return SUnit()
            first = self.term()
            if self.at(","):
                items = [first]
                while self.at(","):
                    self.eat(",")
                    items.append(self.term())
                self.eat(")")
                return STuple(tuple(items))
            self.eat(")")
            return SParen(first)
        self.error("expected a term")
        raise AssertionError  # unreachable


def parse(text: str) -> SourceProgram:
    """Parse a ``.qunity`` source text.

    A text without any ``def``/``main`` keyword is accepted as a bare entry term.
    """
    stripped = re.sub(r"//[^\n]*", "", text).strip()
    if not stripped.startswith(("def", "main")):
        p = _Parser(text)
        entry = p.term()
        if p.tok.kind != "eof":
            p.error("unexpected trailing input")
        return SourceProgram({}, entry, text.strip())
    return _Parser(text).program()


def parse_term(text: str) -> SNode:
    p = _Parser(text)
    node = p.term()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return node
