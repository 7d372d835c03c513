"""Lexer and recursive-descent parser for terms and processes.

Identifier kinds (name, variable, constant) come from a :class:`Declarations`
table.  Binders introduce their own kind: ``new n`` binds a name, ``in(c, x)``
a variable, and ``nu u`` a variable exactly when ``{e/u}`` occurs in its body
(unless ``u`` is declared).  In *implicit* mode undeclared identifiers are
accepted: substitution targets become variables, numerals constants and
everything else names.  This is what the test-suite helpers use.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .process_ast import (
    HOLE,
    NIL,
    Cond,
    In,
    Out,
    Par,
    Process,
    Repl,
    Restrict,
    Sub,
    freshen_binders,
    substitute,
)
from .term_core import (
    CONSTANT,
    NAME,
    VARIABLE,
    App,
    Atom,
    Signature,
    Symbol,
    Term,
)


class ParseError(ValueError):
    def __init__(self, message, line=None, col=None):
        self.line, self.col = line, col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


KEYWORDS = {"new", "nu", "if", "then", "else", "in", "out"}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*(?:\#[0-9]+)?)
  | (?P<number>[0-9]+)
  | (?P<punct>[()\[\],.|!{}/=>:;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, number, string, punct, kw, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind == "ident" and value in KEYWORDS:
            kind = "kw"
        elif kind == "arrow":
            kind = "punct"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
        for i, ch in enumerate(value):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class Declarations:
    names: set[str] = field(default_factory=set)
    variables: set[str] = field(default_factory=set)
    constants: set[str] = field(default_factory=set)
    functions: dict[str, int] = field(default_factory=lambda: {"pair": 2})
    rule_variables: set[str] = field(default_factory=set)

    def signature(self) -> Signature:
        return Signature({f: n for f, n in self.functions.items() if f != "pair"})

    def kind_of(self, ident: str) -> str | None:
        if ident in self.variables:
            return VARIABLE
        if ident in self.names:
            return NAME
        if ident in self.constants:
            return CONSTANT
        return None


def _split_ident(text: str) -> tuple[str, int]:
    if "#" in text:
        base, idx = text.split("#")
        return base, int(idx)
    return text, 0


class _Binder:
    """Scope entry; ``nu`` binders may be promoted to variables after the body is read."""

    def __init__(self, symbol: Symbol, promotable: bool = False):
        self.symbol = symbol
        self.promotable = promotable
        self.promote = False


class Parser:
    def __init__(self, text: str, decls: Declarations | None = None, *, implicit: bool = False,
                 processes: dict[str, Process] | None = None, rule_mode: bool = False):
        self.tokens = tokenize(text) if isinstance(text, str) else text
        self.pos = 0
        self.decls = decls if decls is not None else Declarations()
        self.implicit = implicit
        self.processes = processes or {}
        self.rule_mode = rule_mode
        self.scope: list[tuple[str, _Binder]] = []
        self.implicit_vars = self._sub_targets() if implicit else set()

    # -- token helpers
    def _sub_targets(self):
        out = set()
        toks = self.tokens
        for i in range(len(toks) - 2):
            if toks[i].text == "/" and toks[i + 1].kind == "ident" and toks[i + 2].text == "}":
                out.add(_split_ident(toks[i + 1].text)[0])
        return out

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def error(self, message, tok=None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def at(self, text) -> bool:
        return self.tok.text == text and self.tok.kind in ("punct", "kw")

    def expect(self, text) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        t = self.tok
        self.pos += 1
        return t

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.pos += 1
        return t

    def done(self):
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")

    # -- terms
    def lookup(self, tok: Token) -> Symbol:
        base, index = _split_ident(tok.text)
        for ident, binder in reversed(self.scope):
            if ident == tok.text:
                return binder.symbol
        if self.rule_mode and base in self.decls.rule_variables:
            return Symbol(VARIABLE, base, index)
        kind = self.decls.kind_of(base)
        if kind is None:
            if not self.implicit:
                raise self.error(f"undeclared identifier {tok.text!r}", tok)
            kind = VARIABLE if base in self.implicit_vars else NAME
        return Symbol(kind, base, index)

    def term(self) -> Term:
        tok = self.tok
        if tok.kind == "number":
            self.pos += 1
            return Atom(Symbol(CONSTANT, tok.text))
        if self.at("("):
            self.pos += 1
            first = self.term()
            if self.at(","):
                self.pos += 1
                second = self.term()
                self.expect(")")
                return App("pair", (first, second))
            self.expect(")")
            return first
        if tok.kind != "ident":
            raise self.error(f"expected a term, found {tok.text or 'end of input'!r}")
        self.pos += 1
        if self.at("("):
            self.pos += 1
            args = [self.term()]
            while self.at(","):
                self.pos += 1
                args.append(self.term())
            self.expect(")")
            self._check_arity(tok, len(args))
            return App(tok.text, tuple(args))
        return Atom(self.lookup(tok))

    def _check_arity(self, tok, n):
        known = self.decls.functions.get(tok.text)
        if known is None:
            if not self.implicit:
                raise self.error(f"undeclared function symbol {tok.text!r}", tok)
            self.decls.functions[tok.text] = n
        elif known != n:
            raise self.error(f"{tok.text} expects {known} arguments, got {n}", tok)

    # -- processes
    _STARTS = {"0", "!", "new", "nu", "if", "in", "out", "{", "(", "["}

    def starts_process(self, tok: Token) -> bool:
        if tok.kind in ("punct", "kw", "number") and tok.text in self._STARTS:
            return True
        return tok.kind == "ident" and tok.text in self.processes

    def process(self) -> Process:
        left = self.unary()
        if self.at("|"):
            self.pos += 1
            return Par(left, self.process())
        return left

    def continuation(self) -> Process:
        if self.at(".") and self.starts_process(self.peek()):
            self.pos += 1
            return self.unary()
        return NIL

    def unary(self) -> Process:
        tok = self.tok
        if tok.kind == "number":
            if tok.text != "0":
                raise self.error(f"{tok.text} is not a process")
            self.pos += 1
            return NIL
        if self.at("!"):
            self.pos += 1
            return self._wrap(Repl, self.unary(), tok)
        if self.at("new") or self.at("nu"):
            return self._restriction()
        if self.at("if"):
            self.pos += 1
            left = self.term()
            self.expect("=")
            right = self.term()
            self.expect("then")
            then = self.unary()
            orelse = NIL
            if self.at("else"):
                self.pos += 1
                orelse = self.unary()
            return self._wrap(lambda a, b: Cond(left, right, a, b), then, tok, orelse)
        if self.at("in"):
            self.pos += 1
            self.expect("(")
            channel = self.term()
            self.expect(",")
            vt = self.expect_ident()
            self.expect(")")
            base, index = _split_ident(vt.text)
            sym = Symbol(VARIABLE, base, index)
            self.scope.append((vt.text, _Binder(sym)))
            try:
                body = self.continuation()
            finally:
                self.scope.pop()
            try:
                return In(channel, sym, body)
            except ValueError as exc:
                raise self.error(str(exc), tok) from None
        if self.at("out"):
            self.pos += 1
            self.expect("(")
            channel = self.term()
            self.expect(",")
            payload = self.term()
            self.expect(")")
            return self._wrap(lambda b: Out(channel, payload, b), self.continuation(), tok)
        if self.at("{"):
            self.pos += 1
            t = self.term()
            self.expect("/")
            vt = self.expect_ident()
            self.expect("}")
            return Sub(t, self._sub_target(vt))
        if self.at("("):
            self.pos += 1
            p = self.process()
            self.expect(")")
            return p
        if self.at("["):
            self.pos += 1
            self.expect("]")
            return HOLE
        if tok.kind == "ident" and tok.text in self.processes:
            self.pos += 1
            return freshen_binders(self.processes[tok.text])
        raise self.error(f"expected a process, found {tok.text or 'end of input'!r}")

    def _wrap(self, ctor, body, tok, *more):
        try:
            return ctor(body, *more)
        except ValueError as exc:
            raise self.error(str(exc), tok) from None

    def _sub_target(self, vt: Token) -> Symbol:
        for ident, binder in reversed(self.scope):
            if ident == vt.text:
                if binder.symbol.is_variable:
                    return binder.symbol
                if binder.promotable:
                    binder.promote = True
                    return Symbol(VARIABLE, binder.symbol.ident, binder.symbol.index)
                raise self.error(f"{vt.text} is bound as a name", vt)
        sym = self.lookup(vt)
        if not sym.is_variable:
            raise self.error(f"substitution target {vt.text!r} is not a variable", vt)
        return sym

    def _restriction(self) -> Process:
        kw = self.tok
        self.pos += 1
        bt = self.expect_ident()
        self.expect(".")
        base, index = _split_ident(bt.text)
        declared = self.decls.kind_of(base)
        if kw.text == "new":
            binder = _Binder(Symbol(NAME, base, index))
        elif declared == VARIABLE or (self.implicit and declared is None and base in self.implicit_vars):
            binder = _Binder(Symbol(VARIABLE, base, index))
        elif declared == NAME:
            binder = _Binder(Symbol(NAME, base, index))
        else:
            binder = _Binder(Symbol(NAME, base, index), promotable=True)
        self.scope.append((bt.text, binder))
        try:
            body = self.unary()
        finally:
            self.scope.pop()
        sym = binder.symbol
        if binder.promote:
            as_var = Symbol(VARIABLE, base, index)
            body = substitute(body, {sym: Atom(as_var)})
            sym = as_var
        try:
            return Restrict(sym, body)
        except ValueError as exc:
            raise self.error(str(exc), kw) from None


def parse_term(text: str, decls: Declarations | None = None, *, implicit: bool = True) -> Term:
    p = Parser(text, decls, implicit=implicit)
    t = p.term()
    p.done()
    return t


def parse_process(text: str, decls: Declarations | None = None, *, implicit: bool = True,
                  processes: dict[str, Process] | None = None) -> Process:
    p = Parser(text, decls, implicit=implicit, processes=processes)
    proc = p.process()
    p.done()
    return proc
