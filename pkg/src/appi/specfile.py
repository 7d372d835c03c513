"""Self-contained specification files: declarations, rules, processes, queries.

Grammar (statements end with ``.``; ``--`` starts a comment)::

    spec     ::= stmt*
    stmt     ::= "fun" fdecl ("," fdecl)* "."
               | ("const" | "name" | "var" | "rulevar") ident ("," ident)* "."
               | "rewrite" term "->" term "."
               | "process" ident "=" process "."
               | "query" query "."
    fdecl    ::= ident "/" number
    query    ::= ("normalize" | "transitions" | "barbs") proc
               | "lts" proc [">" path]
               | ("bisim" | "static" | "barbeq" | "struct" | "oracle") proc proc
               | "closure" proc proc "with" proc ["over" ident ("," ident)*]
               | "probe" ("test" | "input" | "output") "(" term "," term ")" proc proc
    proc     ::= ident-of-a-defined-process | unary-process
    path     ::= string | adjacent tokens such as p.dot

``pair/2`` and the constant ``0`` are always declared; numerals are constants.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .process_ast import Process, check_correct, format_process
from .rewriting import EquationalTheory, RewriteRule, RuleError
from .syntax import Declarations, ParseError, Parser, tokenize

UNARY_QUERIES = {"normalize", "transitions", "barbs", "lts"}
BINARY_QUERIES = {"bisim", "static", "barbeq", "struct", "oracle"}
PROBE_KINDS = {"test", "input", "output"}


@dataclass
class Query:
    kind: str
    processes: list
    line: int
    labels: list = field(default_factory=list)
    path: str | None = None
    terms: list = field(default_factory=list)
    probe: str | None = None
    context: Process | None = None
    binders: list = field(default_factory=list)

    def describe(self) -> str:
        who = " ".join(self.labels)
        if self.kind == "probe":
            return f"probe {self.probe}({', '.join(map(str, self.terms))}) {who}"
        return f"{self.kind} {who}"


@dataclass
class SpecFile:
    declarations: Declarations
    rules: list
    processes: dict
    queries: list
    theory: EquationalTheory


class _SpecParser(Parser):
    def statement(self, spec: SpecFile):
        tok = self.tok
        head = tok.text
        if tok.kind != "ident":
            raise self.error(f"expected a statement, found {tok.text or 'end of input'!r}")
        self.pos += 1
        if head == "fun":
            while True:
                ft = self.expect_ident()
                self.expect("/")
                nt = self.tok
                if nt.kind != "number":
                    raise self.error("expected an arity")
                self.pos += 1
                arity = int(nt.text)
                if arity < 1:
                    raise self.error(f"arity of {ft.text} must be positive", nt)
                known = self.decls.functions.get(ft.text)
                if known is not None and known != arity:
                    raise self.error(f"{ft.text} already declared with arity {known}", ft)
                self.decls.functions[ft.text] = arity
                if not self.at(","):
                    break
                self.pos += 1
        elif head in ("const", "name", "var", "rulevar"):
            table = {"const": self.decls.constants, "name": self.decls.names,
                     "var": self.decls.variables, "rulevar": self.decls.rule_variables}[head]
            while True:
                it = self.tok
                if it.kind not in ("ident", "number"):
                    raise self.error("expected an identifier")
                self.pos += 1
                for other, tab in (("const", self.decls.constants), ("name", self.decls.names),
                                   ("var", self.decls.variables)):
                    if other != head and head != "rulevar" and it.text in tab:
                        raise self.error(f"{it.text} already declared as {other}", it)
                table.add(it.text)
                if not self.at(","):
                    break
                self.pos += 1
        elif head == "rewrite":
            self.rule_mode = True
            try:
                lhs = self.term()
                self.expect("->")
                rhs = self.term()
            finally:
                self.rule_mode = False
            try:
                spec.rules.append(RewriteRule(lhs, rhs))
            except RuleError as exc:
                raise self.error(str(exc), tok) from None
        elif head == "process":
            nt = self.expect_ident()
            if nt.text in self.processes:
                raise self.error(f"process {nt.text} already defined", nt)
            self.expect("=")
            proc = self.process()
            problems = check_correct(proc)
            if problems:
                raise self.error(f"process {nt.text} is not correct: " + "; ".join(map(str, problems)), nt)
            self.processes[nt.text] = proc
        elif head == "query":
            spec.queries.append(self.query(tok))
        else:
            raise self.error(f"unknown statement {head!r}", tok)
        self.expect(".")

    def proc_arg(self):
        tok = self.tok
        if tok.kind == "ident" and tok.text in self.processes:
            self.pos += 1
            return self.processes[tok.text], tok.text
        p = self.unary()
        return p, f"({format_process(p)})"

    def query(self, qtok):
        kt = self.expect_ident()
        kind = kt.text
        q = Query(kind, [], qtok.line)
        if kind in UNARY_QUERIES:
            p, label = self.proc_arg()
            q.processes, q.labels = [p], [label]
            if kind == "lts" and self.at(">"):
                self.pos += 1
                q.path = self.path()
        elif kind in BINARY_QUERIES or kind == "closure":
            for _ in range(2):
                p, label = self.proc_arg()
                q.processes.append(p)
                q.labels.append(label)
            if kind == "closure":
                wt = self.expect_ident()
                if wt.text != "with":
                    raise self.error("expected 'with'", wt)
                q.context, _ = self.proc_arg()
                if self.tok.kind == "ident" and self.tok.text == "over":
                    self.pos += 1
                    while True:
                        bt = self.expect_ident()
                        q.binders.append(self.lookup(bt))
                        if not self.at(","):
                            break
                        self.pos += 1
        elif kind == "probe":
            pt = self.expect_ident()
            if pt.text not in PROBE_KINDS:
                raise self.error(f"unknown probe {pt.text!r}", pt)
            q.probe = pt.text
            self.expect("(")
            q.terms.append(self.term())
            self.expect(",")
            q.terms.append(self.term())
            self.expect(")")
            for _ in range(2):
                p, label = self.proc_arg()
                q.processes.append(p)
                q.labels.append(label)
        else:
            raise self.error(f"unknown query {kind!r}", kt)
        return q

    def path(self) -> str:
        tok = self.tok
        if tok.kind == "string":
            self.pos += 1
            return tok.text[1:-1]
        # A bare path is the run of adjacent tokens; a trailing '.' ends the statement.
        run = [tok]
        i = self.pos + 1
        while i < len(self.tokens):
            prev, cur = self.tokens[i - 1], self.tokens[i]
            if cur.kind == "eof" or cur.line != prev.line or cur.col != prev.col + len(prev.text):
                break
            run.append(cur)
            i += 1
        if run[-1].text == "." and len(run) > 1:
            run = run[:-1]
        self.pos += len(run)
        return "".join(t.text for t in run)


def parse_spec(text: str, source: str = "<spec>") -> SpecFile:
    decls = Declarations()
    decls.constants.add("0")
    parser = _SpecParser(tokenize(text), decls, implicit=False, processes={})
    spec = SpecFile(decls, [], parser.processes, [], EquationalTheory())
    while parser.tok.kind != "eof":
        parser.statement(spec)
    try:
        spec.theory = EquationalTheory(decls.signature(), tuple(spec.rules))
    except RuleError as exc:
        raise ParseError(str(exc)) from None
    return spec


def load_spec(path) -> SpecFile:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read(), str(path))
