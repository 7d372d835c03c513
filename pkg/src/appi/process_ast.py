"""Plain and extended processes, contexts, binders and correctness checks.

One node family covers both plain processes and extended processes; a node
knows whether it is plain (no active substitutions, no variable restriction,
no holes).  Prefix continuations, replication bodies and conditional
branches must be plain, which is enforced at construction.  The remaining
well-formedness conditions on extended processes are checked on demand by
:func:`check_correct`, since intermediate rewriting states may break them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .term_core import (
    AcyclicSubstitution,
    Atom,
    CyclicSubstitution,
    FreshSupply,
    Symbol,
    Term,
    check_acyclic,
    format_term,
    names_of,
    rename_term,
    variables_of,
)


class NotFresh(ValueError):
    pass


class Process:
    """Base class; concrete nodes are frozen dataclasses."""

    is_plain: bool

    def children(self) -> tuple[tuple[str, "Process"], ...]:
        return ()

    def __str__(self):
        return format_process(self)


def _require_plain(p: "Process", where: str):
    if not p.is_plain:
        raise ValueError(f"{where} must be a plain process, got {format_process(p)}")


@dataclass(frozen=True)
class Nil(Process):
    is_plain: bool = field(default=True, init=False, compare=False, repr=False)


@dataclass(frozen=True)
class Par(Process):
    left: Process
    right: Process
    is_plain: bool = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "is_plain", self.left.is_plain and self.right.is_plain)

    def children(self):
        return (("left", self.left), ("right", self.right))


@dataclass(frozen=True)
class Repl(Process):
    body: Process
    is_plain: bool = field(default=True, init=False, compare=False, repr=False)

    def __post_init__(self):
        _require_plain(self.body, "replicated process")

    def children(self):
        return (("body", self.body),)


@dataclass(frozen=True)
class Restrict(Process):
    """``new n.P`` over a name or ``nu x.A`` over a variable."""

    binder: Symbol
    body: Process
    is_plain: bool = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.binder.is_constant:
            raise ValueError("constants cannot be restricted")
        object.__setattr__(self, "is_plain", self.binder.is_name and self.body.is_plain)

    def children(self):
        return (("body", self.body),)


@dataclass(frozen=True)
class Cond(Process):
    left: Term
    right: Term
    then: Process
    orelse: Process = field(default_factory=Nil)
    is_plain: bool = field(default=True, init=False, compare=False, repr=False)

    def __post_init__(self):
        _require_plain(self.then, "then-branch")
        _require_plain(self.orelse, "else-branch")

    def children(self):
        return (("then", self.then), ("else", self.orelse))


@dataclass(frozen=True)
class In(Process):
    channel: Term
    var: Symbol
    body: Process
    is_plain: bool = field(default=True, init=False, compare=False, repr=False)

    def __post_init__(self):
        if not self.var.is_variable:
            raise ValueError(f"input binder must be a variable, got {self.var}")
        if self.var in variables_of(self.channel):
            raise ValueError(f"input variable {self.var} occurs in its channel")
        _require_plain(self.body, "input continuation")

    def children(self):
        return (("body", self.body),)


@dataclass(frozen=True)
class Out(Process):
    channel: Term
    payload: Term
    body: Process
    is_plain: bool = field(default=True, init=False, compare=False, repr=False)

    def __post_init__(self):
        _require_plain(self.body, "output continuation")

    def children(self):
        return (("body", self.body),)


@dataclass(frozen=True)
class Sub(Process):
    """Active substitution ``{term/var}``."""

    term: Term
    var: Symbol
    is_plain: bool = field(default=False, init=False, compare=False, repr=False)

    def __post_init__(self):
        if not self.var.is_variable:
            raise ValueError(f"substitution target must be a variable, got {self.var}")


@dataclass(frozen=True)
class Hole(Process):
    is_plain: bool = field(default=False, init=False, compare=False, repr=False)


NIL = Nil()
HOLE = Hole()


def parallel(*procs: Process) -> Process:
    """Right-nested parallel composition; the empty composition is 0."""
    procs = [p for p in procs]
    if not procs:
        return NIL
    out = procs[-1]
    for p in reversed(procs[:-1]):
        out = Par(p, out)
    return out


def restrict(binders, body: Process) -> Process:
    for b in reversed(list(binders)):
        body = Restrict(b, body)
    return body


def components(p: Process) -> list[Process]:
    """Flatten nested parallel compositions."""
    if isinstance(p, Par):
        return components(p.left) + components(p.right)
    return [p]


def rebuild(p: Process, kids: list[Process]) -> Process:
    if isinstance(p, Par):
        return Par(kids[0], kids[1])
    if isinstance(p, Repl):
        return Repl(kids[0])
    if isinstance(p, Restrict):
        return Restrict(p.binder, kids[0])
    if isinstance(p, Cond):
        return Cond(p.left, p.right, kids[0], kids[1])
    if isinstance(p, In):
        return In(p.channel, p.var, kids[0])
    if isinstance(p, Out):
        return Out(p.channel, p.payload, kids[0])
    return p


def subprocess_at(p: Process, path) -> Process:
    for step in path:
        p = dict(p.children())[step]
    return p


def replace_at(p: Process, path, new: Process) -> Process:
    if not path:
        return new
    step, rest = path[0], path[1:]
    kids = [replace_at(c, rest, new) if s == step else c for s, c in p.children()]
    return rebuild(p, kids)


def walk(p: Process, path=()) -> Iterator[tuple[tuple, Process]]:
    yield path, p
    for step, child in p.children():
        yield from walk(child, path + (step,))


def process_size(p: Process) -> int:
    """AST node count, counting each term as one node."""
    n = 1
    if isinstance(p, (Cond,)):
        n += 2
    elif isinstance(p, (In, Sub)):
        n += 1
    elif isinstance(p, Out):
        n += 2
    return n + sum(process_size(c) for _, c in p.children())


# --- free symbols ---------------------------------------------------------

def _terms_of(p: Process) -> tuple[Term, ...]:
    if isinstance(p, Cond):
        return (p.left, p.right)
    if isinstance(p, In):
        return (p.channel,)
    if isinstance(p, Out):
        return (p.channel, p.payload)
    if isinstance(p, Sub):
        return (p.term,)
    return ()


def _binder(p: Process) -> Symbol | None:
    if isinstance(p, Restrict):
        return p.binder
    if isinstance(p, In):
        return p.var
    return None


def free_symbols(p: Process) -> frozenset[Symbol]:
    out = set()
    for t in _terms_of(p):
        out.update(t.symbols())
    if isinstance(p, Sub):
        out.add(p.var)
    inner = set()
    for _, c in p.children():
        inner |= free_symbols(c)
    b = _binder(p)
    if b is not None:
        inner.discard(b)
    return frozenset(out | inner)


def free_vars(p: Process) -> frozenset[Symbol]:
    return frozenset(s for s in free_symbols(p) if s.is_variable)


def free_names(p: Process) -> frozenset[Symbol]:
    return frozenset(s for s in free_symbols(p) if s.is_name)


def all_symbols(p: Process) -> frozenset[Symbol]:
    """Every symbol with any occurrence, bound or free."""
    out = set()
    for _, q in walk(p):
        for t in _terms_of(q):
            out.update(t.symbols())
        b = _binder(q)
        if b is not None:
            out.add(b)
        if isinstance(q, Sub):
            out.add(q.var)
    return frozenset(out)


def bound_symbols(p: Process) -> list[Symbol]:
    return [b for _, q in walk(p) if (b := _binder(q)) is not None]


def constants_of(p: Process) -> frozenset[Symbol]:
    return frozenset(s for s in all_symbols(p) if s.is_constant)


def free_substitutions(p: Process) -> list[Sub]:
    """Active substitutions whose target is not bound by an enclosing restriction."""
    found = []

    def go(q, bound):
        if isinstance(q, Sub):
            if q.var not in bound:
                found.append(q)
            return
        if isinstance(q, Restrict):
            go(q.body, bound | {q.binder})
            return
        if isinstance(q, Par):
            go(q.left, bound)
            go(q.right, bound)

    go(p, frozenset())
    return found


def domain(p: Process) -> frozenset[Symbol]:
    fv = free_vars(p)
    return frozenset(s.var for s in free_substitutions(p) if s.var in fv)


def is_closed_ep(p: Process) -> bool:
    return domain(p) == free_vars(p)


# --- correctness ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    bullet: int
    message: str
    path: tuple = ()

    BULLETS = {
        1: "parallel components with overlapping domains",
        2: "more than one substitution for a variable",
        3: "variable restriction without exactly one substitution",
        4: "cyclic set of substitutions",
    }

    def __str__(self):
        where = "/".join(self.path) or "<root>"
        return f"[{self.BULLETS[self.bullet]}] at {where}: {self.message}"


def check_correct(p: Process) -> list[Violation]:
    """All violations of the four correctness conditions; empty when correct."""
    violations: list[Violation] = []

    for path, q in walk(p):
        if isinstance(q, Par):
            clash = domain(q.left) & domain(q.right)
            if clash:
                violations.append(Violation(
                    1, "shared domain " + ", ".join(sorted(map(str, clash))), path))

    # Resolve every substitution target (and the variables of its term) to the
    # binder occurrence it belongs to, so alpha-variants are told apart.
    subs = []  # (identity, path, term-with-resolved-vars)
    per_binder: dict[tuple, int] = {}

    def ident(sym, scope):
        return ("bound", scope[sym], sym) if sym in scope else ("free", sym)

    def go(q, path, scope):
        if isinstance(q, Sub):
            who = ident(q.var, scope)
            resolved = {v: ident(v, scope) for v in variables_of(q.term)}
            subs.append((who, path, q.term, resolved))
            if who[0] == "bound":
                per_binder[who[1]] = per_binder.get(who[1], 0) + 1
            return
        if isinstance(q, Restrict):
            inner = dict(scope)
            if q.binder.is_variable:
                inner[q.binder] = path
                per_binder.setdefault(path, 0)
            go(q.body, path + ("body",), inner)
            return
        if isinstance(q, Par):
            go(q.left, path + ("left",), scope)
            go(q.right, path + ("right",), scope)

    go(p, (), {})

    seen = {}
    for who, path, _, _ in subs:
        if who in seen:
            violations.append(Violation(
                2, f"second substitution for {who[-1]}", path))
        else:
            seen[who] = path

    for binder_path, count in per_binder.items():
        if count != 1:
            b = subprocess_at(p, binder_path).binder
            violations.append(Violation(
                3, f"nu {b} has {count} substitutions for {b}", binder_path))

    supply = FreshSupply(all_symbols(p))
    proxy: dict[tuple, Symbol] = {}

    def proxy_of(who):
        if who[0] == "free":
            return who[1]
        if who not in proxy:
            proxy[who] = supply.fresh(who[-1])
        return proxy[who]

    bindings = []
    used = set()
    for who, path, term, resolved in subs:
        if who in used:
            continue
        used.add(who)
        mapping = {v: Atom(proxy_of(w)) for v, w in resolved.items()}
        bindings.append((proxy_of(who), rename_term(term, mapping)))
    try:
        check_acyclic(bindings)
    except CyclicSubstitution as exc:
        violations.append(Violation(4, str(exc), ()))
    return violations


def is_correct(p: Process) -> bool:
    return not check_correct(p)


# --- substitution and renaming ------------------------------------------------

def _rename_binder(p: Process, new: Symbol) -> Process:
    """Rename the binder at the root of ``p`` (Restrict or In) to ``new``."""
    old = _binder(p)
    body = substitute(p.body, {old: Atom(new)})
    if isinstance(p, Restrict):
        return Restrict(new, body)
    return In(p.channel, new, body)


def substitute(p: Process, mapping: dict[Symbol, Term], supply: FreshSupply | None = None) -> Process:
    """Capture-avoiding simultaneous replacement of free symbol occurrences.

    Substitution targets ``{e/x}`` are renamed only when ``x`` maps to a
    variable atom; otherwise they are left alone.
    """
    mapping = {k: v for k, v in mapping.items() if Atom(k) != v}
    if not mapping:
        return p
    if supply is None:
        avoid = set(all_symbols(p))
        for k, v in mapping.items():
            avoid.add(k)
            avoid.update(v.symbols())
        supply = FreshSupply(avoid)
    return _subst(p, mapping, supply)


def _subst(p, mapping, supply):
    if not mapping:
        return p
    if isinstance(p, Nil) or isinstance(p, Hole):
        return p
    if isinstance(p, Sub):
        target = p.var
        img = mapping.get(target)
        if isinstance(img, Atom) and img.symbol.is_variable:
            target = img.symbol
        return Sub(rename_term(p.term, mapping), target)
    if isinstance(p, Par):
        return Par(_subst(p.left, mapping, supply), _subst(p.right, mapping, supply))
    if isinstance(p, Repl):
        return Repl(_subst(p.body, mapping, supply))
    if isinstance(p, Cond):
        return Cond(
            rename_term(p.left, mapping),
            rename_term(p.right, mapping),
            _subst(p.then, mapping, supply),
            _subst(p.orelse, mapping, supply),
        )
    if isinstance(p, Out):
        return Out(
            rename_term(p.channel, mapping),
            rename_term(p.payload, mapping),
            _subst(p.body, mapping, supply),
        )
    if isinstance(p, (Restrict, In)):
        b = _binder(p)
        inner = {k: v for k, v in mapping.items() if k != b}
        body_free = free_symbols(p.body)
        inner = {k: v for k, v in inner.items() if k in body_free}
        body = p.body
        if any(b in v.symbols() for v in inner.values()):
            nb = supply.fresh(b)
            body = _subst(body, {b: Atom(nb)}, supply)
            b = nb
        body = _subst(body, inner, supply)
        if isinstance(p, Restrict):
            return Restrict(b, body)
        return In(rename_term(p.channel, mapping), b, body)
    raise TypeError(f"not a process: {p!r}")


def alpha_rename(p: Process, path, new: Symbol) -> Process:
    """Rename the boundness group of the binder found at ``path`` to ``new``."""
    target = subprocess_at(p, tuple(path))
    old = _binder(target)
    if old is None:
        raise ValueError("no binder at the given path")
    if new.kind != old.kind:
        raise ValueError(f"cannot rename {old.kind} {old} to {new.kind} {new}")
    if new in all_symbols(p):
        raise NotFresh(f"{new} already occurs in the process")
    return replace_at(p, tuple(path), _rename_binder(target, new))


def freshen_binders(p: Process, avoid=()) -> Process:
    """Rename binders so all are pairwise distinct and disjoint from ``avoid``
    and from the free symbols of ``p``."""
    used = set(avoid) | set(free_symbols(p))
    supply = FreshSupply(all_symbols(p) | set(avoid))

    def go(q):
        b = _binder(q)
        if b is not None:
            if b in used:
                q = _rename_binder(q, supply.fresh(b))
                b = _binder(q)
            used.add(b)
        kids = [go(c) for _, c in q.children()]
        return rebuild(q, kids) if kids else q

    return go(p)


def plug(context: Process, p: Process) -> Process:
    """Textually replace every hole of ``context`` by ``p`` (no capture avoidance)."""
    if isinstance(context, Hole):
        return p
    kids = [plug(c, p) for _, c in context.children()]
    return rebuild(context, kids) if kids else context


def holes(context: Process) -> int:
    return sum(1 for _, q in walk(context) if isinstance(q, Hole))


def closes(context: Process, p: Process) -> bool:
    result = plug(context, p)
    return holes(result) == 0 and is_correct(result)


def apply_active(p: Process, term: Term, x: Symbol) -> Process:
    """``p`` with every free occurrence of ``x`` replaced by ``term``."""
    result = substitute(p, {x: term})
    if is_correct(Par(Sub(term, x), p)):
        problems = check_correct(result)
        assert not problems, f"substitution broke correctness: {problems}"
    return result


# --- alpha-invariant keys ---------------------------------------------------------

def _term_key(t: Term, env) -> tuple:
    if isinstance(t, Atom):
        s = t.symbol
        level = env.get(s)
        if level is not None:
            return ("b", level)
        return ("a", s.kind, s.ident, s.index)
    return (t.fn,) + tuple(_term_key(a, env) for a in t.args)


def alpha_key(p: Process, env=None) -> tuple:
    """Structural key with bound symbols replaced by binding depth."""
    env = env or {}
    if isinstance(p, Nil):
        return ("0",)
    if isinstance(p, Hole):
        return ("hole",)
    if isinstance(p, Par):
        return ("|", alpha_key(p.left, env), alpha_key(p.right, env))
    if isinstance(p, Repl):
        return ("!", alpha_key(p.body, env))
    if isinstance(p, Sub):
        return ("sub", _term_key(p.term, env), _term_key(Atom(p.var), env))
    if isinstance(p, Cond):
        return ("if", _term_key(p.left, env), _term_key(p.right, env),
                alpha_key(p.then, env), alpha_key(p.orelse, env))
    if isinstance(p, Out):
        return ("out", _term_key(p.channel, env), _term_key(p.payload, env),
                alpha_key(p.body, env))
    b = _binder(p)
    inner = dict(env)
    inner[b] = len(env)
    if isinstance(p, Restrict):
        return ("nu", b.kind, alpha_key(p.body, inner))
    return ("in", _term_key(p.channel, env), alpha_key(p.body, inner))


def alpha_equal(p: Process, q: Process) -> bool:
    return alpha_key(p) == alpha_key(q)


# --- printing -------------------------------------------------------------------

def format_process(p: Process) -> str:
    return _fmt(p, top=True)


def _fmt(p, top=False):
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Hole):
        return "[]"
    if isinstance(p, Par):
        left = _fmt(p.left)
        if isinstance(p.left, Par):
            left = f"({left})"
        return f"{left} | {_fmt(p.right, top=True)}"
    if isinstance(p, Sub):
        return f"{{{format_term(p.term)}/{p.var}}}"
    if isinstance(p, Repl):
        return "!" + _unary(p.body)
    if isinstance(p, Restrict):
        kw = "new" if p.binder.is_name else "nu"
        return f"{kw} {p.binder}." + _unary(p.body)
    if isinstance(p, In):
        return f"in({format_term(p.channel)}, {p.var})." + _unary(p.body)
    if isinstance(p, Out):
        return f"out({format_term(p.channel)}, {format_term(p.payload)})." + _unary(p.body)
    if isinstance(p, Cond):
        then = _unary(p.then)
        if isinstance(p.orelse, Nil):
            return f"if {format_term(p.left)} = {format_term(p.right)} then {then}"
        if _open_if(p.then) and not then.startswith("("):
            then = f"({then})"
        return f"if {format_term(p.left)} = {format_term(p.right)} then {then} else {_unary(p.orelse)}"
    raise TypeError(f"not a process: {p!r}")


def _open_if(p) -> bool:
    """True when ``p`` prints ending in an else-less conditional."""
    if isinstance(p, Cond):
        return isinstance(p.orelse, Nil) or _open_if(p.orelse)
    if isinstance(p, (In, Out, Restrict, Repl)):
        return _open_if(p.body)
    return False


def _unary(p):
    s = _fmt(p)
    return f"({s})" if isinstance(p, Par) else s


def substitutions_in(p: Process) -> list[Sub]:
    return [q for _, q in walk(p) if isinstance(q, Sub)]


def as_substitution(p: Process) -> AcyclicSubstitution:
    """Free substitutions of ``p`` as an ordered acyclic substitution."""
    return check_acyclic([(s.var, s.term) for s in free_substitutions(p)])


def names_in_terms(p: Process) -> frozenset:
    out = set()
    for _, q in walk(p):
        for t in _terms_of(q):
            out |= names_of(t)
    return frozenset(out)
