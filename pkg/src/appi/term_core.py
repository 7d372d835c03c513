"""Terms over names, variables and constants, plus acyclic substitutions.

Terms are immutable and hashable.  Variables, names and constants are kept
apart by a kind tag on :class:`Symbol` rather than by spelling, so ``x`` the
variable and ``x`` the name are different atoms.
"""
from __future__ import annotations

import threading
from typing import Iterable, Iterator, Mapping

VARIABLE = "variable"
NAME = "name"
CONSTANT = "constant"
KINDS = (VARIABLE, NAME, CONSTANT)


class CyclicSubstitution(ValueError):
    pass


class ArityError(ValueError):
    pass


class Symbol:
    """An atom identifier: ``(kind, ident, index)``.

    ``index`` is the freshness generation; index 0 prints as the bare
    identifier and index k > 0 prints as ``ident#k``.
    """

    __slots__ = ("kind", "ident", "index", "_hash")

    def __init__(self, kind: str, ident: str, index: int = 0):
        if kind not in KINDS:
            raise ValueError(f"unknown symbol kind {kind!r}")
        if index < 0:
            raise ValueError("symbol index must be non-negative")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "ident", ident)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "_hash", hash((kind, ident, index)))

    def __setattr__(self, name, value):
        raise AttributeError("Symbol is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, Symbol)
            and self.index == other.index
            and self.ident == other.ident
            and self.kind == other.kind
        )

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def sort_key(self):
        return (self.ident, self.index, self.kind)

    def __repr__(self):
        return f"Symbol({self.kind!r}, {self.ident!r}, {self.index})"

    def __str__(self):
        return self.ident if self.index == 0 else f"{self.ident}#{self.index}"

    @property
    def is_variable(self):
        return self.kind == VARIABLE

    @property
    def is_name(self):
        return self.kind == NAME

    @property
    def is_constant(self):
        return self.kind == CONSTANT

    def with_index(self, index: int) -> "Symbol":
        return Symbol(self.kind, self.ident, index)


def var(ident: str, index: int = 0) -> Symbol:
    return Symbol(VARIABLE, ident, index)


def name(ident: str, index: int = 0) -> Symbol:
    return Symbol(NAME, ident, index)


def const(ident: str) -> Symbol:
    return Symbol(CONSTANT, ident)


class Term:
    __slots__ = ()

    def symbols(self) -> Iterator[Symbol]:
        raise NotImplementedError

    def size(self) -> int:
        raise NotImplementedError


class Atom(Term):
    __slots__ = ("symbol", "_hash")

    def __init__(self, symbol: Symbol):
        object.__setattr__(self, "symbol", symbol)
        object.__setattr__(self, "_hash", hash(("atom", symbol)))

    def __setattr__(self, name, value):
        raise AttributeError("Term is immutable")

    def __eq__(self, other):
        return isinstance(other, Atom) and self.symbol == other.symbol

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Atom({self.symbol!r})"

    def __str__(self):
        return str(self.symbol)

    def symbols(self):
        yield self.symbol

    def size(self):
        return 1


class App(Term):
    __slots__ = ("fn", "args", "_hash")

    def __init__(self, fn: str, args: Iterable[Term]):
        args = tuple(args)
        if not args:
            raise ArityError(f"function symbol {fn!r} applied to no arguments")
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "_hash", hash((fn, args)))

    def __setattr__(self, name, value):
        raise AttributeError("Term is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, App)
            and self._hash == other._hash
            and self.fn == other.fn
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"App({self.fn!r}, {self.args!r})"

    def __str__(self):
        return format_term(self)

    def symbols(self):
        for a in self.args:
            yield from a.symbols()

    def size(self):
        return 1 + sum(a.size() for a in self.args)


def format_term(t: Term) -> str:
    if isinstance(t, Atom):
        return str(t.symbol)
    inner = ", ".join(format_term(a) for a in t.args)
    if t.fn == "pair" and len(t.args) == 2:
        return f"({inner})"
    return f"{t.fn}({inner})"


def pair(a: Term, b: Term) -> App:
    return App("pair", (a, b))


def as_term(x) -> Term:
    return Atom(x) if isinstance(x, Symbol) else x


class Signature:
    """Function symbols with their (positive) arities; always contains pair/2."""

    def __init__(self, arities: Mapping[str, int] | None = None):
        table = {"pair": 2}
        for f, n in (arities or {}).items():
            if n < 1:
                raise ArityError(f"arity of {f} must be positive, got {n}")
            if f == "pair" and n != 2:
                raise ArityError("pair is built in with arity 2")
            table[f] = n
        self._arities = dict(sorted(table.items()))

    @property
    def function_symbols(self) -> dict[str, int]:
        return dict(self._arities)

    def arity(self, f: str) -> int:
        return self._arities[f]

    def __contains__(self, f):
        return f in self._arities

    def __iter__(self):
        return iter(self._arities.items())

    def __eq__(self, other):
        return isinstance(other, Signature) and self._arities == other._arities

    def __repr__(self):
        return f"Signature({self._arities!r})"

    def extend(self, arities: Mapping[str, int]) -> "Signature":
        merged = dict(self._arities)
        merged.update(arities)
        return Signature(merged)

    def check(self, t: Term) -> None:
        if isinstance(t, App):
            if t.fn not in self._arities:
                raise ArityError(f"undeclared function symbol {t.fn!r}")
            if len(t.args) != self._arities[t.fn]:
                raise ArityError(
                    f"{t.fn} expects {self._arities[t.fn]} arguments, got {len(t.args)}"
                )
            for a in t.args:
                self.check(a)


def variables_of(e: Term) -> frozenset[Symbol]:
    return frozenset(s for s in e.symbols() if s.kind == VARIABLE)


def names_of(e: Term) -> frozenset[Symbol]:
    return frozenset(s for s in e.symbols() if s.kind == NAME)


def is_closed(e: Term) -> bool:
    return not variables_of(e)


def in_tm(e: Term, variables) -> bool:
    """True iff every variable of ``e`` lies in ``variables``."""
    return variables_of(e) <= set(variables)


def rename_term(e: Term, mapping: Mapping[Symbol, Term]) -> Term:
    """Simultaneous replacement of atoms by terms (one pass, no re-scan)."""
    if not mapping:
        return e
    if isinstance(e, Atom):
        return mapping.get(e.symbol, e)
    new_args = tuple(rename_term(a, mapping) for a in e.args)
    if all(n is o for n, o in zip(new_args, e.args)):
        return e
    return App(e.fn, new_args)


def replace_subterm(e: Term, target: Term, replacement: Term) -> Term:
    if e == target:
        return replacement
    if isinstance(e, Atom):
        return e
    return App(e.fn, (replace_subterm(a, target, replacement) for a in e.args))


class AcyclicSubstitution:
    """Ordered bindings ``x1 -> e1, ..., xl -> el`` with x_i not in var(e_j) for i <= j.

    Build instances through :func:`check_acyclic`; the constructor only
    validates an ordering it is handed.
    """

    __slots__ = ("bindings", "_map")

    def __init__(self, bindings: Iterable[tuple[Symbol, Term]] = ()):
        bindings = tuple((x, as_term(e)) for x, e in bindings)
        seen = set()
        for x, _ in bindings:
            if not x.is_variable:
                raise ValueError(f"substitution domain must be variables, got {x}")
            if x in seen:
                raise ValueError(f"duplicate binding for {x}")
            seen.add(x)
        violation = ordering_violation(bindings)
        if violation is not None:
            i, j = violation
            raise CyclicSubstitution(
                f"{bindings[i][0]} occurs in the image of {bindings[j][0]}"
            )
        object.__setattr__(self, "bindings", bindings)
        object.__setattr__(self, "_map", dict(bindings))

    def __setattr__(self, name, value):
        raise AttributeError("AcyclicSubstitution is immutable")

    @property
    def domain(self) -> tuple[Symbol, ...]:
        return tuple(x for x, _ in self.bindings)

    def __getitem__(self, x: Symbol) -> Term:
        return self._map[x]

    def get(self, x, default=None):
        return self._map.get(x, default)

    def __contains__(self, x):
        return x in self._map

    def __len__(self):
        return len(self.bindings)

    def __iter__(self):
        return iter(self.bindings)

    def __eq__(self, other):
        return isinstance(other, AcyclicSubstitution) and self.bindings == other.bindings

    def __hash__(self):
        return hash(self.bindings)

    def __repr__(self):
        return f"AcyclicSubstitution({list(self.bindings)!r})"

    def __str__(self):
        if not self.bindings:
            return "{}"
        return " | ".join(f"{{{format_term(e)}/{x}}}" for x, e in self.bindings)

    def as_dict(self) -> dict[Symbol, Term]:
        return dict(self._map)


def ordering_violation(bindings) -> tuple[int, int] | None:
    """First (i, j), i <= j, with x_i in var(e_j); None when the order is acyclic."""
    for j, (_, ej) in enumerate(bindings):
        vs = variables_of(ej)
        for i in range(j + 1):
            if bindings[i][0] in vs:
                return (i, j)
    return None


def check_acyclic(bindings) -> AcyclicSubstitution:
    """Order bindings so that no variable occurs in its own or a later image.

    x must precede y whenever y occurs in the image of x; ties are broken by
    (identifier, index).  Raises :class:`CyclicSubstitution` on a cycle.
    """
    if isinstance(bindings, Mapping):
        bindings = list(bindings.items())
    bindings = [(x, as_term(e)) for x, e in bindings]
    table = {}
    for x, e in bindings:
        if x in table:
            raise ValueError(f"duplicate binding for {x}")
        table[x] = e
    # x -> y edge when y occurs in table[x]; x must come first.
    blockers = {x: 0 for x in table}
    users = {x: [] for x in table}
    for x, e in table.items():
        for y in variables_of(e):
            if y == x:
                raise CyclicSubstitution(f"{x} occurs in its own image")
            if y in table:
                blockers[y] += 1
                users[x].append(y)
    ready = sorted((x for x, n in blockers.items() if n == 0), key=Symbol.sort_key)
    order = []
    while ready:
        x = ready.pop(0)
        order.append(x)
        changed = False
        for y in users[x]:
            blockers[y] -= 1
            if blockers[y] == 0:
                ready.append(y)
                changed = True
        if changed:
            ready.sort(key=Symbol.sort_key)
    if len(order) != len(table):
        stuck = sorted((x for x in table if x not in order), key=Symbol.sort_key)
        raise CyclicSubstitution("cyclic dependency among " + ", ".join(map(str, stuck)))
    return AcyclicSubstitution((x, table[x]) for x in order)


def substitute_one(e: Term, x: Symbol, value: Term) -> Term:
    return rename_term(e, {x: value})


def apply_substitution(e: Term, theta: AcyclicSubstitution) -> Term:
    """Apply the singleton substitutions of ``theta`` one after another, left to right."""
    for x, value in theta.bindings:
        e = substitute_one(e, x, value)
    return e


class FreshSupply:
    """Thread-safe issuer of symbols that avoid a given set and each other.

    Each request for ``(kind, ident)`` returns the smallest index not yet
    used, so output is deterministic for a fixed request sequence.
    """

    def __init__(self, avoid: Iterable[Symbol] = ()):
        self._lock = threading.Lock()
        self._used: set[Symbol] = set(avoid)

    def avoid(self, symbols: Iterable[Symbol]) -> None:
        with self._lock:
            self._used.update(symbols)

    def fresh(self, base: Symbol) -> Symbol:
        with self._lock:
            index = 1
            candidate = base.with_index(index)
            while candidate in self._used:
                index += 1
                candidate = base.with_index(index)
            self._used.add(candidate)
            return candidate

    def fresh_like(self, kind: str, ident: str) -> Symbol:
        return self.fresh(Symbol(kind, ident))

    def __contains__(self, s):
        return s in self._used

    def used(self) -> frozenset[Symbol]:
        with self._lock:
            return frozenset(self._used)


_SESSION = FreshSupply()


def fresh_symbol(kind: str, ident: str, avoid: Iterable[Symbol] = ()) -> Symbol:
    """Session-wide fresh symbol: never equal to one issued earlier in this process."""
    _SESSION.avoid(avoid)
    return _SESSION.fresh_like(kind, ident)
