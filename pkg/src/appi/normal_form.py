"""Canonical form of closed extended processes and structural equivalence.

Every closed, correct extended process is brought to the shape

    new n1. ... new nk. ({e1/x1} | ... | {el/xl} | P)

with P a plain process free of variables, every ei a closed term in normal
form with respect to the equational theory, and each ni occurring in some
ei.  The steps are: freshen and extrude every binder reachable through
``|`` and ``nu``; eliminate each restricted variable with its own
substitution; order the remaining substitutions, close their images and
apply them to the plain part; normalise all terms; push restricted names
that do not occur in the frame back onto the smallest group of components
that uses them.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .process_ast import (
    Cond,
    In,
    Nil,
    Out,
    Par,
    Process,
    Repl,
    Restrict,
    Sub,
    all_symbols,
    check_correct,
    domain,
    free_symbols,
    freshen_binders,
    is_closed_ep,
    parallel,
    restrict,
    substitute,
)
from .rewriting import EMPTY_THEORY, EquationalTheory, normalize_term
from .term_core import (
    AcyclicSubstitution,
    Atom,
    FreshSupply,
    Symbol,
    Term,
    apply_substitution,
    check_acyclic,
    format_term,
    names_of,
)

DEFAULT_UNFOLD_BOUND = 2


class PreconditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class NormalForm:
    names: tuple[Symbol, ...]
    frame: AcyclicSubstitution
    body: Process

    def to_process(self) -> Process:
        subs = [Sub(e, x) for x, e in self.frame.bindings]
        parts = subs + ([] if isinstance(self.body, Nil) and subs else [self.body])
        return restrict(self.names, parallel(*parts))

    @property
    def domain(self) -> frozenset[Symbol]:
        return frozenset(self.frame.domain)

    def __str__(self):
        prefix = "".join(f"new {n}." for n in self.names)
        parts = [f"{{{format_term(e)}/{x}}}" for x, e in self.frame.bindings]
        if not (isinstance(self.body, Nil) and parts):
            parts.append(str(self.body))
        inner = " | ".join(parts)
        if prefix:
            return f"{prefix}({inner})"
        return inner


# --- term normalisation inside processes ------------------------------------

def map_terms(p: Process, f) -> Process:
    if isinstance(p, (Nil,)):
        return p
    if isinstance(p, Par):
        return Par(map_terms(p.left, f), map_terms(p.right, f))
    if isinstance(p, Repl):
        return Repl(map_terms(p.body, f))
    if isinstance(p, Restrict):
        return Restrict(p.binder, map_terms(p.body, f))
    if isinstance(p, Cond):
        return Cond(f(p.left), f(p.right), map_terms(p.then, f), map_terms(p.orelse, f))
    if isinstance(p, In):
        return In(f(p.channel), p.var, map_terms(p.body, f))
    if isinstance(p, Out):
        return Out(f(p.channel), f(p.payload), map_terms(p.body, f))
    if isinstance(p, Sub):
        return Sub(f(p.term), p.var)
    return p


def normalize_process_terms(p: Process, theory: EquationalTheory) -> Process:
    if not theory.rules:
        return p
    return map_terms(p, lambda t: normalize_term(t, theory))


# --- extrusion --------------------------------------------------------------

def extrude(p: Process):
    """Split ``p`` (binders already distinct) into restricted names, restricted
    variables, active substitutions and plain sequential components."""
    names, variables, subs, comps = [], [], [], []

    def go(q):
        if isinstance(q, Restrict):
            (names if q.binder.is_name else variables).append(q.binder)
            go(q.body)
        elif isinstance(q, Par):
            go(q.left)
            go(q.right)
        elif isinstance(q, Sub):
            subs.append(q)
        elif isinstance(q, Nil):
            pass
        else:
            comps.append(q)

    go(p)
    return names, variables, subs, comps


def _occurs(sym: Symbol, p: Process) -> bool:
    return sym in free_symbols(p)


def push_names(names, frame_values, comps):
    """Keep names occurring in the frame outside; move the others onto the
    smallest group of components using them, or drop them when unused."""
    in_frame = set()
    for v in frame_values:
        in_frame |= names_of(v)
    outer = [n for n in names if n in in_frame]
    groups = list(comps)
    for n in names:
        if n in in_frame:
            continue
        users = [i for i, c in enumerate(groups) if _occurs(n, c)]
        if not users:
            continue
        first = users[0]
        merged = Restrict(n, parallel(*(groups[i] for i in users)))
        groups = [merged if i == first else c for i, c in enumerate(groups) if i == first or i not in users]
    return outer, groups


def settle(names, frame: dict[Symbol, Term], comps, theory: EquationalTheory, supply: FreshSupply) -> NormalForm:
    """Normal form of ``new names.({frame} | comps)`` where the frame values are
    closed and normalised and every component is variable-free."""
    names = list(names)
    taken = set(names)
    for v in frame.values():
        taken.update(v.symbols())
    for c in comps:
        taken.update(free_symbols(c))
    flat = []
    for c in comps:
        c = normalize_process_terms(c, theory)
        stack = [c]
        while stack:
            q = stack.pop()
            if isinstance(q, Par):
                stack.append(q.right)
                stack.append(q.left)
            elif isinstance(q, Restrict):
                b = q.binder
                if b in taken:
                    nb = supply.fresh(b)
                    q = Restrict(nb, substitute(q.body, {b: Atom(nb)}, supply))
                    b = nb
                supply.avoid([b])
                taken.add(b)
                names.append(b)
                stack.append(q.body)
            elif isinstance(q, Nil):
                continue
            else:
                flat.append(q)
    bindings = sorted(frame.items(), key=lambda kv: kv[0].sort_key())
    theta = AcyclicSubstitution(bindings)
    outer, groups = push_names(names, [v for _, v in bindings], flat)
    return NormalForm(tuple(outer), theta, parallel(*groups))


def normalize_process(p: Process, theory: EquationalTheory = EMPTY_THEORY, *, check: bool = True) -> NormalForm:
    """Canonical form ``new n~.({e~/x~} | P)`` of a closed, correct process."""
    if check:
        if not is_closed_ep(p):
            raise PreconditionViolated(f"not a closed process: {p}")
        problems = check_correct(p)
        if problems:
            raise PreconditionViolated("; ".join(map(str, problems)))
    p = freshen_binders(p)
    supply = FreshSupply(all_symbols(p))
    names, variables, subs, comps = extrude(p)

    # Eliminate each restricted variable with its own substitution.
    items: list[Process] = list(subs) + list(comps)
    for x in variables:
        idx = next(i for i, q in enumerate(items) if isinstance(q, Sub) and q.var == x)
        value = items[idx].term
        rest = items[:idx] + items[idx + 1:]
        items = [substitute(q, {x: value}, supply) for q in rest]

    subs = [q for q in items if isinstance(q, Sub)]
    comps = [q for q in items if not isinstance(q, Sub)]
    theta = check_acyclic([(s.var, s.term) for s in subs])
    closed = {}
    for x, e in theta.bindings:
        closed[x] = normalize_term(apply_substitution(e, theta), theory)
    body_comps = []
    for c in comps:
        for x, e in theta.bindings:
            c = substitute(c, {x: e}, supply)
        body_comps.append(c)
    return settle(names, closed, body_comps, theory, supply)


def normal_form_violations(p: Process, nf: NormalForm) -> list[str]:
    """Shape conditions the canonical form of ``p`` must meet; empty when all hold."""
    out = []
    if any(s.is_variable for s in free_symbols(nf.body)):
        out.append(f"free variables in body: {nf.body}")
    for x, e in nf.frame.bindings:
        if any(s.is_variable for s in e.symbols()):
            out.append(f"frame image of {x} mentions variables: {format_term(e)}")
    in_frame = set()
    for _, e in nf.frame.bindings:
        in_frame |= names_of(e)
    for n in nf.names:
        if n not in in_frame:
            out.append(f"restricted name {n} does not occur in the frame")
    if nf.domain != domain(p):
        out.append(f"domain changed from {sorted(map(str, domain(p)))} to {sorted(map(str, nf.domain))}")
    return out


def frame_of(p: Process, theory: EquationalTheory = EMPTY_THEORY) -> AcyclicSubstitution:
    return normalize_process(p, theory).frame


# --- canonical keys -----------------------------------------------------------

def _tkey(t: Term, env, rmap) -> tuple:
    if isinstance(t, Atom):
        s = t.symbol
        lvl = env.get(s)
        if lvl is not None:
            return ("b", lvl)
        r = rmap.get(s)
        if r is not None:
            return ("r", r)
        return ("a", s.kind, s.ident, s.index)
    return ("f", t.fn, tuple(_tkey(a, env, rmap) for a in t.args))


def _pkey(p: Process, env, rmap) -> tuple:
    if isinstance(p, Nil):
        return ("0",)
    if isinstance(p, Par):
        parts = sorted(_pkey(c, env, rmap) for c in _flat_par(p))
        return ("|",) + tuple(parts)
    if isinstance(p, Repl):
        return ("!", _pkey(p.body, env, rmap))
    if isinstance(p, Cond):
        return ("if", _tkey(p.left, env, rmap), _tkey(p.right, env, rmap),
                _pkey(p.then, env, rmap), _pkey(p.orelse, env, rmap))
    if isinstance(p, Out):
        return ("out", _tkey(p.channel, env, rmap), _tkey(p.payload, env, rmap),
                _pkey(p.body, env, rmap))
    if isinstance(p, In):
        inner = dict(env)
        inner[p.var] = len(env)
        return ("in", _tkey(p.channel, env, rmap), _pkey(p.body, inner, rmap))
    if isinstance(p, Restrict):
        inner = dict(env)
        inner[p.binder] = len(env)
        return ("nu", p.binder.kind, _pkey(p.body, inner, rmap))
    if isinstance(p, Sub):
        return ("sub", _tkey(p.term, env, rmap), p.var.sort_key())
    raise TypeError(f"not a process: {p!r}")


def _flat_par(p):
    if isinstance(p, Par):
        return _flat_par(p.left) + _flat_par(p.right)
    return [p] if not isinstance(p, Nil) else []


def _term_names_in_order(t: Term, out: list):
    for s in t.symbols():
        if s.is_name and s not in out:
            out.append(s)


def _proc_names_in_order(p: Process, restricted, out: list):
    # Names in a deterministic traversal order; bound names are not collected.
    def go(q, bound):
        if isinstance(q, Cond):
            terms = (q.left, q.right)
        elif isinstance(q, Out):
            terms = (q.channel, q.payload)
        elif isinstance(q, In):
            terms = (q.channel,)
        else:
            terms = ()
        for t in terms:
            for s in t.symbols():
                if s in restricted and s not in bound and s not in out:
                    out.append(s)
        inner = bound
        if isinstance(q, (Restrict, In)):
            inner = bound | {q.binder if isinstance(q, Restrict) else q.var}
        for _, c in q.children():
            go(c, inner)

    go(p, frozenset())


MAX_TIE_PERMUTATIONS = 720


def configuration_key(names, frame_bindings, comps) -> tuple:
    """Key invariant under renaming of restricted names, permutation of
    components and dropping of unused restricted names."""
    restricted = set(names)
    rmap: dict[Symbol, int] = {}
    frame_part = []
    for x, v in sorted(frame_bindings, key=lambda kv: kv[0].sort_key()):
        order: list = []
        _term_names_in_order(v, order)
        for n in order:
            if n in restricted and n not in rmap:
                rmap[n] = len(rmap)
        frame_part.append((x.sort_key(), _tkey(v, {}, rmap)))
    frame_part = tuple(frame_part)

    comps = [c for c in comps if not isinstance(c, Nil)]
    pending = [n for n in restricted if n not in rmap]
    if not pending:
        return ("nf", frame_part, tuple(sorted(_pkey(c, {}, rmap) for c in comps)))

    anon = {n: -1 for n in pending}
    anon.update(rmap)
    scored = sorted(((_pkey(c, {}, anon), i) for i, c in enumerate(comps)), key=lambda t: t[0])
    groups = [list(g) for _, g in itertools.groupby(scored, key=lambda t: t[0])]
    tie_groups = [g for g in groups if len(g) > 1]
    budget = math.prod(math.factorial(len(g)) for g in tie_groups) if tie_groups else 1
    if budget > MAX_TIE_PERMUTATIONS:
        orderings = [[[i for _, i in g] for g in groups]]
    else:
        choices = [list(itertools.permutations([i for _, i in g])) for g in groups]
        orderings = [list(map(list, combo)) for combo in itertools.product(*choices)]

    best = None
    for ordering in orderings:
        local = dict(rmap)
        for group in ordering:
            for i in group:
                seen: list = []
                _proc_names_in_order(comps[i], restricted, seen)
                for n in seen:
                    if n not in local:
                        local[n] = len(local)
        key = ("nf", frame_part, tuple(sorted(_pkey(c, {}, local) for c in comps)))
        if best is None or key < best:
            best = key
    return best


def configuration(nf: NormalForm, supply: FreshSupply | None = None):
    """(restricted names, frame bindings, flat components) with every
    top-level restriction of the body pulled out."""
    if supply is None:
        supply = FreshSupply(all_symbols(nf.to_process()))
    names = list(nf.names)
    comps = []
    stack = [nf.body]
    while stack:
        q = stack.pop()
        if isinstance(q, Par):
            stack.append(q.right)
            stack.append(q.left)
        elif isinstance(q, Restrict):
            b = q.binder
            if b in names:
                nb = supply.fresh(b)
                q = Restrict(nb, substitute(q.body, {b: Atom(nb)}, supply))
                b = nb
            names.append(b)
            stack.append(q.body)
        elif not isinstance(q, Nil):
            comps.append(q)
    return names, list(nf.frame.bindings), comps


def canonical_key(nf: NormalForm) -> tuple:
    names, frame, comps = configuration(nf)
    return configuration_key(names, frame, comps)


def _unfoldings(nf: NormalForm, bound: int, theory) -> set:
    """Keys of ``nf`` with up to ``bound`` replications unfolded once each step."""
    known = set(all_symbols(nf.to_process()))
    supply = FreshSupply(known)
    names, frame, comps = configuration(nf, supply)
    known.update(names)
    for c in comps:
        known.update(all_symbols(c))
    seen = {configuration_key(names, frame, comps)}
    frontier = [(names, comps)]
    for _ in range(bound):
        nxt = []
        for ns, cs in frontier:
            for i, c in enumerate(cs):
                if not isinstance(c, Repl):
                    continue
                copy = freshen_binders(c.body, avoid=known)
                known.update(all_symbols(copy))
                sub_names, _, _, sub_comps = extrude(copy)
                new_names = ns + sub_names
                new_comps = cs + sub_comps
                k = configuration_key(new_names, frame, new_comps)
                if k not in seen:
                    seen.add(k)
                    nxt.append((new_names, new_comps))
        frontier = nxt
    return seen


def struct_equiv(a: Process, b: Process, theory: EquationalTheory = EMPTY_THEORY,
                 unfold_bound: int = DEFAULT_UNFOLD_BOUND) -> bool:
    """Sound check of structural equivalence between closed correct processes."""
    na = normalize_process(a, theory)
    nb = normalize_process(b, theory)
    return normal_forms_equivalent(na, nb, theory, unfold_bound)


def normal_forms_equivalent(na: NormalForm, nb: NormalForm, theory=EMPTY_THEORY,
                            unfold_bound: int = DEFAULT_UNFOLD_BOUND) -> bool:
    if na.domain != nb.domain:
        return False
    if canonical_key(na) == canonical_key(nb):
        return True
    if unfold_bound <= 0:
        return False
    return bool(_unfoldings(na, unfold_bound, theory) & _unfoldings(nb, unfold_bound, theory))
