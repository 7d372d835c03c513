"""Random and enumerated extended processes for property tests and selftest.

Everything takes an explicit ``random.Random`` so corpora are reproducible
from a seed.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .process_ast import (
    NIL,
    Cond,
    In,
    Out,
    Par,
    Process,
    Repl,
    Restrict,
    Sub,
    _binder,
    all_symbols,
    domain,
    free_names,
    free_symbols,
    is_correct,
    process_size,
    replace_at,
    substitute,
    walk,
)
from .rewriting import EquationalTheory, normalize_term
from .syntax import parse_process
from .term_core import (
    CONSTANT,
    NAME,
    VARIABLE,
    App,
    Atom,
    FreshSupply,
    Symbol,
    Term,
    replace_subterm,
)

PUBLIC_NAMES = ("a", "b", "c")
PRIVATE_NAMES = ("n", "m")
CONSTANTS = ("0", "1")


def _atom(kind, ident, index=0):
    return Atom(Symbol(kind, ident, index))


def random_term(rng: random.Random, atoms, functions: dict[str, int], depth: int) -> Term:
    if depth <= 0 or not functions or rng.random() < 0.6:
        return rng.choice(atoms)
    fn = rng.choice(sorted(functions))
    return App(fn, tuple(random_term(rng, atoms, functions, depth - 1) for _ in range(functions[fn])))


@dataclass
class _Gen:
    rng: random.Random
    functions: dict
    replication: bool
    names: list = field(default_factory=list)
    frame_vars: list = field(default_factory=list)
    counter: int = 0

    def term(self, bound_vars, depth=1):
        atoms = [Atom(n) for n in self.names] + [_atom(CONSTANT, c) for c in CONSTANTS]
        atoms += [Atom(v) for v in self.frame_vars + bound_vars]
        return random_term(self.rng, atoms, self.functions, depth)

    def channel(self, bound_vars):
        pool = [Atom(n) for n in self.names]
        if self.rng.random() < 0.15 and (self.frame_vars or bound_vars):
            pool = [Atom(v) for v in self.frame_vars + bound_vars]
        return self.rng.choice(pool)

    def plain(self, budget, bound_vars=()) -> Process:
        bound_vars = list(bound_vars)
        rng = self.rng
        if budget <= 1:
            return NIL
        r = rng.random()
        if r < 0.3:
            return Out(self.channel(bound_vars), self.term(bound_vars), self.plain(budget - 3, bound_vars))
        if r < 0.5:
            self.counter += 1
            y = Symbol(VARIABLE, "y", self.counter)
            return In(self.channel(bound_vars), y, self.plain(budget - 2, bound_vars + [y]))
        if r < 0.62:
            left = self.term(bound_vars, 0)
            right = self.term(bound_vars, 0) if rng.random() < 0.5 else left
            k = max(1, (budget - 3) // 2)
            return Cond(left, right, self.plain(k, bound_vars), self.plain(budget - 3 - k, bound_vars))
        if r < 0.8:
            k = max(1, (budget - 1) // 2)
            return Par(self.plain(k, bound_vars), self.plain(budget - 1 - k, bound_vars))
        if r < 0.88:
            self.counter += 1
            k = Symbol(NAME, "k", self.counter)
            self.names.append(k)
            try:
                body = self.plain(budget - 1, bound_vars)
            finally:
                self.names.remove(k)
            return Restrict(k, body)
        if r < 0.94 and self.replication:
            return Repl(self.plain(min(budget - 1, 5), bound_vars))
        return NIL


class _Node:
    __slots__ = ("proc", "left", "right", "items", "binders", "parent")

    def __init__(self, proc=None, left=None, right=None, items=()):
        self.proc, self.left, self.right = proc, left, right
        self.items = frozenset(items)
        self.binders = []
        self.parent = None


def _tree(rng, indices, leaves):
    if len(indices) == 1:
        return _Node(proc=leaves[indices[0]], items=indices)
    k = rng.randint(1, len(indices) - 1)
    left, right = _tree(rng, indices[:k], leaves), _tree(rng, indices[k:], leaves)
    node = _Node(left=left, right=right, items=indices)
    left.parent = right.parent = node
    return node


def _nodes(node):
    yield node
    if node.left is not None:
        yield from _nodes(node.left)
        yield from _nodes(node.right)


def _emit(rng, node) -> Process:
    if node.proc is not None:
        p = node.proc
    else:
        p = Par(_emit(rng, node.left), _emit(rng, node.right))
    binders = list(node.binders)
    rng.shuffle(binders)
    for b in binders:
        p = Restrict(b, p)
    return p


def random_ep(rng: random.Random, max_nodes: int = 30, *, replication: bool = False,
              functions: dict[str, int] | None = None, max_vars: int = 3) -> Process:
    """A random correct closed extended process of at most ``max_nodes`` nodes.

    Frame variables ``x#i`` get one substitution each over earlier variables,
    plain components use them freely, and every restriction is attached at
    or above the smallest subtree covering its occurrences.
    """
    functions = {"pair": 2} if functions is None else dict(functions)
    while True:
        p = _random_ep_attempt(rng, max_nodes, replication, functions, max_vars)
        if process_size(p) <= max_nodes:
            return p


def _random_ep_attempt(rng, max_nodes, replication, functions, max_vars):
    names = [Symbol(NAME, n) for n in PUBLIC_NAMES + PRIVATE_NAMES]
    g = _Gen(rng, functions, replication, names=list(names))
    nvars = rng.randint(0, max_vars)
    xs = [Symbol(VARIABLE, "x", i + 1) for i in range(nvars)]
    leaves: list[Process] = []
    for i, x in enumerate(xs):
        g.frame_vars = xs[:i]
        leaves.append(Sub(g.term([], depth=2), x))
    g.frame_vars = xs
    budget = max(2, max_nodes - 2 * len(leaves))
    for _ in range(rng.randint(1, 3)):
        leaves.append(g.plain(rng.randint(2, max(2, budget // 2))))
    rng.shuffle(leaves)
    root = _tree(rng, list(range(len(leaves))), leaves)
    nodes = list(_nodes(root))

    restricted_vars = [x for x in xs if rng.random() < 0.4]
    restricted_names = [Symbol(NAME, n) for n in PRIVATE_NAMES if rng.random() < 0.7]
    for u in restricted_vars + restricted_names:
        mentions = {i for i, leaf in enumerate(leaves) if u in free_symbols(leaf)}
        if not mentions:
            node = rng.choice(nodes)
        else:
            node = root
            for cand in nodes:
                if mentions <= cand.items and len(cand.items) < len(node.items):
                    node = cand
            while node.parent is not None and rng.random() < 0.3:
                node = node.parent
        node.binders.append(u)
    return _emit(rng, root)


def corpus(seed: int, size: int, **kwargs) -> list[Process]:
    rng = random.Random(seed)
    return [random_ep(rng, **kwargs) for _ in range(size)]


# --- small exhaustive family ---------------------------------------------------------------

TEMPLATES_EMPTY_DOMAIN = (
    "0",
    "out(c,0)",
    "out(c,1)",
    "out(a,0)",
    "out(c,0) | out(c,0)",
    "out(c,0).out(c,1)",
    "out(c,1).out(c,0)",
    "in(c,y).0",
    "in(a,y).0",
    "in(c,y).out(c,y)",
    "in(c,y).if y = 0 then out(c,1)",
    "out(c,0) | in(c,y).0",
    "out(c,0) | in(c,y).out(a,y)",
    "new n.out(c,n)",
    "new n.out(n,0)",
    "new n.(out(n,0) | in(n,y).out(c,y))",
    "new n.(out(n,0) | in(n,y).out(c,1))",
    "if 0 = 0 then out(c,0)",
    "if 0 = 1 then out(c,0) else out(c,1)",
    "new n.out(c,n).in(c,y).if y = n then out(a,0)",
)

TEMPLATES_ONE_VARIABLE = (
    "{0/x}",
    "{1/x}",
    "{pair(0,1)/x}",
    "new n.{n/x}",
    "new n.{pair(n,0)/x}",
    "{0/x} | out(c,0)",
    "{0/x} | out(c,x)",
    "new n.({n/x} | out(n,0))",
)


def template_family() -> list[list[Process]]:
    """Groups of processes sharing a domain; every template has at most 12 nodes."""
    groups = []
    for texts in (TEMPLATES_EMPTY_DOMAIN, TEMPLATES_ONE_VARIABLE):
        groups.append([parse_process(t) for t in texts])
    return groups


def template_pairs() -> list[tuple[Process, Process]]:
    """All unordered pairs, including a process with itself, within each domain group."""
    out = []
    for group in template_family():
        for i, p in enumerate(group):
            for q in group[i:]:
                out.append((p, q))
    return out


# --- contexts ---------------------------------------------------------------------------------

def random_context(rng: random.Random, *targets: Process, max_nodes: int = 8):
    """Binders and a plain closing context ``(u~, C)`` for the given processes.

    ``C`` uses only the frame variables of the targets, their free names, a
    fresh channel and the constants; binders hide some free names.
    """
    used = set()
    for t in targets:
        used |= all_symbols(t)
    supply = FreshSupply(used)
    public = sorted(set().union(*(free_names(t) for t in targets)), key=Symbol.sort_key)
    extra = supply.fresh_like(NAME, "e")
    g = _Gen(rng, {"pair": 2}, False, names=public + [extra])
    g.frame_vars = sorted(set().union(*(domain(t) for t in targets)), key=Symbol.sort_key)
    g.counter = 100  # input binders y#101... stay clear of the targets' names
    ctx = g.plain(rng.randint(2, max_nodes))
    binders = [n for n in public if rng.random() < 0.2]
    return binders, ctx


# --- single structural-rule rewrites ----------------------------------------------------------

# par-monoid: 0 and | form a commutative monoid; replicate: !P = P | !P;
# restriction: drop an unused binder or swap two; scope-extrusion: move a binder over a
# parallel component; alias-elim: nu x.({e/x} | A) = A{e/x}; subst-apply: {e/x} | A =
# {e/x} | A{e/x}; rewrite: {e/x} = {e'/x} for equal e, e'.
RULES = ("par-monoid", "replicate", "restriction", "scope-extrusion", "alias-elim", "subst-apply", "rewrite")


def ep_positions(p: Process, path=()):
    """Paths reachable through parallel composition and restriction only."""
    yield path, p
    if isinstance(p, Par):
        yield from ep_positions(p.left, path + ("left",))
        yield from ep_positions(p.right, path + ("right",))
    elif isinstance(p, Restrict):
        yield from ep_positions(p.body, path + ("body",))


def _bound_above(p: Process, path) -> set:
    out, q = set(), p
    for step in path:
        b = _binder(q)
        if b is not None:
            out.add(b)
        q = dict(q.children())[step]
    return out


def _abstract(rng, p: Process, e: Term, x: Symbol) -> Process:
    """Replace a random subset of the free occurrences of ``e`` in ``p`` by ``x``.

    Occurrences under a binder of ``x`` or of a symbol of ``e`` are left alone.
    """
    blocked = set(e.symbols()) | {x}

    def t(term):
        return replace_subterm(term, e, Atom(x)) if rng.random() < 0.6 else term

    def go(q):
        if isinstance(q, Sub):
            return Sub(t(q.term), q.var)
        if isinstance(q, Out):
            return Out(t(q.channel), t(q.payload), go(q.body))
        if isinstance(q, In):
            body = q.body if q.var in blocked else go(q.body)
            return In(t(q.channel), q.var, body)
        if isinstance(q, Restrict):
            return q if q.binder in blocked else Restrict(q.binder, go(q.body))
        if isinstance(q, Cond):
            return Cond(t(q.left), t(q.right), go(q.then), go(q.orelse))
        if isinstance(q, Par):
            return Par(go(q.left), go(q.right))
        if isinstance(q, Repl):
            return Repl(go(q.body))
        return q

    return go(p)


def _terms(p: Process):
    for _, q in walk(p):
        if isinstance(q, Sub):
            yield q.term
        elif isinstance(q, Out):
            yield q.channel
            yield q.payload
        elif isinstance(q, In):
            yield q.channel
        elif isinstance(q, Cond):
            yield q.left
            yield q.right


def _subterms(t: Term):
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from _subterms(a)


def _closed_subterms(p: Process):
    seen = []
    for t in _terms(p):
        for s in _subterms(t):
            if not any(sym.is_variable for sym in s.symbols()) and s not in seen:
                seen.append(s)
    return seen


def _rewrites(p: Process, rule: str, rng: random.Random, theory: EquationalTheory, supply: FreshSupply):
    """Candidate ``(path, replacement)`` pairs for one application of ``rule``."""
    out = []
    for path, q in ep_positions(p):
        bound = _bound_above(p, path)
        if rule == "par-monoid":
            out.append((path, Par(q, NIL)))
            out.append((path, Par(NIL, q)))
            if isinstance(q, Par):
                out.append((path, Par(q.right, q.left)))
                if q.right == NIL:
                    out.append((path, q.left))
                if isinstance(q.right, Par):
                    out.append((path, Par(Par(q.left, q.right.left), q.right.right)))
                if isinstance(q.left, Par):
                    out.append((path, Par(q.left.left, Par(q.left.right, q.right))))
        elif rule == "replicate":
            if isinstance(q, Repl):
                out.append((path, Par(q.body, q)))
            if isinstance(q, Par) and isinstance(q.right, Repl) and q.right.body == q.left:
                out.append((path, q.right))
        elif rule == "restriction":
            if isinstance(q, Restrict):
                if q.binder.is_name and q.binder not in free_symbols(q.body):
                    out.append((path, q.body))
                if isinstance(q.body, Restrict):
                    out.append((path, Restrict(q.body.binder, Restrict(q.binder, q.body.body))))
            out.append((path, Restrict(supply.fresh_like(NAME, "g"), q)))
        elif rule == "scope-extrusion":
            if isinstance(q, Par):
                for inner, other, rebuild in ((q.left, q.right, lambda a, b: Par(a, b)),
                                              (q.right, q.left, lambda a, b: Par(b, a))):
                    if isinstance(inner, Restrict) and inner.binder not in free_symbols(other):
                        out.append((path, Restrict(inner.binder, rebuild(inner.body, other))))
            if isinstance(q, Restrict) and isinstance(q.body, Par):
                u, body = q.binder, q.body
                if u not in free_symbols(body.right):
                    out.append((path, Par(Restrict(u, body.left), body.right)))
                if u not in free_symbols(body.left):
                    out.append((path, Par(body.left, Restrict(u, body.right))))
        elif rule == "alias-elim":
            if (isinstance(q, Restrict) and isinstance(q.body, Par) and isinstance(q.body.left, Sub)
                    and q.body.left.var == q.binder):
                x, e = q.binder, q.body.left.term
                out.append((path, substitute(q.body.right, {x: e})))
            x = supply.fresh_like(VARIABLE, "v")
            choices = [s for s in _closed_subterms(q) if not (set(s.symbols()) & bound)]
            e = rng.choice(choices) if choices else _atom(CONSTANT, "0")
            out.append((path, Restrict(x, Par(Sub(e, x), _abstract(rng, q, e, x)))))
        elif rule == "subst-apply":
            if isinstance(q, Par):
                for sub, other, rebuild in ((q.left, q.right, lambda a, b: Par(a, b)),
                                            (q.right, q.left, lambda a, b: Par(b, a))):
                    if isinstance(sub, Sub):
                        x, e = sub.var, sub.term
                        out.append((path, rebuild(sub, substitute(other, {x: e}))))
                        if x not in bound:
                            out.append((path, rebuild(sub, _abstract(rng, other, e, x))))
        elif rule == "rewrite":
            if isinstance(q, Sub):
                nf = normalize_term(q.term, theory)
                if nf != q.term:
                    out.append((path, Sub(nf, q.var)))
                pad = random_term(rng, [_atom(CONSTANT, c) for c in CONSTANTS], {}, 0)
                if "fst" in theory.signature:
                    wrapped = (App("fst", (App("pair", (q.term, pad)),)) if rng.random() < 0.5
                               else App("snd", (App("pair", (pad, q.term)),)))
                    out.append((path, Sub(wrapped, q.var)))
                else:
                    out.append((path, Sub(nf, q.var)))
        else:
            raise ValueError(f"unknown rule {rule!r}")
    return out


def rewrite_once(rng: random.Random, p: Process, rule: str,
                 theory: EquationalTheory | None = None) -> Process | None:
    """Apply one instance of a structural rule at a random parallel/restriction position.

    Returns ``None`` when the rule has no instance in ``p``.
    """
    theory = theory or EquationalTheory()
    supply = FreshSupply(all_symbols(p))
    candidates = _rewrites(p, rule, rng, theory, supply)
    if not candidates:
        return None
    rng.shuffle(candidates)
    for path, new in candidates:
        q = replace_at(p, path, new)
        if is_correct(q):
            return q
    return None


def rewrite_corpus(rng: random.Random, rule: str, count: int, theory: EquationalTheory | None = None,
                   max_nodes: int = 20):
    """``count`` pairs ``(p, p')`` where ``p'`` is ``p`` after one application of ``rule``."""
    functions = {"pair": 2}
    if theory is not None:
        functions.update(theory.signature.function_symbols)
    pairs = []
    while len(pairs) < count:
        p = random_ep(rng, max_nodes, replication=(rule == "replicate"), functions=functions, max_vars=2)
        q = rewrite_once(rng, p, rule, theory)
        if q is not None:
            pairs.append((p, q))
    return pairs


def fresh_names_for(p: Process, n: int, base: str = "a") -> list[Symbol]:
    supply = FreshSupply(all_symbols(p))
    return [supply.fresh_like(NAME, base) for _ in range(n)]


__all__ = [
    "RULES",
    "corpus",
    "ep_positions",
    "random_context",
    "random_ep",
    "random_term",
    "rewrite_corpus",
    "rewrite_once",
    "template_family",
    "template_pairs",
]
