"""Labelled transitions, internal reduction, weak transitions and barbs.

States are closed extended processes kept in normal form.  Transitions are
computed from the flattened configuration ``new n~.(frame | C1 | ... | Ck)``
where each ``Ci`` is an input, an output, a conditional or a replication.

Labels of external actions are *recipes*: terms over the frame domain and the
public atoms of the query.  A channel (or, in literal mode, an output payload)
whose value is not produced by any recipe of the configured depth, and is not
itself free of restricted names, cannot appear in a label, so the transition
is blocked.  Among the recipes denoting a value the first one in enumeration
order is used; statically equivalent frames therefore give the same label for
matching moves, which is what the bisimulation checkers rely on.

Internal actions (conditional tests and communications) carry the closed
values they compare.  They are not subject to the restriction side condition:
applying it would block any test or communication mentioning a restricted
name and the closure of labelled bisimilarity under ``new u.(- | C)`` would
fail.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

from .normal_form import (
    NormalForm,
    configuration,
    configuration_key,
    extrude,
    normalize_process,
    settle,
)
from .process_ast import (
    Cond,
    In,
    Out,
    Process,
    Repl,
    all_symbols,
    constants_of,
    free_names,
    freshen_binders,
    substitute,
)
from .rewriting import EMPTY_THEORY, EquationalTheory, normalize_term
from .term_core import (
    CONSTANT,
    VARIABLE,
    App,
    Atom,
    FreshSupply,
    Symbol,
    Term,
    format_term,
    pair,
    rename_term,
    variables_of,
)

LITERAL = "literal"
ALIAS = "alias"


class StateBudgetExceeded(RuntimeError):
    pass


class InternalAction(ValueError):
    pass


# --- actions ------------------------------------------------------------------

class Action:
    external = False

    def terms(self) -> tuple[Term, ...]:
        raise NotImplementedError


@dataclass(frozen=True)
class Input(Action):
    channel: Term
    payload: Term
    external = True

    def terms(self):
        return (self.channel, self.payload)

    def __str__(self):
        return f"{format_term(self.channel)}({format_term(self.payload)})"


@dataclass(frozen=True)
class Output(Action):
    channel: Term
    payload: Term
    # alias labels ~c<x> bind the fresh frame variable x
    binds: bool = field(default=False, compare=False)
    external = True

    def terms(self):
        return (self.channel, self.payload)

    def __str__(self):
        return f"~{format_term(self.channel)}<{format_term(self.payload)}>"


@dataclass(frozen=True)
class EqTest(Action):
    left: Term
    right: Term

    def terms(self):
        return (self.left, self.right)

    def __str__(self):
        return f"[{format_term(self.left)} = {format_term(self.right)}]"


@dataclass(frozen=True)
class NeqTest(Action):
    left: Term
    right: Term

    def terms(self):
        return (self.left, self.right)

    def __str__(self):
        return f"[{format_term(self.left)} != {format_term(self.right)}]"


def co_action(a: Action) -> Action:
    if isinstance(a, Input):
        return Output(a.channel, a.payload)
    if isinstance(a, Output):
        return Input(a.channel, a.payload)
    raise InternalAction(f"{a} is not an external action")


def action_variables(a: Action) -> frozenset[Symbol]:
    """Free variables of a label; the variable bound by an alias output is not free."""
    out = set()
    for t in a.terms():
        out |= variables_of(t)
    if isinstance(a, Output) and a.binds:
        out -= variables_of(a.payload) - variables_of(a.channel)
    return frozenset(out)


@dataclass(frozen=True)
class Transition:
    source: Process
    action: Action
    target: Process


# --- configuration ---------------------------------------------------------------

def _const0():
    return Atom(Symbol(CONSTANT, "0"))


@dataclass(frozen=True)
class ExplorationConfig:
    depth: int = 2
    input_recipes: tuple[Term, ...] | None = None
    replication_bound: int = 2
    max_states: int = 10_000
    output_label_mode: str = LITERAL
    public_atoms: tuple[Term, ...] = field(default_factory=lambda: (_const0(),))

    def __post_init__(self):
        if self.max_states < 1:
            raise ValueError("max_states must be at least 1")
        if self.depth < 0 or self.replication_bound < 0:
            raise ValueError("depth and replication_bound must be non-negative")
        if self.output_label_mode not in (LITERAL, ALIAS):
            raise ValueError(f"unknown output label mode {self.output_label_mode!r}")
        if self.input_recipes is not None:
            object.__setattr__(self, "input_recipes", tuple(self.input_recipes))
        object.__setattr__(self, "public_atoms", tuple(self.public_atoms))

    def replace(self, **changes) -> "ExplorationConfig":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return ExplorationConfig(**values)


# --- recipes ------------------------------------------------------------------------

def enumerate_recipes(variables, atoms, signature, depth: int) -> list[Term]:
    """Terms over ``atoms`` and ``variables`` of nesting depth at most ``depth``.

    Order: atoms, then variables, then by depth, function symbol and argument
    positions.  The order is what makes representative recipes canonical.
    """
    level0 = [a if isinstance(a, Term) else Atom(a) for a in atoms]
    level0 += [Atom(v) for v in sorted(variables, key=Symbol.sort_key)]
    out = list(level0)
    older: list[Term] = []
    newest = level0
    for _ in range(depth):
        upto = older + newest
        fresh = set(newest)
        layer = []
        for f, n in signature:
            for args in itertools.product(upto, repeat=n):
                if any(a in fresh for a in args):
                    layer.append(App(f, args))
        older, newest = upto, layer
        out.extend(layer)
    return out


class FrameTable:
    """Values of every recipe under one frame, and a value -> first-recipe map."""

    def __init__(self, recipes, frame: dict, theory: EquationalTheory):
        self.recipes = recipes
        self.values = []
        self.rep: dict[Term, Term] = {}
        for r in recipes:
            v = normalize_term(rename_term(r, frame), theory) if frame else normalize_term(r, theory)
            self.values.append(v)
            self.rep.setdefault(v, r)


# --- states -----------------------------------------------------------------------

class State:
    __slots__ = ("id", "key", "names", "frame", "comps", "unfolds", "nf", "_edges", "_closure", "_steps", "_weak")

    def __init__(self, sid, key, names, frame, comps, unfolds, nf):
        self.id = sid
        self.key = key
        self.names = names
        self.frame = frame
        self.comps = comps
        self.unfolds = unfolds
        self.nf = nf
        self._edges = None
        self._closure = None
        self._steps = None
        self._weak = None

    @property
    def domain(self) -> frozenset[Symbol]:
        return frozenset(self.frame)

    def frame_key(self):
        return tuple(sorted(self.frame.items(), key=lambda kv: kv[0].sort_key()))

    def process(self) -> Process:
        return self.nf.to_process()

    def __repr__(self):
        return f"State({self.id}: {self.nf})"


@dataclass(frozen=True)
class Edge:
    action: Action
    target: State
    fires: bool = True
    channel_value: Term | None = None
    payload_value: Term | None = None


def fresh_output_variable(domain) -> Symbol:
    """The variable added to the frame by an output or a communication.

    It depends on the domain only, so two processes with the same domain
    performing matching moves extend their frames with the same variable.
    """
    used = [v.index for v in domain if v.ident == "x"]
    return Symbol(VARIABLE, "x", max(used, default=0) + 1)


class Explorer:
    """Transition cache shared by every state of one query."""

    def __init__(self, theory: EquationalTheory = EMPTY_THEORY, cfg: ExplorationConfig | None = None,
                 roots=(), extra_atoms=()):
        self.theory = theory
        self.cfg = cfg or ExplorationConfig()
        atoms = {}
        for t in self.cfg.public_atoms:
            atoms[t] = None
        syms = set()
        for r in roots:
            syms |= constants_of(r) | free_names(r)
        for t in self.cfg.input_recipes or ():
            syms |= {s for s in t.symbols() if not s.is_variable}
        for s in extra_atoms:
            syms.add(s.symbol if isinstance(s, Atom) else s)
        for s in sorted(syms, key=Symbol.sort_key):
            atoms[Atom(s)] = None
        self.atoms = tuple(sorted(atoms, key=lambda t: (t.size(), format_term(t))))
        self.atom_symbols = {s for t in self.atoms for s in t.symbols()}
        known = set(self.atom_symbols)
        for r in roots:
            known |= all_symbols(r)
        self.supply = FreshSupply(known)
        self.signature = theory.signature
        self.states: dict[tuple, State] = {}
        self.by_id: list[State] = []
        self.truncated = False
        self._tables: dict[tuple, FrameTable] = {}
        self._recipes: dict[tuple, list[Term]] = {}

    # -- states
    def state_of_process(self, p: Process) -> State:
        return self.state_of(normalize_process(p, self.theory))

    def state_of(self, nf: NormalForm, unfolds: int = 0) -> State:
        names, frame, comps = configuration(nf, self.supply)
        frame = dict(frame)
        clash = [n for n in names if n in self.atom_symbols]
        if clash:
            mapping = {n: Atom(self.supply.fresh(n)) for n in clash}
            names = [mapping[n].symbol if n in mapping else n for n in names]
            frame = {x: rename_term(v, mapping) for x, v in frame.items()}
            comps = [substitute(c, mapping, self.supply) for c in comps]
            nf = settle(names, frame, comps, self.theory, self.supply)
        self.supply.avoid(names)
        key = (configuration_key(names, list(frame.items()), comps), unfolds)
        st = self.states.get(key)
        if st is None:
            if len(self.states) >= self.cfg.max_states:
                raise StateBudgetExceeded(f"more than {self.cfg.max_states} states")
            st = State(len(self.by_id), key, frozenset(names), frame, tuple(comps), unfolds, nf)
            self.states[key] = st
            self.by_id.append(st)
        return st

    def _settle(self, st: State, extra_names, frame, comps, unfolds) -> State:
        nf = settle(list(st.names) + list(extra_names), frame, comps, self.theory, self.supply)
        return self.state_of(nf, unfolds)

    # -- recipes and labels
    def recipes(self, domain) -> list[Term]:
        key = tuple(sorted(domain, key=Symbol.sort_key))
        got = self._recipes.get(key)
        if got is None:
            got = enumerate_recipes(key, self.atoms, self.signature, self.cfg.depth)
            self._recipes[key] = got
        return got

    def table(self, st: State) -> FrameTable:
        fk = st.frame_key()
        t = self._tables.get(fk)
        if t is None:
            t = FrameTable(self.recipes(st.frame), dict(fk), self.theory)
            self._tables[fk] = t
        return t

    def label_for(self, st: State, value: Term) -> Term | None:
        """Representative recipe denoting ``value`` in ``st``, if any."""
        rep = self.table(st).rep.get(value)
        if rep is not None:
            return rep
        if not any(s in st.names for s in value.symbols()):
            return value
        return None

    def input_payloads(self, st: State) -> list[tuple[Term, Term]]:
        """(recipe, value) pairs, one per distinct value."""
        if self.cfg.input_recipes is None:
            table = self.table(st)
            seen = {}
            for r, v in zip(table.recipes, table.values):
                seen.setdefault(v, r)
            return [(r, v) for v, r in seen.items()]
        dom = st.domain
        seen = {}
        for r in self.cfg.input_recipes:
            if variables_of(r) <= dom:
                v = normalize_term(rename_term(r, st.frame), self.theory)
                seen.setdefault(v, r)
        return [(r, v) for v, r in seen.items()]

    def evaluate(self, st: State, recipe: Term) -> Term:
        return normalize_term(rename_term(recipe, st.frame), self.theory)

    # -- transitions
    def _copy(self, body: Process):
        copy = freshen_binders(body, avoid=self.supply.used())
        self.supply.avoid(all_symbols(copy))
        names, _, _, comps = extrude(copy)
        return names, comps

    def edges(self, st: State) -> list[Edge]:
        if st._edges is not None:
            return st._edges
        out: list[Edge] = []
        budget = self.cfg.replication_bound - st.unfolds
        comps = list(st.comps)
        bangs = [i for i, c in enumerate(comps) if isinstance(c, Repl)]
        copies = {}

        def copy_of(b, second=False):
            key = (b, second)
            if key not in copies:
                copies[key] = self._copy(comps[b].body)
            return copies[key]

        # An actor is (bang index or None, position, component); position
        # indexes ``comps`` for regular actors and the copied body otherwise.
        actors = [(None, i, c) for i, c in enumerate(comps) if not isinstance(c, Repl)]
        for b in bangs:
            _, body = copy_of(b)
            actors += [(b, j, c) for j, c in enumerate(body) if not isinstance(c, Repl)]

        def emit(action, used, residues, extra_frame, separate=False, **vals):
            """``used`` lists the actors consumed, ``residues`` what replaces them.

            Actors drawn from the same replication share one unfolded copy
            unless ``separate`` asks for one copy each.
            """
            removed = {pos for b, pos, _ in used if b is None}
            groups: list[tuple[int, bool, list[int]]] = []
            for b, pos, _ in used:
                if b is None:
                    continue
                same = [g for g in groups if g[0] == b]
                if same and not separate:
                    same[0][2].append(pos)
                else:
                    groups.append((b, bool(same), [pos]))
            if len(groups) > budget:
                self.truncated = True
                return
            names, new = [], []
            for b, second, positions in groups:
                cn, cb = copy_of(b, second)
                names += cn
                new += [c for j, c in enumerate(cb) if j not in positions]
            frame = dict(st.frame)
            frame.update(extra_frame)
            kept = [c for k, c in enumerate(comps) if k not in removed]
            tgt = self._settle(st, names, frame, kept + new + residues, st.unfolds + len(groups))
            out.append(Edge(action, tgt, **vals))

        mode = self.cfg.output_label_mode
        x = fresh_output_variable(st.domain)
        for actor in actors:
            c = actor[2]
            if isinstance(c, Cond):
                holds = normalize_term(c.left, self.theory) == normalize_term(c.right, self.theory)
                emit(EqTest(c.left, c.right), [actor], [c.then], {}, fires=holds)
                emit(NeqTest(c.left, c.right), [actor], [c.orelse], {}, fires=not holds)
            elif isinstance(c, Out):
                ch = self.label_for(st, c.channel)
                if ch is None:
                    continue
                if mode == LITERAL:
                    pl = self.label_for(st, c.payload)
                    if pl is None:
                        continue
                else:
                    pl = Atom(x)
                emit(Output(ch, pl, mode == ALIAS), [actor], [c.body], {x: c.payload},
                     channel_value=c.channel, payload_value=c.payload)
            elif isinstance(c, In):
                ch = self.label_for(st, c.channel)
                if ch is None:
                    continue
                for recipe, value in self.input_payloads(st):
                    cont = substitute(c.body, {c.var: value}, self.supply)
                    emit(Input(ch, recipe), [actor], [cont], {},
                         channel_value=c.channel, payload_value=value)

        # Communication: an output and an input on equal channels.
        for o in actors:
            if not isinstance(o[2], Out):
                continue
            for i in actors:
                if not isinstance(i[2], In) or o[2].channel != i[2].channel:
                    continue
                if o[0] is None and i[0] is None and o[1] == i[1]:
                    continue
                out_c, in_c = o[2], i[2]
                cont = substitute(in_c.body, {in_c.var: out_c.payload}, self.supply)
                label = EqTest(pair(out_c.channel, out_c.payload), pair(in_c.channel, out_c.payload))
                emit(label, [o, i], [out_c.body, cont], {x: out_c.payload})
                if o[0] is not None and o[0] == i[0]:
                    emit(label, [o, i], [out_c.body, cont], {x: out_c.payload}, separate=True)
        st._edges = out
        return out

    def successors(self, st: State, action: Action | None = None):
        for e in self.edges(st):
            if action is None or e.action == action:
                yield e

    def internal_steps(self, st: State) -> list[State]:
        if st._steps is None:
            seen = {}
            for e in self.edges(st):
                if not e.action.external and e.fires:
                    seen.setdefault(e.target.id, e.target)
            st._steps = list(seen.values())
        return st._steps

    def external_edges(self, st: State) -> list[Edge]:
        return [e for e in self.edges(st) if e.action.external]

    def tau_closure(self, st: State) -> list[State]:
        if st._closure is not None:
            return st._closure
        order = [st]
        seen = {st.id}
        queue = deque([st])
        while queue:
            s = queue.popleft()
            for t in self.internal_steps(s):
                if t.id not in seen:
                    seen.add(t.id)
                    order.append(t)
                    queue.append(t)
        st._closure = order
        return order

    def weak_moves(self, st: State, action: Action) -> list[State]:
        """Targets of ``st ~> . -action-> . ~>`` (label compared syntactically)."""
        if st._weak is None:
            table: dict[Action, dict[int, State]] = {}
            for s in self.tau_closure(st):
                for e in self.edges(s):
                    if e.action.external:
                        row = table.setdefault(e.action, {})
                        for t in self.tau_closure(e.target):
                            row.setdefault(t.id, t)
            st._weak = {a: list(row.values()) for a, row in table.items()}
        return st._weak.get(action, [])

    def weak_labels(self, st: State) -> set[Action]:
        labels = set()
        for s in self.tau_closure(st):
            for e in self.external_edges(s):
                labels.add(e.action)
        return labels

    def barbs(self, st: State) -> frozenset[Symbol]:
        out = set()
        for s in self.tau_closure(st):
            for e in self.external_edges(s):
                if isinstance(e.action, Output):
                    v = e.channel_value
                    if isinstance(v, Atom) and v.symbol.is_name and v.symbol not in s.names:
                        out.add(v.symbol)
        return frozenset(out)

    def matches(self, st: State, edge: Edge, action: Action) -> bool:
        """Whether ``edge`` (from ``st``) realizes the user-supplied ``action``."""
        if type(edge.action) is not type(action):
            return False
        if self.evaluate(st, action.channel) != edge.channel_value:
            return False
        if isinstance(action, Output) and self.cfg.output_label_mode == ALIAS:
            return True
        return self.evaluate(st, action.payload) == edge.payload_value


# --- materialized transition systems ----------------------------------------------------

@dataclass
class LTS:
    states: list[State]
    initial: int
    edges: list[tuple[int, Action, int]]
    truncated: bool
    explorer: Explorer

    def successors(self, sid: int):
        return [(a, t) for s, a, t in self.edges if s == sid]

    def to_dot(self) -> str:
        lines = ["digraph lts {", "  node [shape=box];"]
        for st in self.states:
            label = str(st.nf).replace("\\", "\\\\").replace('"', '\\"')
            shape = ", peripheries=2" if st.id == self.initial else ""
            lines.append(f'  s{st.id} [label="{label}"{shape}];')
        for s, a, t in self.edges:
            label = str(a).replace('"', '\\"')
            lines.append(f'  s{s} -> s{t} [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_lines(self) -> str:
        """One ``source<TAB>action<TAB>target`` line per edge, then the state table."""
        rows = [f"{s}\t{a}\t{t}" for s, a, t in self.edges]
        rows += [f"# s{st.id} {st.nf}" for st in self.states]
        return "\n".join(rows) + "\n"


def materialize(explorer: Explorer, root: State) -> LTS:
    """Every state reachable from ``root`` with its external and firing internal edges."""
    order = [root]
    seen = {root.id}
    edges = []
    queue = deque([root])
    while queue:
        s = queue.popleft()
        for e in explorer.edges(s):
            if not e.action.external and not e.fires:
                continue
            edges.append((s.id, e.action, e.target.id))
            if e.target.id not in seen:
                seen.add(e.target.id)
                order.append(e.target)
                queue.append(e.target)
    return LTS(order, root.id, edges, explorer.truncated, explorer)


def build_lts(p: Process, theory: EquationalTheory = EMPTY_THEORY, cfg: ExplorationConfig | None = None,
              explorer: Explorer | None = None) -> LTS:
    ex = explorer or Explorer(theory, cfg, roots=[p])
    return materialize(ex, ex.state_of_process(p))


# --- process-level API ---------------------------------------------------------------

def _explorer_for(p, theory, cfg):
    ex = Explorer(theory, cfg, roots=[p])
    return ex, ex.state_of_process(p)


def enumerate_transitions(p: Process, cfg: ExplorationConfig | None = None,
                          theory: EquationalTheory = EMPTY_THEORY) -> set[Transition]:
    ex, st = _explorer_for(p, theory, cfg)
    return {Transition(p, e.action, e.target.process()) for e in ex.edges(st)}


def internal_step(p: Process, cfg: ExplorationConfig | None = None,
                  theory: EquationalTheory = EMPTY_THEORY) -> set[Process]:
    ex, st = _explorer_for(p, theory, cfg)
    return {t.process() for t in ex.internal_steps(st)}


def tau_closure(p: Process, cfg: ExplorationConfig | None = None,
                theory: EquationalTheory = EMPTY_THEORY) -> set[Process]:
    ex, st = _explorer_for(p, theory, cfg)
    return {t.process() for t in ex.tau_closure(st)}


def weak_transition(p: Process, action: Action, cfg: ExplorationConfig | None = None,
                    theory: EquationalTheory = EMPTY_THEORY) -> set[Process]:
    if not action.external:
        raise InternalAction(f"{action} is not an external action")
    ex = Explorer(theory, cfg, roots=[p], extra_atoms=[s for t in action.terms() for s in t.symbols()
                                                        if not s.is_variable])
    st = ex.state_of_process(p)
    result = {}
    for s in ex.tau_closure(st):
        for e in ex.external_edges(s):
            if ex.matches(s, e, action):
                for t in ex.tau_closure(e.target):
                    result.setdefault(t.id, t)
    return {t.process() for t in result.values()}


def barbs(p: Process, cfg: ExplorationConfig | None = None,
          theory: EquationalTheory = EMPTY_THEORY) -> frozenset[Symbol]:
    ex, st = _explorer_for(p, theory, cfg)
    return ex.barbs(st)
