"""Static equivalence, weak labelled bisimilarity, barbs, probes and contexts.

All checks run over the bounded exploration of :mod:`appi.lts`.  A verdict is
``equivalent``, ``distinguished`` or ``inconclusive``; hitting the state budget
or truncating a replication never yields a definite answer.
"""
from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field

from .lts import (
    LTS,
    ExplorationConfig,
    Explorer,
    State,
    StateBudgetExceeded,
    enumerate_recipes,
    materialize,
)
from .normal_form import PreconditionViolated
from .process_ast import (
    NIL,
    Cond,
    In,
    NotFresh,
    Out,
    Par,
    Process,
    all_symbols,
    check_correct,
    domain,
    free_names,
    is_closed_ep,
    restrict,
)
from .rewriting import EMPTY_THEORY, EquationalTheory, normalize_term
from .term_core import (
    CONSTANT,
    NAME,
    VARIABLE,
    Atom,
    FreshSupply,
    Symbol,
    Term,
    format_term,
    rename_term,
)

EQUIVALENT = "equivalent"
DISTINGUISHED = "distinguished"
INCONCLUSIVE = "inconclusive"


class DomainMismatch(ValueError):
    pass


@dataclass
class Evidence:
    """Steps leading to a pair of states and the fact that separates them.

    Each step is ``(side, action, left, right)`` where ``side`` says which
    process moved and ``left``/``right`` are the states reached.
    """
    steps: list = field(default_factory=list)
    fact: dict = field(default_factory=dict)
    roots: tuple = ()

    def to_dict(self):
        return {
            "trace": [
                {"side": side, "action": str(action) if action is not None else "tau",
                 "left": str(l.nf), "right": str(r.nf)}
                for side, action, l, r in self.steps
            ],
            "fact": {k: (str(v) if not isinstance(v, (int, str, list, type(None))) else v)
                     for k, v in self.fact.items()},
        }

    def __str__(self):
        parts = [f"{side}: {action if action is not None else 'tau'}" for side, action, _, _ in self.steps]
        fact = ", ".join(f"{k}={v}" for k, v in self.fact.items())
        return " ; ".join(parts + [fact])


@dataclass
class EquivVerdict:
    kind: str
    witness: list = field(default_factory=list)
    evidence: Evidence | None = None
    reason: str = ""
    bounds: dict = field(default_factory=dict)
    elapsed: float = 0.0
    explorer: Explorer | None = field(default=None, repr=False, compare=False)
    relation: list = field(default_factory=list, repr=False, compare=False)

    @property
    def equivalent(self):
        return self.kind == EQUIVALENT

    @property
    def distinguished(self):
        return self.kind == DISTINGUISHED

    @property
    def inconclusive(self):
        return self.kind == INCONCLUSIVE

    def to_dict(self):
        out = {"verdict": self.kind, "bounds": self.bounds, "wall_time": round(self.elapsed, 6)}
        if self.kind == EQUIVALENT:
            out["witness_size"] = len(self.witness)
        if self.evidence is not None:
            out["evidence"] = self.evidence.to_dict()
        if self.reason:
            out["reason"] = self.reason
        return out

    def __str__(self):
        if self.kind == EQUIVALENT:
            return f"equivalent (witness of {len(self.witness)} pairs)"
        if self.kind == DISTINGUISHED:
            return f"distinguished: {self.evidence}"
        return f"inconclusive: {self.reason}"


def _bounds(cfg: ExplorationConfig):
    return {
        "depth": cfg.depth,
        "replication_bound": cfg.replication_bound,
        "max_states": cfg.max_states,
        "output_label_mode": cfg.output_label_mode,
    }


# --- static equivalence ------------------------------------------------------------------

def frame_witness(ex: Explorer, a: State, b: State):
    """A recipe pair equal under one frame and not the other, or None.

    Two frames are statically equivalent iff the recipes induce the same
    partition; comparing first representatives finds a witness in one pass.
    """
    ta, tb = ex.table(a), ex.table(b)
    for i, r in enumerate(ta.recipes):
        ra = ta.rep[ta.values[i]]
        rb = tb.rep[tb.values[i]]
        if ra != rb:
            for s in (ra, rb):
                j = ta.recipes.index(s)
                if (ta.values[j] == ta.values[i]) != (tb.values[j] == tb.values[i]):
                    return s, r
    return None


def _static_evidence(ex, a, b, witness):
    e1, e2 = witness
    left = ex.evaluate(a, e1) == ex.evaluate(a, e2)
    return {"kind": "static", "recipes": [format_term(e1), format_term(e2)],
            "equal_left": left, "equal_right": not left}


def static_equivalent(a: Process, b: Process, depth: int = 2, theory: EquationalTheory = EMPTY_THEORY,
                      cfg: ExplorationConfig | None = None) -> EquivVerdict:
    start = time.perf_counter()
    cfg = (cfg or ExplorationConfig()).replace(depth=depth)
    if domain(a) != domain(b):
        raise DomainMismatch(f"domains differ: {sorted(map(str, domain(a)))} vs {sorted(map(str, domain(b)))}")
    ex = Explorer(theory, cfg, roots=[a, b])
    sa, sb = ex.state_of_process(a), ex.state_of_process(b)
    w = frame_witness(ex, sa, sb)
    elapsed = time.perf_counter() - start
    if w is None:
        return EquivVerdict(EQUIVALENT, witness=[(sa.nf, sb.nf), (sb.nf, sa.nf)], bounds=_bounds(cfg),
                            elapsed=elapsed, explorer=ex)
    return EquivVerdict(DISTINGUISHED, evidence=Evidence([], _static_evidence(ex, sa, sb, w), (sa, sb)),
                        bounds=_bounds(cfg), elapsed=elapsed, explorer=ex)


# --- weak labelled bisimulation -------------------------------------------------------------

class _Bisim:
    """On-the-fly check with optimistic assumptions.

    A pair under examination is assumed related.  A refutation is always
    sound (it never rests on an assumption), so refuted pairs are kept across
    rounds; a round that refutes anything is rerun until a round completes
    without new refutations, at which point every pair it visited forms a
    bisimulation.
    """

    def __init__(self, ex: Explorer):
        self.ex = ex
        self.failed: dict[tuple[int, int], dict] = {}
        self.assumed: dict[tuple[int, int], tuple[State, State]] = {}
        self.refuted_now = False

    def run(self, a: State, b: State) -> bool:
        while True:
            self.assumed = {}
            self.refuted_now = False
            ok = self.check(a, b)
            if not ok:
                return False
            if not self.refuted_now:
                return True

    def check(self, a: State, b: State) -> bool:
        key = (a.id, b.id)
        if a is b:
            return True  # the identity relation is a bisimulation
        if key in self.failed:
            return False
        if key in self.assumed:
            return True
        self.assumed[key] = (a, b)
        reason = self.violation(a, b)
        if reason is not None:
            del self.assumed[key]
            self.failed[key] = reason
            self.refuted_now = True
            return False
        return True

    def violation(self, a: State, b: State):
        ex = self.ex
        if a.domain != b.domain:
            return {"kind": "domain", "left": sorted(map(str, a.domain)), "right": sorted(map(str, b.domain))}
        w = frame_witness(ex, a, b)
        if w is not None:
            return _static_evidence(ex, a, b, w)
        for side, s, t in (("left", a, b), ("right", b, a)):
            def related(s2, t2):
                return self.check(s2, t2) if side == "left" else self.check(t2, s2)

            for s2 in ex.internal_steps(s):
                replies = ex.tau_closure(t)
                if not any(related(s2, t2) for t2 in replies):
                    return {"kind": "move", "side": side, "action": None, "to": s2, "replies": replies}
            for e in ex.external_edges(s):
                replies = ex.weak_moves(t, e.action)
                if not any(related(e.target, t2) for t2 in replies):
                    return {"kind": "move", "side": side, "action": e.action, "to": e.target, "replies": replies}
        return None

    def evidence(self, a: State, b: State) -> Evidence:
        roots = (a, b)
        steps = []
        seen = set()
        while True:
            reason = self.failed[(a.id, b.id)]
            if reason["kind"] != "move" or (a.id, b.id) in seen:
                return Evidence(steps, dict(reason), roots)
            seen.add((a.id, b.id))
            side, s2, replies = reason["side"], reason["to"], reason["replies"]
            if not replies:
                steps.append((side, reason["action"], s2 if side == "left" else a,
                              b if side == "left" else s2))
                return Evidence(steps, {"kind": "unmatched", "side": side, "action": reason["action"]}, roots)
            t2 = replies[0]
            a, b = (s2, t2) if side == "left" else (t2, s2)
            steps.append((side, reason["action"], a, b))


def _limit_recursion():
    if sys.getrecursionlimit() < 20_000:
        sys.setrecursionlimit(20_000)


def weak_labeled_bisim(a: Process, b: Process, cfg: ExplorationConfig | None = None,
                       theory: EquationalTheory = EMPTY_THEORY, explorer: Explorer | None = None) -> EquivVerdict:
    """Decide weak labelled bisimilarity of two closed processes within the bounds."""
    cfg = cfg or ExplorationConfig()
    start = time.perf_counter()
    if domain(a) != domain(b):
        raise DomainMismatch(f"domains differ: {sorted(map(str, domain(a)))} vs {sorted(map(str, domain(b)))}")
    ex = explorer or Explorer(theory, cfg, roots=[a, b])
    _limit_recursion()
    try:
        sa, sb = ex.state_of_process(a), ex.state_of_process(b)
        checker = _Bisim(ex)
        ok = checker.run(sa, sb)
    except StateBudgetExceeded as exc:
        return EquivVerdict(INCONCLUSIVE, reason=str(exc), bounds=_bounds(cfg),
                            elapsed=time.perf_counter() - start, explorer=ex)
    elapsed = time.perf_counter() - start
    if ex.truncated:
        return EquivVerdict(INCONCLUSIVE, reason="replication bound reached", bounds=_bounds(cfg),
                            elapsed=elapsed, explorer=ex)
    if ok:
        rel = list(checker.assumed.values())
        witness = [(x.nf, y.nf) for x, y in rel] + [(y.nf, x.nf) for x, y in rel]
        return EquivVerdict(EQUIVALENT, witness=witness, bounds=_bounds(cfg), elapsed=elapsed,
                            explorer=ex, relation=rel)
    return EquivVerdict(DISTINGUISHED, evidence=checker.evidence(sa, sb), bounds=_bounds(cfg),
                        elapsed=elapsed, explorer=ex)


def verify_witness(verdict: EquivVerdict) -> bool:
    """Re-check the three bisimulation conditions on every pair of the witness."""
    ex = verdict.explorer
    rel = {(x.id, y.id) for x, y in verdict.relation}
    rel |= {(y, x) for x, y in rel}

    def related(s, t):
        # identical states are related through the identity bisimulation
        return s.id == t.id or (s.id, t.id) in rel

    for x, y in verdict.relation:
        for s, t in ((x, y), (y, x)):
            if s.domain != t.domain or frame_witness(ex, s, t) is not None:
                return False
            for s2 in ex.internal_steps(s):
                if not any(related(s2, t2) for t2 in ex.tau_closure(t)):
                    return False
            for e in ex.external_edges(s):
                if not any(related(e.target, t2) for t2 in ex.weak_moves(t, e.action)):
                    return False
    return True


def replay_evidence(verdict: EquivVerdict) -> bool:
    """Walk the evidence trace again and re-establish its final fact."""
    ex = verdict.explorer
    ev = verdict.evidence
    if ev is None:
        return False
    a, b = ev.roots
    for side, action, na, nb in ev.steps:
        mover, other = (a, b) if side == "left" else (b, a)
        new_mover, new_other = (na, nb) if side == "left" else (nb, na)
        if action is None:
            if new_mover not in ex.internal_steps(mover):
                return False
            if new_other is not other and new_other not in ex.tau_closure(other):
                return False
        else:
            if not any(e.target is new_mover for e in ex.external_edges(mover) if e.action == action):
                return False
            if new_other is not other and new_other not in ex.weak_moves(other, action):
                return False
        a, b = na, nb
    fact = ev.fact
    kind = fact.get("kind")
    if kind == "static":
        return frame_witness(ex, a, b) is not None
    if kind == "domain":
        return a.domain != b.domain
    if kind == "unmatched":
        mover, other = (a, b) if fact["side"] == "left" else (b, a)
        if fact["action"] is None:
            return False
        return not ex.weak_moves(other, fact["action"])
    if kind == "barb":
        return (fact["name"] in ex.barbs(a)) != (fact["name"] in ex.barbs(b))
    if kind == "move":
        return True
    return False


# --- barbs -----------------------------------------------------------------------------------

def barb_equivalent(a: Process, b: Process, cfg: ExplorationConfig | None = None,
                    theory: EquationalTheory = EMPTY_THEORY) -> EquivVerdict:
    cfg = cfg or ExplorationConfig()
    start = time.perf_counter()
    ex = Explorer(theory, cfg, roots=[a, b])
    try:
        sa, sb = ex.state_of_process(a), ex.state_of_process(b)
        ba, bb = ex.barbs(sa), ex.barbs(sb)
    except StateBudgetExceeded as exc:
        return EquivVerdict(INCONCLUSIVE, reason=str(exc), bounds=_bounds(cfg),
                            elapsed=time.perf_counter() - start, explorer=ex)
    elapsed = time.perf_counter() - start
    if ex.truncated:
        return EquivVerdict(INCONCLUSIVE, reason="replication bound reached", bounds=_bounds(cfg),
                            elapsed=elapsed, explorer=ex)
    if ba == bb:
        return EquivVerdict(EQUIVALENT, witness=[(sa.nf, sb.nf), (sb.nf, sa.nf)], bounds=_bounds(cfg),
                            elapsed=elapsed, explorer=ex)
    diff = sorted(ba ^ bb, key=Symbol.sort_key)[0]
    fact = {"kind": "barb", "name": diff, "left": diff in ba, "right": diff in bb}
    return EquivVerdict(DISTINGUISHED, evidence=Evidence([], fact, (sa, sb)), bounds=_bounds(cfg),
                        elapsed=elapsed, explorer=ex)


# --- probes ----------------------------------------------------------------------------------

TEST, INPUT, OUTPUT = "test", "input", "output"


@dataclass(frozen=True)
class ProbeSpec:
    kind: str
    first: Term
    second: Term
    barb: Symbol

    def __str__(self):
        return f"{self.kind}_probe({format_term(self.first)}, {format_term(self.second)}, {self.barb})"


def test_probe(e: Term, e2: Term, a: Symbol) -> ProbeSpec:
    return ProbeSpec(TEST, e, e2, a)


def input_probe(c: Term, e: Term, a: Symbol) -> ProbeSpec:
    return ProbeSpec(INPUT, c, e, a)


def output_probe(c: Term, e: Term, a: Symbol) -> ProbeSpec:
    return ProbeSpec(OUTPUT, c, e, a)


test_probe.__test__ = False  # not a pytest test function


def _zero():
    return Atom(Symbol(CONSTANT, "0"))


def probe_context(spec: ProbeSpec, avoid=()) -> Process:
    """The process composed with the target."""
    a = Atom(spec.barb)
    if spec.kind == TEST:
        return Cond(spec.first, spec.second, Out(a, _zero(), NIL))
    supply = FreshSupply(set(avoid) | set(spec.first.symbols()) | set(spec.second.symbols()) | {spec.barb})
    x = supply.fresh_like(VARIABLE, "z")
    if spec.kind == INPUT:
        return Par(Out(spec.first, spec.second, In(a, x, NIL)), Out(a, _zero(), NIL))
    if spec.kind == OUTPUT:
        y = supply.fresh_like(VARIABLE, "w")
        return Par(In(spec.first, x, Cond(Atom(x), spec.second, In(a, y, NIL))), Out(a, _zero(), NIL))
    raise ValueError(f"unknown probe kind {spec.kind!r}")


def build_probe(spec: ProbeSpec, target: Process) -> Process:
    if spec.barb in all_symbols(target):
        raise NotFresh(f"probe name {spec.barb} occurs in the process")
    return Par(target, probe_context(spec, all_symbols(target)))


def fresh_barb_name(*processes, base="a") -> Symbol:
    used = set()
    for p in processes:
        used |= all_symbols(p)
    sym = Symbol(NAME, base)
    return FreshSupply(used).fresh(sym) if sym in used else sym


def probe_family(a: Process, b: Process, depth: int = 1, theory: EquationalTheory = EMPTY_THEORY,
                 cfg: ExplorationConfig | None = None, limit: int = 24) -> list[ProbeSpec]:
    """Probe instances over recipes of the shared frame domain (deterministic order)."""
    cfg = (cfg or ExplorationConfig()).replace(depth=depth)
    ex = Explorer(theory, cfg, roots=[a, b])
    recipes = enumerate_recipes(domain(a), ex.atoms, theory.signature, depth)
    barb = fresh_barb_name(a, b)
    channels = [Atom(n) for n in sorted(free_names(a) | free_names(b), key=Symbol.sort_key)]
    channels += [Atom(v) for v in sorted(domain(a), key=Symbol.sort_key)]
    tests = [test_probe(r1, r2, barb) for i, r1 in enumerate(recipes) for r2 in recipes[i + 1:]]
    ins = [input_probe(c, r, barb) for c in channels for r in recipes]
    outs = [output_probe(c, r, barb) for c in channels for r in recipes]
    family = []
    for group in (tests, ins, outs):
        family.extend(group[:limit])
    return family


# --- context closure ---------------------------------------------------------------------------

def compose(binders, target: Process, context: Process) -> Process:
    return restrict(list(binders), Par(target, context))


def context_closure_check(a: Process, b: Process, contexts, cfg: ExplorationConfig | None = None,
                          theory: EquationalTheory = EMPTY_THEORY) -> EquivVerdict:
    """Check ``new u~.(a | C)`` against ``new u~.(b | C)`` for every ``(u~, C)``."""
    cfg = cfg or ExplorationConfig()
    start = time.perf_counter()
    pending = None
    checked = 0
    for index, (binders, ctx) in enumerate(contexts):
        left, right = compose(binders, a, ctx), compose(binders, b, ctx)
        for p in (left, right):
            if not is_closed_ep(p):
                raise PreconditionViolated(f"composition is not closed: {p}")
            problems = check_correct(p)
            if problems:
                raise PreconditionViolated("; ".join(map(str, problems)))
        v = weak_labeled_bisim(left, right, cfg, theory)
        checked += 1
        if v.distinguished:
            v.evidence.fact = dict(v.evidence.fact, context=index)
            v.elapsed = time.perf_counter() - start
            return v
        if v.inconclusive and pending is None:
            pending = v
    elapsed = time.perf_counter() - start
    if pending is not None:
        return EquivVerdict(INCONCLUSIVE, reason=pending.reason, bounds=_bounds(cfg), elapsed=elapsed)
    return EquivVerdict(EQUIVALENT, witness=[(a, b), (b, a)], bounds=dict(_bounds(cfg), contexts=checked),
                        elapsed=elapsed)


# --- naive oracle ------------------------------------------------------------------------------

def materialize_pair(a: Process, b: Process, cfg: ExplorationConfig | None = None,
                     theory: EquationalTheory = EMPTY_THEORY) -> tuple[LTS, LTS]:
    """Both transition systems from one explorer, so labels are comparable."""
    ex = Explorer(theory, cfg or ExplorationConfig(), roots=[a, b])
    sa, sb = ex.state_of_process(a), ex.state_of_process(b)
    return materialize(ex, sa), materialize(ex, sb)


def naive_bisim_oracle(lts_a: LTS, lts_b: LTS) -> EquivVerdict:
    """Greatest fixpoint by iterated deletion over all state pairs.

    Shares nothing with the on-the-fly checker beyond the transition systems
    and the recipe list: closures, weak moves and frame comparison are
    computed here from scratch.
    """
    start = time.perf_counter()
    ex = lts_a.explorer
    states = {s.id: s for s in lts_a.states}
    states.update({s.id: s for s in lts_b.states})
    internal = {sid: set() for sid in states}
    external = {sid: [] for sid in states}
    for lts in (lts_a, lts_b):
        for s, act, t in lts.edges:
            if act.external:
                external[s].append((act, t))
            else:
                internal[s].add(t)

    closure = {}
    for sid in states:
        seen = {sid}
        stack = [sid]
        while stack:
            u = stack.pop()
            for v in internal[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        closure[sid] = seen

    weak = {}
    for sid in states:
        table = {}
        for u in closure[sid]:
            for act, v in external[u]:
                table.setdefault(act, set()).update(closure[v])
        weak[sid] = table

    recipes = {}
    values = {}

    def frame_values(sid):
        if sid not in values:
            st = states[sid]
            dom = tuple(sorted(st.frame, key=Symbol.sort_key))
            if dom not in recipes:
                recipes[dom] = enumerate_recipes(dom, ex.atoms, ex.signature, ex.cfg.depth)
            values[sid] = [normalize_term(rename_term(r, st.frame), ex.theory) for r in recipes[dom]]
        return values[sid]

    def statically_equivalent(s, t):
        vs, vt = frame_values(s), frame_values(t)
        n = len(vs)
        return all((vs[i] == vs[j]) == (vt[i] == vt[j]) for i in range(n) for j in range(i + 1, n))

    ids = sorted(states)
    rel = set()
    for s in ids:
        for t in ids:
            if states[s].domain == states[t].domain and statically_equivalent(s, t):
                rel.add((s, t))

    def ok(s, t):
        for s2 in internal[s]:
            if not any((s2, t2) in rel for t2 in closure[t]):
                return False
        for act, s2 in external[s]:
            if not any((s2, t2) in rel for t2 in weak[t].get(act, ())):
                return False
        return True

    changed = True
    while changed:
        changed = False
        for pair_ in sorted(rel):
            if pair_ not in rel:
                continue
            s, t = pair_
            if not (ok(s, t) and ok(t, s)):
                rel.discard((s, t))
                rel.discard((t, s))
                changed = True
    elapsed = time.perf_counter() - start
    bounds = _bounds(ex.cfg)
    if lts_a.truncated or lts_b.truncated or ex.truncated:
        return EquivVerdict(INCONCLUSIVE, reason="replication bound reached", bounds=bounds, elapsed=elapsed)
    root = (lts_a.initial, lts_b.initial)
    if root in rel:
        witness = [(states[s].nf, states[t].nf) for s, t in sorted(rel)]
        return EquivVerdict(EQUIVALENT, witness=witness, bounds=bounds, elapsed=elapsed)
    return EquivVerdict(DISTINGUISHED, evidence=Evidence([], {"kind": "oracle"}), bounds=bounds, elapsed=elapsed)
