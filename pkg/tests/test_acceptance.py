"""Acceptance gate: nine release criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed at the end of the session (see ``pytest_terminal_summary`` in
conftest).  ``python tests/test_acceptance.py`` prints them directly.
"""
from __future__ import annotations

import itertools
import random
import time

import pytest

from appi.equivalence import (
    barb_equivalent,
    build_probe,
    context_closure_check,
    frame_witness,
    materialize_pair,
    naive_bisim_oracle,
    probe_context,
    probe_family,
    static_equivalent,
    test_probe,
    weak_labeled_bisim,
)
from appi.generators import RULES, corpus, random_context, random_ep, rewrite_corpus, rewrite_once, template_pairs
from appi.lts import ALIAS, ExplorationConfig, Explorer, action_variables, barbs
from appi.normal_form import normal_form_violations, normalize_process, struct_equiv
from appi.process_ast import Par, Restrict, Sub, check_correct, constants_of, domain, free_names, is_closed_ep
from appi.rewriting import normalize_term, pair_projection_theory, symmetric_encryption_theory, terms_equal
from appi.syntax import Declarations, parse_process
from appi.term_core import NAME, App, Atom, Symbol, const, name, rename_term, var

RESULTS: dict[int, tuple[bool, str]] = {}
DESK = ExplorationConfig(depth=1, max_states=2_000)
TIME_LIMIT = 60.0


def record(n, ok, detail):
    RESULTS[n] = (ok, detail)
    return ok, detail


# --- 1: normal-form shape ---------------------------------------------------------------

def criterion_1(count=500, seed=101):
    procs = corpus(seed, count, replication=False)
    bad = []
    for p in procs:
        assert not check_correct(p) and is_closed_ep(p)
        problems = normal_form_violations(p, normalize_process(p))
        if problems:
            bad.append((p, problems))
    return record(1, not bad, f"{count - len(bad)}/{count} normal forms have closed body and frame, "
                              f"names within the frame, domain preserved")


# --- 2: observables before and after normalisation ---------------------------------------

def naive_frame(p):
    """Frame of ``p`` computed directly from the syntax tree.

    Restricted symbols are renamed apart by position, variable restrictions
    are resolved by iterated substitution until nothing changes.  Shares no
    code with the normaliser.
    """
    subs, hidden, counter = {}, set(), itertools.count(1)

    def go(q, ren):
        if isinstance(q, Par):
            go(q.left, ren)
            go(q.right, ren)
        elif isinstance(q, Restrict):
            fresh = Symbol(q.binder.kind, "_h" + q.binder.ident, next(counter))
            if q.binder.kind == NAME:
                hidden.add(fresh)
            go(q.body, {**ren, q.binder: Atom(fresh)})
        elif isinstance(q, Sub):
            target = ren.get(q.var, Atom(q.var)).symbol
            subs[target] = rename_term(q.term, ren)

    go(p, {})
    for _ in range(len(subs) + 1):
        subs = {x: rename_term(e, subs) for x, e in subs.items()}
    visible = {x: e for x, e in subs.items() if not x.ident.startswith("_h")}
    return visible, hidden


def naive_static_equivalent(f1, f2, atoms):
    """Compare two frames on every pair of recipes of depth at most one."""
    base = list(atoms) + [Atom(x) for x in sorted(f1, key=Symbol.sort_key)]
    recipes = base + [App("pair", args) for args in itertools.product(base, repeat=2)]
    v1 = [rename_term(r, f1) for r in recipes]
    v2 = [rename_term(r, f2) for r in recipes]
    return all((v1[i] == v1[j]) == (v2[i] == v2[j])
               for i in range(len(recipes)) for j in range(i + 1, len(recipes)))


PANEL_TEXT = ("{0/x#1}", "{1/x#1}", "new n.{n/x#1}", "{(0, 0)/x#1}", "new n.{(n, n)/x#1}",
              "{0/x#1} | {0/x#2}", "new n.({n/x#1} | {n/x#2})", "new n.new m.({n/x#1} | {m/x#2})",
              "{0/x#1} | {1/x#2}", "new n.({(n, 0)/x#1} | {n/x#2})", "{a/x#1}", "{(a, b)/x#1}")


def criterion_2(count=500, seed=101):
    panel = [parse_process(t) for t in PANEL_TEXT]
    procs = corpus(seed, count, replication=False)
    mismatches, checked = [], 0
    for p in procs:
        after = normalize_process(p).to_process()
        if barbs(p, DESK) != barbs(after, DESK):
            mismatches.append(("barbs", p))
            continue
        before_frame, _ = naive_frame(p)
        for f in panel:
            if domain(f) != domain(p):
                continue
            # one atom set for every check, so the recipe sets coincide
            syms = {const("0")} | constants_of(p) | constants_of(f) | free_names(p) | free_names(f)
            atoms = tuple(Atom(s) for s in sorted(syms, key=Symbol.sort_key))
            cfg = DESK.replace(public_atoms=atoms)
            lib_before = static_equivalent(p, f, depth=1, cfg=cfg).equivalent
            lib_after = static_equivalent(after, f, depth=1, cfg=cfg).equivalent
            naive = naive_static_equivalent(before_frame, naive_frame(f)[0], atoms)
            checked += 1
            if not lib_before == lib_after == naive:
                mismatches.append(("static", p, f, lib_before, lib_after, naive))
    return record(2, not mismatches, f"{count - len(mismatches)}/{count} processes keep barbs and static "
                                     f"class; {checked} panel comparisons agree with a direct frame evaluator")


# --- 3: oracle agreement ----------------------------------------------------------------

def criterion_3():
    pairs = template_pairs()
    disagreements = []
    for p, q in pairs:
        v = weak_labeled_bisim(p, q, DESK)
        la, lb = materialize_pair(p, q, DESK)
        o = naive_bisim_oracle(la, lb)
        if v.kind != o.kind:
            disagreements.append((p, q, v.kind, o.kind))
    ok = len(pairs) >= 200 and not disagreements
    return record(3, ok, f"{len(pairs)} template pairs, {len(disagreements)} disagreements")


# --- shared corpus of judged pairs ---------------------------------------------------------

def judged_pairs(cfg, seed=7, random_pairs=60):
    """Template pairs plus random processes paired with a structural rewrite of themselves."""
    rng = random.Random(seed)
    pairs = list(template_pairs())
    while len(pairs) < len(template_pairs()) + random_pairs:
        p = random_ep(rng, 12, max_vars=1)
        q = rewrite_once(rng, p, rng.choice(["par-monoid", "restriction", "scope-extrusion", "alias-elim", "subst-apply"]))
        if q is not None:
            pairs.append((p, q))
    return [(p, q, weak_labeled_bisim(p, q, cfg)) for p, q in pairs]


# --- 4: bisimilar implies barb-equivalent ---------------------------------------------------

def criterion_4():
    bad, bisimilar = [], 0
    for p, q, v in judged_pairs(DESK):
        if v.equivalent:
            bisimilar += 1
            if barb_equivalent(p, q, DESK).distinguished:
                bad.append((p, q))
    return record(4, not bad and bisimilar > 0, f"{bisimilar} bisimilar pairs, {len(bad)} barb-distinguished")


# --- 5: probe faithfulness ---------------------------------------------------------------

def criterion_5(count=300, seed=55, max_pairs=1000):
    rng = random.Random(seed)
    procs = [random_ep(rng, 16, max_vars=2) for _ in range(count)]
    by_domain: dict = {}
    for p in procs:
        by_domain.setdefault(domain(p), []).append(p)
    failures, tested = [], 0
    candidates = [pq for group in by_domain.values() for pq in itertools.combinations(group, 2)]
    for p, q in candidates:
        if tested >= max_pairs:
            break
        ex = Explorer(cfg=DESK, roots=[p, q])
        w = frame_witness(ex, ex.state_of_process(p), ex.state_of_process(q))
        if w is None:
            continue
        probe = test_probe(w[0], w[1], Symbol(NAME, "probe_barb"))
        has = [probe.barb in barbs(build_probe(probe, r), DESK) for r in (p, q)]
        tested += 1
        if has[0] == has[1]:
            failures.append((p, q, w))
    # the concrete instance
    decls = Declarations(variables={"x"})
    zero, one = parse_process("{0/x}", decls), parse_process("{1/x}", decls)
    a = name("a")
    ctx = parse_process("if x = 0 then out(a, 0)", decls)
    concrete = (barbs(Par(zero, ctx)) == {a}) and (barbs(Par(one, ctx)) == frozenset())
    ok = not failures and tested > 0 and concrete
    return record(5, ok, f"{tested} statically distinguished pairs, {len(failures)} probe failures; "
                         f"{{0/x}} vs {{1/x}} barb asymmetry {'reproduced' if concrete else 'MISSING'}")


# --- 6: context closure --------------------------------------------------------------------

ALIAS_CFG = DESK.replace(output_label_mode=ALIAS)


def criterion_6(seed=66, random_contexts=20, probes_per_kind=4):
    rng = random.Random(seed)
    checked, bad, inconclusive, pairs = 0, [], 0, 0
    for p, q, v in judged_pairs(ALIAS_CFG):
        if not v.equivalent:
            continue
        pairs += 1
        contexts = [([], probe_context(s)) for s in probe_family(p, q, depth=1, cfg=ALIAS_CFG,
                                                                   limit=probes_per_kind)]
        contexts += [random_context(rng, p, q) for _ in range(random_contexts)]
        for ctx in contexts:
            r = context_closure_check(p, q, [ctx], ALIAS_CFG)
            checked += 1
            inconclusive += r.inconclusive
            if r.distinguished:
                bad.append((p, q, ctx))
    return record(6, not bad and checked > 0,
                  f"{pairs} bisimilar pairs x contexts = {checked} compositions, {len(bad)} distinguished, "
                  f"{inconclusive} inconclusive (alias labels)")


# --- 7: single-rule rewrites ------------------------------------------------------------------

def criterion_7(per_rule=1000, seed=77):
    theory = pair_projection_theory()
    rng = random.Random(seed)
    failures = {}
    for rule in RULES:
        pairs = rewrite_corpus(rng, rule, per_rule, theory)
        failures[rule] = sum(not struct_equiv(p, q, theory) for p, q in pairs)
    ok = not any(failures.values())
    detail = ", ".join(f"{r}: {per_rule - n}/{per_rule}" for r, n in failures.items())
    return record(7, ok, detail)


# --- 8: equational-theory laws ----------------------------------------------------------------

def _expand(rng, t, theory_name):
    """A term equal to ``t`` in the theory, built by wrapping random subterms in redexes."""
    if isinstance(t, App) and rng.random() < 0.5:
        t = App(t.fn, tuple(_expand(rng, a, theory_name) for a in t.args))
    if rng.random() < 0.5:
        return t
    pad = Atom(const(rng.choice("01")))
    choice = rng.randrange(3 if theory_name == "senc" else 2)
    if choice == 0:
        return App("fst", (App("pair", (t, pad)),))
    if choice == 1:
        return App("snd", (App("pair", (pad, t)),))
    key = Atom(name(rng.choice("kl")))
    return App("dec", (App("enc", (t, key)), key))


def _random_term(rng, atoms, functions, depth):
    if depth == 0 or rng.random() < 0.35:
        return rng.choice(atoms)
    fn, arity = rng.choice(functions)
    return App(fn, tuple(_random_term(rng, atoms, functions, depth - 1) for _ in range(arity)))


def criterion_8(draws=1000, seed=88):
    rng = random.Random(seed)
    failures = 0
    xs = [Atom(var(v)) for v in "xyz"]
    ground = [Atom(name(n)) for n in "abk"] + [Atom(const(c)) for c in "01"]
    for theory_name, theory, funcs in (
        ("proj", pair_projection_theory(), [("pair", 2), ("fst", 1), ("snd", 1)]),
        ("senc", symmetric_encryption_theory(), [("pair", 2), ("fst", 1), ("snd", 1), ("enc", 2), ("dec", 2)]),
    ):
        for _ in range(draws):
            e = _random_term(rng, ground + xs, funcs, 3)
            e2 = _expand(rng, e, theory_name)
            if not terms_equal(e, e2, theory):
                failures += 1
                continue
            # congruence: equal arguments give equal applications
            fn, arity = rng.choice(funcs)
            others = [_random_term(rng, ground + xs, funcs, 2) for _ in range(arity)]
            pos = rng.randrange(arity)
            left = App(fn, tuple(e if i == pos else o for i, o in enumerate(others)))
            right = App(fn, tuple(e2 if i == pos else o for i, o in enumerate(others)))
            if not terms_equal(left, right, theory):
                failures += 1
                continue
            # substitution closure: equal terms stay equal under any substitution
            sigma = {x.symbol: _random_term(rng, ground, funcs, 2) for x in xs}
            if not terms_equal(rename_term(e, sigma), rename_term(e2, sigma), theory):
                failures += 1
                continue
            # and the equality is that of normal forms
            if normalize_term(e, theory) != normalize_term(e2, theory):
                failures += 1
    return record(8, failures == 0, f"{2 * draws - failures}/{2 * draws} draws satisfy congruence and "
                                    f"substitution closure")


# --- 9: restriction law on labels ------------------------------------------------------------

def criterion_9(count=400, seed=99, states_per_process=200):
    rng = random.Random(seed)
    procs = [random_ep(rng, 16, replication=rng.random() < 0.3, max_vars=2) for _ in range(count)]
    edges, bad = 0, []
    for mode in ("literal", ALIAS):
        cfg = DESK.replace(output_label_mode=mode)
        for p in procs:
            ex = Explorer(cfg=cfg, roots=[p])
            frontier, seen = [ex.state_of_process(p)], set()
            while frontier and len(seen) < states_per_process:
                st = frontier.pop()
                if st.id in seen:
                    continue
                seen.add(st.id)
                for e in ex.edges(st):
                    edges += 1
                    if not action_variables(e.action) <= st.domain:
                        bad.append((p, st, e.action))
                    frontier.append(e.target)
    return record(9, not bad, f"{edges} transitions scanned (literal and alias), {len(bad)} violations")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(number):
    start = time.perf_counter()
    ok, detail = CRITERIA[number - 1]()
    elapsed = time.perf_counter() - start
    RESULTS[number] = (ok, f"{detail} [{elapsed:.1f}s]")
    assert ok, detail
    assert elapsed < TIME_LIMIT, f"criterion {number} took {elapsed:.1f}s"


def test_literal_labels_are_not_closed_under_contexts():
    """With literal payload labels a hidden-name output has no transitions, so it
    looks like 0; a context that receives on the channel tells them apart."""
    hidden, nil = parse_process("new k.out(c, k)"), parse_process("0")
    literal = ExplorationConfig(depth=1)
    assert weak_labeled_bisim(hidden, nil, literal).equivalent
    ctx = parse_process("in(c, y).out(d, 0)")
    assert context_closure_check(hidden, nil, [([], ctx)], literal).distinguished
    # alias labels expose the output and keep the relation a congruence
    assert weak_labeled_bisim(hidden, nil, literal.replace(output_label_mode=ALIAS)).distinguished


def summary_lines():
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}" for n, (ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    for fn in CRITERIA:
        t0 = time.perf_counter()
        ok, detail = fn()
        print(f"criterion {CRITERIA.index(fn) + 1}: {'PASS' if ok else 'FAIL'} - {detail} "
              f"[{time.perf_counter() - t0:.1f}s]")
