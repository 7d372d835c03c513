import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from appi.equivalence import (
    DomainMismatch,
    barb_equivalent,
    build_probe,
    context_closure_check,
    input_probe,
    materialize_pair,
    naive_bisim_oracle,
    output_probe,
    probe_family,
    replay_evidence,
    static_equivalent,
    test_probe,
    verify_witness,
    weak_labeled_bisim,
)
from appi.generators import random_ep, template_pairs
from appi.lts import ExplorationConfig, Explorer, barbs
from appi.process_ast import NIL
from appi.rewriting import EquationalTheory
from appi.term_core import Signature, name

from conftest import P, T, X

a = name("a")
CFG = ExplorationConfig(depth=1)


def test_static_distinguished_by_equality_test():
    v = static_equivalent(P("{0/x}"), P("{1/x}"))
    assert v.distinguished
    assert sorted(v.evidence.fact["recipes"]) == ["0", "x"]


def test_static_identical_frames():
    assert static_equivalent(P("{(0, c)/x}"), P("{(0, c)/x}")).equivalent


def test_static_fresh_names_indistinguishable():
    th = EquationalTheory(Signature({"h": 1}))
    assert static_equivalent(P("new n.{n/x}"), P("new m.{h(m)/x}"), depth=2, theory=th).equivalent


def test_static_domain_mismatch():
    with pytest.raises(DomainMismatch):
        static_equivalent(P("{0/x}"), P("0"))


def test_bisim_absorbs_internal_step():
    v = weak_labeled_bisim(P("out(c, 0)"), P("if d = d then out(c, 0)"))
    assert v.equivalent and verify_witness(v)


def test_bisim_distinguishes_outputs():
    v = weak_labeled_bisim(P("out(c, 0)"), P("out(c, 1)"))
    assert v.distinguished and replay_evidence(v)
    assert v.to_dict()["evidence"]["trace"]


def test_bisim_nil():
    assert weak_labeled_bisim(NIL, NIL).equivalent


def test_bisim_truncation_is_inconclusive():
    v = weak_labeled_bisim(P("!out(a, 0)"), P("!out(a, 0) | out(a, 0)"))
    assert v.inconclusive


def test_barb_equivalence():
    assert barb_equivalent(P("out(a, 0)"), P("out(b, 0)")).distinguished
    assert barb_equivalent(P("out(a, 0)"), P("out(a, 0)")).equivalent
    assert barb_equivalent(P("out(a, 0)"), P("if c = c then out(a, 0)")).equivalent


def test_probe_on_frames():
    probe = test_probe(X("x"), T("0"), a)
    assert a in barbs(build_probe(probe, P("{0/x}")))
    assert a not in barbs(build_probe(probe, P("{1/x}")))
    assert a not in barbs(build_probe(test_probe(T("0"), T("1"), a), NIL))


def test_input_probe_cancels_barb():
    comp = build_probe(input_probe(T("c"), T("0"), a), P("in(c, y).0"))
    ex = Explorer(roots=[comp])
    st0 = ex.state_of_process(comp)
    assert a in ex.barbs(st0)
    assert any(a not in ex.barbs(s) for s in ex.tau_closure(st0))
    comp = build_probe(input_probe(T("c"), T("0"), a), NIL)
    ex = Explorer(roots=[comp])
    st0 = ex.state_of_process(comp)
    assert all(a in ex.barbs(s) for s in ex.tau_closure(st0))


def test_output_probe_separates_payloads():
    for p, expect in (("out(c, 0)", True), ("out(c, 1)", False)):
        comp = build_probe(output_probe(T("c"), T("0"), a), P(p))
        ex = Explorer(roots=[comp])
        st0 = ex.state_of_process(comp)
        assert any(a not in ex.barbs(s) for s in ex.tau_closure(st0)) is expect


def test_probe_family_nonempty():
    fam = probe_family(P("{0/x}"), P("{1/x}"))
    assert fam and all(p.barb not in (name("c"),) for p in fam)


def test_context_closure_examples():
    p, q = P("out(c, 0)"), P("if d = d then out(c, 0)")
    assert context_closure_check(p, q, [([], NIL)]).equivalent
    assert context_closure_check(P("{0/x}"), P("{1/x}"), [([], P("if x = 0 then out(a, 0)"))]).distinguished
    assert context_closure_check(p, q, [([], P("in(c, y).out(d, y)"))], CFG).equivalent


def test_oracle_examples():
    la, lb = materialize_pair(P("out(c, 0)"), P("out(c, 0)"))
    assert naive_bisim_oracle(la, lb).equivalent
    la, lb = materialize_pair(P("out(c, 0)"), P("out(d, 0)"))
    assert naive_bisim_oracle(la, lb).distinguished


def test_template_pairs_agree_with_oracle():
    for p, q in template_pairs()[::7]:
        v = weak_labeled_bisim(p, q, CFG)
        la, lb = materialize_pair(p, q, CFG)
        assert naive_bisim_oracle(la, lb).kind == v.kind, (p, q)


@given(st.integers(0, 100_000))
def test_verdicts_are_checkable(seed):
    rng = random.Random(seed)
    p = random_ep(rng, 12, max_vars=1)
    v = weak_labeled_bisim(p, p, CFG)
    assert not v.distinguished
    if v.equivalent:
        assert verify_witness(v)


@given(st.integers(0, 100_000), st.sampled_from(["par-monoid", "restriction", "scope-extrusion", "alias-elim", "subst-apply"]))
def test_structurally_equivalent_processes_are_bisimilar(seed, rule):
    from appi.generators import rewrite_once

    rng = random.Random(seed)
    p = random_ep(rng, 12, max_vars=1)
    q = rewrite_once(rng, p, rule)
    if q is not None:
        assert not weak_labeled_bisim(p, q, CFG).distinguished


@given(st.integers(0, 100_000))
def test_distinguishing_evidence_replays(seed):
    rng = random.Random(seed)
    p, q = random_ep(rng, 10, max_vars=0), random_ep(rng, 10, max_vars=0)
    v = weak_labeled_bisim(p, q, CFG)
    if v.distinguished:
        assert replay_evidence(v)
    elif v.equivalent:
        assert verify_witness(v)
