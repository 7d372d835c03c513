import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from appi.generators import random_ep
from appi.lts import (
    ALIAS,
    EqTest,
    ExplorationConfig,
    Explorer,
    Input,
    InternalAction,
    NeqTest,
    Output,
    StateBudgetExceeded,
    action_variables,
    barbs,
    build_lts,
    co_action,
    enumerate_recipes,
    enumerate_transitions,
    fresh_output_variable,
    internal_step,
    tau_closure,
    weak_transition,
)
from appi.normal_form import struct_equiv
from appi.process_ast import domain
from appi.rewriting import pair_projection_theory
from appi.term_core import Signature, name, var

from conftest import P, T, X

d = T("d")


def cfg(**kw):
    return ExplorationConfig(**kw)


def labels(p, c=None, theory=None):
    kw = {} if theory is None else {"theory": theory}
    return sorted(str(t.action) for t in enumerate_transitions(p, c or cfg(), **kw))


def test_co_action_involution():
    a = Input(T("c"), d)
    assert co_action(a) == Output(T("c"), d)
    assert co_action(co_action(a)) == a
    with pytest.raises(InternalAction):
        co_action(EqTest(d, d))


def test_input_over_recipe_set():
    ts = enumerate_transitions(P("in(c, y).0"), cfg(input_recipes=(d,)))
    assert [(str(t.action), str(t.target)) for t in ts] == [("c(d)", "0")]


def test_output_adds_fresh_frame_entry():
    (t,) = enumerate_transitions(P("out(c, d).0"))
    assert str(t.action) == "~c<d>"
    assert struct_equiv(t.target, P("{d/x#1}"))


def test_fresh_output_variable():
    assert fresh_output_variable(set()) == var("x", 1)
    assert fresh_output_variable({var("x", 1), var("x", 4)}) == var("x", 5)


def test_communication():
    ts = enumerate_transitions(P("out(c, d).0 | in(c, y).out(a, y)"), cfg(input_recipes=(d,)))
    comm = [t for t in ts if isinstance(t.action, EqTest)]
    assert len(comm) == 1
    assert str(comm[0].action) == "[(c, d) = (c, d)]"
    assert struct_equiv(comm[0].target, P("{d/x#1} | out(a, d)"))


def test_restricted_channel_blocks_output():
    assert labels(P("new n.out(n, d).0")) == []


def test_restricted_payload_literal_vs_alias():
    assert labels(P("new n.out(c, n)")) == []
    assert labels(P("new n.out(c, n)"), cfg(output_label_mode=ALIAS)) == ["~c<x#1>"]


def test_internal_steps():
    assert internal_step(P("if c = c then out(a, 0).0 else 0")) == {P("out(a, 0).0")}
    assert internal_step(P("if c = d then out(a, 0) else out(b, 0)")) == {P("out(b, 0)")}
    th = pair_projection_theory()
    targets = internal_step(P("{pair(a, b)/x} | if fst(x) = a then out(c, 0)"), theory=th)
    assert any(struct_equiv(t, P("{pair(a, b)/x} | out(c, 0)"), th) for t in targets)


def test_tau_closure():
    assert tau_closure(P("0")) == {P("0")}
    got = tau_closure(P("if c = c then if d = d then out(a, 0)"))
    assert P("out(a, 0)") in got
    assert tau_closure(P("out(c, d)")) == {P("out(c, d)")}


def test_weak_transitions():
    got = weak_transition(P("out(c, d)"), Output(T("c"), d))
    assert any(struct_equiv(g, P("{d/x#1}")) for g in got)
    got = weak_transition(P("if c = c then out(a, 0)"), Output(T("a"), T("0")))
    assert any(struct_equiv(g, P("{0/x#1}")) for g in got)
    assert weak_transition(P("0"), Output(T("a"), T("0"))) == set()
    with pytest.raises(InternalAction):
        weak_transition(P("0"), NeqTest(d, d))


def test_barbs():
    a = name("a")
    assert barbs(P("out(a, c)")) == {a}
    assert barbs(P("if c = c then out(a, 0)")) == {a}
    assert barbs(P("new a.out(a, c)")) == set()


def test_recipes_layered():
    rs = enumerate_recipes([var("x", 1)], [T("0")], Signature(), 1)
    assert rs[:2] == [T("0"), X("x", 1)]
    assert len(rs) == 2 + 4


def test_replication_truncation():
    lts = build_lts(P("!out(a, 0)"), cfg=cfg(replication_bound=2))
    assert len(lts.states) == 3 and lts.truncated


def test_state_budget():
    with pytest.raises(StateBudgetExceeded):
        build_lts(P("in(c, y).out(c, y)"), cfg=cfg(max_states=5, depth=1))


def test_dot_export():
    dot = build_lts(P("out(c, 0)")).to_dot()
    assert dot.startswith("digraph lts {") and 's0 -> s1 [label="~c<0>"];' in dot


@given(st.integers(0, 100_000))
def test_actions_only_mention_domain_variables(seed):
    p = random_ep(random.Random(seed), 16, max_vars=2)
    ex = Explorer(cfg=cfg(depth=1, max_states=500), roots=[p])
    st0 = ex.state_of_process(p)
    for e in ex.edges(st0):
        assert action_variables(e.action) <= st0.domain
        assert domain(e.target.process()) >= st0.domain


def test_alias_output_binds_its_variable():
    ex = Explorer(cfg=cfg(output_label_mode=ALIAS), roots=[P("new k.out(c, k)")])
    st0 = ex.state_of_process(P("new k.out(c, k)"))
    [edge] = ex.external_edges(st0)
    assert str(edge.action) == "~c<x#1>" and edge.action.binds
    assert action_variables(edge.action) == frozenset()
    # a user-written label still compares equal
    assert edge.action == Output(T("c"), X("x", 1))
    assert action_variables(Output(T("c"), X("x", 1))) == {var("x", 1)}
