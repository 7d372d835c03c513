import pytest
from hypothesis import given
from hypothesis import strategies as st

from appi.term_core import (
    App,
    Atom,
    CyclicSubstitution,
    FreshSupply,
    Signature,
    ArityError,
    AcyclicSubstitution,
    apply_substitution,
    check_acyclic,
    const,
    format_term,
    in_tm,
    name,
    ordering_violation,
    pair,
    var,
    variables_of,
)

from helpers import terms

x, y = var("x"), var("y")
c, n = Atom(const("c")), Atom(name("n"))


def f(*a):
    return App("f", a)


def g(*a):
    return App("g", a)


def naive_vars(t):
    # independent oracle: walk via format_term-free recursion over args
    stack, out = [t], set()
    while stack:
        s = stack.pop()
        if isinstance(s, Atom):
            if s.symbol.kind == "variable":
                out.add(s.symbol)
        else:
            stack.extend(s.args)
    return out


def test_variables_ignore_names_and_constants():
    assert variables_of(pair(Atom(x), n)) == {x}
    assert variables_of(c) == set()


def test_variables_nested():
    t = f(Atom(x), g(Atom(y), Atom(x)))
    assert variables_of(t) == {x, y} == naive_vars(t)


@given(terms(functions=(("pair", 2), ("f", 1))))
def test_variables_match_oracle(t):
    assert variables_of(t) == naive_vars(t)


def test_in_tm():
    assert in_tm(f(Atom(x)), {x, y})
    assert not in_tm(f(Atom(x)), set())
    assert in_tm(pair(n, c), set())


def test_check_acyclic_orders_dependencies():
    theta = check_acyclic([(y, c), (x, f(Atom(y)))])
    assert theta.bindings == ((x, f(Atom(y))), (y, c))
    # the other order violates the ordering condition
    assert ordering_violation([(y, c), (x, f(Atom(y)))]) is not None


def test_check_acyclic_singleton_and_cycle():
    assert check_acyclic([(x, c)]).bindings == ((x, c),)
    with pytest.raises(CyclicSubstitution):
        check_acyclic([(x, f(Atom(y))), (y, g(Atom(x)))])
    with pytest.raises(CyclicSubstitution):
        check_acyclic([(x, f(Atom(x)))])


def test_apply_substitution_sequential():
    theta = check_acyclic([(x, f(Atom(y))), (y, c)])
    assert apply_substitution(Atom(x), theta) == f(c)
    assert apply_substitution(n, theta) == n
    assert apply_substitution(pair(Atom(x), Atom(x)), check_acyclic([(x, c)])) == pair(c, c)


def test_acyclic_substitution_rejects_bad_order():
    with pytest.raises(CyclicSubstitution):
        AcyclicSubstitution([(y, c), (x, f(Atom(y)))])
    with pytest.raises(ValueError):
        AcyclicSubstitution([(x, c), (x, c)])


@st.composite
def acyclic_bindings(draw):
    # a random DAG: variable i may only mention variables with larger index
    k = draw(st.integers(1, 3))
    vs = [var("v", i + 1) for i in range(k)]
    out = []
    for i, v in enumerate(vs):
        later = [Atom(w) for w in vs[i + 1:]]
        out.append((v, draw(terms(atoms=later + [c, n], max_leaves=4))))
    return out


@given(acyclic_bindings(), st.randoms(use_true_random=False))
def test_check_acyclic_is_order_independent(bindings, r):
    shuffled = list(bindings)
    r.shuffle(shuffled)
    theta = check_acyclic(shuffled)
    assert theta == check_acyclic(bindings)
    assert ordering_violation(theta.bindings) is None


@given(acyclic_bindings())
def test_applied_substitution_is_closed(bindings):
    theta = check_acyclic(bindings)
    for v, _ in bindings:
        assert not variables_of(apply_substitution(Atom(v), theta))


def test_signature_arity_checks():
    sig = Signature({"f": 1})
    assert "pair" in sig and sig.arity("pair") == 2
    sig.check(f(c))
    with pytest.raises(ArityError):
        sig.check(f(c, c))


def test_fresh_supply_smallest_unused_index():
    supply = FreshSupply({var("x", 1), var("x", 2)})
    assert supply.fresh(var("x")) == var("x", 3)
    assert supply.fresh(var("x")) == var("x", 4)
    assert supply.fresh(var("y")) == var("y", 1)


def test_format_term():
    assert format_term(pair(Atom(var("x", 1)), f(c))) == "(x#1, f(c))"


def test_symbols_distinguish_kind():
    assert var("a") != name("a") != const("a")
    assert len({var("a"), name("a"), const("a")}) == 3
    assert sorted([var("b"), var("a", 2), var("a")], key=lambda s: s.sort_key()) == [var("a"), var("a", 2), var("b")]
